#include "macalloc/fading.hpp"

#include <algorithm>
#include <cmath>

namespace macalloc {

namespace {
constexpr double kTailMass = 1e-8;  // quantile cutoff for unbounded supports
constexpr double kCopulaZRange = 8.5;  // |z| beyond this carries < 1e-16 mass

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
}  // namespace

Marginal Marginal::exponential(double mean) {
    if (!(mean > 0.0) || !std::isfinite(mean))
        throw DomainError("exponential marginal requires positive finite mean");
    return Marginal(MarginalKind::exponential, mean, 0.0);
}

Marginal Marginal::uniform(double lo, double hi) {
    if (!(hi > lo)) throw DomainError("uniform marginal requires hi > lo");
    if (lo < 0.0) throw DomainError("fading gains must be nonnegative");
    if (!std::isfinite(lo) || !std::isfinite(hi))
        throw DomainError("uniform marginal requires finite bounds");
    return Marginal(MarginalKind::uniform, lo, hi);
}

Marginal Marginal::lognormal(double mu, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu))
        throw DomainError("lognormal marginal requires finite mu and sigma > 0");
    return Marginal(MarginalKind::lognormal, mu, sigma);
}

Marginal Marginal::point_mass(double value) {
    if (!(value >= 0.0) || !std::isfinite(value))
        throw DomainError("point mass must be a nonnegative finite gain");
    return Marginal(MarginalKind::point_mass, value, 0.0);
}

double Marginal::mean() const {
    switch (kind_) {
        case MarginalKind::exponential: return p1_;
        case MarginalKind::uniform: return 0.5 * (p1_ + p2_);
        case MarginalKind::lognormal: return std::exp(p1_ + 0.5 * p2_ * p2_);
        case MarginalKind::point_mass: return p1_;
    }
    return 0.0;
}

double Marginal::variance() const {
    switch (kind_) {
        case MarginalKind::exponential: return p1_ * p1_;
        case MarginalKind::uniform: {
            const double w = p2_ - p1_;
            return w * w / 12.0;
        }
        case MarginalKind::lognormal: {
            const double s2 = p2_ * p2_;
            return (std::exp(s2) - 1.0) * std::exp(2.0 * p1_ + s2);
        }
        case MarginalKind::point_mass: return 0.0;
    }
    return 0.0;
}

double Marginal::cdf(double x) const {
    switch (kind_) {
        case MarginalKind::exponential:
            return x <= 0.0 ? 0.0 : -std::expm1(-x / p1_);
        case MarginalKind::uniform:
            if (x <= p1_) return 0.0;
            if (x >= p2_) return 1.0;
            return (x - p1_) / (p2_ - p1_);
        case MarginalKind::lognormal:
            return x <= 0.0 ? 0.0 : normal_cdf((std::log(x) - p1_) / p2_);
        case MarginalKind::point_mass:
            return x >= p1_ ? 1.0 : 0.0;
    }
    return 0.0;
}

double Marginal::pdf(double x) const {
    switch (kind_) {
        case MarginalKind::exponential:
            return x < 0.0 ? 0.0 : std::exp(-x / p1_) / p1_;
        case MarginalKind::uniform:
            return (x < p1_ || x > p2_) ? 0.0 : 1.0 / (p2_ - p1_);
        case MarginalKind::lognormal:
            return x <= 0.0 ? 0.0 : phi((std::log(x) - p1_) / p2_) / (x * p2_);
        case MarginalKind::point_mass:
            throw DomainError("point-mass marginal has no density");
    }
    return 0.0;
}

double Marginal::quantile(double p) const {
    if (kind_ == MarginalKind::point_mass) return p1_;
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile requires p in (0,1)");
    switch (kind_) {
        case MarginalKind::exponential: return -p1_ * std::log1p(-p);
        case MarginalKind::uniform: return p1_ + (p2_ - p1_) * p;
        case MarginalKind::lognormal: return std::exp(p1_ + p2_ * normal_ppf(p));
        case MarginalKind::point_mass: break;
    }
    return p1_;
}

double Marginal::truncation_point() const {
    switch (kind_) {
        case MarginalKind::uniform: return p2_;
        case MarginalKind::point_mass: return p1_;
        default: return quantile(1.0 - kTailMass);
    }
}

double Marginal::support_min() const {
    switch (kind_) {
        case MarginalKind::uniform: return p1_;
        case MarginalKind::point_mass: return p1_;
        default: return 0.0;
    }
}

std::vector<double> FadingTrace::column(int i) const {
    std::vector<double> col(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k)
        col[k] = data[k * static_cast<std::size_t>(num_users) + static_cast<std::size_t>(i)];
    return col;
}

void FadingTrace::write_csv(std::ostream& os) const {
    os << "sample_index";
    for (int i = 0; i < num_users; ++i) os << ",h_" << (i + 1);
    os << "\n";
    for (std::size_t k = 0; k < n_samples; ++k) {
        os << k;
        for (double v : row(k)) os << ',' << format_double(v);
        os << "\n";
    }
}

FadingModel FadingModel::independent(std::vector<Marginal> marginals) {
    if (marginals.empty()) throw DomainError("fading model requires at least one user");
    return FadingModel(std::move(marginals));
}

double copula_product_moment(const Marginal& mi, const Marginal& mj, double rho) {
    // transform of a standard normal into the marginal
    auto g = [](const Marginal& m, double z) {
        switch (m.kind()) {
            case MarginalKind::exponential:
                // -mean * log(1 - Phi(z)), with the survival tail kept accurate
                return -m.param1() * std::log(0.5 * std::erfc(z / std::sqrt(2.0)));
            case MarginalKind::uniform:
                return m.param1() + (m.param2() - m.param1()) * normal_cdf(z);
            case MarginalKind::lognormal:
                return std::exp(m.param1() + m.param2() * z);
            case MarginalKind::point_mass:
                return m.param1();
        }
        return 0.0;
    };
    const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    auto inner = [&](double z1) {
        auto f = [&](double w) { return phi(w) * g(mj, rho * z1 + s * w); };
        return integrate(f, -kCopulaZRange, kCopulaZRange, 1e-11, 1e-10).value;
    };
    auto outer = [&](double z1) { return phi(z1) * g(mi, z1) * inner(z1); };
    return integrate(outer, -kCopulaZRange, kCopulaZRange, 1e-10, 1e-9).value;
}

FadingModel FadingModel::gaussian_copula(std::vector<Marginal> marginals,
                                         SquareMatrix target_cov) {
    if (marginals.empty()) throw DomainError("fading model requires at least one user");
    const int m = static_cast<int>(marginals.size());
    if (target_cov.size() != m)
        throw DomainError("covariance dimension does not match the number of users");

    FadingModel model(std::move(marginals));
    Copula cop;
    cop.target_cov = target_cov;
    cop.correlation = SquareMatrix::identity(m);

    for (int i = 0; i < m; ++i) {
        const double var = model.marginals_[static_cast<std::size_t>(i)].variance();
        const double kii = target_cov.at(i, i);
        const double tol = 1e-6 * std::max(1.0, std::abs(var));
        if (std::abs(kii - var) > tol)
            throw DomainError("covariance diagonal must equal the marginal variances");
    }
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            if (std::abs(target_cov.at(i, j) - target_cov.at(j, i)) > 1e-12)
                throw DomainError("covariance matrix must be symmetric");
            const double kij = target_cov.at(i, j);
            const Marginal& mi = model.marginals_[static_cast<std::size_t>(i)];
            const Marginal& mj = model.marginals_[static_cast<std::size_t>(j)];
            if (!mi.continuous() || !mj.continuous()) {
                if (kij != 0.0)
                    throw DomainError("point-mass marginals cannot carry covariance");
                continue;
            }
            if (kij == 0.0) continue;
            const double mimj = mi.mean() * mj.mean();
            auto residual = [&](double rho) {
                return copula_product_moment(mi, mj, rho) - mimj - kij;
            };
            const double lo = -0.9995, hi = 0.9995;
            if (residual(lo) > 0.0 || residual(hi) < 0.0)
                throw DomainError("target covariance is outside the copula-achievable range");
            const double rho = bisect(residual, lo, hi, 1e-12, 120);
            cop.correlation.at(i, j) = rho;
            cop.correlation.at(j, i) = rho;
        }
    }
    cop.chol = cop.correlation.cholesky_psd();
    model.copula_ = std::move(cop);

    // Monte Carlo consistency check of the achieved covariance.
    const std::size_t n = 40000;
    FadingTrace trace = model.sample(n, 0xC0FFEEULL);
    std::vector<double> means(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) means[static_cast<std::size_t>(i)] = mean_var(trace.column(i)).mean;
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
            std::vector<double> prod(n), prod2(n);
            for (std::size_t k = 0; k < n; ++k) {
                const double di = trace.row(k)[static_cast<std::size_t>(i)] - means[static_cast<std::size_t>(i)];
                const double dj = trace.row(k)[static_cast<std::size_t>(j)] - means[static_cast<std::size_t>(j)];
                prod[k] = di * dj;
                prod2[k] = di * dj * di * dj;
            }
            const double chat = pairwise_sum(prod) / static_cast<double>(n);
            const double second = pairwise_sum(prod2) / static_cast<double>(n);
            const double se = std::sqrt(std::max(0.0, second - chat * chat) / static_cast<double>(n));
            const double gap = std::abs(chat - target_cov.at(i, j));
            if (gap > 3.0 * se + 1e-9)
                throw DomainError("copula calibration failed the Monte Carlo covariance check");
        }
    }
    return model;
}

bool FadingModel::is_continuous() const {
    return std::all_of(marginals_.begin(), marginals_.end(),
                       [](const Marginal& m) { return m.continuous(); });
}

void FadingModel::require_independent(const char* op) const {
    if (!is_independent())
        throw DomainError(std::string(op) + " requires an independent fading model");
}

double FadingModel::cdf(int i, double x) const {
    require_independent("marginal_cdf");
    return marginals_[static_cast<std::size_t>(i)].cdf(x);
}

double FadingModel::pdf(int i, double x) const {
    require_independent("marginal_pdf");
    return marginals_[static_cast<std::size_t>(i)].pdf(x);
}

double FadingModel::quantile(int i, double p) const {
    return marginals_[static_cast<std::size_t>(i)].quantile(p);
}

std::vector<double> FadingModel::mean() const {
    std::vector<double> out(marginals_.size());
    for (std::size_t i = 0; i < marginals_.size(); ++i) out[i] = marginals_[i].mean();
    return out;
}

SquareMatrix FadingModel::covariance() const {
    if (copula_) return copula_->target_cov;
    const int m = num_users();
    SquareMatrix k(m);
    for (int i = 0; i < m; ++i) k.at(i, i) = marginals_[static_cast<std::size_t>(i)].variance();
    return k;
}

double FadingModel::copula_correlation(int i, int j) const {
    if (!copula_) return i == j ? 1.0 : 0.0;
    return copula_->correlation.at(i, j);
}

std::vector<double> FadingModel::draw(std::uint64_t seed, std::uint64_t index) const {
    Rng rng = Rng::substream(seed, streams::kFading, index);
    const int m = num_users();
    std::vector<double> out(static_cast<std::size_t>(m));
    if (!copula_) {
        for (int i = 0; i < m; ++i)
            out[static_cast<std::size_t>(i)] = marginals_[static_cast<std::size_t>(i)].quantile(rng.next_open01());
        return out;
    }
    std::vector<double> z(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) z[static_cast<std::size_t>(i)] = rng.normal();
    for (int i = 0; i < m; ++i) {
        double zi = 0.0;
        for (int j = 0; j <= i; ++j) zi += copula_->chol.at(i, j) * z[static_cast<std::size_t>(j)];
        double u = normal_cdf(zi);
        u = std::clamp(u, 1e-15, 1.0 - 1e-15);
        out[static_cast<std::size_t>(i)] = marginals_[static_cast<std::size_t>(i)].quantile(u);
    }
    return out;
}

FadingTrace FadingModel::sample(std::size_t n, std::uint64_t seed) const {
    if (n < 1) throw DomainError("sample requires n >= 1");
    FadingTrace trace;
    trace.n_samples = n;
    trace.num_users = num_users();
    trace.seed = seed;
    trace.data.resize(n * static_cast<std::size_t>(trace.num_users));
    parallel_for(n, [&](std::size_t k) {
        const std::vector<double> row = draw(seed, k);
        std::copy(row.begin(), row.end(),
                  trace.data.begin() + static_cast<std::ptrdiff_t>(k * row.size()));
    });
    return trace;
}

}  // namespace macalloc
