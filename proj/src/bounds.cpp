#include "macalloc/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "macalloc/optimize.hpp"

namespace macalloc {

std::vector<double> gamma_vector(const Scenario& s, std::uint32_t mask) {
    s.validate();
    if (mask == 0 || mask >= (1u << s.num_users))
        throw DomainError("subset mask out of range");
    std::vector<double> g(static_cast<std::size_t>(s.num_users), 0.0);
    for (int i = 0; i < s.num_users; ++i)
        if (mask & (1u << i))
            g[static_cast<std::size_t>(i)] = s.powers[static_cast<std::size_t>(i)] / s.noise;
    return g;
}

namespace {

struct SubsetTerm {
    double value;
    bool clamped;
};

SubsetTerm subset_variance_term(const Scenario& s, std::uint32_t mask,
                                std::span<const double> mean_gain, const SquareMatrix& cov) {
    const std::vector<double> gamma = gamma_vector(s, mask);
    const double var_z = std::max(0.0, cov.quadratic_form(gamma));
    if (var_z == 0.0) return {0.0, false};
    double zbar = 0.0;
    for (std::size_t i = 0; i < gamma.size(); ++i) zbar += gamma[i] * mean_gain[i];
    double root = std::sqrt(2.0 * std::log1p(zbar)) - 0.5 * std::sqrt(var_z);
    bool clamped = false;
    if (root < 0.0) {
        root = 0.0;  // outside the derivation's regime; keep the bound nonnegative
        clamped = true;
    }
    const double bracket = (1.0 + zbar) * root;
    return {0.25 * var_z * (1.0 + bracket * bracket), clamped};
}

}  // namespace

double variance_bound_ys(const Scenario& s, std::uint32_t mask,
                         std::span<const double> mean_gain, const SquareMatrix& cov) {
    if (static_cast<int>(mean_gain.size()) != s.num_users || cov.size() != s.num_users)
        throw DomainError("moment dimensions do not match the scenario");
    cov.cholesky_psd();  // rejects indefinite covariance
    return subset_variance_term(s, mask, mean_gain, cov).value;
}

SigmaReport sigma_h_detailed(const Scenario& s, std::span<const double> mean_gain,
                             const SquareMatrix& cov) {
    if (static_cast<int>(mean_gain.size()) != s.num_users || cov.size() != s.num_users)
        throw DomainError("moment dimensions do not match the scenario");
    cov.cholesky_psd();
    SigmaReport rep;
    const std::uint32_t full = (1u << s.num_users) - 1u;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        const SubsetTerm term = subset_variance_term(s, mask, mean_gain, cov);
        rep.value += term.value;
        if (term.clamped) ++rep.clamped_subsets;
    }
    return rep;
}

double sigma_h_squared(const Scenario& s, std::span<const double> mean_gain,
                       const SquareMatrix& cov) {
    return sigma_h_detailed(s, mean_gain, cov).value;
}

double chebyshev_region_bound(double sigma2, double delta) {
    if (!(delta > 0.0)) throw DomainError("chebyshev bound requires delta > 0");
    if (sigma2 < 0.0) throw DomainError("sigma^2 must be nonnegative");
    return std::min(1.0, sigma2 / (delta * delta));
}

double opt_distance_bound(double A, double B, double delta) {
    if (!(A > 0.0)) throw DomainError("quadratic growth constant must be positive");
    if (!(B > 0.0)) throw DomainError("Lipschitz constant must be positive");
    if (delta < 0.0) throw DomainError("delta must be nonnegative");
    const double rd = std::sqrt(delta);
    return rd * (rd + std::sqrt(B / A));
}

double lipschitz_gap_bound(double eps, double u_star, double A, double B, double sigma_h) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("eps must lie in (0,1]");
    if (u_star < 0.0) throw DomainError("the bound requires a nonnegative optimal utility");
    if (!(A > 0.0) || B < 0.0 || sigma_h < 0.0)
        throw DomainError("constants must be positive (A) and nonnegative (B, sigma)");
    const double delta = sigma_h / std::sqrt(eps);
    const double rd = std::sqrt(delta);
    return eps * u_star + (1.0 - eps) * B * (rd + std::sqrt(B / A)) * rd;
}

double curvature_gap_bound(double eps, double u_star, double r_eps, double omega) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("eps must lie in (0,1]");
    if (u_star < 0.0) throw DomainError("the bound requires a nonnegative optimal utility");
    if (r_eps < 0.0 || omega < 0.0) throw DomainError("r and omega must be nonnegative");
    return eps * u_star + 0.5 * (1.0 - eps) * r_eps * r_eps * omega;
}

namespace {

// Per-state quantities shared by the constants estimation across the
// epsilon grid. States and ratio points come from dedicated substreams, so
// a prefix of a larger sample is always an extension of a smaller one.
struct StateCache {
    std::vector<double> distance;       // d_H to the averaged region
    std::vector<double> min_ratio;      // per-state quadratic-growth minimum
    std::vector<std::size_t> ratio_samples;
    std::vector<std::vector<double>> face_min;  // per-state per-user face minimum
};

std::vector<double> face_min_coords(const PolymatroidRegion& region) {
    const std::uint32_t full = region.full_mask();
    std::vector<double> out(static_cast<std::size_t>(region.num_users()));
    for (int i = 0; i < region.num_users(); ++i) {
        const std::uint32_t rest = full & ~(1u << i);
        const double lo = region.rank(full) - (rest == 0 ? 0.0 : region.rank(rest));
        out[static_cast<std::size_t>(i)] = std::max(0.0, lo);
    }
    return out;
}

// Random feasible point probing both the neighborhood of the greedy optimum
// and the rest of the region.
RateVector sample_feasible_point(const std::vector<RateVector>& vertices,
                                 const RateVector& greedy_opt, Rng& rng) {
    const std::size_t m = greedy_opt.size();
    RateVector face(m, 0.0);
    double total = 0.0;
    std::vector<double> w(vertices.size());
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        w[v] = -std::log(rng.next_open01());
        total += w[v];
    }
    for (std::size_t v = 0; v < vertices.size(); ++v)
        for (std::size_t i = 0; i < m; ++i) face[i] += (w[v] / total) * vertices[v][i];

    const double mode = rng.next_open01();
    if (mode < 0.5) {
        // blend from the optimum toward the face point, log-spaced near zero
        const double t = std::pow(10.0, -3.0 * rng.next_open01());
        for (std::size_t i = 0; i < m; ++i)
            face[i] = greedy_opt[i] + t * (face[i] - greedy_opt[i]);
    } else if (mode < 0.8) {
        const double t = rng.next_open01();
        for (std::size_t i = 0; i < m; ++i) face[i] *= t;
    }
    return face;
}

StateCache build_state_cache(const Scenario& s, const FadingModel& fm,
                             const UtilityFunction& u, const PolymatroidRegion& averaged,
                             std::uint64_t seed, const ConstantsOptions& opts) {
    StateCache cache;
    const std::size_t n = opts.states;
    cache.distance.resize(n);
    cache.min_ratio.resize(n);
    cache.ratio_samples.resize(n);
    cache.face_min.resize(n);
    parallel_for(n, [&](std::size_t j) {
        // states come from a dedicated substream so the cache is reproducible
        // and extends monotonically with `states`
        ChannelState h{fm.draw(seed ^ 0x51ab5eedULL, j)};
        const PolymatroidRegion region = instantaneous_region(s, h);
        cache.distance[j] = hausdorff_distance(region, averaged);
        cache.face_min[j] = face_min_coords(region);

        const RateVector opt = greedy_rate(s, h, u, opts.greedy_gap_tol);
        const double u_opt = u.value(opt);
        double min_ratio = std::numeric_limits<double>::infinity();
        std::size_t used = 0;
        if (region.total_rank() > 0.0 && region.num_users() <= PolymatroidRegion::kMaxVertexUsers) {
            const std::vector<RateVector> vertices = region.dominant_face_vertices();
            Rng point_rng = Rng::substream(seed, streams::kConstantsPoints, j);
            for (std::size_t p = 0; p < opts.points_per_state; ++p) {
                const RateVector r = sample_feasible_point(vertices, opt, point_rng);
                double dist2 = 0.0;
                for (std::size_t i = 0; i < r.size(); ++i) {
                    const double d = r[i] - opt[i];
                    dist2 += d * d;
                }
                // below this scale the utility difference drowns in
                // double-precision cancellation and the ratio is meaningless
                if (dist2 < 1e-10) continue;
                min_ratio = std::min(min_ratio, std::abs(u_opt - u.value(r)) / dist2);
                ++used;
            }
        }
        cache.min_ratio[j] = min_ratio;
        cache.ratio_samples[j] = used;
    });
    return cache;
}

ConstantEstimates constants_from_cache(const UtilityFunction& u, const StateCache& cache,
                                       const std::vector<double>& averaged_face_min,
                                       double delta, const ConstantsOptions& opts) {
    ConstantEstimates est;
    std::vector<double> coord_min = averaged_face_min;
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cache.distance.size(); ++j) {
        if (cache.distance[j] > delta) continue;
        ++est.event_states;
        for (std::size_t i = 0; i < coord_min.size(); ++i)
            coord_min[i] = std::min(coord_min[i], cache.face_min[j][i]);
        min_ratio = std::min(min_ratio, cache.min_ratio[j]);
        est.ratio_samples += cache.ratio_samples[j];
    }
    // separable utilities: the gradient coordinate depends only on its own
    // rate, so the face-wide maximum sits at the coordinate minimum
    double b2 = 0.0;
    for (std::size_t i = 0; i < coord_min.size(); ++i) {
        RateVector at(coord_min.size(), 0.0);
        at[i] = coord_min[i];
        const double gi = u.gradient(at)[i];
        b2 += gi * gi;
    }
    est.lipschitz = std::sqrt(b2);
    if (std::isfinite(min_ratio) && min_ratio > opts.a_floor) {
        est.quad_growth = min_ratio;
        est.quad_growth_certified = true;
    } else {
        est.quad_growth = opts.a_floor;
        est.quad_growth_certified = false;
    }
    return est;
}

}  // namespace

ConstantEstimates estimate_constants(const Scenario& s, const FadingModel& fm,
                                     const UtilityFunction& u, double eps, std::size_t n,
                                     std::uint64_t seed, const ConstantsOptions& opts) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("eps must lie in (0,1]");
    const std::vector<double> mean_gain = fm.mean();
    const SquareMatrix cov = fm.covariance();
    const double sigma_h = std::sqrt(sigma_h_detailed(s, mean_gain, cov).value);
    const AveragedRegion averaged =
        averaged_region(s, fm, std::max<std::size_t>(n, 1000), seed ^ 0x0a5e11edULL);

    ConstantsOptions local = opts;
    local.states = std::min<std::size_t>(opts.states, std::max<std::size_t>(n, 1));
    const StateCache cache = build_state_cache(s, fm, u, averaged.region, seed, local);
    return constants_from_cache(u, cache, face_min_coords(averaged.region),
                                sigma_h / std::sqrt(eps), local);
}

REpsilonResult r_epsilon(const Scenario& s, const FadingModel& fm, double eps,
                         double sigma_h, std::size_t n, std::uint64_t seed) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("eps must lie in (0,1]");
    if (sigma_h < 0.0) throw DomainError("sigma must be nonnegative");
    s.validate();
    if (fm.num_users() != s.num_users) throw DomainError("fading model does not match the scenario");
    if (n < 1) throw DomainError("r(eps) requires at least one sample");

    const FadingTrace trace = fm.sample(n, seed);
    const int m = s.num_users;

    // mean per-user dominant-face width: the spread of one user's rate
    // between decode-first and decode-last positions
    double sum_sq = 0.0;
    double var_sq = 0.0;
    std::vector<double> widths(n);
    for (int i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const auto h = trace.row(k);
            double own = h[static_cast<std::size_t>(i)] * s.powers[static_cast<std::size_t>(i)] / s.noise;
            double others = 0.0;
            for (int j = 0; j < m; ++j)
                if (j != i)
                    others += h[static_cast<std::size_t>(j)] * s.powers[static_cast<std::size_t>(j)] / s.noise;
            widths[k] = 0.5 * std::log((1.0 + own) * (1.0 + others) / (1.0 + own + others));
        }
        const MeanVar mv = mean_var(widths);
        sum_sq += mv.mean * mv.mean;
        var_sq += mv.mean * mv.mean * mv.se * mv.se;
    }

    REpsilonResult out;
    out.spread_term = std::sqrt(sum_sq);
    out.se = out.spread_term > 0.0 ? std::sqrt(var_sq) / out.spread_term : 0.0;
    out.value = std::sqrt(static_cast<double>(m)) * sigma_h / std::sqrt(eps) + out.spread_term;
    return out;
}

BoundReport bound_sweep(const Scenario& s, const FadingModel& fm, const UtilityFunction& u,
                        std::span<const double> eps_grid, std::size_t n, std::uint64_t seed,
                        const SweepOptions& opts) {
    if (eps_grid.empty()) throw DomainError("epsilon grid must not be empty");
    for (double e : eps_grid)
        if (!(e > 0.0 && e <= 1.0)) throw DomainError("epsilon grid must lie in (0,1]");
    std::vector<double> grid(eps_grid.begin(), eps_grid.end());
    std::sort(grid.begin(), grid.end());

    BoundReport rep;
    rep.n_samples = n;
    rep.seed = seed;

    const std::vector<double> mean_gain = fm.mean();
    const SquareMatrix cov = fm.covariance();
    const SigmaReport sigma = sigma_h_detailed(s, mean_gain, cov);
    rep.sigma_h2 = sigma.value;
    rep.sigma_h = std::sqrt(sigma.value);
    rep.clamped_subsets = sigma.clamped_subsets;

    const GapResult gap = performance_gap(s, fm, u, n, seed, opts.fw_gap_tol);
    rep.u_star = gap.optimal_utility;
    rep.optimal_rates = gap.optimal_rates;
    rep.gap = gap.gap;
    rep.gap_se = gap.gap_se;
    if (rep.u_star < 0.0)
        throw DomainError("bound sweep requires a nonnegative utility at the optimum");

    const StateCache cache =
        build_state_cache(s, fm, u, gap.averaged.region, seed, opts.constants);
    const std::vector<double> averaged_face_min = face_min_coords(gap.averaged.region);
    const REpsilonResult spread = r_epsilon(s, fm, 1.0, 0.0, n, seed);

    auto make_row = [&](double eps, double sigma_h, const ConstantEstimates& est) {
        BoundRow row;
        row.epsilon = eps;
        row.delta = sigma_h / std::sqrt(eps);
        row.lipschitz = est.lipschitz;
        row.quad_growth = est.quad_growth;
        row.vacuous = !est.quad_growth_certified;
        row.r = std::sqrt(static_cast<double>(s.num_users)) * row.delta + spread.spread_term;
        row.r_se = spread.se;
        row.omega = u.max_neg_hessian_eig(rep.optimal_rates, row.r);
        row.bound1 = row.vacuous ? std::numeric_limits<double>::infinity()
                                 : lipschitz_gap_bound(eps, rep.u_star, est.quad_growth,
                                                  est.lipschitz, sigma_h);
        row.bound2 = curvature_gap_bound(eps, rep.u_star, row.r, row.omega);
        row.min_bound = std::min(row.bound1, row.bound2);
        return row;
    };

    std::vector<ConstantEstimates> per_eps;
    per_eps.reserve(grid.size());
    for (double eps : grid) {
        const ConstantEstimates est = constants_from_cache(
            u, cache, averaged_face_min, rep.sigma_h / std::sqrt(eps), opts.constants);
        per_eps.push_back(est);
        rep.rows.push_back(make_row(eps, rep.sigma_h, est));
    }
    rep.best_value = std::numeric_limits<double>::infinity();
    for (const BoundRow& row : rep.rows) {
        if (row.min_bound < rep.best_value) {
            rep.best_value = row.min_bound;
            rep.best_epsilon = row.epsilon;
        }
    }

    // Scaled-covariance curves: only sigma_h varies; u_star and the
    // estimated constants stay those of the actual scenario.
    for (double scale : opts.cov_scales) {
        FigureCurve curve;
        curve.cov_scale = scale;
        curve.sigma_h = std::sqrt(sigma_h_detailed(s, mean_gain, cov.scaled(scale)).value);
        curve.best_value = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const BoundRow row = make_row(grid[g], curve.sigma_h, per_eps[g]);
            curve.epsilon.push_back(row.epsilon);
            curve.bound1.push_back(row.bound1);
            curve.bound2.push_back(row.bound2);
            curve.min_bound.push_back(row.min_bound);
            if (row.min_bound < curve.best_value) {
                curve.best_value = row.min_bound;
                curve.best_epsilon = row.epsilon;
            }
        }
        rep.figure.push_back(std::move(curve));
    }
    return rep;
}

}  // namespace macalloc
