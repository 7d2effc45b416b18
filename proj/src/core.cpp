#include "macalloc/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <thread>

namespace macalloc {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(mix64(seed)) {}

Rng Rng::substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    Rng r(0);
    std::uint64_t s = mix64(seed);
    s = mix64(s ^ (stream * 0xd6e8feb86659fd93ULL));
    s = mix64(s ^ (index * 0xa0761d6478bd642fULL));
    r.state_ = s;
    return r;
}

std::uint64_t Rng::next_u64() {
    state_ += kGolden;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::next_open01() {
    // 53-bit mantissa, shifted into (0,1)
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * next_open01(); }

double Rng::normal() { return normal_ppf(next_open01()); }

std::size_t Rng::pick(std::size_t n) {
    return static_cast<std::size_t>(next_open01() * static_cast<double>(n)) % n;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_ppf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_ppf: p must be in (0,1)");

    // Acklam's rational approximation
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;

    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // One Halley step against the exact CDF brings the result to ~1e-15.
    double e = normal_cdf(x) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

double pairwise_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanVar mean_var(std::span<const double> values) {
    MeanVar mv;
    mv.n = values.size();
    if (mv.n == 0) return mv;
    mv.mean = pairwise_sum(values) / static_cast<double>(mv.n);
    if (mv.n > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double d = values[i] - mv.mean;
            sq[i] = d * d;
        }
        mv.variance = pairwise_sum(sq) / static_cast<double>(mv.n - 1);
        mv.se = std::sqrt(mv.variance / static_cast<double>(mv.n));
    }
    return mv;
}

namespace {

// Gauss-Kronrod 7/15 nodes and weights (positive half; node 7 is zero).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelResult {
    double kronrod;
    double error;
};

PanelResult gk15(const std::function<double(double)>& f, double a, double b,
                 std::size_t& evals) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double fv[15];
    for (int j = 0; j < 7; ++j) {
        fv[j] = f(center - half * kXgk[j]);
        fv[14 - j] = f(center + half * kXgk[j]);
    }
    fv[7] = f(center);
    evals += 15;

    double resk = 0.0, resg = 0.0;
    for (int j = 0; j < 7; ++j) {
        resk += kWgk[j] * (fv[j] + fv[14 - j]);
        if (j % 2 == 1) resg += kWg[j / 2] * (fv[j] + fv[14 - j]);
    }
    resk += kWgk[7] * fv[7];
    resg += kWg[3] * fv[7];

    // QUADPACK-style estimate: the raw Gauss-Kronrod difference sharpened
    // against the panel's total variation scale
    const double reskh = 0.5 * resk;
    double resasc = kWgk[7] * std::abs(fv[7] - reskh);
    for (int j = 0; j < 7; ++j)
        resasc += kWgk[j] * (std::abs(fv[j] - reskh) + std::abs(fv[14 - j] - reskh));
    resasc *= std::abs(half);
    resk *= half;
    resg *= half;

    double err = std::abs(resk - resg);
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    return {resk, err};
}

void integrate_rec(const std::function<double(double)>& f, double a, double b,
                   double abs_tol, double rel_tol, int depth, QuadResult& out) {
    std::size_t evals = 0;
    PanelResult p = gk15(f, a, b, evals);
    out.evaluations += evals;
    const double tol = std::max(abs_tol, rel_tol * std::abs(p.kronrod));
    if (p.error <= tol || depth <= 0 || (b - a) < 1e-300) {
        out.value += p.kronrod;
        out.error += p.error;
        if (p.error > tol && depth <= 0) out.converged = false;
        return;
    }
    const double mid = 0.5 * (a + b);
    integrate_rec(f, a, mid, 0.5 * abs_tol, rel_tol, depth - 1, out);
    integrate_rec(f, mid, b, 0.5 * abs_tol, rel_tol, depth - 1, out);
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, double rel_tol, int max_depth) {
    QuadResult out;
    if (!(b > a)) return out;
    integrate_rec(f, a, b, abs_tol, rel_tol, max_depth, out);
    return out;
}

double bisect(const std::function<double(double)>& f, double lo, double hi,
              double xtol, int max_iter) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw DomainError("bisect: root not bracketed");
    for (int i = 0; i < max_iter && (hi - lo) > xtol * (1.0 + std::abs(lo) + std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double golden_max(const std::function<double(double)>& f, double a, double b,
                  double xtol) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    const double invphi2 = invphi * invphi;

    double best_x = a;
    double best_f = f(a);
    const double fb_end = f(b);
    if (fb_end > best_f) {
        best_x = b;
        best_f = fb_end;
    }

    double h = b - a;
    if (h <= xtol) return best_x;
    double c = a + invphi2 * h;
    double d = a + invphi * h;
    double fc = f(c), fd = f(d);
    while (h > xtol) {
        if (fc > best_f) {
            best_f = fc;
            best_x = c;
        }
        if (fd > best_f) {
            best_f = fd;
            best_x = d;
        }
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            h = b - a;
            c = a + invphi2 * h;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            h = b - a;
            d = a + invphi * h;
            fd = f(d);
        }
    }
    return best_x;
}

SquareMatrix SquareMatrix::identity(int n) {
    SquareMatrix m(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

SquareMatrix SquareMatrix::diagonal(std::span<const double> d) {
    SquareMatrix m(static_cast<int>(d.size()));
    for (int i = 0; i < m.size(); ++i) m.at(i, i) = d[static_cast<std::size_t>(i)];
    return m;
}

SquareMatrix SquareMatrix::scaled(double c) const {
    SquareMatrix m = *this;
    for (double& v : m.a_) v *= c;
    return m;
}

double SquareMatrix::quadratic_form(std::span<const double> x) const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) s += x[static_cast<std::size_t>(i)] * at(i, j) * x[static_cast<std::size_t>(j)];
    return s;
}

SquareMatrix SquareMatrix::cholesky_psd(double tol) const {
    const int n = n_;
    SquareMatrix L(n);
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(at(i, i)));
    if (scale == 0.0) scale = 1.0;
    for (int j = 0; j < n; ++j) {
        double diag = at(j, j);
        for (int k = 0; k < j; ++k) diag -= L.at(j, k) * L.at(j, k);
        if (diag < -tol * scale) throw DomainError("matrix is not positive semidefinite");
        if (diag <= tol * scale) {
            // semidefinite direction: zero pivot, zero column
            L.at(j, j) = 0.0;
            continue;
        }
        const double ljj = std::sqrt(diag);
        L.at(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = at(i, j);
            for (int k = 0; k < j; ++k) s -= L.at(i, k) * L.at(j, k);
            L.at(i, j) = s / ljj;
        }
    }
    return L;
}

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() {
    unsigned n = g_max_threads.load();
    if (n == 0) {
        n = std::thread::hardware_concurrency();
        if (n == 0) n = 1;
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = std::min<std::size_t>(max_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<std::size_t> next{0};
    const std::size_t chunk = std::max<std::size_t>(1, n / (static_cast<std::size_t>(workers) * 8));
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, chunk]() {
            while (true) {
                const std::size_t begin = next.fetch_add(chunk);
                if (begin >= n || failed.load()) break;
                const std::size_t end = std::min(n, begin + chunk);
                try {
                    for (std::size_t i = begin; i < end; ++i) fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!failed.exchange(true)) error = std::current_exception();
                    break;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

std::string subset_key(std::uint32_t mask) {
    std::string out;
    for (int i = 0; mask != 0; ++i, mask >>= 1) {
        if (mask & 1u) {
            if (!out.empty()) out += ',';
            out += std::to_string(i + 1);
        }
    }
    return out;
}

std::uint32_t parse_subset_key(const std::string& key, int num_users) {
    std::uint32_t mask = 0;
    std::size_t pos = 0;
    while (pos < key.size()) {
        std::size_t next = key.find(',', pos);
        if (next == std::string::npos) next = key.size();
        const int idx = std::stoi(key.substr(pos, next - pos));
        if (idx < 1 || idx > num_users)
            throw DomainError("subset key index out of range: " + key);
        mask |= (1u << (idx - 1));
        pos = next + 1;
    }
    if (mask == 0) throw DomainError("empty subset key");
    return mask;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace macalloc
