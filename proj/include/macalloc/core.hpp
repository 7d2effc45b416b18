#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace macalloc {

// Error taxonomy shared by all modules. DomainError covers invalid values
// and contract violations; ConvergenceError carries the last residuals so
// callers can diagnose a failed solve.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct ConvergenceError : std::runtime_error {
    std::vector<double> residuals;
    ConvergenceError(const std::string& what, std::vector<double> res)
        : std::runtime_error(what), residuals(std::move(res)) {}
};

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(const std::string& what, std::string fld = {})
        : std::runtime_error(what), field(std::move(fld)) {}
};

struct ModeError : std::runtime_error {
    explicit ModeError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic counter-based RNG.
//
// Every random quantity in the library is drawn from a substream keyed by
// (seed, stream id, index). Substreams are independent of each other and of
// the order in which they are opened, so sample loops can run on any number
// of workers and still produce identical output.
// ---------------------------------------------------------------------------
class Rng {
  public:
    explicit Rng(std::uint64_t seed);
    static Rng substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

    std::uint64_t next_u64();
    // uniform in (0,1), never exactly 0 or 1
    double next_open01();
    double uniform(double a, double b);
    double normal();                      // standard normal via inverse CDF
    std::size_t pick(std::size_t n);      // uniform integer in [0, n)

  private:
    std::uint64_t state_;
};

// Stream ids. Keep these stable: they are part of the reproducibility
// contract (same seed => same outputs).
namespace streams {
inline constexpr std::uint64_t kFading = 1;
inline constexpr std::uint64_t kPolicyTie = 2;
inline constexpr std::uint64_t kConstantsStates = 3;
inline constexpr std::uint64_t kConstantsPoints = 4;
inline constexpr std::uint64_t kRegionEstimate = 5;
inline constexpr std::uint64_t kValidation = 6;
}  // namespace streams

// ---------------------------------------------------------------------------
// Normal distribution helpers
// ---------------------------------------------------------------------------
double normal_cdf(double x);
// Inverse of normal_cdf, accurate to ~1e-15 (rational approximation plus one
// Halley refinement). p must lie in (0,1).
double normal_ppf(double p);

// ---------------------------------------------------------------------------
// Deterministic reductions
// ---------------------------------------------------------------------------
// Pairwise summation: associativity-fixed, independent of worker count.
double pairwise_sum(std::span<const double> values);

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;  // unbiased (n-1) when n > 1
    double se = 0.0;        // standard error of the mean
    std::size_t n = 0;
};
MeanVar mean_var(std::span<const double> values);

// ---------------------------------------------------------------------------
// Adaptive quadrature (Gauss-Kronrod 7/15 with interval bisection)
// ---------------------------------------------------------------------------
struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
    bool converged = true;
};

// Integrates f over [a, b] until the local error estimate of every panel is
// below abs_tol + rel_tol * |panel value|. Throws nothing; inspect
// `converged` when the budget runs out.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol = 1e-8, double rel_tol = 1e-8, int max_depth = 48);

// ---------------------------------------------------------------------------
// Scalar root finding / line search
// ---------------------------------------------------------------------------
// Bisection on [lo, hi]; requires f(lo) and f(hi) of opposite sign.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double xtol = 1e-12, int max_iter = 200);

// Golden-section maximization of a unimodal f on [a, b]. Returns the best
// point seen (including the endpoints), so the result never undercuts f(a).
double golden_max(const std::function<double(double)>& f, double a, double b,
                  double xtol = 1e-10);

// ---------------------------------------------------------------------------
// Small dense symmetric matrices (covariances are at most 16x16 here)
// ---------------------------------------------------------------------------
class SquareMatrix {
  public:
    SquareMatrix() = default;
    explicit SquareMatrix(int n, double fill = 0.0) : n_(n), a_(static_cast<std::size_t>(n) * n, fill) {}
    static SquareMatrix identity(int n);
    static SquareMatrix diagonal(std::span<const double> d);

    int size() const { return n_; }
    double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

    SquareMatrix scaled(double c) const;
    // x' A x
    double quadratic_form(std::span<const double> x) const;

    // Cholesky factor L (lower) allowing positive semidefinite input: zero
    // pivots produce zero rows. Throws DomainError if a pivot is negative
    // beyond tolerance (not PSD).
    SquareMatrix cholesky_psd(double tol = 1e-10) const;

  private:
    int n_ = 0;
    std::vector<double> a_;
};

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------
// Runs fn(i) for i in [0, n). Work is partitioned in blocks; each index must
// write only to its own slot so the result is independent of the partition.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

void set_max_threads(unsigned n);  // 0 restores the hardware default
unsigned max_threads();

// ---------------------------------------------------------------------------
// Subset mask helpers (users are 1-based in external formats)
// ---------------------------------------------------------------------------
std::string subset_key(std::uint32_t mask);          // e.g. 0b101 -> "1,3"
std::uint32_t parse_subset_key(const std::string& key, int num_users);

// Shortest-round-trip style fixed formatting used by all CSV writers.
std::string format_double(double x);

}  // namespace macalloc
