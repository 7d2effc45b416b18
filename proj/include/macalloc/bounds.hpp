#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "macalloc/capacity.hpp"
#include "macalloc/fading.hpp"
#include "macalloc/policy.hpp"
#include "macalloc/utility.hpp"

namespace macalloc {

// Normalized power profile of a subset: P_i / N0 on S, zero elsewhere.
std::vector<double> gamma_vector(const Scenario& s, std::uint32_t mask);

// Upper bound on the variance of the subset capacity
// Y_S = (1/2) log(1 + sum_{i in S} H_i P_i / N0), from the mean and
// covariance of the gains. The inner square-root difference is clamped at
// zero when the variance is too large for the derivation's regime.
double variance_bound_ys(const Scenario& s, std::uint32_t mask,
                         std::span<const double> mean_gain, const SquareMatrix& cov);

struct SigmaReport {
    double value = 0.0;       // sigma_H^2, nats^2
    int clamped_subsets = 0;  // subsets where the bracket was clamped at 0
};

// Scenario constant aggregating the fading covariance through the capacity
// nonlinearity: the sum of the per-subset variance bounds. Drives the
// region concentration bound.
SigmaReport sigma_h_detailed(const Scenario& s, std::span<const double> mean_gain,
                             const SquareMatrix& cov);
double sigma_h_squared(const Scenario& s, std::span<const double> mean_gain,
                       const SquareMatrix& cov);

// P{ d_H(instantaneous, averaged) > delta } <= min(1, sigma2 / delta^2).
double chebyshev_region_bound(double sigma2, double delta);

// Distance bound between the optimizers over two regions at rank distance
// at most delta, given a Lipschitz constant B and a quadratic growth
// constant A: sqrt(delta) * (sqrt(delta) + sqrt(B/A)).
double opt_distance_bound(double A, double B, double delta);

// eps * u_star + (1-eps) * B * (sqrt(delta) + sqrt(B/A)) * sqrt(delta),
// with delta = sigma_h / sqrt(eps). Requires eps in (0,1] and u_star >= 0.
double lipschitz_gap_bound(double eps, double u_star, double A, double B, double sigma_h);

// eps * u_star + (1/2) * (1-eps) * r_eps^2 * omega.
double curvature_gap_bound(double eps, double u_star, double r_eps, double omega);

struct ConstantsOptions {
    std::size_t states = 200;          // sampled channel states
    std::size_t points_per_state = 150;  // feasible points per state for A
    double greedy_gap_tol = 1e-8;
    double a_floor = 1e-12;  // below this the quadratic-growth constant is
                             // treated as uncertified and the bound vacuous
};

struct ConstantEstimates {
    double lipschitz = 0.0;        // B(eps)
    double quad_growth = 0.0;      // A(eps)
    bool quad_growth_certified = false;
    std::size_t event_states = 0;  // states inside {d_H <= sigma_h/sqrt(eps)}
    std::size_t ratio_samples = 0;
};

// Empirical constants for the event {d_H <= sigma_h/sqrt(eps)}: a certified
// coordinate-wise Lipschitz bound over the event faces plus the averaged
// face, and the minimum observed quadratic-growth ratio around the per-state
// greedy optimum. Estimates, not proofs: the report carries sample counts.
ConstantEstimates estimate_constants(const Scenario& s, const FadingModel& fm,
                                     const UtilityFunction& u, double eps, std::size_t n,
                                     std::uint64_t seed, const ConstantsOptions& opts = {});

struct REpsilonResult {
    double value = 0.0;
    double se = 0.0;           // Monte Carlo SE of the spread term
    double spread_term = 0.0;  // the sigma-independent part
};

// Radius of the ball around the averaged-region optimum that contains the
// per-state optimal allocations on the event: sqrt(M) * sigma_h / sqrt(eps)
// plus the root-sum-square of the mean per-user dominant-face widths.
// Powers are normalized by the noise level throughout.
REpsilonResult r_epsilon(const Scenario& s, const FadingModel& fm, double eps,
                         double sigma_h, std::size_t n, std::uint64_t seed);

struct BoundRow {
    double epsilon = 0.0;
    double delta = 0.0;  // sigma_h / sqrt(eps)
    double lipschitz = 0.0;
    double quad_growth = 0.0;
    bool vacuous = false;  // quadratic-growth constant hit the floor
    double r = 0.0;
    double r_se = 0.0;
    double omega = 0.0;
    double bound1 = 0.0;  // infinite when vacuous
    double bound2 = 0.0;
    double min_bound = 0.0;
};

struct FigureCurve {
    double cov_scale = 1.0;  // multiplier applied to the covariance
    double sigma_h = 0.0;
    std::vector<double> epsilon;
    std::vector<double> bound1;
    std::vector<double> bound2;
    std::vector<double> min_bound;
    double best_value = 0.0;
    double best_epsilon = 0.0;
};

struct BoundReport {
    double sigma_h2 = 0.0;
    double sigma_h = 0.0;
    int clamped_subsets = 0;
    double u_star = 0.0;
    RateVector optimal_rates;
    double gap = 0.0;
    double gap_se = 0.0;
    std::vector<BoundRow> rows;
    double best_value = 0.0;    // min over rows of min_bound
    double best_epsilon = 0.0;
    std::vector<FigureCurve> figure;  // one curve per covariance scale
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct SweepOptions {
    ConstantsOptions constants{};
    double fw_gap_tol = 1e-8;
    // Covariance scales for the qualitative spread study. The scaled curves
    // keep u_star and the estimated constants fixed and vary only the
    // sigma_h entering the bound formulas, so they isolate the effect of
    // shrinking channel variation on the parameterized bound.
    std::vector<double> cov_scales;
};

BoundReport bound_sweep(const Scenario& s, const FadingModel& fm, const UtilityFunction& u,
                        std::span<const double> eps_grid, std::size_t n, std::uint64_t seed,
                        const SweepOptions& opts = {});

}  // namespace macalloc
