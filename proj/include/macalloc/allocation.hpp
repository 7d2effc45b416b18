#pragma once

#include <span>
#include <vector>

#include "macalloc/capacity.hpp"
#include "macalloc/fading.hpp"

namespace macalloc {

// Per-user average transmit power targets (watts).
struct PowerBudget {
    std::vector<double> avg_power;
    void validate() const;
};

// Lagrange prices on average power, one per user (utility per watt).
using MultiplierVector = std::vector<double>;

// Half-open interference interval [lo, hi) in received-power units.
struct InterferenceInterval {
    double lo;
    double hi;
};

// Solution of the per-state weighted rate/power trade-off: rates, powers,
// and the interference intervals each user's signal occupies under
// successive decoding (later intervals are decoded earlier).
struct StateAllocation {
    std::vector<double> rates;
    std::vector<double> powers;
    std::vector<std::vector<InterferenceInterval>> decode_intervals;
    double objective = 0.0;  // mu'r - lambda'p
};

// Maximizes mu'r - lambda'p over r in the instantaneous region generated by
// powers p, jointly in (r, p). Each interference level is awarded to the
// user with the highest positive marginal value mu_i/(2(N0+z)) - lambda_i/h_i;
// ties go to the lowest user index. Users with zero gain get nothing;
// lambda_i == 0 with h_i > 0 makes the objective unbounded and is rejected.
StateAllocation per_state_allocation(const Scenario& s, const ChannelState& h,
                                     std::span<const double> mu,
                                     std::span<const double> lambda);

struct QuadratureOptions {
    double tol = 1e-8;        // outer absolute + relative tolerance
    double inner_factor = 1e-2;  // inner integral runs at tol * inner_factor
};

// Expected transmit power of the per-state policy under the fading law,
// one nested adaptive quadrature per user. Requires an independent,
// continuous model and positive mu and lambda.
std::vector<double> expected_power(const Scenario& s, const FadingModel& fm,
                                   std::span<const double> mu,
                                   std::span<const double> lambda,
                                   const QuadratureOptions& quad = {});

struct MultiplierOptions {
    double rel_tol = 1e-5;   // max_i |E[p_i]/target_i - 1| at convergence
    int fixed_point_iters = 40;
    int bisection_sweeps = 40;
    double damping = 0.5;    // exponent of the multiplicative update
    QuadratureOptions quad{};
};

struct MultiplierSolution {
    MultiplierVector lambda;
    std::vector<double> expected_powers;
    double max_rel_residual = 0.0;
    int iterations = 0;
    bool used_bisection = false;
};

// Solves for the prices that make the expected per-state powers meet the
// budget. Damped multiplicative fixed point (E[p_i] decreases in lambda_i),
// falling back to coordinate-wise bisection sweeps. Throws ConvergenceError
// carrying the residuals if both phases run out.
MultiplierSolution solve_multipliers(const Scenario& s, const FadingModel& fm,
                                     const PowerBudget& budget,
                                     std::span<const double> mu,
                                     const MultiplierOptions& opts = {});

// Mean rate vector of the per-state policy: the boundary point of the
// power-controlled capacity region selected by the direction mu, evaluated
// by the same nested quadrature.
RateVector boundary_rate(const Scenario& s, const FadingModel& fm,
                         std::span<const double> mu, std::span<const double> lambda,
                         const QuadratureOptions& quad = {});

}  // namespace macalloc
