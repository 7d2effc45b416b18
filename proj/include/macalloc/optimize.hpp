#pragma once

#include <functional>
#include <span>
#include <vector>

#include "macalloc/capacity.hpp"
#include "macalloc/utility.hpp"

namespace macalloc {

// Maps a positive weight direction to a maximizer of mu'R over the feasible
// region. Feasibility and per-call optimality are the oracle's contract.
using LinearOracle = std::function<RateVector(std::span<const double> mu)>;

// Decoding order used by the greedy oracle: weights descending, ties broken
// by ascending user index.
std::vector<int> greedy_order(std::span<const double> mu);

// Maximizes mu'R over a polymatroid region by the greedy vertex rule.
// mu must be nonnegative with at least one positive component.
RateVector maximize_linear(const PolymatroidRegion& region, std::span<const double> mu);

enum class StepRule { limited_max, armijo };

struct FWOptions {
    StepRule rule = StepRule::limited_max;
    double gap_tol = 1e-6;
    int max_iter = 100000;
    // Armijo parameters: start at 1, contract by beta until the sufficient
    // increase sigma * alpha * gap is met.
    double armijo_beta = 0.5;
    double armijo_sigma = 0.1;
    double line_search_tol = 1e-10;
    bool record_trajectory = true;
};

struct FWReport {
    RateVector solution;
    double value = 0.0;
    double gap = 0.0;            // gradient'(oracle point - solution) at exit
    int iterations = 0;          // steps taken
    int oracle_calls = 0;
    bool converged = false;
    StepRule rule = StepRule::limited_max;
    std::vector<double> utility_trajectory;  // value at the start of each pass
    std::vector<double> gap_trajectory;
    std::vector<RateVector> iterate_trajectory;  // iterate at the start of each pass

    // Convex-combination certificate over greedy orderings; only populated
    // by frank_wolfe_region. Weights sum to 1 and reproduce `solution` as a
    // mixture of region vertices.
    std::vector<std::pair<std::vector<int>, double>> vertex_mixture;
};

// Conditional-gradient maximization of a concave utility over the convex
// region served by `oracle`, starting from the feasible point `start`.
FWReport frank_wolfe(const LinearOracle& oracle, const UtilityFunction& u,
                     RateVector start, const FWOptions& opts = {});

// Frank-Wolfe over a polymatroid with the greedy oracle; also tracks the
// vertex mixture. The default start is the greedy vertex for uniform weights.
FWReport frank_wolfe_region(const PolymatroidRegion& region, const UtilityFunction& u,
                            const FWOptions& opts = {});

// Gradient at the computed optimum: the weight vector whose greedy policy
// reproduces the solution through the linear oracle.
std::vector<double> recover_linearization(const UtilityFunction& u,
                                          std::span<const double> solution);

}  // namespace macalloc
