#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "macalloc/allocation.hpp"
#include "macalloc/capacity.hpp"
#include "macalloc/fading.hpp"
#include "macalloc/optimize.hpp"
#include "macalloc/utility.hpp"

namespace macalloc {

// Per-channel-state maximizer of the utility over the instantaneous region,
// computed by conditional gradient on the polymatroid. States with all-zero
// gains yield the zero vector.
RateVector greedy_rate(const Scenario& s, const ChannelState& h, const UtilityFunction& u,
                       double gap_tol = 1e-8);

// A rate allocation policy: a deterministic (or tie-randomized) map from the
// channel state to a feasible rate vector in the instantaneous region.
class RatePolicy {
  public:
    // maximizes u over the instantaneous region each state
    static RatePolicy greedy(UtilityFunction u, double gap_tol = 1e-8);
    // maximizes a fixed linear functional each state (one greedy sort)
    static RatePolicy linear_greedy(std::vector<double> mu);
    // emits the same rate vector regardless of the state
    static RatePolicy fixed(RateVector rates);
    // picks a decoding order from the mixture each state and emits that
    // vertex of the instantaneous region; the mixture is the certificate
    // produced by frank_wolfe_region, so the mean rate reproduces the
    // optimizer of u over the averaged region
    static RatePolicy vertex_mixture(std::vector<std::pair<std::vector<int>, double>> mixture);

    // `tie_rng` drives the mixture draw; deterministic policies ignore it.
    RateVector rate(const Scenario& s, const ChannelState& h, Rng& tie_rng) const;

    const char* name() const;

  private:
    enum class Kind { greedy, linear_greedy, fixed, vertex_mixture };
    RatePolicy(Kind k) : kind_(k) {}

    Kind kind_;
    UtilityFunction utility_ = UtilityFunction::linear({1.0});
    double gap_tol_ = 1e-8;
    std::vector<double> mu_;
    RateVector fixed_rates_;
    std::vector<std::pair<std::vector<int>, double>> mixture_;
};

// Monte Carlo summary of a policy under a fading law.
struct PolicyEvaluation {
    std::vector<double> mean_rates;
    std::vector<double> rate_se;
    double mean_utility = 0.0;        // E[u(R(H))]
    double utility_se = 0.0;
    double utility_of_mean = 0.0;     // u(E[R(H)])
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

// Evaluates `policy` on n i.i.d. states (n >= 100), reporting means with
// standard errors under the objective utility `u`. Deterministic given the
// seed and independent of the worker count.
PolicyEvaluation evaluate_policy(const Scenario& s, const FadingModel& fm,
                                 const RatePolicy& policy, const UtilityFunction& u,
                                 std::size_t n, std::uint64_t seed);

// Per-sample record of a policy run, for CSV export.
struct PolicySamples {
    FadingTrace trace;
    std::vector<double> rates;      // n x M row-major
    std::vector<double> utilities;  // n
};
PolicySamples run_policy(const Scenario& s, const FadingModel& fm, const RatePolicy& policy,
                         const UtilityFunction& u, std::size_t n, std::uint64_t seed);

// Reduces an existing sample run into the evaluation summary.
PolicyEvaluation summarize_samples(const PolicySamples& samples, const UtilityFunction& u);

// Gap between the utility-optimal point of the averaged region and the
// utility at the mean rate of the per-state greedy policy, both estimated
// from one shared trace.
struct GapResult {
    RateVector optimal_rates;     // argmax of u over the averaged region
    double optimal_utility = 0.0; // u at that point
    double greedy_utility = 0.0;  // u at the mean greedy rate
    double gap = 0.0;
    double gap_se = 0.0;          // delta-method SE through the mean rates
    PolicyEvaluation greedy_eval;
    FWReport region_fw;           // includes the vertex-mixture certificate
    AveragedRegion averaged;
};

GapResult performance_gap(const Scenario& s, const FadingModel& fm, const UtilityFunction& u,
                          std::size_t n, std::uint64_t seed, double fw_gap_tol = 1e-8);

}  // namespace macalloc
