#include "macalloc/policy.hpp"

#include <algorithm>
#include <cmath>

namespace macalloc {

RateVector greedy_rate(const Scenario& s, const ChannelState& h, const UtilityFunction& u,
                       double gap_tol) {
    const PolymatroidRegion region = instantaneous_region(s, h);
    if (region.total_rank() <= 0.0)
        return RateVector(static_cast<std::size_t>(s.num_users), 0.0);
    if (u.is_linear()) return maximize_linear(region, u.weights());
    FWOptions opts;
    opts.gap_tol = gap_tol;
    opts.record_trajectory = false;
    return frank_wolfe_region(region, u, opts).solution;
}

RatePolicy RatePolicy::greedy(UtilityFunction u, double gap_tol) {
    RatePolicy p(Kind::greedy);
    p.utility_ = std::move(u);
    p.gap_tol_ = gap_tol;
    return p;
}

RatePolicy RatePolicy::linear_greedy(std::vector<double> mu) {
    RatePolicy p(Kind::linear_greedy);
    p.mu_ = std::move(mu);
    return p;
}

RatePolicy RatePolicy::fixed(RateVector rates) {
    RatePolicy p(Kind::fixed);
    p.fixed_rates_ = std::move(rates);
    return p;
}

RatePolicy RatePolicy::vertex_mixture(
    std::vector<std::pair<std::vector<int>, double>> mixture) {
    if (mixture.empty()) throw DomainError("vertex mixture must not be empty");
    double total = 0.0;
    for (const auto& [order, w] : mixture) {
        if (w < 0.0) throw DomainError("mixture weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("mixture weights must sum to 1");
    RatePolicy p(Kind::vertex_mixture);
    p.mixture_ = std::move(mixture);
    return p;
}

RateVector RatePolicy::rate(const Scenario& s, const ChannelState& h, Rng& tie_rng) const {
    switch (kind_) {
        case Kind::greedy:
            return greedy_rate(s, h, utility_, gap_tol_);
        case Kind::linear_greedy:
            return maximize_linear(instantaneous_region(s, h), mu_);
        case Kind::fixed:
            return fixed_rates_;
        case Kind::vertex_mixture: {
            const double pick = tie_rng.next_open01();
            double acc = 0.0;
            const std::vector<int>* order = &mixture_.back().first;
            for (const auto& [ord, w] : mixture_) {
                acc += w;
                if (pick <= acc) {
                    order = &ord;
                    break;
                }
            }
            return instantaneous_region(s, h).vertex(*order);
        }
    }
    throw DomainError("unknown policy kind");
}

const char* RatePolicy::name() const {
    switch (kind_) {
        case Kind::greedy: return "greedy";
        case Kind::linear_greedy: return "linear_greedy";
        case Kind::fixed: return "fixed";
        case Kind::vertex_mixture: return "vertex_mixture";
    }
    return "?";
}

PolicySamples run_policy(const Scenario& s, const FadingModel& fm, const RatePolicy& policy,
                         const UtilityFunction& u, std::size_t n, std::uint64_t seed) {
    s.validate();
    if (fm.num_users() != s.num_users)
        throw DomainError("fading model does not match the scenario");
    if (u.dim() != s.num_users) throw DomainError("utility dimension does not match the scenario");

    PolicySamples out;
    out.trace = fm.sample(n, seed);
    const std::size_t m = static_cast<std::size_t>(s.num_users);
    out.rates.resize(n * m);
    out.utilities.resize(n);
    parallel_for(n, [&](std::size_t k) {
        ChannelState h{std::vector<double>(out.trace.row(k).begin(), out.trace.row(k).end())};
        Rng tie = Rng::substream(seed, streams::kPolicyTie, k);
        const RateVector r = policy.rate(s, h, tie);
        std::copy(r.begin(), r.end(), out.rates.begin() + static_cast<std::ptrdiff_t>(k * m));
        out.utilities[k] = u.value(r);
    });
    return out;
}

PolicyEvaluation summarize_samples(const PolicySamples& samples, const UtilityFunction& u) {
    const std::size_t n = samples.trace.n_samples;
    const std::size_t m = static_cast<std::size_t>(samples.trace.num_users);

    PolicyEvaluation eval;
    eval.n_samples = n;
    eval.seed = samples.trace.seed;
    eval.mean_rates.resize(m);
    eval.rate_se.resize(m);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < n; ++k) col[k] = samples.rates[k * m + i];
        const MeanVar mv = mean_var(col);
        eval.mean_rates[i] = mv.mean;
        eval.rate_se[i] = mv.se;
    }
    const MeanVar mu = mean_var(samples.utilities);
    eval.mean_utility = mu.mean;
    eval.utility_se = mu.se;
    eval.utility_of_mean = u.value(eval.mean_rates);
    return eval;
}

PolicyEvaluation evaluate_policy(const Scenario& s, const FadingModel& fm,
                                 const RatePolicy& policy, const UtilityFunction& u,
                                 std::size_t n, std::uint64_t seed) {
    if (n < 100) throw DomainError("policy evaluation requires at least 100 samples");
    return summarize_samples(run_policy(s, fm, policy, u, n, seed), u);
}

GapResult performance_gap(const Scenario& s, const FadingModel& fm, const UtilityFunction& u,
                          std::size_t n, std::uint64_t seed, double fw_gap_tol) {
    GapResult out;
    out.averaged = averaged_region(s, fm, n, seed);

    FWOptions opts;
    opts.gap_tol = fw_gap_tol;
    opts.record_trajectory = false;
    out.region_fw = frank_wolfe_region(out.averaged.region, u, opts);
    out.optimal_rates = out.region_fw.solution;
    out.optimal_utility = out.region_fw.value;

    out.greedy_eval = evaluate_policy(s, fm, RatePolicy::greedy(u), u, n, seed);
    out.greedy_utility = u.value(out.greedy_eval.mean_rates);
    out.gap = out.optimal_utility - out.greedy_utility;

    // delta method through the mean-rate estimate
    const std::vector<double> grad = u.gradient(out.greedy_eval.mean_rates);
    double var = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double t = grad[i] * out.greedy_eval.rate_se[i];
        var += t * t;
    }
    out.gap_se = std::sqrt(var);
    return out;
}

}  // namespace macalloc
