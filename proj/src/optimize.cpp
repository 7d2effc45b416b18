#include "macalloc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace macalloc {

std::vector<int> greedy_order(std::span<const double> mu) {
    std::vector<int> order(mu.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return mu[static_cast<std::size_t>(a)] > mu[static_cast<std::size_t>(b)];
    });
    return order;
}

RateVector maximize_linear(const PolymatroidRegion& region, std::span<const double> mu) {
    if (static_cast<int>(mu.size()) != region.num_users())
        throw DomainError("weight vector length does not match the region");
    bool any_positive = false;
    for (double m : mu) {
        if (m < 0.0 || !std::isfinite(m)) throw DomainError("weights must be nonnegative and finite");
        if (m > 0.0) any_positive = true;
    }
    if (!any_positive) throw DomainError("weights must not be all zero");
    return region.vertex(greedy_order(mu));
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct StepResult {
    double alpha;
    bool ok;
};

StepResult choose_step(const UtilityFunction& u, const RateVector& r,
                       const RateVector& direction, double gap, const FWOptions& opts) {
    const std::size_t n = r.size();
    auto at = [&](double alpha) {
        RateVector x(n);
        for (std::size_t i = 0; i < n; ++i)
            x[i] = std::max(0.0, r[i] + alpha * direction[i]);
        return u.value(x);
    };
    if (opts.rule == StepRule::armijo) {
        const double base = u.value(r);
        double alpha = 1.0;
        for (int t = 0; t < 80; ++t) {
            if (at(alpha) >= base + opts.armijo_sigma * alpha * gap) return {alpha, true};
            alpha *= opts.armijo_beta;
        }
        return {0.0, false};
    }
    const double alpha = golden_max(at, 0.0, 1.0, opts.line_search_tol);
    if (at(alpha) < at(0.0)) return {0.0, false};
    return {alpha, true};
}

// Core conditional-gradient loop. `on_step` is invoked with the accepted
// stepsize after each move, letting a wrapper maintain a mixture certificate.
FWReport fw_loop(const LinearOracle& oracle, const UtilityFunction& u, RateVector r,
                 const FWOptions& opts, const std::function<void(double)>& on_step) {
    if (static_cast<int>(r.size()) != u.dim())
        throw DomainError("start point length does not match the utility");
    if (!(opts.gap_tol > 0.0)) throw DomainError("gap tolerance must be positive");

    FWReport rep;
    rep.rule = opts.rule;
    const std::size_t n = r.size();

    for (int k = 0; k <= opts.max_iter; ++k) {
        const std::vector<double> grad = u.gradient(r);
        const RateVector target = oracle(grad);
        ++rep.oracle_calls;
        RateVector direction(n);
        for (std::size_t i = 0; i < n; ++i) direction[i] = target[i] - r[i];
        const double gap = dot(grad, direction);
        if (opts.record_trajectory) {
            rep.utility_trajectory.push_back(u.value(r));
            rep.gap_trajectory.push_back(gap);
            rep.iterate_trajectory.push_back(r);
        }
        rep.gap = gap;
        if (gap <= opts.gap_tol) {
            rep.converged = true;
            break;
        }
        if (k == opts.max_iter) break;
        const StepResult step = choose_step(u, r, direction, gap, opts);
        if (!step.ok || step.alpha <= 0.0) break;  // stalled line search
        for (std::size_t i = 0; i < n; ++i)
            r[i] = std::max(0.0, r[i] + step.alpha * direction[i]);
        if (on_step) on_step(step.alpha);
        ++rep.iterations;
    }
    rep.solution = std::move(r);
    rep.value = u.value(rep.solution);
    return rep;
}

}  // namespace

FWReport frank_wolfe(const LinearOracle& oracle, const UtilityFunction& u,
                     RateVector start, const FWOptions& opts) {
    return fw_loop(oracle, u, std::move(start), opts, nullptr);
}

FWReport frank_wolfe_region(const PolymatroidRegion& region, const UtilityFunction& u,
                            const FWOptions& opts) {
    if (u.dim() != region.num_users())
        throw DomainError("utility dimension does not match the region");

    std::map<std::vector<int>, double> mixture;
    std::vector<int> last_order;
    auto oracle = [&](std::span<const double> mu) {
        last_order = greedy_order(mu);
        return region.vertex(last_order);
    };

    const std::vector<double> ones(static_cast<std::size_t>(region.num_users()), 1.0);
    const std::vector<int> start_order = greedy_order(ones);
    mixture[start_order] = 1.0;

    FWReport rep = fw_loop(oracle, u, region.vertex(start_order), opts, [&](double alpha) {
        for (auto& [order, w] : mixture) w *= (1.0 - alpha);
        mixture[last_order] += alpha;
    });

    double total = 0.0;
    for (auto& [order, w] : mixture) {
        if (w > 1e-15) {
            rep.vertex_mixture.emplace_back(order, w);
            total += w;
        }
    }
    for (auto& [order, w] : rep.vertex_mixture) w /= total;
    return rep;
}

std::vector<double> recover_linearization(const UtilityFunction& u,
                                          std::span<const double> solution) {
    return u.gradient(solution);
}

}  // namespace macalloc
