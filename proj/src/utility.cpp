#include "macalloc/utility.hpp"

#include <algorithm>
#include <cmath>

namespace macalloc {

UtilityFunction::UtilityFunction(UtilityKind kind, std::vector<double> weights,
                                 double alpha, double shift)
    : kind_(kind), weights_(std::move(weights)), alpha_(alpha), shift_(shift) {
    if (weights_.empty()) throw DomainError("utility requires at least one weight");
    for (double w : weights_)
        if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("utility weights must be positive");
    if (kind_ != UtilityKind::linear) {
        if (!(shift_ > 0.0)) throw DomainError("utility shift must be positive");
    }
    if (kind_ == UtilityKind::alpha_fair && !(alpha_ > 0.0))
        throw DomainError("alpha must be positive");
}

UtilityFunction UtilityFunction::linear(std::vector<double> mu) {
    return UtilityFunction(UtilityKind::linear, std::move(mu), 0.0, 0.0);
}

UtilityFunction UtilityFunction::weighted_log(std::vector<double> weights, double shift) {
    return UtilityFunction(UtilityKind::weighted_log, std::move(weights), 1.0, shift);
}

UtilityFunction UtilityFunction::alpha_fair(std::vector<double> weights, double alpha,
                                            double shift) {
    if (std::abs(alpha - 1.0) < 1e-12) return weighted_log(std::move(weights), shift);
    return UtilityFunction(UtilityKind::alpha_fair, std::move(weights), alpha, shift);
}

void UtilityFunction::check_rates(std::span<const double> rates) const {
    if (static_cast<int>(rates.size()) != dim())
        throw DomainError("rate vector length does not match the utility");
    for (double r : rates)
        if (r < 0.0 || !std::isfinite(r)) throw DomainError("rates must be nonnegative and finite");
}

double UtilityFunction::value(std::span<const double> rates) const {
    check_rates(rates);
    double v = 0.0;
    switch (kind_) {
        case UtilityKind::linear:
            for (std::size_t i = 0; i < weights_.size(); ++i) v += weights_[i] * rates[i];
            break;
        case UtilityKind::weighted_log:
            for (std::size_t i = 0; i < weights_.size(); ++i)
                v += weights_[i] * std::log((rates[i] + shift_) / shift_);
            break;
        case UtilityKind::alpha_fair: {
            const double e = 1.0 - alpha_;
            const double base = std::pow(shift_, e);
            for (std::size_t i = 0; i < weights_.size(); ++i)
                v += weights_[i] * (std::pow(rates[i] + shift_, e) - base) / e;
            break;
        }
    }
    return v;
}

std::vector<double> UtilityFunction::gradient(std::span<const double> rates) const {
    check_rates(rates);
    std::vector<double> g(weights_.size());
    switch (kind_) {
        case UtilityKind::linear:
            g = weights_;
            break;
        case UtilityKind::weighted_log:
            for (std::size_t i = 0; i < weights_.size(); ++i)
                g[i] = weights_[i] / (rates[i] + shift_);
            break;
        case UtilityKind::alpha_fair:
            for (std::size_t i = 0; i < weights_.size(); ++i)
                g[i] = weights_[i] * std::pow(rates[i] + shift_, -alpha_);
            break;
    }
    return g;
}

double UtilityFunction::coordinate_curvature(int i, double lo) const {
    lo = std::max(lo, 0.0);
    const double w = weights_[static_cast<std::size_t>(i)];
    switch (kind_) {
        case UtilityKind::linear:
            return 0.0;
        case UtilityKind::weighted_log:
            return w / ((lo + shift_) * (lo + shift_));
        case UtilityKind::alpha_fair:
            return w * alpha_ * std::pow(lo + shift_, -alpha_ - 1.0);
    }
    return 0.0;
}

double UtilityFunction::max_neg_hessian_eig(std::span<const double> center,
                                            double radius) const {
    if (static_cast<int>(center.size()) != dim())
        throw DomainError("center length does not match the utility");
    if (radius < 0.0) throw DomainError("radius must be nonnegative");
    double omega = 0.0;
    for (int i = 0; i < dim(); ++i) {
        const double lo = std::max(0.0, center[static_cast<std::size_t>(i)] - radius);
        omega = std::max(omega, coordinate_curvature(i, lo));
    }
    return omega;
}

std::string UtilityFunction::describe() const {
    switch (kind_) {
        case UtilityKind::linear: return "linear";
        case UtilityKind::weighted_log: return "weighted_log";
        case UtilityKind::alpha_fair: return "alpha_fair";
    }
    return "?";
}

}  // namespace macalloc
