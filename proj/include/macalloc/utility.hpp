#pragma once

#include <span>
#include <string>
#include <vector>

#include "macalloc/core.hpp"

namespace macalloc {

enum class UtilityKind { linear, weighted_log, alpha_fair };

// Concave, componentwise strictly increasing utilities over rate vectors.
// Shifted kinds use u_i(0) = 0, so every built-in is nonnegative on the
// orthant; the shift d > 0 also keeps them differentiable at the origin.
//
//   linear(mu):        sum_i mu_i R_i
//   weighted_log(w,d): sum_i w_i log((R_i + d) / d)
//   alpha_fair(w,a,d): sum_i w_i ((R_i+d)^(1-a) - d^(1-a)) / (1-a),  a != 1
//
// alpha_fair tends to weighted_log as a -> 1 and is constructed as
// weighted_log at a == 1.
class UtilityFunction {
  public:
    static UtilityFunction linear(std::vector<double> mu);
    static UtilityFunction weighted_log(std::vector<double> weights, double shift = 0.01);
    static UtilityFunction alpha_fair(std::vector<double> weights, double alpha,
                                      double shift = 0.01);

    UtilityKind kind() const { return kind_; }
    bool is_linear() const { return kind_ == UtilityKind::linear; }
    int dim() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    double alpha() const { return alpha_; }
    double shift() const { return shift_; }

    double value(std::span<const double> rates) const;
    std::vector<double> gradient(std::span<const double> rates) const;

    // Upper bound on the largest eigenvalue of -hessian over the ball of
    // radius `radius` around `center`, intersected with the orthant. The
    // built-ins are separable, so the bound is exact per coordinate.
    double max_neg_hessian_eig(std::span<const double> center, double radius) const;

    // sup of -u_i'' over R_i >= lo (the curvature decreases in R_i)
    double coordinate_curvature(int i, double lo) const;

    std::string describe() const;

  private:
    UtilityFunction(UtilityKind kind, std::vector<double> weights, double alpha, double shift);
    void check_rates(std::span<const double> rates) const;

    UtilityKind kind_;
    std::vector<double> weights_;
    double alpha_;
    double shift_;
};

}  // namespace macalloc
