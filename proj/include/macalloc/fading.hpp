#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "macalloc/core.hpp"

namespace macalloc {

enum class MarginalKind { exponential, uniform, lognormal, point_mass };

// One user's stationary fading law. Gains are dimensionless power gains, so
// every supported law lives on [0, inf).
class Marginal {
  public:
    static Marginal exponential(double mean);         // Rayleigh power fading
    static Marginal uniform(double lo, double hi);
    static Marginal lognormal(double mu, double sigma);  // underlying normal params
    static Marginal point_mass(double value);

    MarginalKind kind() const { return kind_; }
    bool continuous() const { return kind_ != MarginalKind::point_mass; }

    double mean() const;
    double variance() const;
    double cdf(double x) const;
    double pdf(double x) const;          // throws for point masses
    double quantile(double p) const;     // p in (0,1)

    // Upper truncation point used when an integral over the support must be
    // cut off: the 1 - 1e-8 quantile (exact upper end for bounded supports).
    double truncation_point() const;

    // Lower end of the support. Integrals must start here: the density is
    // discontinuous at the edge, and quadrature panels must not straddle it.
    double support_min() const;

    double param1() const { return p1_; }
    double param2() const { return p2_; }

  private:
    Marginal(MarginalKind kind, double p1, double p2) : kind_(kind), p1_(p1), p2_(p2) {}
    MarginalKind kind_;
    double p1_;
    double p2_;
};

// Matrix of sampled gains, n_samples x num_users, reproducible from the seed.
struct FadingTrace {
    std::size_t n_samples = 0;
    int num_users = 0;
    std::uint64_t seed = 0;
    std::vector<double> data;  // row-major

    std::span<const double> row(std::size_t k) const {
        return {data.data() + k * static_cast<std::size_t>(num_users),
                static_cast<std::size_t>(num_users)};
    }
    // column summary for user i
    std::vector<double> column(int i) const;
    void write_csv(std::ostream& os) const;  // sample_index,h_1,...,h_M
};

// Per-user stationary law plus optional cross-user coupling. Cross-user
// dependence is a Gaussian copula calibrated so the resulting covariance
// matches a caller-supplied target; time correlation is not modeled
// (samples are i.i.d. across the trace).
class FadingModel {
  public:
    static FadingModel independent(std::vector<Marginal> marginals);
    // `target_cov` must have the marginal variances on its diagonal; the
    // copula correlations are solved numerically and the achieved covariance
    // is Monte Carlo validated at construction.
    static FadingModel gaussian_copula(std::vector<Marginal> marginals,
                                       SquareMatrix target_cov);

    int num_users() const { return static_cast<int>(marginals_.size()); }
    bool is_independent() const { return !copula_.has_value(); }
    bool is_continuous() const;
    const Marginal& marginal(int i) const { return marginals_[static_cast<std::size_t>(i)]; }

    // Marginal CDF/PDF as used by the multiplier and boundary integrals.
    // Only meaningful under independent coupling; correlated models refuse.
    double cdf(int i, double x) const;
    double pdf(int i, double x) const;
    double quantile(int i, double p) const;

    std::vector<double> mean() const;
    SquareMatrix covariance() const;

    std::vector<double> draw(std::uint64_t seed, std::uint64_t index) const;
    FadingTrace sample(std::size_t n, std::uint64_t seed) const;

    // copula correlation between users i and j (1 on the diagonal);
    // exposed for tests
    double copula_correlation(int i, int j) const;

  private:
    explicit FadingModel(std::vector<Marginal> marginals) : marginals_(std::move(marginals)) {}
    void require_independent(const char* op) const;

    std::vector<Marginal> marginals_;
    struct Copula {
        SquareMatrix correlation;  // unit diagonal
        SquareMatrix chol;         // lower factor of `correlation`
        SquareMatrix target_cov;
    };
    std::optional<Copula> copula_;
};

// Product moment E[X_i X_j] when (X_i, X_j) are the given marginals coupled
// through a bivariate Gaussian copula with correlation rho. Exposed for the
// calibration tests.
double copula_product_moment(const Marginal& mi, const Marginal& mj, double rho);

}  // namespace macalloc
