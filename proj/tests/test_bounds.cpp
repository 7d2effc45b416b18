#include <cmath>
#include <vector>

#include "doctest.h"
#include "macalloc/bounds.hpp"

using namespace macalloc;

namespace {

const Scenario kTwoUser{2, {1.0, 1.0}, 1.0};

SquareMatrix diag2(double a, double b) {
    SquareMatrix k(2);
    k.at(0, 0) = a;
    k.at(1, 1) = b;
    return k;
}

}  // namespace

TEST_CASE("sigma_H^2: scalar example, zero covariance, monotone shrinkage") {
    const Scenario s{1, {1.0}, 1.0};
    const std::vector<double> mean{1.0};
    SquareMatrix k(1);
    k.at(0, 0) = 0.01;

    // independent evaluation of the defining expression
    const double root = std::sqrt(2.0 * std::log(2.0)) - 0.5 * std::sqrt(0.01);
    const double expect = 0.25 * 0.01 * (1.0 + std::pow(2.0 * root, 2.0));
    const double got = sigma_h_squared(s, mean, k);
    CHECK(got == doctest::Approx(expect).epsilon(1e-14));
    CHECK(std::abs(got - 0.015211) <= 1e-6);

    k.at(0, 0) = 0.0;
    CHECK(sigma_h_squared(s, mean, k) == 0.0);

    // scaling the covariance down drives the constant to zero monotonically
    const std::vector<double> mean2{1.0, 1.0};
    const SquareMatrix base = diag2(1.0 / 12.0, 1.0 / 12.0);
    double prev = 1e300;
    for (double c : {1.0, 0.5, 0.25, 0.125, 0.0625, 0.01, 1e-4, 1e-6}) {
        const double v = sigma_h_squared(kTwoUser, mean2, base.scaled(c));
        CHECK(v < prev);
        prev = v;
    }
    CHECK(prev <= 1e-5);

    SquareMatrix bad = diag2(1.0, 1.0);
    bad.at(0, 1) = bad.at(1, 0) = 2.0;
    CHECK_THROWS_AS(sigma_h_squared(kTwoUser, mean2, bad), DomainError);
}

TEST_CASE("per-subset variance bounds sum to sigma_H^2 and dominate Monte Carlo") {
    const std::vector<double> mean{1.0, 0.8};
    const SquareMatrix k = diag2(0.05, 0.02);

    CHECK(variance_bound_ys(kTwoUser, 0b01, mean, SquareMatrix(2)) == 0.0);

    double total = 0.0;
    for (std::uint32_t mask = 1; mask <= 3; ++mask)
        total += variance_bound_ys(kTwoUser, mask, mean, k);
    CHECK(total == doctest::Approx(sigma_h_squared(kTwoUser, mean, k)).epsilon(1e-12));

    // small-sigma lognormal fading: the bound dominates the sampled variance
    const double sig = 0.15;
    const double mu_ln = -0.5 * sig * sig;  // unit mean
    const FadingModel fm = FadingModel::independent(
        {Marginal::lognormal(mu_ln, sig), Marginal::lognormal(mu_ln, sig)});
    const FadingTrace trace = fm.sample(100000, 37);
    const std::vector<double> mean_ln = fm.mean();
    const SquareMatrix cov_ln = fm.covariance();
    for (std::uint32_t mask = 1; mask <= 3; ++mask) {
        std::vector<double> y(trace.n_samples);
        for (std::size_t i = 0; i < trace.n_samples; ++i) {
            double acc = 0.0;
            for (int j = 0; j < 2; ++j)
                if (mask & (1u << j)) acc += trace.row(i)[static_cast<std::size_t>(j)];
            y[i] = 0.5 * std::log1p(acc);
        }
        const MeanVar mv = mean_var(y);
        std::vector<double> fourth(trace.n_samples);
        for (std::size_t i = 0; i < trace.n_samples; ++i)
            fourth[i] = std::pow(y[i] - mv.mean, 4.0);
        const double var_se = std::sqrt(std::max(
            0.0, (mean_var(fourth).mean - mv.variance * mv.variance) /
                     static_cast<double>(trace.n_samples)));
        CHECK(variance_bound_ys(kTwoUser, mask, mean_ln, cov_ln) >=
              mv.variance - 3.0 * var_se);
    }
}

TEST_CASE("region concentration bound: arithmetic and empirical validity") {
    CHECK(chebyshev_region_bound(0.04, 0.4) == doctest::Approx(0.25));
    CHECK(chebyshev_region_bound(0.04, 40.0) == doctest::Approx(2.5e-5));
    CHECK(chebyshev_region_bound(1.0, 0.5) == 1.0);
    CHECK_THROWS_AS(chebyshev_region_bound(0.1, 0.0), DomainError);

    const double sig = 0.25;
    const FadingModel fm = FadingModel::independent(
        {Marginal::lognormal(-0.5 * sig * sig, sig),
         Marginal::lognormal(-0.5 * sig * sig, sig)});
    const double sigma2 = sigma_h_squared(kTwoUser, fm.mean(), fm.covariance());

    const PolymatroidRegion reference =
        averaged_region(kTwoUser, fm, 200000, 1001).region;
    const std::size_t n = 30000;
    const FadingTrace trace = fm.sample(n, 7);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = trace.row(i);
        dist[i] = hausdorff_distance(
            instantaneous_region(kTwoUser, ChannelState{{row[0], row[1]}}), reference);
    }
    const double sigma = std::sqrt(sigma2);
    for (double delta : {0.5 * sigma, sigma, 1.5 * sigma, 2.5 * sigma, 4.0 * sigma}) {
        std::size_t exceed = 0;
        for (double d : dist)
            if (d > delta) ++exceed;
        const double freq = static_cast<double>(exceed) / static_cast<double>(n);
        const double se = std::sqrt(freq * (1.0 - freq) / static_cast<double>(n));
        CHECK(freq <= chebyshev_region_bound(sigma2, delta) + 3.0 * se + 1e-12);
    }
}

TEST_CASE("optimizer distance bound: arithmetic and sampled validity") {
    CHECK(opt_distance_bound(1.0, 1.0, 0.0) == 0.0);
    CHECK(opt_distance_bound(1.0, 1.0, 0.04) == doctest::Approx(0.24));
    CHECK_THROWS_AS(opt_distance_bound(0.0, 1.0, 0.1), DomainError);

    // paired states: the distance of the two greedy optima obeys the bound
    // with constants certified from the pair itself
    const UtilityFunction u = UtilityFunction::weighted_log({1.0, 1.0}, 0.05);
    Rng rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        const ChannelState h1{{rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4)}};
        const ChannelState h2{{rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4)}};
        const PolymatroidRegion r1 = instantaneous_region(kTwoUser, h1);
        const PolymatroidRegion r2 = instantaneous_region(kTwoUser, h2);
        const double delta = hausdorff_distance(r1, r2);
        const RateVector o1 = greedy_rate(kTwoUser, h1, u);
        const RateVector o2 = greedy_rate(kTwoUser, h2, u);

        // certified Lipschitz constant over both faces via coordinate bounds
        double b2 = 0.0;
        for (int i = 0; i < 2; ++i) {
            const std::uint32_t rest = 3u & ~(1u << i);
            const double lo = std::max(
                0.0, std::min(r1.rank(3) - r1.rank(rest), r2.rank(3) - r2.rank(rest)));
            const double g = 1.0 / (lo + 0.05);
            b2 += g * g;
        }
        const double B = std::sqrt(b2);

        // sampled quadratic-growth constant around each optimum
        double A = 1e300;
        for (const auto& [region, opt] : {std::pair{&r1, &o1}, std::pair{&r2, &o2}}) {
            const auto verts = region->dominant_face_vertices();
            for (int t = 0; t < 400; ++t) {
                const double w = rng.next_open01();
                const double shrink = std::pow(10.0, -2.0 * rng.next_open01());
                RateVector x(2);
                for (std::size_t i = 0; i < 2; ++i) {
                    const double face = w * verts[0][i] + (1.0 - w) * verts[1][i];
                    x[i] = (*opt)[i] + shrink * (face - (*opt)[i]);
                }
                double d2 = 0.0;
                for (std::size_t i = 0; i < 2; ++i)
                    d2 += (x[i] - (*opt)[i]) * (x[i] - (*opt)[i]);
                if (d2 < 1e-10) continue;
                A = std::min(A, std::abs(u.value(*opt) - u.value(x)) / d2);
            }
        }
        double d2 = 0.0;
        for (std::size_t i = 0; i < 2; ++i) d2 += (o1[i] - o2[i]) * (o1[i] - o2[i]);
        CHECK(std::sqrt(d2) <= opt_distance_bound(A, B, delta) + 1e-9);
    }
}

TEST_CASE("constant estimation: exact linear case and log-utility ceiling") {
    const FadingModel fm = FadingModel::independent(
        {Marginal::uniform(0.5, 1.5), Marginal::uniform(0.5, 1.5)});

    const UtilityFunction lin = UtilityFunction::linear({0.6, 0.8});
    const ConstantEstimates le = estimate_constants(kTwoUser, fm, lin, 0.5, 500, 17);
    CHECK(le.lipschitz == doctest::Approx(std::sqrt(0.36 + 0.64)).epsilon(1e-12));

    const UtilityFunction logu = UtilityFunction::weighted_log({1.0, 1.0}, 0.01);
    const ConstantEstimates est = estimate_constants(kTwoUser, fm, logu, 0.5, 500, 17);
    // gradient peaks at rate 0, so the sampled constant sits below w/d
    const double ceiling = std::sqrt(2.0) * 1.0 / 0.01;
    CHECK(est.lipschitz <= ceiling);
    CHECK(est.lipschitz > 0.0);
    CHECK(est.quad_growth_certified);
    CHECK(est.event_states > 0);
}

TEST_CASE("quadratic-growth estimates never increase with the sample count") {
    const FadingModel fm = FadingModel::independent(
        {Marginal::uniform(0.5, 1.5), Marginal::uniform(0.5, 1.5)});
    const UtilityFunction u = UtilityFunction::weighted_log({1.0, 1.0}, 0.01);
    // tiny eps: the event covers every sampled state, so the minimum runs
    // over a growing prefix
    double prev = 1e300;
    for (std::size_t n : {25, 50, 100, 200}) {
        const ConstantEstimates est = estimate_constants(kTwoUser, fm, u, 0.01, n, 21);
        CHECK(est.quad_growth <= prev + 1e-15);
        prev = est.quad_growth;
    }
}

TEST_CASE("parameterized gap bound formulas") {
    // eps = 1 collapses both bounds to the optimal utility
    CHECK(lipschitz_gap_bound(1.0, 2.5, 1.0, 1.0, 0.3) == doctest::Approx(2.5));
    CHECK(curvature_gap_bound(1.0, 2.5, 0.7, 4.0) == doctest::Approx(2.5));

    // no channel variation: the first bound degenerates to eps * u_star
    for (double eps : {0.1, 0.5, 1.0})
        CHECK(lipschitz_gap_bound(eps, 2.0, 1.0, 1.0, 0.0) == doctest::Approx(eps * 2.0));

    // scalar spot checks evaluated independently
    const double delta = 0.01 / std::sqrt(0.04);
    const double expect1 = 0.04 * 1.0 + 0.96 * (std::sqrt(delta) + 1.0) * std::sqrt(delta);
    CHECK(lipschitz_gap_bound(0.04, 1.0, 1.0, 1.0, 0.01) == doctest::Approx(expect1).epsilon(1e-14));
    CHECK(lipschitz_gap_bound(0.04, 1.0, 1.0, 1.0, 0.01) == doctest::Approx(0.302663).epsilon(1e-4));
    CHECK(curvature_gap_bound(0.2, 1.0, 0.5, 2.0) == doctest::Approx(0.4).epsilon(1e-14));

    // linear utility: zero curvature, infimum over eps is zero
    double inf2 = 1e300;
    for (double eps : {0.001, 0.01, 0.1, 1.0})
        inf2 = std::min(inf2, curvature_gap_bound(eps, 2.0, 0.7, 0.0));
    CHECK(inf2 <= 0.002 * 2.0 + 1e-12);

    CHECK_THROWS_AS(lipschitz_gap_bound(0.0, 1.0, 1.0, 1.0, 0.1), DomainError);
    CHECK_THROWS_AS(lipschitz_gap_bound(1.1, 1.0, 1.0, 1.0, 0.1), DomainError);
    CHECK_THROWS_AS(lipschitz_gap_bound(0.5, -1.0, 1.0, 1.0, 0.1), DomainError);
    CHECK_THROWS_AS(curvature_gap_bound(2.0, 1.0, 0.5, 1.0), DomainError);
}

TEST_CASE("r(eps): single-user collapse, point-mass determinism, resimulation") {
    const Scenario s1{1, {1.0}, 1.0};
    const FadingModel f1 = FadingModel::independent({Marginal::uniform(0.5, 1.5)});
    const REpsilonResult one = r_epsilon(s1, f1, 0.25, 0.2, 2000, 3);
    CHECK(one.value == doctest::Approx(0.2 / 0.5).epsilon(1e-12));
    CHECK(one.spread_term == doctest::Approx(0.0));
    CHECK(one.se == 0.0);

    const FadingModel pm = FadingModel::independent(
        {Marginal::point_mass(1.0), Marginal::point_mass(1.0)});
    const REpsilonResult fixed = r_epsilon(kTwoUser, pm, 1.0, 0.0, 500, 9);
    const double width = 0.5 * std::log(4.0 / 3.0);
    CHECK(fixed.value == doctest::Approx(std::sqrt(2.0) * width).epsilon(1e-12));
    CHECK(fixed.se == doctest::Approx(0.0));

    const FadingModel fu = FadingModel::independent(
        {Marginal::uniform(0.5, 1.5), Marginal::uniform(0.5, 1.5)});
    const REpsilonResult a = r_epsilon(kTwoUser, fu, 0.5, 0.3, 20000, 5);
    const REpsilonResult b = r_epsilon(kTwoUser, fu, 0.5, 0.3, 400000, 6);
    CHECK(std::abs(a.value - b.value) <= 3.0 * (a.se + b.se));
}

TEST_CASE("bound sweep: trivial grid, determinism, spread study shape") {
    const FadingModel fm = FadingModel::independent(
        {Marginal::uniform(0.5, 1.5), Marginal::uniform(0.5, 1.5)});
    const UtilityFunction u = UtilityFunction::weighted_log({1.0, 1.0}, 0.01);

    SweepOptions opts;
    opts.constants.states = 60;
    opts.constants.points_per_state = 60;

    const std::vector<double> unit_grid{1.0};
    const BoundReport trivial = bound_sweep(kTwoUser, fm, u, unit_grid, 4000, 51, opts);
    REQUIRE(trivial.rows.size() == 1);
    CHECK(trivial.rows[0].bound2 == doctest::Approx(trivial.u_star).epsilon(1e-12));
    CHECK(trivial.rows[0].min_bound == doctest::Approx(trivial.u_star).epsilon(1e-12));
    if (!trivial.rows[0].vacuous)
        CHECK(trivial.rows[0].bound1 == doctest::Approx(trivial.u_star).epsilon(1e-12));

    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) grid.push_back(i / 10.0);
    opts.cov_scales = {1.0, 0.25, 0.0625};
    const BoundReport a = bound_sweep(kTwoUser, fm, u, grid, 4000, 51, opts);
    const BoundReport b = bound_sweep(kTwoUser, fm, u, grid, 4000, 51, opts);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].min_bound == b.rows[i].min_bound);
        CHECK(a.rows[i].lipschitz == b.rows[i].lipschitz);
    }
    CHECK(a.gap == b.gap);

    // validity: the measured gap sits below every certified row
    for (const BoundRow& row : a.rows)
        CHECK(a.gap <= row.min_bound + 3.0 * a.gap_se + 1e-9);

    // shrinking covariance tightens the spread study monotonically
    REQUIRE(a.figure.size() == 3);
    CHECK(a.figure[0].sigma_h > a.figure[1].sigma_h);
    CHECK(a.figure[1].sigma_h > a.figure[2].sigma_h);
    CHECK(a.figure[0].best_value >= a.figure[1].best_value - 1e-12);
    CHECK(a.figure[1].best_value >= a.figure[2].best_value - 1e-12);
    CHECK(a.figure[0].best_epsilon >= a.figure[1].best_epsilon - 1e-12);
    CHECK(a.figure[1].best_epsilon >= a.figure[2].best_epsilon - 1e-12);

    CHECK_THROWS_AS(bound_sweep(kTwoUser, fm, u, std::vector<double>{}, 100, 1, opts),
                    DomainError);
    CHECK_THROWS_AS(bound_sweep(kTwoUser, fm, u, std::vector<double>{1.5}, 100, 1, opts),
                    DomainError);
}

TEST_CASE("gamma vector zeroes users outside the subset") {
    const Scenario s{3, {2.0, 1.0, 0.5}, 2.0};
    const std::vector<double> g = gamma_vector(s, 0b101);
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == 0.0);
    CHECK(g[2] == doctest::Approx(0.25));
    CHECK_THROWS_AS(gamma_vector(s, 0), DomainError);
}
