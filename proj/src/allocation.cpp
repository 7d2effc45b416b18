#include "macalloc/allocation.hpp"

#include <algorithm>
#include <cmath>

namespace macalloc {

void PowerBudget::validate() const {
    if (avg_power.empty()) throw DomainError("power budget must not be empty");
    for (double p : avg_power)
        if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("average power targets must be positive");
}

namespace {

struct ScanUser {
    int idx;
    double mu;
    double cost;   // lambda_i / h_i, the price of one unit of received power
    double z_top;  // interference level where the marginal value hits zero
};

}  // namespace

StateAllocation per_state_allocation(const Scenario& s, const ChannelState& h,
                                     std::span<const double> mu,
                                     std::span<const double> lambda) {
    s.validate();
    h.validate_for(s);
    const int m = s.num_users;
    if (static_cast<int>(mu.size()) != m || static_cast<int>(lambda.size()) != m)
        throw DomainError("weight and multiplier lengths must match the user count");
    for (int i = 0; i < m; ++i) {
        if (!(mu[static_cast<std::size_t>(i)] > 0.0))
            throw DomainError("weights must be positive");
        if (lambda[static_cast<std::size_t>(i)] < 0.0)
            throw DomainError("multipliers must be nonnegative");
        if (lambda[static_cast<std::size_t>(i)] == 0.0 && h.gains[static_cast<std::size_t>(i)] > 0.0)
            throw DomainError("zero power price with a positive gain makes the objective unbounded");
    }

    StateAllocation out;
    out.rates.assign(static_cast<std::size_t>(m), 0.0);
    out.powers.assign(static_cast<std::size_t>(m), 0.0);
    out.decode_intervals.assign(static_cast<std::size_t>(m), {});

    std::vector<ScanUser> users;
    double z_max = 0.0;
    for (int i = 0; i < m; ++i) {
        const double hi = h.gains[static_cast<std::size_t>(i)];
        if (hi <= 0.0) continue;
        const double cost = lambda[static_cast<std::size_t>(i)] / hi;
        const double z_top = mu[static_cast<std::size_t>(i)] / (2.0 * cost) - s.noise;
        if (z_top <= 0.0) continue;  // under water: never worth transmitting
        users.push_back({i, mu[static_cast<std::size_t>(i)], cost, z_top});
        z_max = std::max(z_max, z_top);
    }
    if (users.empty()) return out;

    // The marginal value v_i(z) = mu_i/(2(N0+z)) - cost_i is strictly
    // decreasing, and v_i - v_j is monotone, so the winner is piecewise
    // constant between the zero levels and the pairwise crossings.
    std::vector<double> cuts{0.0, z_max};
    for (const ScanUser& u : users)
        if (u.z_top < z_max) cuts.push_back(u.z_top);
    for (std::size_t a = 0; a < users.size(); ++a) {
        for (std::size_t b = a + 1; b < users.size(); ++b) {
            const double dmu = users[a].mu - users[b].mu;
            const double dcost = users[a].cost - users[b].cost;
            if (dmu == 0.0 || dcost == 0.0) continue;
            const double z = dmu / (2.0 * dcost) - s.noise;
            if (z > 0.0 && z < z_max) cuts.push_back(z);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    auto marginal_value = [&](const ScanUser& u, double z) {
        return u.mu / (2.0 * (s.noise + z)) - u.cost;
    };

    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double lo = cuts[c];
        const double hi = cuts[c + 1];
        const double mid = 0.5 * (lo + hi);
        int winner = -1;
        double best = 0.0;
        for (const ScanUser& u : users) {
            const double v = marginal_value(u, mid);
            if (v > best) {  // strict: ties stay with the lowest index seen first
                best = v;
                winner = u.idx;
            }
        }
        if (winner < 0) continue;
        const double gain = h.gains[static_cast<std::size_t>(winner)];
        out.powers[static_cast<std::size_t>(winner)] += (hi - lo) / gain;
        out.rates[static_cast<std::size_t>(winner)] +=
            0.5 * std::log((s.noise + hi) / (s.noise + lo));
        auto& intervals = out.decode_intervals[static_cast<std::size_t>(winner)];
        if (!intervals.empty() && intervals.back().hi == lo)
            intervals.back().hi = hi;
        else
            intervals.push_back({lo, hi});
    }

    for (int i = 0; i < m; ++i)
        out.objective += mu[static_cast<std::size_t>(i)] * out.rates[static_cast<std::size_t>(i)] -
                         lambda[static_cast<std::size_t>(i)] * out.powers[static_cast<std::size_t>(i)];
    return out;
}

namespace {

void check_allocation_inputs(const Scenario& s, const FadingModel& fm,
                             std::span<const double> mu, std::span<const double> lambda) {
    s.validate();
    const int m = s.num_users;
    if (fm.num_users() != m) throw DomainError("fading model does not match the scenario");
    if (!fm.is_independent())
        throw DomainError("multiplier and boundary integrals require independent fading");
    if (!fm.is_continuous())
        throw DomainError("multiplier and boundary integrals require continuous fading densities");
    if (static_cast<int>(mu.size()) != m || static_cast<int>(lambda.size()) != m)
        throw DomainError("weight and multiplier lengths must match the user count");
    for (int i = 0; i < m; ++i) {
        if (!(mu[static_cast<std::size_t>(i)] > 0.0)) throw DomainError("weights must be positive");
        if (!(lambda[static_cast<std::size_t>(i)] > 0.0)) throw DomainError("multipliers must be positive");
    }
}

// Probability, given user i's own gain h at interference level z, that every
// other user's marginal value sits below user i's. Independence turns this
// into a product of marginal CDFs.
double win_probability(const Scenario& s, const FadingModel& fm, int i, double h, double z,
                       std::span<const double> mu, std::span<const double> lambda) {
    const double base = 2.0 * lambda[static_cast<std::size_t>(i)] * (s.noise + z);
    double prod = 1.0;
    for (int k = 0; k < s.num_users && prod > 0.0; ++k) {
        if (k == i) continue;
        const double denom =
            base + (mu[static_cast<std::size_t>(k)] - mu[static_cast<std::size_t>(i)]) * h;
        if (denom <= 0.0) continue;  // user k loses for every gain value
        const double cut = 2.0 * lambda[static_cast<std::size_t>(k)] * h * (s.noise + z) / denom;
        prod *= fm.cdf(k, cut);
    }
    return prod;
}

// Gaussian elimination with partial pivoting; returns false when singular.
bool solve_linear_system(std::vector<std::vector<double>> a, std::vector<double> b,
                         std::vector<double>& out) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
        std::swap(a[c], a[pivot]);
        std::swap(b[c], b[pivot]);
        if (std::abs(a[c][c]) < 1e-14) return false;
        for (std::size_t r = c + 1; r < n; ++r) {
            const double factor = a[r][c] / a[c][c];
            for (std::size_t cc = c; cc < n; ++cc) a[r][cc] -= factor * a[c][cc];
            b[r] -= factor * b[c];
        }
    }
    out.assign(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t cc = r + 1; cc < n; ++cc) acc -= a[r][cc] * out[cc];
        out[r] = acc / a[r][r];
    }
    return true;
}

// Shared nested integral behind the expected power and the boundary rate:
//   integral over z of outer_weight(z) * integral over h > threshold(z) of
//   inner_weight(h) * prod_k F_k(...) f_i(h) dh.
// The expected power has inner_weight = 1/h (transmit power per unit of
// interference); the rate has outer_weight = 1/(2(N0+z)).
enum class IntegralKind { power, rate };

double user_integral(const Scenario& s, const FadingModel& fm, int i,
                     std::span<const double> mu, std::span<const double> lambda,
                     IntegralKind kind, const QuadratureOptions& quad) {
    const double mu_i = mu[static_cast<std::size_t>(i)];
    const double lam_i = lambda[static_cast<std::size_t>(i)];
    const double h_max = fm.marginal(i).truncation_point();
    const double h_min = fm.marginal(i).support_min();
    const double z_max = mu_i * h_max / (2.0 * lam_i) - s.noise;
    if (z_max <= 0.0) return 0.0;

    const double inner_tol = quad.tol * quad.inner_factor;
    auto integrand_z = [&](double z) {
        // the density is zero below the support edge; clamping the lower
        // limit keeps the inner integrand continuous (a step hiding right
        // next to a panel edge would evade the error estimator)
        const double h_lo =
            std::max(2.0 * lam_i * (s.noise + z) / mu_i, h_min);
        if (h_lo >= h_max) return 0.0;
        auto integrand_h = [&](double h) {
            const double win = win_probability(s, fm, i, h, z, mu, lambda);
            if (win == 0.0) return 0.0;
            const double density = fm.pdf(i, h);
            const double w = (kind == IntegralKind::power) ? 1.0 / h : 1.0;
            return w * win * density;
        };
        // the F_k factors have kinks in h where the competing cut crosses a
        // bounded support edge; splitting there keeps every piece smooth and
        // the panel count low
        std::vector<double> pieces{h_lo, h_max};
        const double base = 2.0 * lam_i * (s.noise + z);
        for (int k = 0; k < s.num_users; ++k) {
            if (k == i || fm.marginal(k).kind() != MarginalKind::uniform) continue;
            for (const double edge : {fm.marginal(k).support_min(),
                                      fm.marginal(k).truncation_point()}) {
                // solve 2 lam_k h (N0+z) / (base + (mu_k - mu_i) h) = edge
                const double denom = 2.0 * lambda[static_cast<std::size_t>(k)] * (s.noise + z) -
                                     edge * (mu[static_cast<std::size_t>(k)] - mu_i);
                if (denom == 0.0) continue;
                const double h_cross = edge * base / denom;
                if (h_cross > h_lo && h_cross < h_max) pieces.push_back(h_cross);
            }
        }
        std::sort(pieces.begin(), pieces.end());
        double inner = 0.0;
        for (std::size_t p = 0; p + 1 < pieces.size(); ++p)
            inner += integrate(integrand_h, pieces[p], pieces[p + 1], inner_tol, inner_tol).value;
        if (kind == IntegralKind::rate) inner /= 2.0 * (s.noise + z);
        return inner;
    };
    // split the outer range where the threshold crosses the support edge:
    // the integrand has a kink there
    const double z_kink = mu_i * h_min / (2.0 * lam_i) - s.noise;
    double total = 0.0;
    if (z_kink > 0.0 && z_kink < z_max) {
        total += integrate(integrand_z, 0.0, z_kink, quad.tol, quad.tol).value;
        total += integrate(integrand_z, z_kink, z_max, quad.tol, quad.tol).value;
    } else {
        total = integrate(integrand_z, 0.0, z_max, quad.tol, quad.tol).value;
    }
    return total;
}

}  // namespace

std::vector<double> expected_power(const Scenario& s, const FadingModel& fm,
                                   std::span<const double> mu,
                                   std::span<const double> lambda,
                                   const QuadratureOptions& quad) {
    check_allocation_inputs(s, fm, mu, lambda);
    std::vector<double> out(static_cast<std::size_t>(s.num_users));
    for (int i = 0; i < s.num_users; ++i)
        out[static_cast<std::size_t>(i)] = user_integral(s, fm, i, mu, lambda,
                                                         IntegralKind::power, quad);
    return out;
}

RateVector boundary_rate(const Scenario& s, const FadingModel& fm,
                         std::span<const double> mu, std::span<const double> lambda,
                         const QuadratureOptions& quad) {
    check_allocation_inputs(s, fm, mu, lambda);
    RateVector out(static_cast<std::size_t>(s.num_users));
    for (int i = 0; i < s.num_users; ++i)
        out[static_cast<std::size_t>(i)] = user_integral(s, fm, i, mu, lambda,
                                                         IntegralKind::rate, quad);
    return out;
}

MultiplierSolution solve_multipliers(const Scenario& s, const FadingModel& fm,
                                     const PowerBudget& budget,
                                     std::span<const double> mu,
                                     const MultiplierOptions& opts) {
    budget.validate();
    if (static_cast<int>(budget.avg_power.size()) != s.num_users)
        throw DomainError("power budget length does not match the user count");

    const int m = s.num_users;
    const std::vector<double> mean_gain = fm.mean();

    MultiplierSolution sol;
    sol.lambda.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        // single-user stationarity at the mean gain as the starting price
        const double p = budget.avg_power[static_cast<std::size_t>(i)];
        sol.lambda[static_cast<std::size_t>(i)] =
            mu[static_cast<std::size_t>(i)] /
            (2.0 * (p + s.noise / std::max(mean_gain[static_cast<std::size_t>(i)], 1e-12)));
    }
    check_allocation_inputs(s, fm, mu, sol.lambda);

    auto residuals = [&](const MultiplierVector& lambda) {
        const std::vector<double> ep = expected_power(s, fm, mu, lambda, opts.quad);
        std::vector<double> r(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i)
            r[static_cast<std::size_t>(i)] =
                ep[static_cast<std::size_t>(i)] / budget.avg_power[static_cast<std::size_t>(i)] - 1.0;
        sol.expected_powers = ep;
        return r;
    };
    auto max_abs = [](const std::vector<double>& v) {
        double x = 0.0;
        for (double e : v) x = std::max(x, std::abs(e));
        return x;
    };

    // Phase 1: damped multiplicative fixed point. E[p_i] is decreasing in
    // lambda_i, so pushing lambda by (E[p]/target)^damping contracts when the
    // log-log slope of E[p] in lambda is moderate. When the slope is steep
    // (deep waterfilling) the iteration oscillates, so a stall detector
    // hands over to bisection early instead of burning the budget.
    std::vector<double> res;
    double best_residual = 1e300;
    int since_improvement = 0;
    for (int it = 0; it < opts.fixed_point_iters; ++it) {
        res = residuals(sol.lambda);
        sol.max_rel_residual = max_abs(res);
        ++sol.iterations;
        if (sol.max_rel_residual <= opts.rel_tol) return sol;
        if (sol.max_rel_residual < 0.7 * best_residual) {
            best_residual = sol.max_rel_residual;
            since_improvement = 0;
        } else if (++since_improvement >= 6) {
            break;
        }
        for (int i = 0; i < m; ++i) {
            const double ratio = std::clamp(res[static_cast<std::size_t>(i)] + 1.0, 0.0625, 16.0);
            sol.lambda[static_cast<std::size_t>(i)] *= std::pow(ratio, opts.damping);
        }
    }

    // Phase 2: damped Newton on log-prices with a finite-difference
    // Jacobian. Cross-user coupling through the win probabilities makes
    // plain coordinate sweeps converge slowly (tens of sweeps measured on
    // two-user cases), while Newton lands in a handful of steps.
    {
        std::vector<double> x(sol.lambda.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::log(sol.lambda[i]);
        auto log_residuals = [&](const std::vector<double>& logs) {
            MultiplierVector lam(logs.size());
            for (std::size_t i = 0; i < logs.size(); ++i) lam[i] = std::exp(logs[i]);
            return residuals(lam);
        };
        std::vector<double> f = log_residuals(x);
        double fnorm = max_abs(f);
        for (int it = 0; it < 20 && fnorm > opts.rel_tol; ++it) {
            ++sol.iterations;
            const double step = 1e-5;
            std::vector<std::vector<double>> jac(x.size(), std::vector<double>(x.size()));
            for (std::size_t j = 0; j < x.size(); ++j) {
                std::vector<double> xs = x;
                xs[j] += step;
                const std::vector<double> fs = log_residuals(xs);
                for (std::size_t i = 0; i < x.size(); ++i) jac[i][j] = (fs[i] - f[i]) / step;
            }
            std::vector<double> direction;
            if (!solve_linear_system(jac, f, direction)) break;
            bool accepted = false;
            for (double t = 1.0; t >= 0.0625; t *= 0.5) {
                std::vector<double> xt = x;
                for (std::size_t i = 0; i < x.size(); ++i)
                    xt[i] -= t * std::clamp(direction[i], -2.0, 2.0);
                const std::vector<double> ft = log_residuals(xt);
                if (max_abs(ft) < fnorm) {
                    x = xt;
                    f = ft;
                    fnorm = max_abs(f);
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
        }
        for (std::size_t i = 0; i < x.size(); ++i) sol.lambda[i] = std::exp(x[i]);
        sol.max_rel_residual = fnorm;
        if (fnorm <= opts.rel_tol) return sol;
    }

    // Phase 3: Gauss-Seidel sweeps of coordinate-wise bisection, each solve
    // stopped by the power residual itself. Safety net for cases where the
    // Jacobian is ill-conditioned; monotonicity of E[p_i] in lambda_i makes
    // these sweeps robust if slow.
    sol.used_bisection = true;
    for (int sweep = 0; sweep < opts.bisection_sweeps; ++sweep) {
        for (int i = 0; i < m; ++i) {
            const double target = budget.avg_power[static_cast<std::size_t>(i)];
            auto coordinate_residual = [&](double li) {
                MultiplierVector lam = sol.lambda;
                lam[static_cast<std::size_t>(i)] = li;
                return user_integral(s, fm, i, mu, lam, IntegralKind::power, opts.quad) -
                       target;
            };
            const double stop = 0.3 * opts.rel_tol * target;
            double lo = sol.lambda[static_cast<std::size_t>(i)];
            double hi = lo;
            double f_lo = coordinate_residual(lo);
            double f_hi = f_lo;
            int guard = 0;
            while (f_lo < 0.0 && guard++ < 60) {  // too expensive: price down
                hi = lo;
                f_hi = f_lo;
                lo *= 0.5;
                f_lo = coordinate_residual(lo);
            }
            guard = 0;
            while (f_hi > 0.0 && guard++ < 60) {  // too cheap: price up
                lo = hi;
                f_lo = f_hi;
                hi *= 2.0;
                f_hi = coordinate_residual(hi);
            }
            double mid = sol.lambda[static_cast<std::size_t>(i)];
            for (int step = 0; step < 80 && (hi - lo) > 1e-12 * hi; ++step) {
                mid = 0.5 * (lo + hi);
                const double f_mid = coordinate_residual(mid);
                if (std::abs(f_mid) <= stop) break;
                if (f_mid > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            sol.lambda[static_cast<std::size_t>(i)] = mid;
        }
        res = residuals(sol.lambda);
        sol.max_rel_residual = max_abs(res);
        ++sol.iterations;
        if (sol.max_rel_residual <= opts.rel_tol) return sol;
    }
    throw ConvergenceError("multiplier solve did not reach the requested residual", res);
}

}  // namespace macalloc
