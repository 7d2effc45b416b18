// Acceptance suite: one check per shipped guarantee, each printed as a
// single PASS/FAIL line with its runtime. Returns the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"
#include "macalloc/allocation.hpp"
#include "macalloc/bounds.hpp"
#include "macalloc/config.hpp"
#include "macalloc/policy.hpp"
#include "macalloc/runner.hpp"

using namespace macalloc;
namespace fs = std::filesystem;

namespace {

struct Check {
    std::string name;
    double limit_seconds;
    std::function<bool(std::string&)> body;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

PolymatroidRegion random_region(int m, Rng& rng) {
    Scenario s{m, std::vector<double>(static_cast<std::size_t>(m)), rng.uniform(0.5, 2.0)};
    ChannelState h{std::vector<double>(static_cast<std::size_t>(m))};
    for (double& p : s.powers) p = rng.uniform(0.5, 2.0);
    for (double& g : h.gains) g = rng.uniform(0.0, 2.0);
    return instantaneous_region(s, h);
}

// ---------------------------------------------------------------------
// 1. greedy linear maximization equals vertex enumeration
// ---------------------------------------------------------------------
bool check_greedy_optimality(std::string& detail) {
    Rng rng(1001);
    double worst = 0.0;
    for (int m : {2, 3, 4}) {
        for (int trial = 0; trial < 100; ++trial) {
            const PolymatroidRegion r = random_region(m, rng);
            const auto vertices = r.dominant_face_vertices();
            for (int w = 0; w < 10; ++w) {
                std::vector<double> mu(static_cast<std::size_t>(m));
                for (double& x : mu) x = rng.uniform(1e-3, 1.0);
                const double greedy = dot(mu, maximize_linear(r, mu));
                double brute = -1e300;
                for (const RateVector& v : vertices) brute = std::max(brute, dot(mu, v));
                worst = std::max(worst, std::abs(greedy - brute));
            }
        }
    }
    detail = "max |greedy - enumeration| = " + format_double(worst);
    return worst <= 1e-9;
}

// ---------------------------------------------------------------------
// 2. per-state allocation vs power-grid brute force
// ---------------------------------------------------------------------
bool check_per_state_oracle(std::string& detail) {
    Rng rng(2002);
    const Scenario s{2, {1.0, 1.0}, 1.0};
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const ChannelState h{{rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5)}};
        const std::vector<double> mu{rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)};
        const std::vector<double> lambda{rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0)};
        const StateAllocation scan = per_state_allocation(s, h, mu, lambda);

        double z_top = 0.0;
        for (int i = 0; i < 2; ++i)
            z_top = std::max(z_top, mu[static_cast<std::size_t>(i)] *
                                            h.gains[static_cast<std::size_t>(i)] /
                                            (2.0 * lambda[static_cast<std::size_t>(i)]) -
                                        1.0);
        double best = 0.0;
        const int steps = 400;
        Scenario sp = s;
        for (int a = 0; a <= steps; ++a) {
            for (int b = 0; b <= steps; ++b) {
                sp.powers = {z_top * a / steps / h.gains[0], z_top * b / steps / h.gains[1]};
                const RateVector r = maximize_linear(instantaneous_region(sp, h), mu);
                double obj = 0.0;
                for (std::size_t i = 0; i < 2; ++i)
                    obj += mu[i] * r[i] - lambda[i] * sp.powers[i];
                best = std::max(best, obj);
            }
        }
        worst = std::max(worst, std::abs(scan.objective - best));
        if (scan.objective < best - 1e-9) {
            detail = "scan fell below the grid by " + format_double(best - scan.objective);
            return false;
        }
    }
    detail = "max |scan - grid| = " + format_double(worst);
    return worst <= 1e-3;
}

// ---------------------------------------------------------------------
// 3. single-user waterfilling closed form
// ---------------------------------------------------------------------
bool check_waterfilling(std::string& detail) {
    const Scenario s{1, {1.0}, 1.0};
    const FadingModel fm = FadingModel::independent({Marginal::uniform(1.0, 2.0)});
    const MultiplierSolution sol =
        solve_multipliers(s, fm, PowerBudget{{1.0}}, std::vector<double>{1.0});
    const RateVector r = boundary_rate(s, fm, std::vector<double>{1.0}, sol.lambda);

    // closed-form oracle: every gain is above water, so E[p] = 1/(2 lambda)
    // - E[1/h] pins lambda, and 1 + h p(h) = h / (2 lambda) gives the rate
    const double a = 1.0 + std::log(2.0);
    const double lambda_oracle = 1.0 / (2.0 * a);
    const double rate_oracle = 0.5 * (std::log(a) + 2.0 * std::log(2.0) - 1.0);
    const bool lambda_ok = std::abs(sol.lambda[0] - lambda_oracle) <= 1e-4 * lambda_oracle &&
                           std::abs(sol.lambda[0] - 0.295297) <= 1e-4 * 0.295297;
    const bool rate_ok = std::abs(r[0] - rate_oracle) <= 1e-4 * rate_oracle;

    const std::size_t n = 100000;
    const FadingTrace trace = fm.sample(n, 3003);
    std::vector<double> powers(n);
    for (std::size_t k = 0; k < n; ++k)
        powers[k] = per_state_allocation(s, ChannelState{{trace.row(k)[0]}},
                                         std::vector<double>{1.0}, sol.lambda)
                        .powers[0];
    const MeanVar mv = mean_var(powers);
    const bool power_ok = std::abs(mv.mean - 1.0) <= 3.0 * mv.se;

    detail = "lambda = " + format_double(sol.lambda[0]) + ", R = " + format_double(r[0]) +
             ", E[p] = " + format_double(mv.mean) + " (SE " + format_double(mv.se) + ")";
    return lambda_ok && rate_ok && power_ok;
}

// ---------------------------------------------------------------------
// 4. conditional gradient on the symmetric fixed-power region
// ---------------------------------------------------------------------
bool check_frank_wolfe(std::string& detail) {
    const Scenario s{2, {1.0, 1.0}, 1.0};
    const PolymatroidRegion region = instantaneous_region(s, ChannelState{{1.0, 1.0}});
    const UtilityFunction u = UtilityFunction::weighted_log({1.0, 1.0}, 0.01);

    FWOptions opts;
    opts.gap_tol = 1e-6;
    opts.max_iter = 10000;
    const FWReport rep = frank_wolfe_region(region, u, opts);
    const double target = 0.274653;
    bool ok = rep.converged && rep.gap <= 1e-6 && rep.iterations <= 10000 &&
              std::abs(rep.solution[0] - target) <= 1e-5 &&
              std::abs(rep.solution[1] - target) <= 1e-5;
    for (std::size_t k = 1; k < rep.utility_trajectory.size(); ++k)
        ok = ok && rep.utility_trajectory[k] >= rep.utility_trajectory[k - 1] - 1e-12;

    const UtilityFunction lin = UtilityFunction::linear({2.0, 1.0});
    const FWReport linrep = frank_wolfe_region(region, lin, opts);
    ok = ok && linrep.converged && linrep.iterations <= 1;

    detail = "R = (" + format_double(rep.solution[0]) + ", " + format_double(rep.solution[1]) +
             "), gap = " + format_double(rep.gap) +
             ", iters = " + std::to_string(rep.iterations) +
             ", linear iters = " + std::to_string(linrep.iterations);
    return ok;
}

// ---------------------------------------------------------------------
// 5. relation chain between the witness, greedy and optimal quantities
// ---------------------------------------------------------------------
bool check_jensen_chain(std::string& detail) {
    const Scenario s{2, {1.0, 1.0}, 1.0};
    const FadingModel fm = FadingModel::independent(
        {Marginal::uniform(0.5, 1.5), Marginal::uniform(0.5, 1.5)});
    const std::size_t n = 100000;
    const std::uint64_t seed = 5005;

    const UtilityFunction u = UtilityFunction::weighted_log({1.0, 1.0}, 0.01);
    const GapResult gap = performance_gap(s, fm, u, n, seed);
    const RatePolicy witness = RatePolicy::vertex_mixture(gap.region_fw.vertex_mixture);
    const PolicyEvaluation wit = evaluate_policy(s, fm, witness, u, n, seed);
    const PolicyEvaluation greedy = gap.greedy_eval;

    const double se_wg = 3.0 * (wit.utility_se + greedy.utility_se);
    bool ok = wit.mean_utility <= greedy.mean_utility + se_wg;
    ok = ok && greedy.mean_utility <= greedy.utility_of_mean + 3.0 * greedy.utility_se;
    ok = ok && greedy.utility_of_mean <= gap.optimal_utility + 3.0 * greedy.utility_se + 1e-8;

    // linear utility: all four quantities coincide up to noise
    const UtilityFunction lin = UtilityFunction::linear({1.0, 1.3});
    const GapResult lgap = performance_gap(s, fm, lin, n, seed);
    const RatePolicy lwitness = RatePolicy::vertex_mixture(lgap.region_fw.vertex_mixture);
    const PolicyEvaluation lwit = evaluate_policy(s, fm, lwitness, lin, n, seed);
    const double tol = 3.0 * (lwit.utility_se + lgap.greedy_eval.utility_se) + 1e-9;
    ok = ok && std::abs(lwit.mean_utility - lgap.greedy_eval.mean_utility) <= tol;
    ok = ok && std::abs(lgap.greedy_eval.mean_utility - lgap.greedy_eval.utility_of_mean) <= tol;
    ok = ok && std::abs(lgap.greedy_eval.utility_of_mean - lgap.optimal_utility) <= tol;

    detail = "E[u(wit)] = " + format_double(wit.mean_utility) +
             " <= E[u(greedy)] = " + format_double(greedy.mean_utility) +
             " <= u(E[greedy]) = " + format_double(greedy.utility_of_mean) +
             " <= u(R*) = " + format_double(gap.optimal_utility);
    return ok;
}

// ---------------------------------------------------------------------
// 6. region concentration bound validity plus the scalar spot value
// ---------------------------------------------------------------------
bool check_chebyshev(std::string& detail) {
    const Scenario s1{1, {1.0}, 1.0};
    SquareMatrix k1(1);
    k1.at(0, 0) = 0.01;
    const double spot = sigma_h_squared(s1, std::vector<double>{1.0}, k1);
    if (std::abs(spot - 0.015211) > 1e-6) {
        detail = "scalar sigma^2 = " + format_double(spot);
        return false;
    }

    const Scenario s{2, {1.0, 1.0}, 1.0};
    double worst_margin = 1e300;
    for (double sig : {0.2, 0.4, 0.8}) {
        const double mu_ln = -0.5 * sig * sig;  // unit-mean lognormal
        const FadingModel fm = FadingModel::independent(
            {Marginal::lognormal(mu_ln, sig), Marginal::lognormal(mu_ln, sig)});
        const double sigma2 = sigma_h_squared(s, fm.mean(), fm.covariance());
        const double sigma = std::sqrt(sigma2);

        const PolymatroidRegion reference =
            averaged_region(s, fm, 200000, 606060).region;
        const std::size_t n = 100000;
        const FadingTrace trace = fm.sample(n, 6006);
        std::vector<double> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = trace.row(i);
            dist[i] = hausdorff_distance(
                instantaneous_region(s, ChannelState{{row[0], row[1]}}), reference);
        }
        const double grid[10] = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
        for (double factor : grid) {
            const double delta = factor * sigma;
            std::size_t exceed = 0;
            for (double d : dist)
                if (d > delta) ++exceed;
            const double freq = static_cast<double>(exceed) / static_cast<double>(n);
            const double se = std::sqrt(freq * (1.0 - freq) / static_cast<double>(n));
            const double bound = chebyshev_region_bound(sigma2, delta);
            worst_margin = std::min(worst_margin, bound + 3.0 * se - freq);
            if (freq > bound + 3.0 * se + 1e-12) {
                detail = "violated at sigma = " + format_double(sig) +
                         ", delta = " + format_double(delta);
                return false;
            }
        }
    }
    detail = "scalar sigma^2 = " + format_double(spot) +
             ", min bound margin = " + format_double(worst_margin);
    return true;
}

// ---------------------------------------------------------------------
// 7. theorem validity and the covariance-scale study
// ---------------------------------------------------------------------
bool check_bound_sweep(std::string& detail) {
    const Scenario s{2, {1.0, 1.0}, 1.0};
    const FadingModel fm = FadingModel::independent(
        {Marginal::uniform(0.5, 1.5), Marginal::uniform(0.5, 1.5)});
    const UtilityFunction u = UtilityFunction::weighted_log({1.0, 1.0}, 0.01);

    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(i / 20.0);
    SweepOptions opts;
    opts.cov_scales = {1.0, 0.25, 0.0625};
    const BoundReport rep = bound_sweep(s, fm, u, grid, 20000, 7007, opts);

    bool ok = true;
    std::size_t certified = 0;
    for (const BoundRow& row : rep.rows) {
        if (!row.vacuous) {
            ++certified;
            ok = ok && rep.gap <= std::min(row.bound1, row.bound2) + 3.0 * rep.gap_se;
        }
        ok = ok && rep.gap <= row.bound2 + 3.0 * rep.gap_se;
    }
    ok = ok && certified > 0;

    // the study across shrinking covariance: both the minimized bound and
    // its minimizer shrink with sigma_H
    ok = ok && rep.figure.size() == 3;
    for (std::size_t c = 1; c < rep.figure.size(); ++c) {
        ok = ok && rep.figure[c].sigma_h < rep.figure[c - 1].sigma_h;
        ok = ok && rep.figure[c].best_value <= rep.figure[c - 1].best_value + 1e-12;
        ok = ok && rep.figure[c].best_epsilon <= rep.figure[c - 1].best_epsilon + 1e-12;
    }

    detail = "gap = " + format_double(rep.gap) + " (SE " + format_double(rep.gap_se) +
             "), certified rows = " + std::to_string(certified) + "/20, min bounds = {" +
             format_double(rep.figure[0].best_value) + ", " +
             format_double(rep.figure[1].best_value) + ", " +
             format_double(rep.figure[2].best_value) + "}";
    return ok;
}

// ---------------------------------------------------------------------
// 8. gradient and curvature certificates
// ---------------------------------------------------------------------
bool check_gradients(std::string& detail) {
    Rng rng(8008);
    const std::vector<UtilityFunction> set{
        UtilityFunction::linear({2.0, 1.0, 0.5}),
        UtilityFunction::weighted_log({1.0, 2.0, 1.5}, 0.01),
        UtilityFunction::alpha_fair({1.0, 1.0, 1.0}, 2.0, 0.01),
        UtilityFunction::alpha_fair({0.5, 1.5, 1.0}, 0.5, 0.05)};
    double worst_rel = 0.0;
    for (const UtilityFunction& u : set) {
        for (int t = 0; t < 100; ++t) {
            std::vector<double> r(3);
            for (double& x : r) x = rng.uniform(0.0, 2.0);
            const std::vector<double> g = u.gradient(r);
            for (std::size_t i = 0; i < 3; ++i) {
                const double h = 1e-4 * (r[i] + (u.is_linear() ? 1.0 : u.shift()));
                std::vector<double> up = r, dn = r;
                up[i] += h;
                dn[i] = std::max(0.0, dn[i] - h);
                const double fd = (u.value(up) - u.value(dn)) / (up[i] - dn[i]);
                worst_rel = std::max(worst_rel, std::abs(g[i] - fd) / std::abs(g[i]));
            }
        }
        // curvature certificate over 1000 ball points
        const std::vector<double> center{1.0, 0.8, 1.2};
        const double radius = 0.6;
        const double omega = u.max_neg_hessian_eig(center, radius);
        for (int t = 0; t < 1000; ++t) {
            std::vector<double> xi(3);
            double norm2 = 0.0;
            for (double& x : xi) {
                x = rng.uniform(-1.0, 1.0);
                norm2 += x * x;
            }
            const double scale = radius * rng.next_open01() / std::sqrt(norm2);
            for (std::size_t i = 0; i < 3; ++i) {
                const double point = std::max(0.0, center[i] + scale * xi[i]);
                if (u.coordinate_curvature(static_cast<int>(i), point) > omega * (1.0 + 1e-12)) {
                    detail = "curvature certificate violated";
                    return false;
                }
            }
        }
    }
    detail = "max relative gradient error = " + format_double(worst_rel);
    return worst_rel <= 1e-6;
}

// ---------------------------------------------------------------------
// 9. CLI determinism
// ---------------------------------------------------------------------
std::string file_text(const fs::path& p) {
    std::stringstream ss;
    ss << std::ifstream(p).rdbuf();
    return ss.str();
}

bool check_cli_determinism(std::string& detail) {
    const char* cli = std::getenv("MACALLOC_CLI");
    if (cli == nullptr) {
        detail = "MACALLOC_CLI not set";
        return false;
    }
    const fs::path dir = fs::temp_directory_path() / "macalloc_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const std::string fixed_cfg = R"(
[scenario]
users = 2
power = [1.0, 1.0]
noise = 1.0
mode = "fixed-power"
seed = 99
samples = 1500

[fading]
type = "uniform"
low = 0.5
high = 1.5

[utility]
type = "weighted_log"
weights = [1.0, 1.0]
shift = 0.01

[regions]
states = [[1.0, 1.0], [0.7, 1.2]]

[bounds]
epsilon_grid = [0.5, 1.0]
cov_scales = [1.0, 0.25]
constant_states = 40
points_per_state = 40
)";
    const std::string pc_cfg = R"(
[scenario]
users = 1
avg_power = [1.0]
noise = 1.0
mode = "power-control"
seed = 99
samples = 500

[fading]
type = "uniform"
low = 1.0
high = 2.0

[utility]
type = "linear"
mu = [1.0]
)";
    {
        std::ofstream f(dir / "fixed.toml");
        f << fixed_cfg;
        std::ofstream g(dir / "pc.toml");
        g << pc_cfg;
    }

    auto run = [&](const std::string& cmd, const std::string& cfg, const fs::path& out) {
        const std::string line = std::string(cli) + " " + cmd + " --config " +
                                 (dir / cfg).string() + " --out " + out.string() +
                                 " > /dev/null 2>&1";
        const int status = std::system(line.c_str());
        return WIFEXITED(status) && WEXITSTATUS(status) == 0;
    };

    const std::vector<std::pair<std::string, std::string>> runs{
        {"regions", "fixed.toml"}, {"optimize", "fixed.toml"}, {"simulate", "fixed.toml"},
        {"bounds", "fixed.toml"},  {"boundary", "pc.toml"},    {"optimize", "pc.toml"}};
    for (const auto& [cmd, cfg] : runs) {
        const fs::path out1 = dir / (cmd + "_" + cfg + "_1");
        const fs::path out2 = dir / (cmd + "_" + cfg + "_2");
        if (!run(cmd, cfg, out1) || !run(cmd, cfg, out2)) {
            detail = "command failed: " + cmd + " (" + cfg + ")";
            return false;
        }
        for (const auto& entry : fs::directory_iterator(out1)) {
            const std::string name = entry.path().filename().string();
            if (name == "manifest.json") {
                nlohmann::json a = nlohmann::json::parse(file_text(entry.path()));
                nlohmann::json b = nlohmann::json::parse(file_text(out2 / name));
                a.erase("started_at");
                a.erase("finished_at");
                b.erase("started_at");
                b.erase("finished_at");
                if (a != b) {
                    detail = "manifest mismatch for " + cmd;
                    return false;
                }
            } else if (file_text(entry.path()) != file_text(out2 / name)) {
                detail = "byte mismatch in " + cmd + "/" + name;
                return false;
            }
        }
    }
    detail = "6 command runs byte-identical";
    return true;
}

}  // namespace

int main() {
    const std::vector<Check> checks{
        {"1. polymatroid greedy equals vertex enumeration", 10.0, check_greedy_optimality},
        {"2. per-state allocation matches the power-grid oracle", 120.0, check_per_state_oracle},
        {"3. single-user waterfilling closed form", 30.0, check_waterfilling},
        {"4. conditional gradient on the symmetric region", 10.0, check_frank_wolfe},
        {"5. witness/greedy/optimal relation chain", 120.0, check_jensen_chain},
        {"6. region concentration bound validity", 120.0, check_chebyshev},
        {"7. performance bounds and covariance-scale study", 300.0, check_bound_sweep},
        {"8. gradient and curvature certificates", 10.0, check_gradients},
        {"9. CLI reruns are byte-identical", 600.0, check_cli_determinism},
    };

    int failures = 0;
    for (const Check& check : checks) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool pass = false;
        try {
            pass = check.body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (seconds > check.limit_seconds) {
            pass = false;
            detail += " [over the " + format_double(check.limit_seconds) + " s budget]";
        }
        std::printf("[%s] %-55s (%6.2f s) %s\n", pass ? "PASS" : "FAIL", check.name.c_str(),
                    seconds, detail.c_str());
        if (!pass) ++failures;
    }
    if (failures == 0)
        std::printf("all %zu acceptance checks passed\n", checks.size());
    else
        std::printf("%d acceptance check(s) failed\n", failures);
    return failures;
}
