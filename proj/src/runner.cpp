#include "macalloc/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "macalloc/allocation.hpp"
#include "macalloc/bounds.hpp"
#include "macalloc/policy.hpp"

namespace macalloc {

namespace {

namespace fs = std::filesystem;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class OutputWriter {
  public:
    OutputWriter(const std::string& command, const ScenarioConfig& cfg,
                 const std::string& out_dir)
        : command_(command), cfg_(cfg), dir_(out_dir), started_(iso_timestamp()) {
        fs::create_directories(dir_);
    }

    std::ofstream open(const std::string& name) {
        files_.push_back(name);
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw DomainError("cannot write output file: " + (dir_ / name).string());
        return out;
    }

    void write_json(const std::string& name, const nlohmann::json& j) {
        std::ofstream out = open(name);
        out << j.dump(2) << "\n";
    }

    std::vector<std::string> finish() {
        nlohmann::json manifest;
        manifest["command"] = command_;
        manifest["config_hash"] = config_hash(cfg_.canonical);
        manifest["version"] = kVersion;
        manifest["started_at"] = started_;
        manifest["finished_at"] = iso_timestamp();
        std::vector<std::string> files = files_;
        std::sort(files.begin(), files.end());
        manifest["files"] = files;
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << "\n";
        files.push_back("manifest.json");
        return files;
    }

  private:
    std::string command_;
    const ScenarioConfig& cfg_;
    fs::path dir_;
    std::string started_;
    std::vector<std::string> files_;
};

void require_mode(const ScenarioConfig& cfg, RunMode wanted, const std::string& command) {
    if (cfg.mode != wanted) {
        const char* need = wanted == RunMode::fixed_power ? "fixed-power" : "power-control";
        throw ModeError("command '" + command + "' requires mode = \"" + need + "\"");
    }
}

std::string csv_row(std::span<const double> values) {
    std::string row;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) row += ',';
        row += format_double(values[i]);
    }
    return row;
}

nlohmann::json json_vector(std::span<const double> v) {
    return nlohmann::json(std::vector<double>(v.begin(), v.end()));
}

// ---------------------------------------------------------------------------
// regions
// ---------------------------------------------------------------------------
void cmd_regions(const ScenarioConfig& cfg, OutputWriter& out) {
    require_mode(cfg, RunMode::fixed_power, "regions");
    const FadingModel fm = cfg.fading();

    std::vector<std::vector<double>> states = cfg.region_states;
    if (states.empty()) states.push_back(fm.mean());
    for (std::size_t k = 0; k < states.size(); ++k) {
        const PolymatroidRegion region =
            instantaneous_region(cfg.scenario, ChannelState{states[k]});
        nlohmann::json j = region.to_json();
        j["state"] = states[k];
        out.write_json("instantaneous_" + std::to_string(k) + ".json", j);
    }

    const AveragedRegion averaged = averaged_region(cfg.scenario, fm, cfg.samples, cfg.seed);
    out.write_json("averaged.json", averaged.region.to_json());

    nlohmann::json se = nlohmann::json::object();
    for (std::uint32_t mask = 1; mask <= averaged.region.full_mask(); ++mask)
        se[subset_key(mask)] = averaged.rank_se[mask - 1];
    out.write_json("averaged_se.json",
                   nlohmann::json{{"M", cfg.scenario.num_users},
                                  {"rank_se", se},
                                  {"n_samples", averaged.n_samples},
                                  {"seed", averaged.seed}});
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------
void write_fw_outputs(OutputWriter& out, const FWReport& rep, const UtilityFunction& u,
                      const std::string& mode, const nlohmann::json& extra) {
    std::ofstream csv = out.open("fw_trace.csv");
    csv << "iter,utility,gap";
    for (std::size_t i = 0; i < rep.solution.size(); ++i) csv << ",R_" << (i + 1);
    csv << "\n";
    for (std::size_t k = 0; k < rep.gap_trajectory.size(); ++k) {
        csv << k << ',' << format_double(rep.utility_trajectory[k]) << ','
            << format_double(rep.gap_trajectory[k]) << ','
            << csv_row(rep.iterate_trajectory[k]) << "\n";
    }

    nlohmann::json summary;
    summary["mode"] = mode;
    summary["solution"] = json_vector(rep.solution);
    summary["value"] = rep.value;
    summary["gap"] = rep.gap;
    summary["iterations"] = rep.iterations;
    summary["oracle_calls"] = rep.oracle_calls;
    summary["converged"] = rep.converged;
    summary["step_rule"] = rep.rule == StepRule::armijo ? "armijo" : "limited-max";
    summary["mu_star"] = json_vector(recover_linearization(u, rep.solution));
    for (const auto& [key, value] : extra.items()) summary[key] = value;
    out.write_json("fw_summary.json", summary);
}

void cmd_optimize(const ScenarioConfig& cfg, OutputWriter& out) {
    const FadingModel fm = cfg.fading();
    const UtilityFunction u = cfg.utility();
    FWOptions opts;
    opts.rule = cfg.solver.step_rule;
    opts.gap_tol = cfg.solver.gap_tol;
    opts.max_iter = cfg.solver.max_iter;

    if (cfg.mode == RunMode::fixed_power) {
        const AveragedRegion averaged =
            averaged_region(cfg.scenario, fm, cfg.samples, cfg.seed);
        const FWReport rep = frank_wolfe_region(averaged.region, u, opts);
        nlohmann::json extra;
        extra["region"] = averaged.region.to_json();
        write_fw_outputs(out, rep, u, "fixed-power", extra);
        return;
    }

    // power control: the linear oracle solves the multiplier equations for
    // each gradient direction, memoized on the normalized direction
    const PowerBudget budget = cfg.budget();
    MultiplierOptions mopts;
    mopts.rel_tol = cfg.solver.power_rel_tol;
    mopts.quad.tol = cfg.solver.quad_tol;
    std::map<std::vector<double>, std::pair<MultiplierVector, RateVector>> memo;
    auto oracle = [&](std::span<const double> mu) {
        double norm = 0.0;
        for (double v : mu) norm += v * v;
        norm = std::sqrt(norm);
        std::vector<double> dir(mu.begin(), mu.end());
        for (double& v : dir) v /= norm;
        const auto hit = memo.find(dir);
        if (hit != memo.end()) return hit->second.second;
        const MultiplierSolution sol = solve_multipliers(cfg.scenario, fm, budget, dir, mopts);
        const RateVector r = boundary_rate(cfg.scenario, fm, dir, sol.lambda, mopts.quad);
        memo.emplace(std::move(dir), std::make_pair(sol.lambda, r));
        return r;
    };

    const std::vector<double> ones(static_cast<std::size_t>(cfg.scenario.num_users), 1.0);
    const RateVector start = oracle(ones);
    const FWReport rep = frank_wolfe(oracle, u, start, opts);

    // prices consistent with the final direction, for the record
    const std::vector<double> mu_star = recover_linearization(u, rep.solution);
    double norm = 0.0;
    for (double v : mu_star) norm += v * v;
    std::vector<double> dir = mu_star;
    for (double& v : dir) v /= std::sqrt(norm);
    const MultiplierSolution final_sol =
        solve_multipliers(cfg.scenario, fm, budget, dir, mopts);
    nlohmann::json extra;
    extra["lambda_star"] = json_vector(final_sol.lambda);
    extra["expected_power"] = json_vector(final_sol.expected_powers);
    extra["power_residual"] = final_sol.max_rel_residual;
    write_fw_outputs(out, rep, u, "power-control", extra);
}

// ---------------------------------------------------------------------------
// boundary
// ---------------------------------------------------------------------------
void cmd_boundary(const ScenarioConfig& cfg, OutputWriter& out) {
    require_mode(cfg, RunMode::power_control, "boundary");
    const FadingModel fm = cfg.fading();
    const PowerBudget budget = cfg.budget();
    const int m = cfg.scenario.num_users;

    std::vector<std::vector<double>> directions = cfg.boundary_mu;
    if (directions.empty())
        directions.push_back(std::vector<double>(static_cast<std::size_t>(m), 1.0));

    MultiplierOptions mopts;
    mopts.rel_tol = cfg.solver.power_rel_tol;
    mopts.quad.tol = cfg.solver.quad_tol;

    std::ofstream csv = out.open("boundary.csv");
    for (int i = 1; i <= m; ++i) csv << "mu_" << i << ",";
    for (int i = 1; i <= m; ++i) csv << "lambda_" << i << ",";
    for (int i = 1; i <= m; ++i) csv << "R_" << i << ",";
    csv << "residual\n";
    for (const auto& mu : directions) {
        const MultiplierSolution sol = solve_multipliers(cfg.scenario, fm, budget, mu, mopts);
        const RateVector r = boundary_rate(cfg.scenario, fm, mu, sol.lambda, mopts.quad);
        csv << csv_row(mu) << ',' << csv_row(sol.lambda) << ',' << csv_row(r) << ','
            << format_double(sol.max_rel_residual) << "\n";
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
void cmd_simulate(const ScenarioConfig& cfg, OutputWriter& out) {
    require_mode(cfg, RunMode::fixed_power, "simulate");
    const FadingModel fm = cfg.fading();
    const UtilityFunction u = cfg.utility();

    RatePolicy policy = RatePolicy::greedy(u, cfg.solver.gap_tol);
    if (cfg.simulate.policy == "linear_greedy")
        policy = RatePolicy::linear_greedy(cfg.simulate.policy_mu);
    else if (cfg.simulate.policy == "fixed")
        policy = RatePolicy::fixed(cfg.simulate.policy_rates);

    const PolicySamples samples =
        run_policy(cfg.scenario, fm, policy, u, cfg.samples, cfg.seed);
    const PolicyEvaluation eval = summarize_samples(samples, u);

    const std::size_t m = static_cast<std::size_t>(cfg.scenario.num_users);
    std::ofstream csv = out.open("samples.csv");
    csv << "sample";
    for (std::size_t i = 1; i <= m; ++i) csv << ",h_" << i;
    for (std::size_t i = 1; i <= m; ++i) csv << ",R_" << i;
    csv << ",u\n";
    for (std::size_t k = 0; k < samples.trace.n_samples; ++k) {
        csv << k << ',' << csv_row(samples.trace.row(k)) << ','
            << csv_row({samples.rates.data() + k * m, m}) << ','
            << format_double(samples.utilities[k]) << "\n";
    }

    // gap against the utility optimum of the averaged region (same trace)
    const AveragedRegion averaged = averaged_region_from_trace(cfg.scenario, samples.trace);
    FWOptions fw;
    fw.gap_tol = cfg.solver.gap_tol;
    fw.record_trajectory = false;
    const FWReport rep = frank_wolfe_region(averaged.region, u, fw);

    nlohmann::json summary;
    summary["policy"] = policy.name();
    summary["n_samples"] = eval.n_samples;
    summary["seed"] = eval.seed;
    summary["mean_rates"] = json_vector(eval.mean_rates);
    summary["rate_se"] = json_vector(eval.rate_se);
    summary["mean_utility"] = eval.mean_utility;
    summary["utility_se"] = eval.utility_se;
    summary["utility_of_mean"] = eval.utility_of_mean;
    summary["optimal_rates"] = json_vector(rep.solution);
    summary["optimal_utility"] = rep.value;
    summary["gap"] = rep.value - eval.utility_of_mean;
    out.write_json("summary.json", summary);
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------
void cmd_bounds(const ScenarioConfig& cfg, OutputWriter& out) {
    require_mode(cfg, RunMode::fixed_power, "bounds");
    const FadingModel fm = cfg.fading();
    const UtilityFunction u = cfg.utility();

    SweepOptions opts;
    opts.fw_gap_tol = cfg.solver.gap_tol;
    opts.cov_scales = cfg.bounds.cov_scales;
    opts.constants.states = cfg.bounds.constant_states;
    opts.constants.points_per_state = cfg.bounds.points_per_state;

    const BoundReport rep = bound_sweep(cfg.scenario, fm, u, cfg.bounds.epsilon_grid,
                                        cfg.samples, cfg.seed, opts);

    std::ofstream csv = out.open("bounds.csv");
    csv << "epsilon,delta,A,B,r,omega,bound1,bound2,min_bound,gap,gap_se,vacuous_flag\n";
    for (const BoundRow& row : rep.rows) {
        csv << format_double(row.epsilon) << ',' << format_double(row.delta) << ','
            << format_double(row.quad_growth) << ',' << format_double(row.lipschitz) << ','
            << format_double(row.r) << ',' << format_double(row.omega) << ','
            << format_double(row.bound1) << ',' << format_double(row.bound2) << ','
            << format_double(row.min_bound) << ',' << format_double(rep.gap) << ','
            << format_double(rep.gap_se) << ',' << (row.vacuous ? 1 : 0) << "\n";
    }

    std::ofstream fig = out.open("figure1.csv");
    fig << "cov_scale,sigma_h,epsilon,bound1,bound2,min_bound\n";
    for (const FigureCurve& curve : rep.figure) {
        for (std::size_t g = 0; g < curve.epsilon.size(); ++g) {
            fig << format_double(curve.cov_scale) << ',' << format_double(curve.sigma_h)
                << ',' << format_double(curve.epsilon[g]) << ','
                << format_double(curve.bound1[g]) << ',' << format_double(curve.bound2[g])
                << ',' << format_double(curve.min_bound[g]) << "\n";
        }
    }

    nlohmann::json summary;
    summary["sigma_h2"] = rep.sigma_h2;
    summary["sigma_h"] = rep.sigma_h;
    summary["clamped_subsets"] = rep.clamped_subsets;
    summary["u_star"] = rep.u_star;
    summary["optimal_rates"] = json_vector(rep.optimal_rates);
    summary["gap"] = rep.gap;
    summary["gap_se"] = rep.gap_se;
    summary["best_bound"] = rep.best_value;
    summary["best_epsilon"] = rep.best_epsilon;
    summary["omega_method"] = "closed-form";
    summary["note"] = "powers normalized by the noise level inside r(eps)";
    nlohmann::json curves = nlohmann::json::array();
    for (const FigureCurve& curve : rep.figure)
        curves.push_back({{"cov_scale", curve.cov_scale},
                          {"sigma_h", curve.sigma_h},
                          {"best_bound", curve.best_value},
                          {"best_epsilon", curve.best_epsilon}});
    summary["curves"] = curves;
    out.write_json("bounds_summary.json", summary);
}

}  // namespace

std::vector<std::string> run_command(const std::string& command, const ScenarioConfig& cfg,
                                     const std::string& out_dir) {
    OutputWriter out(command, cfg, out_dir);
    if (command == "regions")
        cmd_regions(cfg, out);
    else if (command == "optimize")
        cmd_optimize(cfg, out);
    else if (command == "boundary")
        cmd_boundary(cfg, out);
    else if (command == "simulate")
        cmd_simulate(cfg, out);
    else if (command == "bounds")
        cmd_bounds(cfg, out);
    else
        throw ConfigError("unknown command '" + command + "'");
    return out.finish();
}

}  // namespace macalloc
