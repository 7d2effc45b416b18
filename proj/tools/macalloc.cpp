#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "macalloc/runner.hpp"

namespace {

int run(const std::string& command, const std::string& config_path,
        const std::string& out_override, unsigned threads, bool print_config) {
    using namespace macalloc;
    if (threads > 0) set_max_threads(threads);
    const ScenarioConfig cfg = load_scenario_config(config_path);
    if (print_config) {
        std::cout << cfg.canonical.dump(2) << "\n";
        return 0;
    }
    const std::string out_dir = out_override.empty() ? cfg.out_dir : out_override;
    const std::vector<std::string> files = run_command(command, cfg, out_dir);
    for (const std::string& f : files) std::cout << out_dir << "/" << f << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rate and power allocation for fading multiple-access channels"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    unsigned threads = 0;
    bool print_config = false;

    for (const char* name : {"regions", "optimize", "boundary", "simulate", "bounds"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "scenario config file (TOML or JSON)")
            ->required();
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--threads", threads, "cap the worker count (results unchanged)");
        sub->add_flag("--print-config", print_config,
                      "print the defaults-applied config and exit");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, config_path, out_dir, threads, print_config);
    } catch (const macalloc::ConfigError& e) {
        std::cerr << "config error";
        if (!e.field.empty()) std::cerr << " [" << e.field << "]";
        std::cerr << ": " << e.what() << "\n";
        return 2;
    } catch (const macalloc::ModeError& e) {
        std::cerr << "mode mismatch: " << e.what() << "\n";
        return 3;
    } catch (const macalloc::ConvergenceError& e) {
        std::cerr << "solver did not converge: " << e.what() << "\nresiduals:";
        for (double r : e.residuals) std::cerr << ' ' << r;
        std::cerr << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
