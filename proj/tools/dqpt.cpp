// dqpt: command-line front end for the quench diagnostics.
//
//   dqpt <task> [--config FILE] [--lambda-pre X --lambda-post X --beta X --phi X]
//        [--t-min X --t-max X --steps N] [--k-resolution N] [--branch N]
//        [--variant sinh|tanh] [--tol X] [--out PATH] [--jobs N] ...
//
// Values from --config are read first; flags given on the command line
// override them. Exit status: 0 ok, 2 configuration error, 3 numerical
// degradation (output written and flagged in the manifest).

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dqpt/scan_cli.hpp"

namespace {

struct FlagSpec {
    const char* key;
    const char* help;
};

constexpr FlagSpec flag_specs[] = {
    {"lambda-pre", "transverse field before the quench"},
    {"lambda-post", "transverse field after the quench (comma list for sweep)"},
    {"beta", "inverse temperature, or 'inf' for the ground state (comma list for sweep)"},
    {"phi", "relative phase; accepts pi multiples such as -pi/2 (comma list for sweep)"},
    {"coupling", "Ising coupling J (default 1)"},
    {"t-min", "first time sample"},
    {"t-max", "last time sample"},
    {"steps", "number of time samples"},
    {"k-resolution", "momentum samples for zeros and phase profiles"},
    {"variant", "critical-mode condition: sinh (default) or tanh"},
    {"tol", "absolute quadrature tolerance on r(t)"},
    {"out", "output data file (directory for sweep)"},
    {"n-sites", "chain length for rate-finite"},
    {"k", "momentum for echo-decomposition"},
    {"n-max", "last index of the critical-time ladder"},
    {"jobs", "worker threads (default $DQPT_JOBS or 1)"},
    {"cusp-ratio", "cusp detector second-difference ratio"},
    {"cusp-window", "cusp detector half window"},
    {"quenches", "sweep quench list, e.g. 0:0.5,0.5:2,1.5:2"},
    {"max-cells", "upper bound on sweep cells"},
    {"cell-tasks", "extra per-cell sweep outputs, e.g. zeros,winding"},
};

}  // namespace

int main(int argc, char** argv) {
    using namespace dqpt::cli;

    CLI::App app{"Loschmidt-echo diagnostics for quenched transverse-field Ising chains"};
    app.set_version_flag("--version", std::string(dqpt::version_string));

    std::string task;
    std::string config_file;
    std::vector<std::string> branches;
    std::map<std::string, std::string> flags;

    std::string task_help = "one of:";
    for (const auto& [t, name] : task_names) task_help += " " + std::string(name);
    app.add_option("task", task, task_help)->required();
    app.add_option("--config", config_file, "flat 'key = value' config file")->check(CLI::ExistingFile);
    app.add_option("--branch", branches, "Fisher-zero branch n (repeatable)");
    for (const auto& spec : flag_specs) app.add_option(std::string("--") + spec.key, flags[spec.key], spec.help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        KeyValues kv;
        if (!config_file.empty()) kv = load_key_values(config_file);
        set_value(kv, "task", task);
        for (const auto& spec : flag_specs)
            if (app.count(std::string("--") + spec.key) > 0) set_value(kv, spec.key, flags[spec.key]);
        if (!branches.empty()) {
            std::string joined;
            for (std::size_t i = 0; i < branches.size(); ++i) joined += (i ? "," : "") + branches[i];
            set_value(kv, "branch", joined);
        }
        const RunConfig config = config_from(kv);
        return run(config, std::cerr);
    } catch (const ConfigError& e) {
        std::cerr << "dqpt: config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "dqpt: " << e.what() << '\n';
        return exit_numerical;
    }
}
