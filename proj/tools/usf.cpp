#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "usf/experiment.hpp"

// Exit codes: 0 success, 1 a verification inside the run failed,
// 2 invalid config or arguments, 3 refused by the memory budget, 4 runtime error.
int main(int argc, char** argv)
{
    CLI::App app{"Uniform spanning forest experiments"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;

    const char* kinds[] = {"validate", "forest-exponents", "dimensions", "interlacement-tests", "sandpile"};
    for (const char* k : kinds) {
        auto* sub = app.add_subcommand(k, std::string("run an experiment of kind ") + k);
        auto* opt = sub->add_option("--config", config_path, "experiment config file (INI)")->check(CLI::ExistingFile);
        if (std::string(k) != "validate")
            opt->required();
        sub->add_option("--seed", seed, "override the master seed");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string kind = app.get_subcommands().front()->get_name();

    try {
        usf::ExperimentConfig cfg = config_path.empty() ? usf::parse_config("[experiment]\nkind = validate\n")
                                                        : usf::load_config(config_path);
        if (kind != usf::kind_name(cfg.kind)) {
            std::cerr << "error: subcommand '" << kind << "' does not match config kind '"
                      << usf::kind_name(cfg.kind) << "'\n";
            return 2;
        }
        if (seed)
            cfg.seed = *seed;
        const auto out = usf::run_experiment(cfg, std::cerr);
        std::cout << out.summary["fits"].dump(2) << '\n';
        return out.status;
    } catch (const usf::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const usf::BudgetError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
