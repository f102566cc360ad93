#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "berglab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Numerical lab for large weighted Bergman spaces"};
    app.require_subcommand(1, 1);
    std::string config_path, out_dir;
    const std::map<std::string, std::string> about{
        {"moments", "weight moments Omega(n) to moments.csv"},
        {"regularize", "convex regularization of the weight exponent"},
        {"lattice-verify", "lattice, Blaschke comparator and interpolation checks"},
        {"construct", "multi-level construction of F with its checks"},
        {"pair", "interleaved pair and the distance between the two functions"},
        {"smooth", "smoothness functional and resolvent integral checks"},
        {"cyclicity", "polynomial approximation distances for F and a cyclic control"},
        {"all", "every subcommand in order"}};
    for (auto& name : berglab::kSubcommands) {
        auto* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides outputs.dir)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    std::string name = app.get_subcommands().front()->get_name();
    try {
        berglab::worker_count();
        auto cfg = config_path.empty() ? berglab::ExperimentConfig{} : berglab::load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        auto res = berglab::run_subcommand(name, cfg, cfg.out_dir, std::cerr);
        for (auto& f : res.failures) std::cerr << "failed: " << f << "\n";
        return res.exit_code;
    } catch (const berglab::UsageError& e) {
        std::cerr << "berglab: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "berglab: " << e.what() << "\n";
        return 1;
    }
}
