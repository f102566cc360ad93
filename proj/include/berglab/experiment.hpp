#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "berglab/construct.hpp"
#include "berglab/cyclolab.hpp"

namespace berglab {

struct ConfigError : UsageError {
    using UsageError::UsageError;
};

struct ExperimentConfig {
    std::string weight_family = "double_exp";  // unit, single_exp, double_exp, csv
    double weight_c = 1, weight_beta = 1;
    std::string weight_csv;
    ConstructConfig construct;
    int moments_max_n = 64;
    double lattice_kappa = std::exp(-5.0), lattice_x = 12, lattice_r = 0.5, lattice_eps = 0.01,
           lattice_perturbed_eps = 0.02;
    std::uint64_t lattice_seed = 7;
    double pair_offset = 4;
    int pair_max_degree = 100;
    SmoothnessConfig smooth;
    AMesh resolvent_mesh;
    int cyclicity_max_degree = 200;
    int gram_levels_per_octave = 2;
    std::string out_dir = "berglab_out";  // not part of the hash
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& p);
nlohmann::json config_to_json(const ExperimentConfig& c, bool with_outputs = true);
std::string config_hash(const ExperimentConfig& c);  // SHA-256 of the canonical serialization
std::string sha256_hex(const std::string& data);
RadialWeight make_weight(const ExperimentConfig& c);

nlohmann::json number(double v);  // non-finite values become strings
nlohmann::json report_json(const std::string& name, const BlockReport& r);
nlohmann::json report_json(const std::string& name, const Lemma51Report& r);

extern const std::vector<std::string> kSubcommands;

struct RunResult {
    int exit_code = 0;
    std::vector<std::filesystem::path> artifacts;
    std::vector<std::string> failures;  // "report/check"
};
// writes artifacts under out; exit 0 when every check passes or is below regime, 1 otherwise
RunResult run_subcommand(const std::string& name, const ExperimentConfig& c, const std::filesystem::path& out,
                         std::ostream& log);

}  // namespace berglab
