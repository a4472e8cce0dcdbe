#pragma once

#include "cmjx/criteria.hpp"
#include "cmjx/genealogy.hpp"
#include "cmjx/intensity.hpp"
#include "cmjx/reproduction.hpp"
#include "cmjx/smoothing.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmjx::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int
{
    kOk = 0,
    kValidation = 2,
    kRuntime = 3,
};

class ValidationError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct CriteriaConfig
{
    std::vector<std::string> tests;
    double eps = 0.5;
    IntegralTestOptions integral;
    double delta_probe = 0.5;
    LiminfOptions liminf;
    ASequence sequence;
    GwveVariant variant = GwveVariant::Exact;
    double delta_var = 0.5;
    std::uint64_t n_terms = 0;
    double psi_delta = 0.5;
    std::uint64_t psi_n = 0;
    double delta_tail = 0.25;
    double quantile_delta = 1.0;
    double quantile_t0 = 1.0;
    std::optional<double> quantile_c;
};

struct GwveConfig
{
    EnvSpec env;
    std::uint64_t max_gen = 0;
    BigCount pop_cap;
    std::uint64_t runs = 0;
    std::uint64_t kersting_terms = 0;
};

struct DwassConfig
{
    OffspringLaw offspring;
    std::uint64_t n_max = 0;
    std::uint64_t samples = 0;
    std::uint64_t cap = 0;
};

/// A parsed, validated experiment. `effective` holds every block the
/// experiment reads, with defaults filled in; it is echoed into outputs.
struct ExperimentConfig
{
    std::string kind;  // empty when validating a file without one
    std::uint64_t seed = 0;
    nlohmann::json effective;

    IntensityModel model;
    std::optional<IntensityModel> model_prime;
    ReproductionLaw law;
    OffspringLaw law_offspring;       // the law block's count, for amini
    DisplacementLaw law_displacement;
    GenealogyConfig genealogy;
    std::uint64_t replicas = 0;
    Profile grid;
    IterateOptions iterate;
    double start_shift = 0.0;
    std::uint64_t mc_samples = 0;
    CriteriaConfig criteria;
    GwveConfig gwve;
    DwassConfig dwass;
    std::string out_dir = ".";
};

const std::vector<std::string>& experiment_kinds();

/// Parses TOML text. `kind` (if non-empty) must agree with a `kind` key in
/// the file. Throws ValidationError.
ExperimentConfig parse_config(const std::string& text, const std::string& kind,
                              std::optional<std::uint64_t> seed_override = std::nullopt);

ExperimentConfig load_config(const std::string& path, const std::string& kind,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

nlohmann::json to_json(const CriterionReport& r);

/// Runs the experiment and writes its files into cfg.out_dir.
/// Returns the paths written.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg, unsigned threads);

/// Entry point of the command-line tool.
int main(int argc, char** argv);

}  // namespace cmjx::cli
