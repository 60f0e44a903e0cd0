#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "mponet/analysis.hpp"
#include "mponet/network.hpp"

namespace mponet {

/// One experiment: m independently seeded trainings of a model variant,
/// with per-run CSV curves and model archives plus a summary JSON.
struct ExperimentConfig {
    Model model = Model::fc2;
    Variant variant = Variant::mpo;
    std::size_t bond_dim = 16; // FC2 first-layer D; LeNet-5 bonds are fixed
    std::size_t runs = 5;
    std::uint64_t seed = 1;
    std::filesystem::path data_dir;
    std::filesystem::path out_dir = "out";
    std::size_t input_chi = 0; // 0 = no input truncation
    bool l2 = true;            // false forces alpha = 0
    std::size_t jobs = 0;      // concurrent runs; 0 = hardware concurrency
    TrainingConfig training;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::filesystem::path& path);
nlohmann::json config_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

/// alpha actually used for training (0 when l2 is off).
double effective_alpha(const ExperimentConfig& cfg);

struct ExperimentResult {
    std::vector<RunReport> reports;
    RunStatistics stats; // over final test accuracies
    std::optional<RatioReport> ratio;
    std::vector<std::filesystem::path> model_files;
    std::vector<std::filesystem::path> csv_files;
    std::filesystem::path summary_file;
};

/// Runs the configured trainings (concurrently up to cfg.jobs), writing
/// run_<i>.csv, run_<i>.model and summary.json under cfg.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Fixed CSV schema: epoch,train_loss,train_acc,test_acc.
void write_csv(const std::filesystem::path& path, const RunReport& report);

nlohmann::json summary_json(const ExperimentConfig& cfg,
                            const std::vector<RunReport>& reports);

} // namespace mponet
