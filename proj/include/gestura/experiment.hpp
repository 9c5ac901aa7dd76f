#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gestura/adaptui.hpp"
#include "gestura/comparison.hpp"
#include "gestura/config.hpp"
#include "gestura/federated.hpp"
#include "gestura/synthdata.hpp"

namespace gestura {

const char* tool_version();

// A recognizer trained by the train stage. `name` is its directory, `row` its table label.
struct RecognizerSpec {
    std::string name;
    std::string row;
    ModalitySet modalities;
};

// The fused recognizer first, then one per configured baseline.
std::vector<RecognizerSpec> recognizer_specs(const ExperimentConfig& config);
std::string row_label(Modality m);

// Seeds derived from the master seed, one per stage purpose.
struct StageSeeds {
    std::uint64_t dataset;
    std::uint64_t init;
    std::uint64_t denoiser;
    std::uint64_t federated;
    std::uint64_t policy;
    std::uint64_t evaluate;

    static StageSeeds from(std::uint64_t master);
};

struct TrainRun {
    GestureModel model;
    ModelParameters initial;
    TrainingResult result;
};

// Initializes, pretrains the denoiser (when the model reads accel and it is enabled), and
// runs federated training on the participant- or sample-level client split from the config.
TrainRun train_recognizer(const ExperimentConfig& config, const RecognizerSpec& spec, const Dataset& dataset,
                          const DatasetSplit& split, const TrainingOptions& options, bool resume = false);

// Simulated users for policy training, with accuracies measured on the validation split.
std::vector<SimulatedUser> policy_users(const ExperimentConfig& config, const GestureModel& model,
                                        const ModelParameters& params, const Dataset& dataset,
                                        const DatasetSplit& split, std::size_t threads);

// --- run directory --------------------------------------------------------------------

struct ManifestFile {
    std::string path;  // relative to the run directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct StageRecord {
    std::string stage;
    std::string started;
    std::string finished;
    std::string config_toml;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<ManifestFile> files;
};

inline constexpr const char* kRunManifest = "run_manifest.json";

// Replaces the stage's entry in <out>/run_manifest.json, creating the file when needed.
void record_stage(const std::filesystem::path& out, const StageRecord& record);
// Problems found (missing files, digest mismatches); empty when the manifest verifies.
std::vector<std::string> verify_manifest(const std::filesystem::path& out);
std::string utc_timestamp();

// --- stages ---------------------------------------------------------------------------

struct StageOptions {
    std::filesystem::path out;
    std::size_t threads = 1;
    std::ostream* log = nullptr;  // progress lines; null for silence
};

struct GenDataOptions {
    bool dump_csv = false;
};

struct TrainStageOptions {
    std::optional<std::size_t> rounds;
    bool resume = false;
};

struct AdaptOptions {
    std::optional<std::size_t> episodes;
};

struct EvaluateOptions {
    bool json_only = false;
};

void cmd_gen_data(const ExperimentConfig& config, const StageOptions& stage, const GenDataOptions& options = {});
void cmd_train(const ExperimentConfig& config, const StageOptions& stage, const TrainStageOptions& options = {});
void cmd_adapt(const ExperimentConfig& config, const StageOptions& stage, const AdaptOptions& options = {});
std::vector<MetricsReport> cmd_evaluate(const ExperimentConfig& config, const StageOptions& stage,
                                        const EvaluateOptions& options = {});
// Prints a summary of a run directory; returns false when its manifest does not verify.
bool cmd_report(const std::filesystem::path& out, std::ostream& os);

}  // namespace gestura
