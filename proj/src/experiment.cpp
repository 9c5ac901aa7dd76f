#include "gestura/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gestura/dataset_io.hpp"
#include "gestura/errors.hpp"
#include "gestura/training.hpp"

#ifndef GESTURA_VERSION
#define GESTURA_VERSION "0.0.0"
#endif

namespace gestura {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const char* tool_version() { return GESTURA_VERSION; }

std::string row_label(Modality m) {
    switch (m) {
        case Modality::Visual: return "ViT";
        case Modality::Accel: return "TCN";
        case Modality::Emg: return "GAT";
    }
    return "ViT";
}

std::vector<RecognizerSpec> recognizer_specs(const ExperimentConfig& config) {
    std::vector<RecognizerSpec> out{{"fused", "Ours", ModalitySet{}}};
    for (auto m : config.evaluation.baselines) {
        ModalitySet s{m == Modality::Visual, m == Modality::Accel, m == Modality::Emg};
        out.push_back({to_string(m), row_label(m), s});
    }
    return out;
}

StageSeeds StageSeeds::from(std::uint64_t master) {
    return {master,
            derive_seed(master, "init"),
            derive_seed(master, "denoiser"),
            derive_seed(master, "federated"),
            derive_seed(master, "policy"),
            derive_seed(master, "evaluate")};
}

TrainRun train_recognizer(const ExperimentConfig& config, const RecognizerSpec& spec, const Dataset& dataset,
                          const DatasetSplit& split, const TrainingOptions& options, bool resume) {
    const auto seeds = StageSeeds::from(config.seed);
    TrainRun run{GestureModel(config.model_config(spec.modalities)), {}, {}};
    run.initial = run.model.initialize(seeds.init);
    if (run.model.accel() && config.pretrain_denoiser) {
        pretrain_denoiser(run.model, run.initial, dataset.spec.synth, config.denoiser, seeds.denoiser);
    }
    auto fed = config.federated;
    if (fed.inverse_frequency_weights) {
        fed.round.class_weights = inverse_frequency_weights(dataset, split.train, dataset.spec.class_count);
    }
    const auto partitions = fed.partition == PartitionKind::Iid
                                ? partition_clients_iid(dataset, split.train, fed.clients, config.seed)
                                : partition_clients(dataset, split.train, fed.clients, config.seed);
    if (resume && options.output_dir && fs::exists(*options.output_dir / "state.json")) {
        run.result = resume_training(run.model, dataset, partitions, split.validation, fed.round, seeds.federated,
                                     options);
    } else {
        run.result = run_training(run.model, run.initial, dataset, partitions, split.validation, fed.round,
                                  seeds.federated, options);
    }
    return run;
}

std::vector<SimulatedUser> policy_users(const ExperimentConfig& config, const GestureModel& model,
                                        const ModelParameters& params, const Dataset& dataset,
                                        const DatasetSplit& split, std::size_t threads) {
    const auto acc = evaluate_by_group(model, params, dataset, split.validation, threads);
    const double pooled = accuracy(acc.pooled);
    const double imp = acc.impaired.total() ? accuracy(acc.impaired) : pooled;
    const double unimp = acc.unimpaired.total() ? accuracy(acc.unimpaired) : pooled;
    return build_users(dataset, imp, unimp, config.users);
}

// ---------------------------------------------------------------------------------------
// Run manifest

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed " + path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ManifestFile> collect_files(const fs::path& out, const fs::path& sub) {
    std::vector<ManifestFile> files;
    const auto root = out / sub;
    if (!fs::exists(root)) return files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        files.push_back({fs::relative(e.path(), out).generic_string(), sha256_file(e.path()), e.file_size()});
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return files;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

void record_stage(const fs::path& out, const StageRecord& r) {
    const auto path = out / kRunManifest;
    ordered_json m;
    if (fs::exists(path)) {
        m = ordered_json::parse(read_json(path).dump());
    } else {
        m = {{"tool", "gestura"}, {"version", tool_version()}, {"stages", ordered_json::object()}};
    }
    ordered_json files = ordered_json::array();
    for (const auto& f : r.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    ordered_json seeds = ordered_json::object();
    for (const auto& [k, v] : r.seeds) seeds[k] = v;
    m["version"] = tool_version();
    m["stages"][r.stage] = {{"started", r.started}, {"finished", r.finished}, {"config", r.config_toml},
                            {"seeds", seeds},       {"files", files}};
    write_text(path, m.dump(2) + '\n');
}

std::vector<std::string> verify_manifest(const fs::path& out) {
    std::vector<std::string> problems;
    const auto path = out / kRunManifest;
    if (!fs::exists(path)) return {"no " + std::string(kRunManifest) + " in " + out.string()};
    const auto m = read_json(path);
    if (!m.contains("stages")) return {"manifest has no stages"};
    for (const auto& [stage, entry] : m.at("stages").items()) {
        for (const auto& f : entry.at("files")) {
            const auto rel = f.at("path").get<std::string>();
            const auto p = out / rel;
            if (!fs::exists(p)) {
                problems.push_back(stage + ": missing " + rel);
            } else if (sha256_file(p) != f.at("sha256").get<std::string>()) {
                problems.push_back(stage + ": digest mismatch for " + rel);
            }
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------------------
// Stages

namespace {

struct StageScope {
    StageRecord record;
    const ExperimentConfig& config;
    const StageOptions& stage;

    StageScope(std::string name, const ExperimentConfig& c, const StageOptions& s) : config(c), stage(s) {
        record.stage = std::move(name);
        record.started = utc_timestamp();
        record.config_toml = to_toml(c);
        ensure_dir(s.out);
    }

    void finish(std::initializer_list<const char*> subdirs) {
        record.finished = utc_timestamp();
        for (const char* d : subdirs) {
            auto f = collect_files(stage.out, d);
            record.files.insert(record.files.end(), f.begin(), f.end());
        }
        record_stage(stage.out, record);
    }

    void log(const std::string& line) const {
        if (stage.log) *stage.log << line << '\n' << std::flush;
    }
};

Dataset load_stage_dataset(const ExperimentConfig& config, const fs::path& out) {
    const auto dir = out / "dataset";
    if (!fs::exists(dir / kDatasetManifest)) {
        throw ConfigError("no dataset in " + dir.string() + "; run gen-data first");
    }
    auto d = read_dataset(dir);
    if (d.spec != config.dataset_spec()) {
        throw ConfigError("dataset in " + dir.string() + " was generated from a different configuration");
    }
    return d;
}

struct LoadedRecognizer {
    GestureModel model;
    ModelParameters params;
};

LoadedRecognizer load_recognizer(const ExperimentConfig& config, const RecognizerSpec& spec, const fs::path& out) {
    const auto path = out / "train" / spec.name / "best.ckpt";
    if (!fs::exists(path)) {
        throw ConfigError("missing checkpoint for row " + spec.row + " (" + path.string() + "); run train first");
    }
    LoadedRecognizer r{GestureModel(config.model_config(spec.modalities)), load_checkpoint(path)};
    if (*r.params.layout != *r.model.layout()) {
        throw ConfigError("checkpoint for row " + spec.row + " does not match the configured model");
    }
    r.params.layout = r.model.layout();
    return r;
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

void cmd_gen_data(const ExperimentConfig& config, const StageOptions& stage, const GenDataOptions& options) {
    config.validate();
    StageScope scope("gen-data", config, stage);
    const auto spec = config.dataset_spec();
    scope.log("generating " + std::to_string(spec.sample_count) + " samples from " +
              std::to_string(spec.participant_count) + " participants");
    const auto dataset = generate_dataset(spec, stage.threads);
    const auto split = split_dataset(dataset, spec);
    const auto& fed = config.federated;
    const auto clients = fed.partition == PartitionKind::Iid
                             ? partition_clients_iid(dataset, split.train, fed.clients, config.seed)
                             : partition_clients(dataset, split.train, fed.clients, config.seed);
    write_dataset(dataset, split, stage.out / "dataset", clients);
    if (options.dump_csv) dump_csv(dataset, stage.out / "dataset" / "csv");
    scope.record.seeds = {{"dataset", spec.seed}};
    scope.finish({"dataset"});
    scope.log("wrote " + (stage.out / "dataset").string());
}

void cmd_train(const ExperimentConfig& config, const StageOptions& stage, const TrainStageOptions& options) {
    auto cfg = config;
    if (options.rounds) cfg.federated.round.rounds = *options.rounds;
    cfg.validate();
    StageScope scope("train", cfg, stage);
    const auto dataset = load_stage_dataset(cfg, stage.out);
    const auto split = split_dataset(dataset, dataset.spec);
    for (const auto& spec : recognizer_specs(cfg)) {
        TrainingOptions opts;
        opts.threads = stage.threads;
        opts.output_dir = stage.out / "train" / spec.name;
        opts.on_round = [&](const RoundReport& r) {
            double loss = 0.0;
            for (const auto& c : r.clients) loss += c.final_loss;
            loss /= static_cast<double>(std::max<std::size_t>(1, r.clients.size()));
            scope.log("[" + spec.name + "] round " + std::to_string(r.round) + "  loss " + fixed(loss, 4) +
                      "  val F1 " + fixed(r.validation_f1, 4) + "  acc " + fixed(r.validation_accuracy, 4));
        };
        const auto run = train_recognizer(cfg, spec, dataset, split, opts, options.resume);
        const auto& st = run.result.state;
        scope.log("[" + spec.name + "] best val F1 " + fixed(std::max(st.best_f1, 0.0), 4) + " at round " +
                  std::to_string(st.best_round) + (st.stopped ? " (early stop)" : ""));
    }
    const auto seeds = StageSeeds::from(cfg.seed);
    scope.record.seeds = {{"init", seeds.init}, {"denoiser", seeds.denoiser}, {"federated", seeds.federated},
                          {"clients", cfg.seed}};
    scope.finish({"train"});
}

void cmd_adapt(const ExperimentConfig& config, const StageOptions& stage, const AdaptOptions& options) {
    auto cfg = config;
    if (options.episodes) cfg.rl.episodes = *options.episodes;
    cfg.validate();
    StageScope scope("adapt", cfg, stage);
    const auto dataset = load_stage_dataset(cfg, stage.out);
    const auto split = split_dataset(dataset, dataset.spec);
    const auto fused = recognizer_specs(cfg).front();
    const auto rec = load_recognizer(cfg, fused, stage.out);
    const auto users = policy_users(cfg, rec.model, rec.params, dataset, split, stage.threads);

    LatencyModel latency = cfg.evaluation.latency;
    latency.recognizer_macs = rec.model.mac_count();
    const auto seeds = StageSeeds::from(cfg.seed);
    scope.log("training policy: " + std::to_string(cfg.rl.episodes) + " episodes over " +
              std::to_string(users.size()) + " simulated users");
    const auto training = train_policy(users, cfg.rl, seeds.policy, latency);
    if (!training.q.all_finite()) throw NumericError("policy values became non-finite");

    const auto dir = stage.out / "adapt";
    ensure_dir(dir);
    export_policy_csv(training.q, dir / "policy.csv");
    export_policy_json(training.q, dir / "policy.json");
    export_curves_csv(training, dir / "curves.csv");
    ordered_json u = ordered_json::array();
    for (const auto& user : users) {
        u.push_back({{"id", user.id()}, {"impaired", user.impaired()}, {"gesture_accuracy", user.gesture_accuracy()}});
    }
    write_text(dir / "users.json", ordered_json{{"users", u}}.dump(1) + '\n');
    scope.log("accessible choice rate over low-capability states: " + fixed(accessible_choice_rate(training.q), 3));
    scope.record.seeds = {{"policy", seeds.policy}};
    scope.finish({"adapt"});
}

std::vector<MetricsReport> cmd_evaluate(const ExperimentConfig& config, const StageOptions& stage,
                                        const EvaluateOptions& options) {
    config.validate();
    StageScope scope("evaluate", config, stage);
    const auto dataset = load_stage_dataset(config, stage.out);
    const auto split = split_dataset(dataset, dataset.spec);

    std::vector<LoadedRecognizer> loaded;
    std::vector<RecognizerSpec> specs = recognizer_specs(config);
    loaded.reserve(specs.size());
    for (const auto& s : specs) loaded.push_back(load_recognizer(config, s, stage.out));
    std::vector<RecognizerArtifact> artifacts;
    for (std::size_t i = 0; i < specs.size(); ++i) artifacts.push_back({specs[i].row, &loaded[i].model, &loaded[i].params});

    const auto policy_path = stage.out / "adapt" / "policy.json";
    if (!fs::exists(policy_path)) {
        throw ConfigError("missing adaptation policy for row " + specs.front().row + " (" + policy_path.string() +
                          "); run adapt first");
    }
    const auto q = load_policy_json(policy_path);
    const auto rows = run_comparison(dataset, split.test, artifacts, &q, config.rl, config.comparison_config(stage.threads));

    const auto dir = stage.out / "eval";
    ensure_dir(dir);
    if (!options.json_only) {
        write_text(dir / "table1.csv", table1_csv(rows));
    } else if (fs::exists(dir / "table1.csv")) {
        fs::remove(dir / "table1.csv");
    }
    write_text(dir / "metrics.json", metrics_json(rows));
    ordered_json timing = ordered_json::array();
    for (const auto& r : rows) timing.push_back({{"model", r.row}, {"wall_latency_ms", r.wall_latency_ms}});
    write_text(dir / "timing.json", ordered_json{{"rows", timing}}.dump(2) + '\n');

    scope.record.seeds = {{"evaluate", config.comparison_config(stage.threads).seed}};
    scope.finish({"eval"});
    return rows;
}

bool cmd_report(const fs::path& out, std::ostream& os) {
    const auto path = out / kRunManifest;
    if (!fs::exists(path)) throw ConfigError("no " + std::string(kRunManifest) + " in " + out.string());
    const auto m = read_json(path);
    os << "run directory: " << out.string() << "\n";
    os << "tool version:  " << m.value("version", std::string("?")) << "\n\n";
    for (const char* stage : {"gen-data", "train", "adapt", "evaluate"}) {
        if (!m.at("stages").contains(stage)) {
            os << std::left << std::setw(10) << stage << " not run\n";
            continue;
        }
        const auto& e = m.at("stages").at(stage);
        os << std::left << std::setw(10) << stage << e.at("started").get<std::string>() << " -> "
           << e.at("finished").get<std::string>() << "  " << e.at("files").size() << " files\n";
    }

    const auto train_dir = out / "train";
    if (fs::exists(train_dir)) {
        os << "\ntraining\n";
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(train_dir)) {
            if (e.is_directory()) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
            if (!fs::exists(d / "state.json")) continue;
            const auto s = read_json(d / "state.json");
            os << "  " << std::left << std::setw(8) << d.filename().string() << " rounds " << s.at("next_round")
               << "  best val F1 " << fixed(std::max(0.0, s.at("best_f1").get<double>()), 4) << " (round "
               << s.at("best_round") << ")\n";
        }
    }

    const auto table = out / "eval" / "table1.csv";
    if (fs::exists(table)) {
        std::ifstream in(table);
        os << "\n" << in.rdbuf();
    }

    const auto problems = verify_manifest(out);
    if (problems.empty()) {
        os << "\nmanifest verified\n";
    } else {
        os << "\nmanifest problems:\n";
        for (const auto& p : problems) os << "  " << p << '\n';
    }
    return problems.empty();
}

}  // namespace gestura
