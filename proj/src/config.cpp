#include "gestura/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "gestura/errors.hpp"

namespace gestura {

std::string to_string(Scale s) { return s == Scale::Paper ? "paper" : "desk"; }
std::string to_string(PartitionKind p) { return p == PartitionKind::Iid ? "iid" : "participant"; }

ExperimentConfig ExperimentConfig::desk() {
    ExperimentConfig c;
    c.scale = Scale::Desk;
    c.output_dir = "runs/desk";
    c.dataset = DatasetSpec::desk();
    c.dataset.seed = c.seed;
    c.encoders.frame_size = c.dataset.synth.frame_size;
    c.encoders.electrodes = c.dataset.synth.electrodes;
    c.federated.round.optimizer = {OptimizerKind::Adam, 0.005};
    c.federated.round.rounds = 30;
    c.federated.round.patience = 5;
    return c;
}

ExperimentConfig ExperimentConfig::paper() {
    ExperimentConfig c = desk();
    c.scale = Scale::Paper;
    c.output_dir = "runs/paper";
    c.dataset = DatasetSpec::paper();
    c.dataset.seed = c.seed;
    c.encoders.frame_size = c.dataset.synth.frame_size;
    c.federated.round.rounds = 50;
    c.federated.round.patience = 10;
    return c;
}

ExperimentConfig ExperimentConfig::for_scale(Scale s) { return s == Scale::Paper ? paper() : desk(); }

DatasetSpec ExperimentConfig::dataset_spec() const {
    DatasetSpec s = dataset;
    s.seed = seed;
    return s;
}

ModelConfig ExperimentConfig::model_config(const ModalitySet& modalities) const {
    ModelConfig m;
    m.encoders = encoders;
    m.encoders.frame_size = dataset.synth.frame_size;
    m.encoders.electrodes = dataset.synth.electrodes;
    m.context = context;
    m.modalities = modalities;
    m.use_context = use_context;
    m.classes = dataset.class_count;
    return m;
}

ComparisonConfig ExperimentConfig::comparison_config(std::size_t threads) const {
    ComparisonConfig c;
    c.episodes_per_user = evaluation.episodes_per_user;
    c.latency = evaluation.latency;
    c.static_latency_ms = evaluation.static_latency_ms;
    c.micro_f1 = evaluation.micro_f1;
    c.seed = derive_seed(seed, "evaluate");
    c.threads = threads;
    return c;
}

namespace {

template <class Fn>
void checked(const std::string& section, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(section + "." + e.what());
    }
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field + " " + what);
}

}  // namespace

void ExperimentConfig::validate() const {
    require(!output_dir.empty(), "output_dir", "must not be empty");
    require(dataset.seed == seed, "dataset.seed", "must follow the master seed");
    checked("dataset", [&] { dataset.validate(); });
    require(encoders.frame_size == dataset.synth.frame_size, "model.frame_size", "must equal dataset.frame_size");
    require(encoders.electrodes == dataset.synth.electrodes, "model.electrodes", "must equal dataset.electrodes");
    checked("model", [&] { GestureModel probe(model_config({})); });
    require(denoiser.pairs > 0, "denoiser.pairs", "must be positive");
    require(denoiser.epochs > 0, "denoiser.epochs", "must be positive");
    require(denoiser.batch_size > 0, "denoiser.batch_size", "must be positive");
    require(denoiser.impaired_fraction >= 0.0 && denoiser.impaired_fraction <= 1.0, "denoiser.impaired_fraction",
            "must lie in [0, 1]");
    require(std::isfinite(denoiser.optimizer.learning_rate) && denoiser.optimizer.learning_rate > 0.0,
            "denoiser.learning_rate", "must be positive");
    require(federated.clients > 0, "federated.clients", "must be positive");
    require(federated.clients <= dataset.participant_count, "federated.clients",
            "must not exceed dataset.participant_count");
    require(federated.round.class_weights.empty(), "federated.class_weights",
            "is derived from the training split, not configured");
    checked("federated", [&] { federated.round.validate(); });
    checked("rl", [&] { rl.validate(); });
    require(users.time_noise >= 0.0 && std::isfinite(users.time_noise), "rl.time_noise", "must be non-negative");
    require(users.feedback_noise >= 0.0 && std::isfinite(users.feedback_noise), "rl.feedback_noise",
            "must be non-negative");
    require(evaluation.episodes_per_user > 0, "evaluation.episodes_per_user", "must be positive");
    require(evaluation.static_latency_ms >= 0.0 && std::isfinite(evaluation.static_latency_ms),
            "evaluation.static_latency_ms", "must be non-negative");
    require(evaluation.latency.base_ms >= 0.0 && evaluation.latency.ns_per_mac >= 0.0 &&
                evaluation.latency.per_field_ms >= 0.0,
            "evaluation.latency_base_ms", "and the other latency terms must be non-negative");
    std::set<Modality> seen;
    for (auto m : evaluation.baselines) {
        require(seen.insert(m).second, "evaluation.baselines", "lists " + to_string(m) + " twice");
    }
}

// ---------------------------------------------------------------------------------------
// Parsing

namespace {

class Section {
public:
    Section(const toml::table* table, std::string name, const std::string& source)
        : table_(table), name_(std::move(name)), source_(source) {}

    template <class T>
    void get(const char* key, T& out) {
        used_.insert(key);
        if (!table_) return;
        const toml::node* node = table_->get(key);
        if (!node) return;
        read(*node, key, out);
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_) {
            const std::string key(k.str());
            if (!used_.count(key)) fail(v, key, "unknown key");
        }
    }

    [[noreturn]] void fail(const toml::node& node, const std::string& key, const std::string& what) const {
        throw ConfigError(source_ + ":" + std::to_string(node.source().begin.line) + ": " + path(key) + ": " + what);
    }

private:
    std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    void read(const toml::node& n, const std::string& key, std::size_t& out) const {
        const auto v = n.value_exact<std::int64_t>();
        if (!v || *v < 0) fail(n, key, "expected a non-negative integer");
        out = static_cast<std::size_t>(*v);
    }

    void read(const toml::node& n, const std::string& key, double& out) const {
        if (auto i = n.value_exact<std::int64_t>()) {
            out = static_cast<double>(*i);
            return;
        }
        const auto v = n.value_exact<double>();
        if (!v) fail(n, key, "expected a number");
        if (!std::isfinite(*v)) fail(n, key, "must be finite");
        out = *v;
    }

    void read(const toml::node& n, const std::string& key, bool& out) const {
        const auto v = n.value_exact<bool>();
        if (!v) fail(n, key, "expected true or false");
        out = *v;
    }

    void read(const toml::node& n, const std::string& key, std::string& out) const {
        const auto v = n.value_exact<std::string>();
        if (!v) fail(n, key, "expected a string");
        out = *v;
    }

    void read(const toml::node& n, const std::string& key, std::vector<std::size_t>& out) const {
        const auto* arr = n.as_array();
        if (!arr) fail(n, key, "expected an array of integers");
        out.clear();
        for (const auto& e : *arr) {
            std::size_t v = 0;
            read(e, key, v);
            out.push_back(v);
        }
    }

    void read(const toml::node& n, const std::string& key, std::vector<std::string>& out) const {
        const auto* arr = n.as_array();
        if (!arr) fail(n, key, "expected an array of strings");
        out.clear();
        for (const auto& e : *arr) {
            std::string v;
            read(e, key, v);
            out.push_back(v);
        }
    }

    void read(const toml::node& n, const std::string& key, std::array<double, 3>& out) const {
        const auto* arr = n.as_array();
        if (!arr || arr->size() != 3) fail(n, key, "expected an array of three numbers");
        for (std::size_t i = 0; i < 3; ++i) read((*arr)[i], key, out[i]);
    }

    const toml::table* table_;
    std::string name_;
    const std::string& source_;
    std::set<std::string> used_;
};

const toml::table* subtable(const toml::table& root, const char* name, const std::string& source) {
    const toml::node* n = root.get(name);
    if (!n) return nullptr;
    const auto* t = n->as_table();
    if (!t) {
        throw ConfigError(source + ":" + std::to_string(n->source().begin.line) + ": " + name + ": expected a table");
    }
    return t;
}

Modality modality_from_string(const std::string& s) {
    if (s == "visual") return Modality::Visual;
    if (s == "accel") return Modality::Accel;
    if (s == "emg") return Modality::Emg;
    throw ConfigError("unknown modality '" + s + "' (expected visual, accel or emg)");
}

// Line of a dotted field path in the parsed document, 0 when absent.
std::size_t line_of(const toml::table& root, const std::string& field) {
    const auto dot = field.find('.');
    const toml::node* n = nullptr;
    if (dot == std::string::npos) {
        n = root.get(field);
    } else if (const auto* t = root.get_as<toml::table>(field.substr(0, dot))) {
        auto key = field.substr(dot + 1);
        key = key.substr(0, key.find_first_of(" :"));
        n = t->get(key);
        if (!n) return t->source().begin.line;
    }
    return n ? n->source().begin.line : 0;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.source().begin.line) + ": " +
                          std::string(e.description()));
    }

    std::string scale = "desk";
    if (const auto* n = root.get("scale")) {
        const auto v = n->value_exact<std::string>();
        if (!v || (*v != "desk" && *v != "paper")) {
            throw ConfigError(source + ":" + std::to_string(n->source().begin.line) +
                              ": scale: expected \"desk\" or \"paper\"");
        }
        scale = *v;
    }
    ExperimentConfig c = ExperimentConfig::for_scale(scale == "paper" ? Scale::Paper : Scale::Desk);

    Section top(&root, "", source);
    if (const auto* n = root.get("seed")) {
        if (auto i = n->value_exact<std::int64_t>(); i && *i >= 0) {
            c.seed = static_cast<std::uint64_t>(*i);
        } else if (auto s = n->value_exact<std::string>()) {
            const auto r = std::from_chars(s->data(), s->data() + s->size(), c.seed);
            if (r.ec != std::errc{} || r.ptr != s->data() + s->size()) top.fail(*n, "seed", "expected an unsigned integer");
        } else {
            top.fail(*n, "seed", "expected an unsigned integer");
        }
    }
    top.get("output_dir", c.output_dir);

    {
        Section s(subtable(root, "dataset", source), "dataset", source);
        auto& d = c.dataset;
        s.get("sample_count", d.sample_count);
        s.get("participant_count", d.participant_count);
        s.get("impaired_fraction", d.impaired_fraction);
        s.get("class_count", d.class_count);
        s.get("split", d.split);
        s.get("frame_size", d.synth.frame_size);
        s.get("series_length", d.synth.series_length);
        s.get("sample_rate_hz", d.synth.sample_rate_hz);
        s.get("electrodes", d.synth.electrodes);
        s.get("stroke_extent_m", d.synth.stroke_extent_m);
        s.get("accel_noise_g", d.synth.accel_noise_g);
        s.get("visual_noise", d.synth.visual_noise);
        s.get("emg_noise", d.synth.emg_noise);
        s.get("tremor_in_visual", d.synth.tremor_in_visual);
        s.finish();
    }
    {
        Section s(subtable(root, "model", source), "model", source);
        auto& e = c.encoders;
        s.get("dim", e.dim);
        s.get("heads", e.heads);
        s.get("patch", e.patch);
        s.get("vit_blocks", e.vit_blocks);
        s.get("ffn_multiplier", e.ffn_multiplier);
        s.get("tcn_kernel", e.tcn_kernel);
        s.get("dilations", e.dilations);
        s.get("denoise_kernel", e.denoise_kernel);
        s.get("min_series_length", e.min_series_length);
        s.get("emg_windows", e.emg_windows);
        s.get("gat_layers", e.gat_layers);
        s.get("gat_negative_slope", e.gat_negative_slope);
        s.get("use_context", c.use_context);
        s.get("context_dim", c.context.dim);
        s.get("context_extra_channels", c.context.extra_channels);
        s.get("context_output_bias", c.context.output_bias);
        s.finish();
    }
    {
        Section s(subtable(root, "denoiser", source), "denoiser", source);
        std::string opt = to_string(c.denoiser.optimizer.kind);
        s.get("enabled", c.pretrain_denoiser);
        s.get("pairs", c.denoiser.pairs);
        s.get("epochs", c.denoiser.epochs);
        s.get("batch_size", c.denoiser.batch_size);
        s.get("impaired_fraction", c.denoiser.impaired_fraction);
        s.get("optimizer", opt);
        s.get("learning_rate", c.denoiser.optimizer.learning_rate);
        s.finish();
        checked("denoiser", [&] { c.denoiser.optimizer.kind = optimizer_from_string(opt); });
    }
    {
        Section s(subtable(root, "federated", source), "federated", source);
        auto& f = c.federated;
        std::string partition = to_string(f.partition);
        std::string opt = to_string(f.round.optimizer.kind);
        std::string weighting = f.inverse_frequency_weights ? "inverse_frequency" : "uniform";
        s.get("clients", f.clients);
        s.get("class_weighting", weighting);
        s.get("partition", partition);
        s.get("rounds", f.round.rounds);
        s.get("patience", f.round.patience);
        s.get("local_epochs", f.round.local_epochs);
        s.get("batch_size", f.round.batch_size);
        s.get("client_fraction", f.round.client_fraction);
        s.get("optimizer", opt);
        s.get("learning_rate", f.round.optimizer.learning_rate);
        s.get("beta1", f.round.optimizer.beta1);
        s.get("beta2", f.round.optimizer.beta2);
        s.get("adam_epsilon", f.round.optimizer.epsilon);
        s.finish();
        if (partition != "participant" && partition != "iid") {
            throw ConfigError(source + ":" + std::to_string(line_of(root, "federated.partition")) +
                              ": federated.partition: expected \"participant\" or \"iid\"");
        }
        f.partition = partition == "iid" ? PartitionKind::Iid : PartitionKind::Participant;
        if (weighting != "uniform" && weighting != "inverse_frequency") {
            throw ConfigError(source + ":" + std::to_string(line_of(root, "federated.class_weighting")) +
                              ": federated.class_weighting: expected \"uniform\" or \"inverse_frequency\"");
        }
        f.inverse_frequency_weights = weighting == "inverse_frequency";
        checked("federated", [&] { f.round.optimizer.kind = optimizer_from_string(opt); });
    }
    {
        Section s(subtable(root, "rl", source), "rl", source);
        auto& r = c.rl;
        s.get("learning_rate", r.learning_rate);
        s.get("discount", r.discount);
        s.get("epsilon", r.epsilon);
        s.get("epsilon_decay", r.epsilon_decay);
        s.get("epsilon_min", r.epsilon_min);
        s.get("episode_length", r.episode_length);
        s.get("episodes", r.episodes);
        s.get("w_time", r.w_time);
        s.get("w_feedback", r.w_feedback);
        s.get("accuracy_window", r.accuracy_window);
        s.get("threshold_low", r.thresholds.low);
        s.get("threshold_medium", r.thresholds.medium);
        s.get("time_noise", c.users.time_noise);
        s.get("feedback_noise", c.users.feedback_noise);
        s.finish();
    }
    {
        Section s(subtable(root, "evaluation", source), "evaluation", source);
        auto& e = c.evaluation;
        std::string f1 = e.micro_f1 ? "micro" : "macro";
        std::vector<std::string> baselines;
        for (auto m : e.baselines) baselines.push_back(to_string(m));
        s.get("episodes_per_user", e.episodes_per_user);
        s.get("static_latency_ms", e.static_latency_ms);
        s.get("f1", f1);
        s.get("baselines", baselines);
        s.get("latency_base_ms", e.latency.base_ms);
        s.get("latency_ns_per_mac", e.latency.ns_per_mac);
        s.get("latency_per_field_ms", e.latency.per_field_ms);
        s.finish();
        if (f1 != "macro" && f1 != "micro") {
            throw ConfigError(source + ":" + std::to_string(line_of(root, "evaluation.f1")) +
                              ": evaluation.f1: expected \"macro\" or \"micro\"");
        }
        e.micro_f1 = f1 == "micro";
        e.baselines.clear();
        try {
            for (const auto& b : baselines) e.baselines.push_back(modality_from_string(b));
        } catch (const ConfigError& err) {
            throw ConfigError(source + ":" + std::to_string(line_of(root, "evaluation.baselines")) +
                              ": evaluation.baselines: " + err.what());
        }
    }

    {
        std::set<std::string> known{"scale",    "seed",      "output_dir", "dataset",   "model",
                                    "denoiser", "federated", "rl",         "evaluation"};
        for (const auto& [k, v] : root) {
            if (!known.count(std::string(k.str()))) top.fail(v, std::string(k.str()), "unknown key");
        }
    }

    c.dataset.seed = c.seed;
    c.encoders.frame_size = c.dataset.synth.frame_size;
    c.encoders.electrodes = c.dataset.synth.electrodes;
    try {
        c.validate();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        const auto field = msg.substr(0, msg.find(' '));
        throw ConfigError(source + ":" + std::to_string(line_of(root, field)) + ": " + msg);
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

// ---------------------------------------------------------------------------------------
// Rendering

namespace {

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, r.ptr);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + '"';
}

std::string boolean(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string to_toml(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "scale = " << quoted(to_string(c.scale)) << '\n';
    if (c.seed <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        o << "seed = " << c.seed << '\n';
    } else {
        o << "seed = " << quoted(std::to_string(c.seed)) << '\n';
    }
    o << "output_dir = " << quoted(c.output_dir) << '\n';

    const auto& d = c.dataset;
    o << "\n[dataset]\n"
      << "sample_count = " << d.sample_count << '\n'
      << "participant_count = " << d.participant_count << '\n'
      << "impaired_fraction = " << num(d.impaired_fraction) << '\n'
      << "class_count = " << d.class_count << '\n'
      << "split = [" << num(d.split[0]) << ", " << num(d.split[1]) << ", " << num(d.split[2]) << "]\n"
      << "frame_size = " << d.synth.frame_size << '\n'
      << "series_length = " << d.synth.series_length << '\n'
      << "sample_rate_hz = " << num(d.synth.sample_rate_hz) << '\n'
      << "electrodes = " << d.synth.electrodes << '\n'
      << "stroke_extent_m = " << num(d.synth.stroke_extent_m) << '\n'
      << "accel_noise_g = " << num(d.synth.accel_noise_g) << '\n'
      << "visual_noise = " << num(d.synth.visual_noise) << '\n'
      << "emg_noise = " << num(d.synth.emg_noise) << '\n'
      << "tremor_in_visual = " << boolean(d.synth.tremor_in_visual) << '\n';

    const auto& e = c.encoders;
    o << "\n[model]\n"
      << "dim = " << e.dim << '\n'
      << "heads = " << e.heads << '\n'
      << "patch = " << e.patch << '\n'
      << "vit_blocks = " << e.vit_blocks << '\n'
      << "ffn_multiplier = " << e.ffn_multiplier << '\n'
      << "tcn_kernel = " << e.tcn_kernel << '\n'
      << "dilations = [";
    for (std::size_t i = 0; i < e.dilations.size(); ++i) o << (i ? ", " : "") << e.dilations[i];
    o << "]\n"
      << "denoise_kernel = " << e.denoise_kernel << '\n'
      << "min_series_length = " << e.min_series_length << '\n'
      << "emg_windows = " << e.emg_windows << '\n'
      << "gat_layers = " << e.gat_layers << '\n'
      << "gat_negative_slope = " << num(e.gat_negative_slope) << '\n'
      << "use_context = " << boolean(c.use_context) << '\n'
      << "context_dim = " << c.context.dim << '\n'
      << "context_extra_channels = " << c.context.extra_channels << '\n'
      << "context_output_bias = " << boolean(c.context.output_bias) << '\n';

    o << "\n[denoiser]\n"
      << "enabled = " << boolean(c.pretrain_denoiser) << '\n'
      << "pairs = " << c.denoiser.pairs << '\n'
      << "epochs = " << c.denoiser.epochs << '\n'
      << "batch_size = " << c.denoiser.batch_size << '\n'
      << "impaired_fraction = " << num(c.denoiser.impaired_fraction) << '\n'
      << "optimizer = " << quoted(to_string(c.denoiser.optimizer.kind)) << '\n'
      << "learning_rate = " << num(c.denoiser.optimizer.learning_rate) << '\n';

    const auto& f = c.federated;
    o << "\n[federated]\n"
      << "clients = " << f.clients << '\n'
      << "partition = " << quoted(to_string(f.partition)) << '\n'
      << "class_weighting = " << quoted(f.inverse_frequency_weights ? "inverse_frequency" : "uniform") << '\n'
      << "rounds = " << f.round.rounds << '\n'
      << "patience = " << f.round.patience << '\n'
      << "local_epochs = " << f.round.local_epochs << '\n'
      << "batch_size = " << f.round.batch_size << '\n'
      << "client_fraction = " << num(f.round.client_fraction) << '\n'
      << "optimizer = " << quoted(to_string(f.round.optimizer.kind)) << '\n'
      << "learning_rate = " << num(f.round.optimizer.learning_rate) << '\n'
      << "beta1 = " << num(f.round.optimizer.beta1) << '\n'
      << "beta2 = " << num(f.round.optimizer.beta2) << '\n'
      << "adam_epsilon = " << num(f.round.optimizer.epsilon) << '\n';

    const auto& r = c.rl;
    o << "\n[rl]\n"
      << "learning_rate = " << num(r.learning_rate) << '\n'
      << "discount = " << num(r.discount) << '\n'
      << "epsilon = " << num(r.epsilon) << '\n'
      << "epsilon_decay = " << num(r.epsilon_decay) << '\n'
      << "epsilon_min = " << num(r.epsilon_min) << '\n'
      << "episode_length = " << r.episode_length << '\n'
      << "episodes = " << r.episodes << '\n'
      << "w_time = " << num(r.w_time) << '\n'
      << "w_feedback = " << num(r.w_feedback) << '\n'
      << "accuracy_window = " << r.accuracy_window << '\n'
      << "threshold_low = " << num(r.thresholds.low) << '\n'
      << "threshold_medium = " << num(r.thresholds.medium) << '\n'
      << "time_noise = " << num(c.users.time_noise) << '\n'
      << "feedback_noise = " << num(c.users.feedback_noise) << '\n';

    const auto& ev = c.evaluation;
    o << "\n[evaluation]\n"
      << "episodes_per_user = " << ev.episodes_per_user << '\n'
      << "static_latency_ms = " << num(ev.static_latency_ms) << '\n'
      << "f1 = " << quoted(ev.micro_f1 ? "micro" : "macro") << '\n'
      << "baselines = [";
    for (std::size_t i = 0; i < ev.baselines.size(); ++i) o << (i ? ", " : "") << quoted(to_string(ev.baselines[i]));
    o << "]\n"
      << "latency_base_ms = " << num(ev.latency.base_ms) << '\n'
      << "latency_ns_per_mac = " << num(ev.latency.ns_per_mac) << '\n'
      << "latency_per_field_ms = " << num(ev.latency.per_field_ms) << '\n';
    return o.str();
}

}  // namespace gestura
