#include "gestura/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "gestura/errors.hpp"
#include "gestura/parallel.hpp"
#include "gestura/rng.hpp"

namespace gestura {

namespace {

constexpr double kGravity = 9.80665;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

// Per-sample draws shared by every modality. Drawn in a fixed order so each
// modality sees the same gesture instance.
struct Kinematics {
    std::vector<std::array<double, 3>> position;  // meters, T entries, periodic
    double tremor_amplitude = 0.0;                // g
    double tremor_frequency = 8.0;
    double tremor_phase = 0.0;
    std::array<double, 3> tremor_direction{1, 0, 0};
    double lighting = 1.0;
    double fatigue = 0.0;
    double sensor_roll = 0.0;  // wrist-worn sensor orientation about the stroke-plane normal
};

Kinematics draw_kinematics(const ParticipantProfile& profile, GestureLabel label, Rng& rng,
                           const SynthConfig& config) {
    Kinematics k;
    const double amplitude = rng.uniform(0.85, 1.15) * profile.amplitude_scale * config.stroke_extent_m;
    const double rotation = rng.uniform(-0.17, 0.17);
    const double shift = rng.uniform(-0.04, 0.04);
    double speed = profile.speed_factor;
    const double speed_jitter = rng.uniform(-0.05, 0.05);
    if (profile.impaired) speed = std::clamp(speed + speed_jitter, 0.05, 1.0);

    k.lighting = rng.uniform(0.2, 1.0);
    k.fatigue = std::clamp(profile.fatigue_base + rng.normal(0.0, 0.05), 0.0, 1.0);

    k.tremor_amplitude = profile.tremor_amplitude * (0.7 + 0.6 * k.fatigue);
    k.tremor_frequency = profile.tremor_frequency;
    k.tremor_phase = rng.uniform(0.0, kTwoPi);
    std::array<double, 3> dir{rng.normal(), rng.normal(), rng.normal()};
    const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    if (norm > 1e-12) {
        for (auto& d : dir) d /= norm;
        k.tremor_direction = dir;
    }

    k.sensor_roll = rng.uniform(0.0, kTwoPi);

    const std::size_t T = config.series_length;
    const double c = std::cos(rotation), s = std::sin(rotation);
    k.position.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double tau = static_cast<double>(t) / static_cast<double>(T);
        const double warped = tau - (1.0 - speed) * std::sin(kTwoPi * tau) / kTwoPi;
        double u = warped + shift;
        u -= std::floor(u);
        const auto p = stroke_position(label, u);
        k.position[t] = {amplitude * (c * p[0] - s * p[1]), amplitude * (s * p[0] + c * p[1]), amplitude * p[2]};
    }
    return k;
}

double tremor_wave(const Kinematics& k, std::size_t t, double fs) {
    return std::sin(kTwoPi * k.tremor_frequency * static_cast<double>(t) / fs + k.tremor_phase);
}

Tensor render_accel(const Kinematics& k, const SynthConfig& config, double noise_sigma, Rng* rng) {
    const std::size_t T = k.position.size();
    const double fs = config.sample_rate_hz;
    const double c = std::cos(k.sensor_roll), s = std::sin(k.sensor_roll);
    Tensor out({T, 3});
    auto d = out.data();
    for (std::size_t t = 0; t < T; ++t) {
        const auto& prev = k.position[(t + T - 1) % T];
        const auto& cur = k.position[t];
        const auto& next = k.position[(t + 1) % T];
        const double wave = k.tremor_amplitude * tremor_wave(k, t, fs);
        std::array<double, 3> g{};
        for (std::size_t a = 0; a < 3; ++a) {
            g[a] = (next[a] - 2.0 * cur[a] + prev[a]) * fs * fs / kGravity + wave * k.tremor_direction[a];
        }
        d[t * 3 + 0] = c * g[0] + s * g[1];
        d[t * 3 + 1] = -s * g[0] + c * g[1];
        d[t * 3 + 2] = g[2];
    }
    if (rng && noise_sigma > 0.0) {
        for (auto& v : d) v += rng->normal(0.0, noise_sigma);
    }
    return out;
}

Tensor render_visual(const Kinematics& k, const SynthConfig& config, Rng& rng) {
    const std::size_t F = config.frame_size;
    const std::size_t T = k.position.size();
    const double fs = config.sample_rate_hz;

    // Tremor displacement amplitude for a sinusoidal acceleration of amplitude A g.
    const double omega = kTwoPi * k.tremor_frequency;
    const double tremor_m = config.tremor_in_visual ? k.tremor_amplitude * kGravity / (omega * omega) : 0.0;

    std::vector<double> xs(T), ys(T), zs(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double w = -tremor_m * tremor_wave(k, t, fs);
        xs[t] = k.position[t][0] + w * k.tremor_direction[0];
        ys[t] = k.position[t][1] + w * k.tremor_direction[1];
        zs[t] = k.position[t][2] + w * k.tremor_direction[2];
    }
    const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
    const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
    const double extent = std::max({*xmax - *xmin, *ymax - *ymin, 0.25 * config.stroke_extent_m});
    const double scale = (static_cast<double>(F) - 3.0) / extent;
    const double cx = 0.5 * (*xmin + *xmax), cy = 0.5 * (*ymin + *ymax);
    const double ox = 0.5 * (static_cast<double>(F) - 1.0) + rng.uniform(-1.0, 1.0);
    const double oy = 0.5 * (static_cast<double>(F) - 1.0) + rng.uniform(-1.0, 1.0);

    std::vector<double> px(T), py(T), radius(T);
    for (std::size_t t = 0; t < T; ++t) {
        px[t] = ox + (xs[t] - cx) * scale;
        py[t] = oy - (ys[t] - cy) * scale;  // image rows grow downward
        radius[t] = std::max(0.25, 0.7 * (1.0 + 3.0 * zs[t] / config.stroke_extent_m)) * static_cast<double>(F) / 16.0;
    }

    const double contrast = 0.35 + 0.65 * k.lighting;
    const double noise = config.visual_noise * (1.6 - k.lighting);
    Tensor frame({F, F, 1});
    auto d = frame.data();
    for (std::size_t r = 0; r < F; ++r) {
        for (std::size_t c = 0; c < F; ++c) {
            double best = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                const double dx = static_cast<double>(c) - px[t];
                const double dy = static_cast<double>(r) - py[t];
                const double q = (dx * dx + dy * dy) / (2.0 * radius[t] * radius[t]);
                if (q < 12.0) best = std::max(best, std::exp(-q));
            }
            double v = contrast * best;
            if (noise > 0.0) v += rng.normal(0.0, noise);
            d[r * F + c] = std::clamp(v, 0.0, 1.0);
        }
    }
    return frame;
}

Tensor render_emg(const Kinematics& k, const ParticipantProfile& profile, const SynthConfig& config, Rng& rng) {
    const std::size_t T = k.position.size();
    const std::size_t E = config.electrodes;
    const double fs = config.sample_rate_hz;
    // Peak speed of a (1 - cos)/2 stroke spanning the full extent in one period.
    const double v_ref = std::numbers::pi * config.stroke_extent_m * fs / static_cast<double>(T);

    std::vector<std::array<double, 3>> axis(E);
    for (std::size_t e = 0; e < E; ++e) {
        const double phi = kTwoPi * static_cast<double>(e) / static_cast<double>(E);
        const double z = (e % 2 == 0) ? -0.6 : 0.6;
        const double n = std::sqrt(1.0 + z * z);
        axis[e] = {std::cos(phi) / n, std::sin(phi) / n, z / n};
    }

    // Each electrode sits over a different muscle: unit-variance AR(1) carriers with
    // electrode-specific correlation give each channel its own zero-crossing rate.
    std::vector<double> rho(E), carrier(E);
    for (std::size_t e = 0; e < E; ++e) {
        rho[e] = E > 1 ? -0.5 + 1.2 * static_cast<double>(e) / static_cast<double>(E - 1) : 0.0;
        carrier[e] = rng.normal();
    }

    Tensor out({T, E});
    auto d = out.data();
    for (std::size_t t = 0; t < T; ++t) {
        const auto& prev = k.position[(t + T - 1) % T];
        const auto& next = k.position[(t + 1) % T];
        std::array<double, 3> v{};
        for (std::size_t a = 0; a < 3; ++a) v[a] = 0.5 * (next[a] - prev[a]) * fs;
        const double tremor = (k.tremor_amplitude / 0.3) * 0.4 * std::abs(tremor_wave(k, t, fs));
        for (std::size_t e = 0; e < E; ++e) {
            const double drive = std::max(0.0, v[0] * axis[e][0] + v[1] * axis[e][1] + v[2] * axis[e][2]) / v_ref;
            const double envelope = profile.electrode_gain[e] * (0.1 + drive) + tremor;
            if (t > 0) carrier[e] = rho[e] * carrier[e] + std::sqrt(1.0 - rho[e] * rho[e]) * rng.normal();
            double x = envelope * carrier[e];
            if (config.emg_noise > 0.0) x += rng.normal(0.0, config.emg_noise);
            d[t * E + e] = x;
        }
    }
    return out;
}

void check_synth(const SynthConfig& config) {
    if (config.frame_size < 4) throw ParameterError("frame_size must be at least 4");
    if (config.series_length < 8) throw ParameterError("series_length must be at least 8");
    if (!(config.sample_rate_hz > 0.0)) throw ParameterError("sample_rate_hz must be positive");
    if (config.electrodes == 0 || config.electrodes > 8) throw ParameterError("electrodes must be in [1, 8]");
    if (!(config.stroke_extent_m > 0.0)) throw ParameterError("stroke_extent_m must be positive");
    if (config.accel_noise_g < 0.0 || config.visual_noise < 0.0 || config.emg_noise < 0.0) {
        throw ParameterError("noise levels must be non-negative");
    }
}

std::vector<std::size_t> participants_of(const Dataset& dataset, const std::vector<std::size_t>& samples) {
    std::set<std::size_t> ids;
    for (auto i : samples) {
        if (i >= dataset.samples.size()) throw ParameterError("sample index out of range");
        ids.insert(dataset.samples[i].participant);
    }
    return {ids.begin(), ids.end()};
}

}  // namespace

void ParticipantProfile::validate() const {
    if (tremor_amplitude < 0.0) throw ValidationError("tremor amplitude must be non-negative");
    if (tremor_frequency < 4.0 || tremor_frequency > 12.0) throw ValidationError("tremor frequency outside [4, 12] Hz");
    if (!(speed_factor > 0.0 && speed_factor <= 1.0)) throw ValidationError("speed factor outside (0, 1]");
    if (!(amplitude_scale > 0.0 && amplitude_scale <= 1.0)) throw ValidationError("amplitude scale outside (0, 1]");
    if (!in_unit(fatigue_base)) throw ValidationError("fatigue base outside [0, 1]");
    if (!impaired && (tremor_amplitude != 0.0 || speed_factor != 1.0 || amplitude_scale != 1.0)) {
        throw ValidationError("unimpaired profile must be the identity profile");
    }
}

SynthConfig SynthConfig::noise_free() {
    SynthConfig c;
    c.accel_noise_g = 0.0;
    c.visual_noise = 0.0;
    c.emg_noise = 0.0;
    return c;
}

namespace {

// Participants per split part; throws when a requested part would be empty or overfull.
std::array<std::size_t, 3> split_sizes(const DatasetSpec& spec) {
    const std::size_t P = spec.participant_count;
    const auto count = [&](double f) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(P))); };
    const std::size_t n_train = count(spec.split[0]);
    const std::size_t n_val = count(spec.split[1]);
    if (n_train + n_val > P) throw ParameterError("split fractions leave no room for the test part");
    const std::array<std::size_t, 3> sizes{n_train, n_val, P - n_train - n_val};
    for (std::size_t part = 0; part < 3; ++part) {
        if (spec.split[part] > 0.0 && sizes[part] == 0) {
            throw ParameterError("split part " + std::to_string(part) + " is empty at this participant count");
        }
        if (spec.split[part] == 0.0 && sizes[part] != 0) {
            throw ParameterError("split part " + std::to_string(part) + " should be empty");
        }
    }
    return sizes;
}

}  // namespace

void DatasetSpec::validate() const {
    if (sample_count == 0) throw ParameterError("sample_count must be positive");
    if (participant_count == 0) throw ParameterError("participant_count must be positive");
    if (!in_unit(impaired_fraction)) throw ParameterError("impaired_fraction outside [0, 1]");
    if (class_count == 0 || class_count > kGestureClasses) throw ParameterError("class_count outside [1, 15]");
    double total = 0.0;
    for (double f : split) {
        if (!in_unit(f)) throw ParameterError("split fraction outside [0, 1]");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ParameterError("split fractions must sum to 1");
    split_sizes(*this);
    check_synth(synth);
}

DatasetSpec DatasetSpec::desk() { return DatasetSpec{}; }

DatasetSpec DatasetSpec::paper() {
    DatasetSpec s;
    s.sample_count = 10000;
    s.participant_count = 200;
    s.synth.frame_size = 32;
    return s;
}

std::vector<std::size_t> Dataset::samples_of(std::size_t participant) const {
    std::vector<std::size_t> out;
    for (const auto& s : samples) {
        if (s.participant == participant) out.push_back(s.index);
    }
    return out;
}

const std::array<std::string, kGestureClasses>& gesture_names() {
    static const std::array<std::string, kGestureClasses> names{
        "swipe_right", "swipe_left",   "swipe_up",    "swipe_down",        "circle_ccw",
        "circle_cw",   "diag_up",      "diag_down",   "double_horizontal", "double_vertical",
        "figure_eight", "figure_eight_reverse", "push", "pull",          "wave"};
    return names;
}

// Every template is a trigonometric polynomial of degree <= 3 in theta = 2 pi tau,
// so strokes are periodic and band-limited.
std::array<double, 3> stroke_position(GestureLabel label, double tau) {
    const double th = kTwoPi * tau;
    const double ramp = 0.5 * (1.0 - std::cos(th));
    switch (label) {
        case 0: return {ramp, 0.0, 0.0};
        case 1: return {-ramp, 0.0, 0.0};
        case 2: return {0.0, ramp, 0.0};
        case 3: return {0.0, -ramp, 0.0};
        case 4: return {0.5 * std::sin(th), ramp, 0.0};
        case 5: return {-0.5 * std::sin(th), ramp, 0.0};
        case 6: return {0.7 * ramp, 0.7 * ramp, 0.0};
        case 7: return {-0.7 * ramp, -0.7 * ramp, 0.0};
        case 8: return {0.5 * (1.0 - std::cos(2.0 * th)), 0.0, 0.0};
        case 9: return {0.0, 0.5 * (1.0 - std::cos(2.0 * th)), 0.0};
        case 10: return {0.5 * std::sin(th), 0.25 * std::sin(2.0 * th), 0.0};
        case 11: return {-0.5 * std::sin(th), 0.25 * std::sin(2.0 * th), 0.0};
        case 12: return {0.0, 0.0, ramp};
        case 13: return {0.0, 0.0, -ramp};
        case 14: return {ramp, 0.3 * std::sin(3.0 * th), 0.0};
        default: throw ParameterError("gesture label out of range: " + std::to_string(label));
    }
}

ParticipantProfile generate_participant(std::uint64_t seed, bool impaired, std::size_t id) {
    Rng rng(seed);
    ParticipantProfile p;
    p.id = id;
    p.impaired = impaired;
    if (impaired) {
        p.tremor_amplitude = rng.uniform(0.05, 0.3);
        p.tremor_frequency = rng.uniform(4.0, 12.0);
        p.speed_factor = rng.uniform(0.4, 0.9);
        p.amplitude_scale = rng.uniform(0.5, 0.9);
        p.fatigue_base = rng.uniform(0.3, 0.8);
    } else {
        p.fatigue_base = rng.uniform(0.0, 0.3);
    }
    for (auto& g : p.electrode_gain) g = rng.uniform(0.7, 1.3);
    return p;
}

GestureSample generate_sample(const ParticipantProfile& profile, GestureLabel label, std::uint64_t seed,
                              const SynthConfig& config) {
    check_synth(config);
    if (label >= kGestureClasses) throw ParameterError("gesture label out of range: " + std::to_string(label));
    Rng rng(seed);
    const auto k = draw_kinematics(profile, label, rng, config);

    GestureSample s;
    s.label = label;
    s.participant = profile.id;
    s.input.accel.sample_rate_hz = config.sample_rate_hz;
    s.input.accel.series = render_accel(k, config, config.accel_noise_g, &rng);
    s.input.visual.frame = render_visual(k, config, rng);
    s.input.emg.series = render_emg(k, profile, config, rng);
    s.input.emg.adjacency = ring_adjacency(config.electrodes);
    s.input.context.lighting = k.lighting;
    s.input.context.fatigue = k.fatigue;
    return s;
}

AccelPair generate_accel_pair(const ParticipantProfile& profile, GestureLabel label, std::uint64_t seed,
                              double noise_sigma, const SynthConfig& config) {
    check_synth(config);
    if (label >= kGestureClasses) throw ParameterError("gesture label out of range: " + std::to_string(label));
    if (noise_sigma < 0.0) throw ParameterError("noise sigma must be non-negative");
    Rng rng(seed);
    const auto k = draw_kinematics(profile, label, rng, config);
    AccelPair pair;
    pair.clean = render_accel(k, config, 0.0, nullptr);
    pair.noisy = pair.clean;
    for (auto& v : pair.noisy.data()) v += rng.normal(0.0, noise_sigma);
    return pair;
}

Dataset generate_dataset(const DatasetSpec& spec, std::size_t threads) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    ds.adjacency = ring_adjacency(spec.synth.electrodes);

    const std::size_t P = spec.participant_count;
    std::vector<std::size_t> order(P);
    for (std::size_t i = 0; i < P; ++i) order[i] = i;
    Rng impaired_rng(derive_seed(spec.seed, "impaired"));
    impaired_rng.shuffle(order.begin(), order.end());
    const auto impaired_count = static_cast<std::size_t>(std::llround(spec.impaired_fraction * static_cast<double>(P)));
    std::vector<bool> impaired(P, false);
    for (std::size_t i = 0; i < impaired_count; ++i) impaired[order[i]] = true;

    const auto participant_seed = derive_seed(spec.seed, "participants");
    ds.participants.reserve(P);
    for (std::size_t p = 0; p < P; ++p) {
        ds.participants.push_back(generate_participant(derive_seed(participant_seed, p), impaired[p], p));
    }

    const std::size_t N = spec.sample_count;
    std::vector<GestureLabel> labels(N);
    for (std::size_t i = 0; i < N; ++i) labels[i] = i % spec.class_count;
    Rng label_rng(derive_seed(spec.seed, "labels"));
    label_rng.shuffle(labels.begin(), labels.end());

    const auto sample_seed = derive_seed(spec.seed, "samples");
    ds.samples.resize(N);
    parallel_for(N, threads, [&](std::size_t i) {
        auto s = generate_sample(ds.participants[i % P], labels[i], derive_seed(sample_seed, i), spec.synth);
        s.index = i;
        ds.samples[i] = std::move(s);
    });
    return ds;
}

DatasetSplit split_dataset(const Dataset& dataset, const DatasetSpec& spec) {
    spec.validate();
    const std::size_t P = dataset.participants.size();

    std::vector<std::size_t> impaired, unimpaired;
    for (const auto& p : dataset.participants) (p.impaired ? impaired : unimpaired).push_back(p.id);
    Rng rng(derive_seed(spec.seed, "split"));
    rng.shuffle(impaired.begin(), impaired.end());
    rng.shuffle(unimpaired.begin(), unimpaired.end());

    // Interleave the two groups by relative rank so any contiguous block keeps the
    // impaired ratio as closely as integer counts allow.
    struct Keyed {
        double key;
        int group;
        std::size_t id;
    };
    std::vector<Keyed> keyed;
    for (std::size_t k = 0; k < impaired.size(); ++k) {
        keyed.push_back({(static_cast<double>(k) + 0.5) / static_cast<double>(impaired.size()), 0, impaired[k]});
    }
    for (std::size_t k = 0; k < unimpaired.size(); ++k) {
        keyed.push_back({(static_cast<double>(k) + 0.5) / static_cast<double>(unimpaired.size()), 1, unimpaired[k]});
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return a.key != b.key ? a.key < b.key : a.group < b.group;
    });

    const auto sizes = split_sizes(spec);
    const std::size_t n_train = sizes[0];
    const std::size_t n_val = sizes[1];

    std::vector<int> part_of(P, -1);
    for (std::size_t i = 0; i < keyed.size(); ++i) {
        part_of[keyed[i].id] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    }

    DatasetSplit split;
    std::array<std::vector<std::size_t>*, 3> samples{&split.train, &split.validation, &split.test};
    std::array<std::vector<std::size_t>*, 3> people{&split.train_participants, &split.validation_participants,
                                                    &split.test_participants};
    for (std::size_t p = 0; p < P; ++p) people[static_cast<std::size_t>(part_of[p])]->push_back(p);
    for (const auto& s : dataset.samples) samples[static_cast<std::size_t>(part_of[s.participant])]->push_back(s.index);
    return split;
}

std::vector<ClientPartition> partition_clients(const Dataset& dataset, const std::vector<std::size_t>& train_samples,
                                               std::size_t client_count, std::uint64_t seed) {
    if (client_count == 0) throw ParameterError("client count must be positive");
    auto ids = participants_of(dataset, train_samples);
    if (client_count > ids.size()) {
        throw ParameterError("client count " + std::to_string(client_count) + " exceeds participant count " +
                             std::to_string(ids.size()));
    }
    Rng rng(derive_seed(seed, "clients"));
    rng.shuffle(ids.begin(), ids.end());

    std::vector<ClientPartition> clients(client_count);
    std::vector<std::size_t> owner(dataset.participants.size(), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        clients[i % client_count].participants.push_back(ids[i]);
        owner[ids[i]] = i % client_count;
    }
    auto sorted = train_samples;
    std::sort(sorted.begin(), sorted.end());
    for (auto i : sorted) clients[owner[dataset.samples[i].participant]].samples.push_back(i);
    for (std::size_t c = 0; c < client_count; ++c) {
        clients[c].client_id = c;
        std::sort(clients[c].participants.begin(), clients[c].participants.end());
    }
    return clients;
}

std::vector<ClientPartition> partition_clients_iid(const Dataset& dataset,
                                                   const std::vector<std::size_t>& train_samples,
                                                   std::size_t client_count, std::uint64_t seed) {
    if (client_count == 0) throw ParameterError("client count must be positive");
    if (client_count > train_samples.size()) throw ParameterError("client count exceeds training sample count");
    auto order = train_samples;
    std::sort(order.begin(), order.end());
    Rng rng(derive_seed(seed, "clients-iid"));
    rng.shuffle(order.begin(), order.end());

    std::vector<ClientPartition> clients(client_count);
    for (std::size_t i = 0; i < order.size(); ++i) clients[i % client_count].samples.push_back(order[i]);
    for (std::size_t c = 0; c < client_count; ++c) {
        clients[c].client_id = c;
        std::sort(clients[c].samples.begin(), clients[c].samples.end());
        clients[c].participants = participants_of(dataset, clients[c].samples);
    }
    return clients;
}

}  // namespace gestura
