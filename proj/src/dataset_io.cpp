#include "gestura/dataset_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "gestura/errors.hpp"

namespace gestura {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<char, 8> kMagic{'G', 'S', 'T', 'R', 'D', 'A', 'T', 'A'};
constexpr std::uint64_t kFormatVersion = 1;

class Writer {
public:
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void tensor(const Tensor& t) {
        u64(t.rank());
        for (auto d : t.shape()) u64(d);
        u64(t.size());
        for (double v : t.data()) f64(v);
    }
    void raw(const char* p, std::size_t n) { bytes_.append(p, n); }
    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class Reader {
public:
    Reader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    Tensor tensor() {
        const auto rank = u64();
        if (rank > 4) fail("tensor rank " + std::to_string(rank));
        Shape shape(rank);
        std::uint64_t expect = 1;
        for (auto& d : shape) {
            d = u64();
            expect *= d;
        }
        const auto n = u64();
        if (n != expect) fail("tensor length does not match its shape");
        need(8 * n);
        std::vector<double> data(n);
        for (auto& v : data) v = f64();
        return Tensor(std::move(shape), std::move(data));
    }
    void magic() {
        need(kMagic.size());
        if (std::memcmp(bytes_.data(), kMagic.data(), kMagic.size()) != 0) fail("bad magic");
        pos_ += kMagic.size();
    }
    bool done() const { return pos_ == bytes_.size(); }
    [[noreturn]] void fail(const std::string& what) const { throw IoError(name_ + ": " + what); }

private:
    void need(std::uint64_t n) const {
        if (n > bytes_.size() - pos_) fail("truncated at byte " + std::to_string(pos_));
    }

    std::string bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in && !in.eof()) throw IoError("failed reading " + path.string());
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

ordered_json profile_to_json(const ParticipantProfile& p) {
    return {{"id", p.id},
            {"impaired", p.impaired},
            {"tremor_amplitude", p.tremor_amplitude},
            {"tremor_frequency", p.tremor_frequency},
            {"speed_factor", p.speed_factor},
            {"amplitude_scale", p.amplitude_scale},
            {"fatigue_base", p.fatigue_base},
            {"electrode_gain", p.electrode_gain}};
}

ParticipantProfile profile_from_json(const json& j) {
    ParticipantProfile p;
    p.id = j.at("id").get<std::size_t>();
    p.impaired = j.at("impaired").get<bool>();
    p.tremor_amplitude = j.at("tremor_amplitude").get<double>();
    p.tremor_frequency = j.at("tremor_frequency").get<double>();
    p.speed_factor = j.at("speed_factor").get<double>();
    p.amplitude_scale = j.at("amplitude_scale").get<double>();
    p.fatigue_base = j.at("fatigue_base").get<double>();
    p.electrode_gain = j.at("electrode_gain").get<std::array<double, 8>>();
    return p;
}

}  // namespace

ordered_json spec_to_json(const DatasetSpec& s) {
    return {{"sample_count", s.sample_count},
            {"participant_count", s.participant_count},
            {"impaired_fraction", s.impaired_fraction},
            {"class_count", s.class_count},
            {"split", s.split},
            {"seed", s.seed},
            {"synth",
             {{"frame_size", s.synth.frame_size},
              {"series_length", s.synth.series_length},
              {"sample_rate_hz", s.synth.sample_rate_hz},
              {"electrodes", s.synth.electrodes},
              {"stroke_extent_m", s.synth.stroke_extent_m},
              {"accel_noise_g", s.synth.accel_noise_g},
              {"visual_noise", s.synth.visual_noise},
              {"emg_noise", s.synth.emg_noise},
              {"tremor_in_visual", s.synth.tremor_in_visual}}}};
}

DatasetSpec spec_from_json(const json& j) {
    DatasetSpec s;
    s.sample_count = j.at("sample_count").get<std::size_t>();
    s.participant_count = j.at("participant_count").get<std::size_t>();
    s.impaired_fraction = j.at("impaired_fraction").get<double>();
    s.class_count = j.at("class_count").get<std::size_t>();
    s.split = j.at("split").get<std::array<double, 3>>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& y = j.at("synth");
    s.synth.frame_size = y.at("frame_size").get<std::size_t>();
    s.synth.series_length = y.at("series_length").get<std::size_t>();
    s.synth.sample_rate_hz = y.at("sample_rate_hz").get<double>();
    s.synth.electrodes = y.at("electrodes").get<std::size_t>();
    s.synth.stroke_extent_m = y.at("stroke_extent_m").get<double>();
    s.synth.accel_noise_g = y.at("accel_noise_g").get<double>();
    s.synth.visual_noise = y.at("visual_noise").get<double>();
    s.synth.emg_noise = y.at("emg_noise").get<double>();
    s.synth.tremor_in_visual = y.at("tremor_in_visual").get<bool>();
    return s;
}

void write_dataset(const Dataset& dataset, const DatasetSplit& split, const fs::path& dir,
                   std::span<const ClientPartition> clients) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    Writer w;
    w.raw(kMagic.data(), kMagic.size());
    w.u64(kFormatVersion);
    w.u64(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        w.u64(s.index);
        w.u64(s.label);
        w.u64(s.participant);
        w.tensor(s.input.visual.frame);
        w.f64(s.input.accel.sample_rate_hz);
        w.tensor(s.input.accel.series);
        w.tensor(s.input.emg.series);
        w.f64(s.input.context.lighting);
        w.f64(s.input.context.fatigue);
        w.u64(s.input.context.extra.size());
        for (double v : s.input.context.extra) w.f64(v);
    }
    write_file(dir / kDatasetSamples, w.bytes());

    ordered_json participants = ordered_json::array();
    for (const auto& p : dataset.participants) participants.push_back(profile_to_json(p));
    ordered_json records = ordered_json::array();
    for (const auto& s : dataset.samples) {
        records.push_back({{"index", s.index}, {"label", s.label}, {"participant", s.participant}});
    }
    ordered_json parts = ordered_json::array();
    for (const auto& c : clients) {
        parts.push_back({{"client_id", c.client_id}, {"participants", c.participants}, {"samples", c.samples}});
    }
    ordered_json m = {{"format", "gestura-dataset"},
                      {"version", kFormatVersion},
                      {"spec", spec_to_json(dataset.spec)},
                      {"samples_file", kDatasetSamples},
                      {"samples_sha256", sha256_hex(w.bytes())},
                      {"record_count", dataset.samples.size()},
                      {"adjacency", dataset.adjacency},
                      {"participants", participants},
                      {"split",
                       {{"train", split.train},
                        {"validation", split.validation},
                        {"test", split.test},
                        {"train_participants", split.train_participants},
                        {"validation_participants", split.validation_participants},
                        {"test_participants", split.test_participants}}},
                      {"clients", parts},
                      {"records", records}};
    write_file(dir / kDatasetManifest, m.dump(1) + '\n');
}

Dataset read_dataset(const fs::path& dir) {
    const auto manifest_path = dir / kDatasetManifest;
    if (!fs::exists(manifest_path)) throw ConfigError("no dataset at " + dir.string() + " (missing manifest.json)");
    json m;
    try {
        m = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw IoError("malformed " + manifest_path.string() + ": " + e.what());
    }

    Dataset d;
    std::string expected_digest;
    std::size_t count = 0;
    try {
        if (m.at("format").get<std::string>() != "gestura-dataset") throw IoError("not a dataset manifest");
        if (m.at("version").get<std::uint64_t>() != kFormatVersion) throw IoError("unsupported dataset version");
        d.spec = spec_from_json(m.at("spec"));
        d.adjacency = m.at("adjacency").get<std::vector<std::uint8_t>>();
        for (const auto& p : m.at("participants")) d.participants.push_back(profile_from_json(p));
        expected_digest = m.at("samples_sha256").get<std::string>();
        count = m.at("record_count").get<std::size_t>();
    } catch (const json::exception& e) {
        throw IoError("malformed " + manifest_path.string() + ": " + e.what());
    }

    const auto bin_path = dir / kDatasetSamples;
    auto bytes = read_file(bin_path);
    if (sha256_hex(bytes) != expected_digest) throw IoError(bin_path.string() + ": digest does not match manifest");
    Reader r(std::move(bytes), bin_path.string());
    r.magic();
    if (r.u64() != kFormatVersion) r.fail("unsupported version");
    if (r.u64() != count) r.fail("record count differs from manifest");
    d.samples.resize(count);
    for (auto& s : d.samples) {
        s.index = r.u64();
        s.label = r.u64();
        s.participant = r.u64();
        s.input.visual.frame = r.tensor();
        s.input.accel.sample_rate_hz = r.f64();
        s.input.accel.series = r.tensor();
        s.input.emg.series = r.tensor();
        s.input.emg.adjacency = d.adjacency;
        s.input.context.lighting = r.f64();
        s.input.context.fatigue = r.f64();
        const auto extra = r.u64();
        if (extra > 64) r.fail("implausible context width");
        s.input.context.extra.resize(extra);
        for (auto& v : s.input.context.extra) v = r.f64();
        if (s.participant >= d.participants.size()) r.fail("sample refers to an unknown participant");
    }
    if (!r.done()) r.fail("trailing bytes");
    return d;
}

void dump_csv(const Dataset& dataset, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream visual(dir / "visual.csv");
    std::ofstream accel(dir / "accel.csv");
    std::ofstream emg(dir / "emg.csv");
    if (!visual || !accel || !emg) throw IoError("cannot write CSV files in " + dir.string());
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    visual << "sample,label,row,col,value\n";
    accel << "sample,label,t,x,y,z\n";
    emg << "sample,label,t";
    for (std::size_t e = 0; e < dataset.spec.synth.electrodes; ++e) emg << ",e" << e;
    emg << '\n';
    for (const auto& s : dataset.samples) {
        const auto& f = s.input.visual.frame;
        for (std::size_t r = 0; r < f.rows(); ++r) {
            for (std::size_t c = 0; c < f.cols(); ++c) {
                visual << s.index << ',' << s.label << ',' << r << ',' << c << ',' << fmt(f.at(r, c)) << '\n';
            }
        }
        for (const auto* t : {&s.input.accel.series, &s.input.emg.series}) {
            auto& out = t == &s.input.accel.series ? accel : emg;
            for (std::size_t r = 0; r < t->rows(); ++r) {
                out << s.index << ',' << s.label << ',' << r;
                for (std::size_t c = 0; c < t->cols(); ++c) out << ',' << fmt(t->at(r, c));
                out << '\n';
            }
        }
    }
    if (!visual || !accel || !emg) throw IoError("failed writing CSV files in " + dir.string());
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

}  // namespace gestura
