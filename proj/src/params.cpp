#include "gestura/params.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gestura/errors.hpp"
#include "gestura/rng.hpp"

namespace gestura {

namespace {

constexpr std::array<char, 8> kMagic = {'G', 'S', 'T', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::ostream& os, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::ostream& os, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::istream& is) {
    std::array<unsigned char, 8> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw IoError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

std::string init_name(InitKind k) {
    switch (k) {
        case InitKind::FanIn: return "fan_in";
        case InitKind::Zeros: return "zeros";
        case InitKind::Ones: return "ones";
        case InitKind::CenterTap: return "center_tap";
    }
    return "fan_in";
}

InitKind init_from_name(const std::string& s) {
    if (s == "zeros") return InitKind::Zeros;
    if (s == "ones") return InitKind::Ones;
    if (s == "center_tap") return InitKind::CenterTap;
    return InitKind::FanIn;
}

}  // namespace

std::size_t ParamLayout::add(std::string name, Shape shape, InitKind init, std::size_t fan_in) {
    if (find(name)) throw ParameterError("duplicate parameter name: " + name);
    ParamEntry e;
    e.name = std::move(name);
    e.size = element_count(shape);
    e.shape = std::move(shape);
    e.offset = total_;
    e.init = init;
    e.fan_in = fan_in == 0 ? 1 : fan_in;
    total_ += e.size;
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
}

std::optional<std::size_t> ParamLayout::find(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name == name) return i;
    return std::nullopt;
}

std::vector<ModuleRange> ParamLayout::modules() const {
    std::vector<ModuleRange> out;
    for (const auto& e : entries_) {
        const auto module = e.name.substr(0, e.name.find('.'));
        if (out.empty() || out.back().name != module) {
            out.push_back({module, e.offset, 0});
        }
        out.back().length += e.size;
    }
    return out;
}

std::vector<bool> ParamLayout::trainable_mask(std::span<const std::string> frozen_prefixes) const {
    std::vector<bool> mask(entries_.size(), true);
    for (std::size_t i = 0; i < entries_.size(); ++i)
        for (const auto& p : frozen_prefixes)
            if (entries_[i].name.starts_with(p)) mask[i] = false;
    return mask;
}

bool operator==(const ParamLayout& a, const ParamLayout& b) {
    if (a.total_ != b.total_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
        const auto &x = a.entries_[i], &y = b.entries_[i];
        if (x.name != y.name || x.shape != y.shape || x.offset != y.offset) return false;
    }
    return true;
}

std::span<const double> ModelParameters::slice(std::size_t entry) const {
    const auto& e = layout->entry(entry);
    return std::span<const double>(values).subspan(e.offset, e.size);
}

std::span<double> ModelParameters::slice(std::size_t entry) {
    const auto& e = layout->entry(entry);
    return std::span<double>(values).subspan(e.offset, e.size);
}

Tensor ModelParameters::tensor(std::size_t entry) const {
    auto s = slice(entry);
    return Tensor(layout->entry(entry).shape, std::vector<double>(s.begin(), s.end()));
}

Tensor ModelParameters::tensor(std::string_view name) const {
    auto idx = layout->find(name);
    if (!idx) throw ParameterError("unknown parameter " + std::string(name));
    return tensor(*idx);
}

bool ModelParameters::all_finite() const noexcept {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

ModelParameters initialize_parameters(std::shared_ptr<const ParamLayout> layout, std::uint64_t seed) {
    ModelParameters p;
    p.values.assign(layout->total(), 0.0);
    p.layout = layout;
    Rng rng(seed);
    for (std::size_t i = 0; i < layout->entries().size(); ++i) {
        const auto& e = layout->entry(i);
        auto s = p.slice(i);
        switch (e.init) {
            case InitKind::FanIn: {
                const double bound = std::sqrt(1.0 / static_cast<double>(e.fan_in));
                for (auto& v : s) v = rng.uniform(-bound, bound);
                break;
            }
            case InitKind::Zeros: break;
            case InitKind::Ones: std::fill(s.begin(), s.end(), 1.0); break;
            case InitKind::CenterTap: {
                if (e.shape.size() != 3 || e.shape[1] != e.shape[2]) {
                    throw ShapeError("center_tap init needs a [K x C x C] kernel, got " + to_string(e.shape));
                }
                const std::size_t K = e.shape[0], C = e.shape[1];
                for (std::size_t c = 0; c < C; ++c) s[((K / 2) * C + c) * C + c] = 1.0;
                break;
            }
        }
    }
    return p;
}

ParamBinding::ParamBinding(ad::Tape& tape, const ModelParameters& params, const std::vector<bool>* trainable)
    : layout_(params.layout.get()) {
    vars_.reserve(layout_->entries().size());
    for (std::size_t i = 0; i < layout_->entries().size(); ++i) {
        const bool grad = trainable == nullptr || (*trainable)[i];
        vars_.push_back(tape.leaf(params.tensor(i), grad));
    }
}

std::vector<double> ParamBinding::gradient() const {
    std::vector<double> g(layout_->total(), 0.0);
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        auto src = vars_[i].grad();
        if (src.empty()) continue;
        std::copy(src.begin(), src.end(), g.begin() + static_cast<std::ptrdiff_t>(layout_->entry(i).offset));
    }
    return g;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
        os.write(kMagic.data(), kMagic.size());
        put_u32(os, kCheckpointVersion);
        put_u64(os, params.values.size());
        for (double v : params.values) put_u64(os, std::bit_cast<std::uint64_t>(v));
        if (!os) throw IoError("failed writing checkpoint: " + path.string());
    }
    nlohmann::ordered_json side;
    side["format"] = "gestura-checkpoint";
    side["version"] = kCheckpointVersion;
    side["parameter_count"] = params.values.size();
    auto modules = nlohmann::ordered_json::object();
    auto tensors = nlohmann::ordered_json::array();
    if (params.layout) {
        for (const auto& m : params.layout->modules()) modules[m.name] = {{"offset", m.offset}, {"length", m.length}};
        for (const auto& e : params.layout->entries()) {
            tensors.push_back({{"name", e.name},
                               {"shape", e.shape},
                               {"offset", e.offset},
                               {"length", e.size},
                               {"init", init_name(e.init)},
                               {"fan_in", e.fan_in}});
        }
    }
    side["modules"] = std::move(modules);
    side["tensors"] = std::move(tensors);
    auto side_path = path;
    side_path += ".json";
    std::ofstream js(side_path, std::ios::trunc);
    if (!js) throw IoError("cannot open checkpoint sidecar for writing: " + side_path.string());
    js << side.dump(2) << "\n";
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("bad checkpoint magic: " + path.string());
    const auto version = get_u32(is);
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
    }
    const auto count = get_u64(is);
    ModelParameters p;
    p.values.resize(count);
    for (auto& v : p.values) v = std::bit_cast<double>(get_u64(is));

    auto side_path = path;
    side_path += ".json";
    auto layout = std::make_shared<ParamLayout>();
    if (std::ifstream js(side_path); js) {
        nlohmann::json side;
        try {
            side = nlohmann::json::parse(js);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("malformed checkpoint sidecar " + side_path.string() + ": " + e.what());
        }
        for (const auto& t : side.at("tensors")) {
            layout->add(t.at("name").get<std::string>(), t.at("shape").get<Shape>(),
                        init_from_name(t.value("init", "fan_in")), t.value("fan_in", std::size_t{1}));
        }
        if (layout->total() != count) throw IoError("checkpoint sidecar does not match payload: " + path.string());
    } else {
        layout->add("flat.values", {count}, InitKind::Zeros);
    }
    p.layout = std::move(layout);
    return p;
}

}  // namespace gestura
