#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gestura/autodiff.hpp"
#include "gestura/tensor.hpp"

namespace gestura {

enum class InitKind {
    FanIn,        // U(-sqrt(1/fan_in), +sqrt(1/fan_in))
    Zeros,
    Ones,
    CenterTap,    // conv kernel [K x C x C]: identity at the middle tap, zero elsewhere
};

struct ParamEntry {
    std::string name;
    Shape shape;
    std::size_t offset = 0;
    std::size_t size = 0;
    InitKind init = InitKind::FanIn;
    std::size_t fan_in = 1;
};

// Contiguous range owned by a named sub-module (the name prefix before the first '.').
struct ModuleRange {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
};

// Ordered registry of named parameter tensors packed into one flat vector.
class ParamLayout {
public:
    std::size_t add(std::string name, Shape shape, InitKind init, std::size_t fan_in = 1);

    const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
    const ParamEntry& entry(std::size_t index) const { return entries_.at(index); }
    std::size_t total() const noexcept { return total_; }
    std::optional<std::size_t> find(std::string_view name) const;
    std::vector<ModuleRange> modules() const;

    // One flag per entry: false for entries whose name starts with any of the prefixes.
    std::vector<bool> trainable_mask(std::span<const std::string> frozen_prefixes) const;

    friend bool operator==(const ParamLayout&, const ParamLayout&);

private:
    std::vector<ParamEntry> entries_;
    std::size_t total_ = 0;
};

// Flat view of every trainable weight: the unit of federated exchange.
struct ModelParameters {
    std::vector<double> values;
    std::shared_ptr<const ParamLayout> layout;

    std::size_t size() const noexcept { return values.size(); }
    std::span<const double> slice(std::size_t entry) const;
    std::span<double> slice(std::size_t entry);
    Tensor tensor(std::size_t entry) const;
    Tensor tensor(std::string_view name) const;
    bool all_finite() const noexcept;
};

ModelParameters initialize_parameters(std::shared_ptr<const ParamLayout> layout, std::uint64_t seed);

// Leaf variables for every entry, recorded on `tape`.
class ParamBinding {
public:
    ParamBinding(ad::Tape& tape, const ModelParameters& params, const std::vector<bool>* trainable = nullptr);

    ad::Var operator[](std::size_t entry) const { return vars_.at(entry); }
    // Flat gradient after backward(); zeros for frozen entries.
    std::vector<double> gradient() const;

private:
    const ParamLayout* layout_;
    std::vector<ad::Var> vars_;
};

// Binary checkpoint: magic, version, parameter count, little-endian f64 payload,
// plus a JSON sidecar (`<path>.json`) mapping sub-modules to offset/length.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params);
ModelParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace gestura
