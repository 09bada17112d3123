#ifndef DGNAEA_RUN_CONFIG_HPP
#define DGNAEA_RUN_CONFIG_HPP

// Flat `key = value` run configuration. Every key has a documented default;
// unknown keys are rejected so typos never pass silently.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dgnaea/data.hpp"
#include "dgnaea/forecaster.hpp"
#include "dgnaea/geo_graph.hpp"
#include "dgnaea/training.hpp"

namespace dgnaea {

struct ConfigKey {
    std::string_view name;
    std::string_view default_value;
    std::string_view help;
};

/// All recognised keys in documentation order.
std::span<const ConfigKey> config_keys();

class RunConfig {
public:
    RunConfig();

    /// Parses `key = value` lines; `#` starts a comment. Throws
    /// std::invalid_argument with the line number on unknown keys or bad syntax.
    static RunConfig parse(std::string_view text, std::string_view origin = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    void set(std::string_view key, std::string value);
    const std::string& get(std::string_view key) const;
    bool is_default(std::string_view key) const;

    std::string get_string(std::string_view key) const { return get(key); }
    double get_double(std::string_view key) const;
    std::size_t get_size(std::string_view key) const;
    std::uint64_t get_u64(std::string_view key) const;
    bool get_bool(std::string_view key) const;
    /// Comma-separated list; `a..b` expands to an inclusive integer range.
    std::vector<std::uint64_t> get_u64_list(std::string_view key) const;
    std::vector<std::size_t> get_size_list(std::string_view key) const;

    /// Every key with its resolved value, in documentation order.
    std::string resolved() const;
    void write_resolved(const std::filesystem::path& path) const;

    ModelConfig model_config(std::uint64_t seed) const;
    TrainConfig train_config(std::uint64_t seed) const;
    TopologyThresholds thresholds() const;
    SynthConfig synth_config(std::uint64_t seed) const;
    std::vector<Variant> variants() const;
    /// Split for `dataset`: a named scheme, `ratio`, `custom` or `none`.
    SplitData split_dataset(const Dataset& dataset) const;

private:
    std::map<std::string, std::string, std::less<>> values_;
    std::map<std::string, bool, std::less<>> explicit_;
};

} // namespace dgnaea

#endif // DGNAEA_RUN_CONFIG_HPP
