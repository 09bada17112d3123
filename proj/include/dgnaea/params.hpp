#ifndef DGNAEA_PARAMS_HPP
#define DGNAEA_PARAMS_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dgnaea/autodiff.hpp"
#include "dgnaea/matrix.hpp"

namespace dgnaea {

/// Named parameter arrays in insertion order. Order defines the flat
/// parameter vector used by the optimizer and checkpoints.
class ParamStore {
public:
    Matrix& add(std::string name, Matrix value);
    bool contains(std::string_view name) const;
    std::size_t index(std::string_view name) const;
    Matrix& get(std::string_view name) { return values_[index(name)]; }
    const Matrix& get(std::string_view name) const { return values_[index(name)]; }

    std::size_t size() const noexcept { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Matrix& at(std::size_t i) { return values_[i]; }
    const Matrix& at(std::size_t i) const { return values_[i]; }
    std::vector<Matrix>& values() noexcept { return values_; }
    const std::vector<Matrix>& values() const noexcept { return values_; }

    /// Total number of scalars.
    std::size_t scalar_count() const;

    friend bool operator==(const ParamStore&, const ParamStore&) = default;

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
};

/// Parameters of a ParamStore recorded as leaves on one tape.
class BoundParams {
public:
    BoundParams(ad::Tape& tape, const ParamStore& store, bool trainable);

    ad::Value operator[](std::string_view name) const { return leaves_[store_->index(name)]; }
    const std::vector<ad::Value>& leaves() const noexcept { return leaves_; }
    /// Gradients in store order; zeros where nothing flowed.
    std::vector<Matrix> gradients() const;

private:
    const ParamStore* store_;
    std::vector<ad::Value> leaves_;
};

/// splitmix64; used to derive independent streams from one run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Stream ids for mix_seed. Fixed so runs are reproducible across versions.
namespace seed_stream {
inline constexpr std::uint64_t kWeights = 1;
inline constexpr std::uint64_t kAdaptiveEdges = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kStations = 4;
inline constexpr std::uint64_t kWind = 5;
inline constexpr std::uint64_t kCoefficients = 6;
inline constexpr std::uint64_t kSources = 7;
inline constexpr std::uint64_t kNoise = 8;
inline constexpr std::uint64_t kWeather = 9;
} // namespace seed_stream

using Rng = std::mt19937_64;

/// Uniform(-bound, bound) matrix.
Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng);

} // namespace dgnaea

#endif // DGNAEA_PARAMS_HPP
