#include "dgnaea/params.hpp"

#include <stdexcept>

namespace dgnaea {

Matrix& ParamStore::add(std::string name, Matrix value) {
    if (contains(name))
        throw std::invalid_argument("duplicate parameter '" + name + "'");
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.back();
}

bool ParamStore::contains(std::string_view name) const {
    for (const auto& n : names_)
        if (n == name)
            return true;
    return false;
}

std::size_t ParamStore::index(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name)
            return i;
    throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const Matrix& m : values_)
        n += m.size();
    return n;
}

BoundParams::BoundParams(ad::Tape& tape, const ParamStore& store, bool trainable) : store_(&store) {
    leaves_.reserve(store.size());
    for (const Matrix& m : store.values())
        leaves_.push_back(trainable ? tape.parameter(m) : tape.constant(m));
}

std::vector<Matrix> BoundParams::gradients() const {
    std::vector<Matrix> out;
    out.reserve(leaves_.size());
    for (const ad::Value& v : leaves_)
        out.push_back(v.grad());
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.values())
        v = dist(rng);
    return m;
}

} // namespace dgnaea
