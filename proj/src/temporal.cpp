#include "dgnaea/temporal.hpp"

#include <stdexcept>
#include <string>

namespace dgnaea::temporal {

GruStep gru_step(const GruWeights& w, const ad::Value& fused, const ad::Value& embed, const ad::Value& h_prev) {
    const std::size_t in_width = h_prev.cols() + fused.cols() + embed.cols();
    const Matrix& wq = w.update.weight.data();
    if (wq.rows() != in_width || wq.cols() != h_prev.cols())
        throw std::invalid_argument("GRU weights are " + std::to_string(wq.rows()) + "x" + std::to_string(wq.cols()) +
                                    ", inputs need " + std::to_string(in_width) + "x" +
                                    std::to_string(h_prev.cols()));

    const ad::Value c = ad::concat({fused, embed});
    const ad::Value hc = ad::concat({h_prev, c});
    GruStep s;
    s.update = ad::sigmoid(spatial::apply(w.update, hc));
    s.reset = ad::sigmoid(spatial::apply(w.reset, hc));
    s.candidate = ad::tanh(spatial::apply(w.candidate, ad::concat({ad::hadamard(s.reset, h_prev), c})));
    s.hidden = ad::add(ad::hadamard(ad::affine(s.update, -1.0, 1.0), h_prev), ad::hadamard(s.update, s.candidate));
    return s;
}

ad::Value readout(const spatial::Linear& head, const ad::Value& hidden) {
    return spatial::apply(head, hidden);
}

} // namespace dgnaea::temporal
