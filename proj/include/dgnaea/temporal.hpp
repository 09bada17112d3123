#ifndef DGNAEA_TEMPORAL_HPP
#define DGNAEA_TEMPORAL_HPP

#include "dgnaea/autodiff.hpp"
#include "dgnaea/spatial.hpp"

namespace dgnaea::temporal {

/// Gate transforms act on [h_prev, c] with c = [zeta, eps]; weights are
/// (h + h_e + 9) x h, biases 1 x h.
struct GruWeights {
    spatial::Linear update;     // W_q
    spatial::Linear reset;      // W_r
    spatial::Linear candidate;  // W~
};

struct GruStep {
    ad::Value update;     // q
    ad::Value reset;      // r
    ad::Value candidate;  // h~
    ad::Value hidden;     // h
};

/// q = sigmoid(W_q [h, c]), r = sigmoid(W_r [h, c]),
/// h~ = tanh(W~ [r * h, c]), h' = (1 - q) * h + q * h~.
GruStep gru_step(const GruWeights& w, const ad::Value& fused, const ad::Value& embed, const ad::Value& h_prev);

/// Per-node scalar output, identity activation.
ad::Value readout(const spatial::Linear& head, const ad::Value& hidden);

} // namespace dgnaea::temporal

#endif // DGNAEA_TEMPORAL_HPP
