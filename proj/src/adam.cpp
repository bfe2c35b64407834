#include "rpwno/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace rpwno {

AdamState adam_init(std::span<Parameter* const> params, AdamOptions options) {
    AdamState s;
    s.options = options;
    for (const auto* p : params) {
        s.first_moment.push_back(Tensor::zeros_like(p->value));
        s.second_moment.push_back(Tensor::zeros_like(p->value));
    }
    s.initialized = true;
    return s;
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
    if (!state.initialized) throw std::logic_error("adam_step: optimizer state is not initialized");
    if (state.first_moment.size() != params.size())
        throw std::logic_error("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                               " parameters, got " + std::to_string(params.size()));
    ++state.step;
    const auto& o = state.options;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        if (!m.same_shape(p.value) || !p.grad.same_shape(p.value))
            throw std::logic_error("adam_step: shape drift on parameter '" + p.name + "'");
        for (std::size_t j = 0; j < p.value.numel(); ++j) {
            const double g = p.grad[j];
            m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
            v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p.value[j] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
        }
    }
}

}  // namespace rpwno
