#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rpwno/autodiff.hpp"

namespace rpwno {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamOptions options;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;
    bool initialized = false;
};

AdamState adam_init(std::span<Parameter* const> params, AdamOptions options = {});

// One bias-corrected Adam update from the current gradients. Gradients are left untouched.
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace rpwno
