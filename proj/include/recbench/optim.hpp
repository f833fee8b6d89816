// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "recbench/nn.hpp"

namespace recbench::optim {

using nn::NamedParam;
using nn::ParamList;

struct ParamGroup {
    ParamList params;
    real_t lr = 1e-4;
    real_t weight_decay = 0;
};

// AdamW with bias correction and decoupled weight decay: the decay
// p <- p * (1 - lr * wd) is applied separately from the adaptive step.
class AdamW {
public:
    explicit AdamW(std::vector<ParamGroup> groups, real_t beta1 = 0.9, real_t beta2 = 0.999,
                   real_t eps = 1e-8);

    // Applies one update. Every parameter must have a populated gradient
    // buffer; a missing one raises ContractError naming the parameter.
    void step();
    void zero_grad();

    long steps_taken() const { return t_; }
    const std::vector<ParamGroup>& groups() const { return groups_; }

private:
    struct Slot {
        std::vector<real_t> m, v;
    };
    std::vector<ParamGroup> groups_;
    std::vector<std::vector<Slot>> state_;
    real_t beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace recbench::optim
