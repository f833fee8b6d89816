// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/optim.hpp"

#include <cmath>
#include <unordered_set>

namespace recbench::optim {

AdamW::AdamW(std::vector<ParamGroup> groups, real_t beta1, real_t beta2, real_t eps)
    : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    std::unordered_set<const void*> seen;
    state_.resize(groups_.size());
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        state_[g].resize(groups_[g].params.size());
        for (std::size_t i = 0; i < groups_[g].params.size(); ++i) {
            const auto& p = groups_[g].params[i];
            if (!p.value.requires_grad()) {
                throw ConfigError("AdamW: parameter '" + p.name + "' is not trainable");
            }
            if (!seen.insert(p.value.node()).second) {
                throw ConfigError("AdamW: parameter '" + p.name + "' assigned to two groups");
            }
            state_[g][i].m.assign(p.value.numel(), 0);
            state_[g][i].v.assign(p.value.numel(), 0);
        }
    }
}

void AdamW::step() {
    ++t_;
    const real_t bc1 = 1 - std::pow(beta1_, static_cast<real_t>(t_));
    const real_t bc2 = 1 - std::pow(beta2_, static_cast<real_t>(t_));
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        auto& group = groups_[g];
        for (std::size_t i = 0; i < group.params.size(); ++i) {
            auto& p = group.params[i].value;
            if (p.grad().size() != p.numel()) {
                throw ContractError("AdamW::step: missing gradient for parameter '" +
                                    group.params[i].name + "'");
            }
            auto& slot = state_[g][i];
            real_t* w = p.val().data();
            const real_t* grad = p.grad().data();
            const std::size_t n = p.numel();
            const real_t decay = 1 - group.lr * group.weight_decay;
            for (std::size_t j = 0; j < n; ++j) {
                slot.m[j] = beta1_ * slot.m[j] + (1 - beta1_) * grad[j];
                slot.v[j] = beta2_ * slot.v[j] + (1 - beta2_) * grad[j] * grad[j];
                const real_t mhat = slot.m[j] / bc1;
                const real_t vhat = slot.v[j] / bc2;
                if (group.weight_decay != 0) w[j] *= decay;
                w[j] -= group.lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }
}

void AdamW::zero_grad() {
    for (auto& group : groups_) {
        for (auto& p : group.params) p.value.zero_grad();
    }
}

}  // namespace recbench::optim
