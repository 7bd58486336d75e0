// Copyright (c) 2026, the rftdesk authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "rft/rng.hpp"
#include "rft/types.hpp"

#include <cstdint>
#include <numeric>
#include <vector>

namespace rft {

/// Deterministic dataset order: epoch e visits a permutation drawn from
/// derive_seed(seed, e).
class DatasetCycler {
public:
    DatasetCycler(std::size_t size, std::uint64_t seed) : size_(size), seed_(seed) {
        if (size_ == 0) throw Fault("cannot cycle an empty dataset");
    }

    std::size_t next() {
        if (cursor_ == order_.size()) reshuffle();
        return order_[cursor_++];
    }

private:
    void reshuffle() {
        order_.resize(size_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        Rng rng(derive_seed(seed_, epoch_++));
        rng.shuffle(std::span<std::size_t>(order_));
        cursor_ = 0;
    }

    std::size_t size_;
    std::uint64_t seed_;
    std::uint64_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

}  // namespace rft
