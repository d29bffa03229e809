#pragma once

#include <stdexcept>
#include <vector>

#include "bm/rng.hpp"

namespace bm {

/// Equal-length lists of coupled samples (x0_i, x1_i).
struct PairedBatch {
    std::vector<Vec> x0s;
    std::vector<Vec> x1s;

    std::size_t size() const { return x0s.size(); }
    bool empty() const { return x0s.empty(); }

    int dim() const {
        if (x0s.empty()) return 0;
        return static_cast<int>(x0s.front().size());
    }

    void push(Vec x0, Vec x1) {
        check_same_dim(x0, x1, "PairedBatch::push");
        if (!x0s.empty() && x0.size() != x0s.front().size())
            throw std::invalid_argument("PairedBatch::push: dim differs from batch");
        x0s.push_back(std::move(x0));
        x1s.push_back(std::move(x1));
    }
};

} // namespace bm
