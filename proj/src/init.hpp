// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pqft/rng.hpp"
#include "pqft/tensor.hpp"

namespace pqft::detail {

inline Tensor random_normal(Shape shape, float stddev, Rng& rng) {
    std::vector<float> data(shape_numel(shape));
    for (float& v : data) v = static_cast<float>(rng.normal() * stddev);
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace pqft::detail
