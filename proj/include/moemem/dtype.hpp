// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "moemem/error.hpp"

namespace moemem {

// Bytes per element for each class of training state. Defaults: BF16
// weights and activations, FP32 gradients, and an optimizer holding an FP32
// master copy with BF16 momentum and variance.
struct DtypePolicy {
  std::int64_t weight_bytes = 2;
  std::int64_t activation_bytes = 2;
  std::int64_t gradient_bytes = 4;
  std::int64_t master_copy_bytes = 4;
  std::int64_t momentum_bytes = 2;
  std::int64_t variance_bytes = 2;

  std::int64_t optimizer_bytes() const { return master_copy_bytes + momentum_bytes + variance_bytes; }

  bool operator==(const DtypePolicy&) const = default;

  void validate() const {
    auto check = [](std::int64_t v, const char* name) {
      if (v <= 0) throw ValidationError(std::string("dtype width '") + name + "' must be positive");
    };
    check(weight_bytes, "weight_bytes");
    check(activation_bytes, "activation_bytes");
    check(gradient_bytes, "gradient_bytes");
    check(master_copy_bytes, "master_copy_bytes");
    check(momentum_bytes, "momentum_bytes");
    check(variance_bytes, "variance_bytes");
  }
};

}  // namespace moemem
