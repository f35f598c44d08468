// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace moemem {

// Base class for every error the library raises on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An input violates a documented invariant (bad dimension, topology, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The requested quantity has no closed form in the memory model.
class NotModeledError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace moemem
