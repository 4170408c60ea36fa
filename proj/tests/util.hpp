// Small shared helpers for the test binaries.
#pragma once

#include <optional>
#include <utility>

#include "nnoc/error.hpp"

namespace testutil {

// Runs f and reports the library error kind it threw, if any.
template <class F>
std::optional<nnoc::Err> thrown_kind(F&& f) {
  try {
    std::forward<F>(f)();
  } catch (const nnoc::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace testutil
