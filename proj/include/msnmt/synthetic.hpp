#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "msnmt/augmentation.hpp"

namespace msnmt {

// Three-language toy task. Target sentences are random symbol strings; the
// pivot maps each symbol through one bijection and the helper reverses the
// string and maps it through another. Symbols are written space-separated.
struct SyntheticSpec {
  std::size_t train_rows = 3000;
  std::size_t valid_rows = 200;
  std::size_t test_rows = 300;
  std::size_t alphabet = 20;
  std::size_t min_len = 4;
  std::size_t max_len = 12;
  double helper_drop = 0.4;
  double target_drop = 0.4;
  std::uint64_t seed = 1;
  std::array<std::string, 3> languages{"en", "cs", "sk"};  // pivot, helper, target
};

// Drops apply to the training rows only; valid and test rows are complete.
PipelineData make_synthetic(const SyntheticSpec& spec);

}  // namespace msnmt
