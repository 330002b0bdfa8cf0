#pragma once

#include <cstdint>

namespace cxr {

/// Binary class label. Positive is the class of interest (COVID-19 present,
/// intubation required).
enum class Label : std::uint8_t { kNegative = 0, kPositive = 1 };

constexpr int to_int(Label l) noexcept { return static_cast<int>(l); }
constexpr Label label_from_bool(bool positive) noexcept {
  return positive ? Label::kPositive : Label::kNegative;
}

}  // namespace cxr
