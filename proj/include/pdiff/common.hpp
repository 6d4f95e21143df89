// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pdiff {

inline constexpr std::string_view kToolVersion = "0.3.1";

/// Exact time in quarter notes from the start of the piece.
using Rational = boost::rational<std::int64_t>;

enum class Hand : std::uint8_t { Left = 0, Right = 1 };

inline constexpr int kNumClasses = 3;
inline constexpr int kFingersPerHand = 5;
inline constexpr int kLowestPitch = 21;   // A0
inline constexpr int kHighestPitch = 108; // C8
inline constexpr int kNumKeys = kHighestPitch - kLowestPitch + 1;

inline char hand_code(Hand h) { return h == Hand::Left ? 'L' : 'R'; }
Hand hand_from_code(std::string_view s);

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Error taxonomy. The CLI maps `category()` onto its exit codes.
enum class ErrorCategory { Usage, Data, Runtime };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorCategory cat = ErrorCategory::Data)
      : std::runtime_error(what), category_(cat) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define PDIFF_DEFINE_ERROR(Name, Cat)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(what, Cat) {}        \
  };

PDIFF_DEFINE_ERROR(ParseError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(RangeError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(FormatError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(LabelError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(ManifestError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(ConstraintError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(DataError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(FoldError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(ShapeError, ErrorCategory::Data)
PDIFF_DEFINE_ERROR(UsageError, ErrorCategory::Usage)
PDIFF_DEFINE_ERROR(TrainingError, ErrorCategory::Runtime)
PDIFF_DEFINE_ERROR(InternalError, ErrorCategory::Runtime)

#undef PDIFF_DEFINE_ERROR

}  // namespace pdiff
