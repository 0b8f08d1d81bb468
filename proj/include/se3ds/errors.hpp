#pragma once

#include <stdexcept>
#include <string>

namespace se3ds {

/// Root of every error raised by the library. The category decides the CLI
/// exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { kValidation, kNumeric, kIo };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  [[nodiscard]] Category category() const noexcept { return category_; }

 private:
  Category category_;
};

#define SE3DS_DEFINE_ERROR(Name, Cat)                              \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what)                         \
        : Error(Category::Cat, std::string(#Name ": ") + what) {}  \
  };

// Numeric failures.
SE3DS_DEFINE_ERROR(AntipodalError, kNumeric)
SE3DS_DEFINE_ERROR(NoConvergence, kNumeric)
SE3DS_DEFINE_ERROR(DegenerateCluster, kNumeric)

// Input / contract violations.
SE3DS_DEFINE_ERROR(InsufficientData, kValidation)
SE3DS_DEFINE_ERROR(DimensionMismatch, kValidation)
SE3DS_DEFINE_ERROR(TooShort, kValidation)
SE3DS_DEFINE_ERROR(EmptySequence, kValidation)
SE3DS_DEFINE_ERROR(InvalidPath, kValidation)
SE3DS_DEFINE_ERROR(ParseError, kValidation)
SE3DS_DEFINE_ERROR(ValidationError, kValidation)

SE3DS_DEFINE_ERROR(IoError, kIo)

#undef SE3DS_DEFINE_ERROR

}  // namespace se3ds
