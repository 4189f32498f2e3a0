#pragma once

#include <stdexcept>
#include <string>

namespace partforge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PARTFORGE_DEFINE_ERROR(Name)          \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  };

// Asset IO.
PARTFORGE_DEFINE_ERROR(MissingManifest)
PARTFORGE_DEFINE_ERROR(IoFailure)
PARTFORGE_DEFINE_ERROR(InvalidAsset)

// Errors tied to one named part carry the part name.
class PartError : public Error {
 public:
  PartError(std::string part, const std::string& what) : Error(what), part_(std::move(part)) {}
  const std::string& part() const noexcept { return part_; }

 private:
  std::string part_;
};

class MalformedMesh : public PartError {
 public:
  using PartError::PartError;
};

class IndexOutOfRange : public PartError {
 public:
  using PartError::PartError;
};

// Geometry.
PARTFORGE_DEFINE_ERROR(InvalidArgument)
PARTFORGE_DEFINE_ERROR(ZeroExtent)
PARTFORGE_DEFINE_ERROR(DegenerateInput)
PARTFORGE_DEFINE_ERROR(NoSurface)
PARTFORGE_DEFINE_ERROR(VisibilityExhausted)

// Rendering.
PARTFORGE_DEFINE_ERROR(EmptyRender)

// VLM.
PARTFORGE_DEFINE_ERROR(WrongViewCount)
PARTFORGE_DEFINE_ERROR(Unparseable)
PARTFORGE_DEFINE_ERROR(InvalidTier)
PARTFORGE_DEFINE_ERROR(EmptyClustering)
PARTFORGE_DEFINE_ERROR(VlmError)

class MissingField : public Error {
 public:
  explicit MissingField(std::string field)
      : Error("missing field: " + field), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Pipeline and config.
PARTFORGE_DEFINE_ERROR(InsufficientPoints)
PARTFORGE_DEFINE_ERROR(ConfigError)

class ConfigParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};
class UnknownKey : public ConfigError {
 public:
  using ConfigError::ConfigError;
};
class InvalidValue : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Flow toy.
PARTFORGE_DEFINE_ERROR(ShapeMismatch)
PARTFORGE_DEFINE_ERROR(TargetNotInSchema)
PARTFORGE_DEFINE_ERROR(InvalidSchema)

// Evaluation.
PARTFORGE_DEFINE_ERROR(EmptyCloud)

#undef PARTFORGE_DEFINE_ERROR

}  // namespace partforge
