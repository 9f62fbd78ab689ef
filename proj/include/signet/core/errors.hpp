#pragma once

#include <stdexcept>
#include <string>

namespace signet {

/// Process exit codes used by the `signet` CLI.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kData = 2,
  kStartup = 3,
};

/// Base of every error raised by the library. Each subclass maps onto one
/// CLI exit code so tools can translate failures without string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kData)
      : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

#define SIGNET_DEFINE_ERROR(Name, Code)                            \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(what, Code) {}  \
  };

SIGNET_DEFINE_ERROR(InvalidInput, ExitCode::kData)
SIGNET_DEFINE_ERROR(DataError, ExitCode::kData)
SIGNET_DEFINE_ERROR(SourceError, ExitCode::kData)
SIGNET_DEFINE_ERROR(DegenerateEmbedding, ExitCode::kData)
SIGNET_DEFINE_ERROR(StoreError, ExitCode::kData)
SIGNET_DEFINE_ERROR(FormatError, ExitCode::kData)
SIGNET_DEFINE_ERROR(CorruptIndexError, ExitCode::kData)
SIGNET_DEFINE_ERROR(StartupError, ExitCode::kStartup)

#undef SIGNET_DEFINE_ERROR

/// Configuration value rejected; field() names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& detail)
      : Error("invalid config field '" + field + "': " + detail, ExitCode::kUsage),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A document could not be decoded; carries the offending doc_id.
class DecodeError : public Error {
 public:
  DecodeError(std::string doc_id, const std::string& detail)
      : Error("cannot decode '" + doc_id + "': " + detail, ExitCode::kData),
        doc_id_(std::move(doc_id)) {}
  const std::string& doc_id() const noexcept { return doc_id_; }

 private:
  std::string doc_id_;
};

}  // namespace signet
