#pragma once

#include <stdexcept>
#include <string>

namespace mst {

/// Bad model/task/CLI configuration (counts, dimensions, unknown enum values).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Checkpoint file is not in the expected format (bad magic).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Checkpoint file is damaged (CRC mismatch, truncation, inconsistent lengths).
class CorruptionError : public std::runtime_error {
public:
    explicit CorruptionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Checkpoint contents do not match the model being loaded (missing/unknown parameter).
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Command-line usage problem; maps to exit code 1.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mst
