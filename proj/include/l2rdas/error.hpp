#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace l2rdas {

enum class ErrorKind {
    parameter,  // bad argument to an operation
    input,      // rejected input data (non-finite points, shape mismatch, ...)
    config,     // invalid or unknown configuration
    format,     // malformed file content
    io,         // filesystem-level failure
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::input: return "input";
        case ErrorKind::config: return "config";
        case ErrorKind::format: return "format";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

/// Exception carrying a machine-readable kind plus optional file/offset
/// context for format errors.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    Error(ErrorKind kind, std::string message, std::string file, std::uint64_t offset)
        : std::runtime_error(std::move(message)),
          kind_(kind),
          file_(std::move(file)),
          offset_(offset),
          has_location_(true) {}

    ErrorKind kind() const { return kind_; }
    bool has_location() const { return has_location_; }
    const std::string& file() const { return file_; }
    std::uint64_t offset() const { return offset_; }

private:
    ErrorKind kind_;
    std::string file_;
    std::uint64_t offset_ = 0;
    bool has_location_ = false;
};

[[noreturn]] inline void throw_parameter(const std::string& msg) {
    throw Error(ErrorKind::parameter, msg);
}

[[noreturn]] inline void throw_input(const std::string& msg) {
    throw Error(ErrorKind::input, msg);
}

[[noreturn]] inline void throw_config(const std::string& msg) {
    throw Error(ErrorKind::config, msg);
}

[[noreturn]] inline void throw_format(const std::string& msg, const std::string& file,
                                      std::uint64_t offset) {
    throw Error(ErrorKind::format, msg + " (file " + file + ", byte offset " +
                                       std::to_string(offset) + ")",
                file, offset);
}

}  // namespace l2rdas
