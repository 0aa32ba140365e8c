#pragma once

#include <stdexcept>
#include <string>

namespace simaml {

// Data-file and logical-form parsing failures. Exit code 2 in the CLI.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
    ParseError(const std::string& file, int line_no, const std::string& msg)
        : std::runtime_error(file + ":" + std::to_string(line_no) + ": " + msg) {}
};

// Binary container problems: bad magic bytes or unsupported version.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// File ends before the declared payload does.
class TruncatedError : public std::runtime_error {
public:
    explicit TruncatedError(const std::string& msg) : std::runtime_error(msg) {}
};

// Cached index does not belong to the corpus it is being used with.
class FingerprintError : public std::runtime_error {
public:
    explicit FingerprintError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied configuration. Exit code 1 in the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradient, divergence mid-training. Exit code 3 in the CLI.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace simaml
