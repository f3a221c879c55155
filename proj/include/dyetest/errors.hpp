#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dyetest {

/// Inputs violate a documented precondition of an operation.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or missing run configuration: profiles, env vars, config files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Network-level failure while talking to a chat service.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what, int status = 0)
        : std::runtime_error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// Transport succeeded but the response body was not in the expected shape.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Persistence failure: I/O errors, hash mismatches, unknown run ids.
/// `written` carries the partial-write count for interrupted exports.
class StoreError : public std::runtime_error {
public:
    explicit StoreError(const std::string& what, std::size_t written = 0)
        : std::runtime_error(what), written_(written) {}
    std::size_t written() const noexcept { return written_; }

private:
    std::size_t written_;
};

}  // namespace dyetest
