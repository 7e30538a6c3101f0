#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace instat {

// Base class for all errors raised by the framework.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent study/CLI configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A sample failed validation (non-finite value). Carries the offending value
// and, when known, the (cell, timestep) position it was destined for.
class DataQualityError : public Error {
public:
    DataQualityError(const std::string& what, double value)
        : Error(what), value_(value) {}
    DataQualityError(const std::string& what, double value, std::uint64_t cell, std::uint32_t timestep)
        : Error(what), value_(value), cell_(cell), timestep_(timestep), has_position_(true) {}

    double value() const { return value_; }
    bool has_position() const { return has_position_; }
    std::uint64_t cell() const { return cell_; }
    std::uint32_t timestep() const { return timestep_; }

private:
    double value_ = 0.0;
    std::uint64_t cell_ = 0;
    std::uint32_t timestep_ = 0;
    bool has_position_ = false;
};

// Peer violated the wire/ingest contract (bad ranges, unknown field, ...).
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Filesystem / socket failures.
class IoError : public Error {
public:
    using Error::Error;
};

// Statistic queried in a state where it is undefined (empty accumulator,
// unknown threshold, insufficient count).
class StatError : public Error {
public:
    using Error::Error;
};

// Checkpoint file cannot be restored (bad version, truncation, checksum).
class CheckpointError : public Error {
public:
    using Error::Error;
};

} // namespace instat
