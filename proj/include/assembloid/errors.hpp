#pragma once

#include <stdexcept>
#include <string>

namespace assembloid {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed argument values: empty clouds, non-finite coordinates, bad sizes.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Paired-cloud operations called with mismatched point counts.
class CorrespondenceError : public Error {
public:
    using Error::Error;
};

// Geometry too thin for the requested operation (collinear, < 3 points).
class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

// Diffusion step index outside the schedule's valid range.
class StepError : public Error {
public:
    using Error::Error;
};

// Schedule parameters that cannot support the requested operation.
class InvalidSchedule : public Error {
public:
    using Error::Error;
};

// A denoiser was handed a cloud it cannot process (wrong size, unknown label).
class InterfaceViolation : public Error {
public:
    using Error::Error;
};

// Filesystem and serialization failures.
class IoError : public Error {
public:
    using Error::Error;
};

// Config files with unknown keys, missing fields, or out-of-range values.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace assembloid
