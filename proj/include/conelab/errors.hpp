#pragma once

#include <stdexcept>
#include <string>

namespace conelab {

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidInput : std::runtime_error {
    explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidMetric : std::runtime_error {
    explicit InvalidMetric(const std::string& what) : std::runtime_error(what) {}
};

// Second derivatives requested from a field that only has continuous first ones.
struct RegularityError : std::runtime_error {
    explicit RegularityError(const std::string& what) : std::runtime_error(what) {}
};

struct CalibrationError : std::runtime_error {
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

struct SingularSurfaceError : std::runtime_error {
    explicit SingularSurfaceError(const std::string& what) : std::runtime_error(what) {}
};

struct StiffnessError : std::runtime_error {
    explicit StiffnessError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace conelab
