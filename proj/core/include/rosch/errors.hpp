#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rosch {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Geometry and shape errors.
class AlignmentError : public Error { public: using Error::Error; };
class GeometryError : public Error { public: using Error::Error; };
class SizeError : public Error { public: using Error::Error; };
class DimensionError : public Error { public: using Error::Error; };
class TopologyError : public Error { public: using Error::Error; };
class CoverageError : public Error { public: using Error::Error; };
class LookupError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };

// Numerical failures.
class NumericalError : public Error { public: using Error::Error; };

class LinearAlgebraError : public NumericalError { public: using NumericalError::NumericalError; };
class DescentError : public NumericalError { public: using NumericalError::NumericalError; };

class IterationLimitError : public NumericalError {
public:
    IterationLimitError(const std::string& what, double last_residual)
        : NumericalError(what), last_residual_(last_residual) {}
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, int epoch) : NumericalError(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class NonConvergenceError : public NumericalError {
public:
    NonConvergenceError(const std::string& what, std::vector<double> history)
        : NumericalError(what), history_(std::move(history)) {}
    const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

class DatasetError : public NumericalError { public: using NumericalError::NumericalError; };

// Orchestration errors.
class ConfigError : public Error { public: using Error::Error; };
class DependencyError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

} // namespace rosch
