#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace vav {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what) {}
};

class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& what) : Error(what) {}
};

class UnsupportedQueryError : public Error {
public:
    explicit UnsupportedQueryError(const std::string& what) : Error(what) {}
};

/// Raised when a linear system does not pin down the quantity being recovered.
class UnderdeterminedError : public Error {
public:
    explicit UnderdeterminedError(const std::string& what) : Error(what) {}
};

class SolverError : public Error {
public:
    explicit SolverError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw Error(what);
}

inline void require_dims(bool cond, const std::string& what) {
    if (!cond) throw DimensionError(what);
}

} // namespace vav
