#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace bwshare {

// Malformed or inconsistent network configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Convex solver failed to reach the requested KKT residual.
// Carries the best iterate found so the caller can inspect it.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& msg, Eigen::VectorXd best_primal,
                Eigen::VectorXd best_dual, double best_residual, int iterations)
        : std::runtime_error(msg),
          best_primal(std::move(best_primal)),
          best_dual(std::move(best_dual)),
          best_residual(best_residual),
          iterations(iterations) {}

    Eigen::VectorXd best_primal;
    Eigen::VectorXd best_dual;
    double best_residual;
    int iterations;
};

// A quantity that must be monotone along a trajectory moved the wrong way
// by more than the stated tolerance.
class InvariantViolation : public std::runtime_error {
public:
    InvariantViolation(const std::string& msg, double t, double excess)
        : std::runtime_error(msg), t(t), excess(excess) {}

    double t;
    double excess;
};

// Manifold machinery requested on a model with an empty critical set.
class SubcriticalError : public std::runtime_error {
public:
    explicit SubcriticalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation requires a specific topology (e.g. the two-resource linear net).
class TopologyMismatch : public std::runtime_error {
public:
    explicit TopologyMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bwshare
