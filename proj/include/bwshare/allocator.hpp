#pragma once

#include <Eigen/Dense>

#include "bwshare/network.hpp"

namespace bwshare {

// Weighted alpha-fair bandwidth allocation for a state n, with the dual
// prices certifying optimality.
struct Allocation {
    Eigen::VectorXd lambda;  // length I; zero on routes with n_i = 0
    Eigen::VectorXd prices;  // length J, >= 0
    double kkt_residual = 0.0;
    int iterations = 0;
};

struct AllocOptions {
    double eps_kkt = 1e-9;
    int max_iters = 100000;
    // Warm-start prices from a previous solve at a nearby state. Must have
    // length J; ignored if empty.
    Eigen::VectorXd warm_prices;
};

// Utility G_n evaluated at an allocation (entries of `lambda` on routes with
// n_i = 0 are ignored). Returns -inf when alpha >= 1 and some positive route
// gets zero bandwidth. Throws std::invalid_argument when n = 0.
double objective(const NetworkModel& model, const Eigen::VectorXd& n,
                 const Eigen::VectorXd& lambda);

// Solves the allocation program at state n. Throws SolverError (carrying the
// best iterate) if the KKT residual target is not met within max_iters.
Allocation allocate(const NetworkModel& model, const Eigen::VectorXd& n,
                    const AllocOptions& opts = {});

// max of primal infeasibility, complementary slackness and stationarity
// violations for a candidate (lambda, p) pair at state n.
double kkt_residual(const NetworkModel& model, const Eigen::VectorXd& n,
                    const Eigen::VectorXd& lambda, const Eigen::VectorXd& prices);

}  // namespace bwshare
