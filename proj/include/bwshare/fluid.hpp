#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bwshare/allocator.hpp"
#include "bwshare/network.hpp"

namespace bwshare {

// One recorded point of a fluid trajectory with its diagnostics.
struct FluidSample {
    double t = 0.0;
    Eigen::VectorXd n;
    Eigen::VectorXd drift;
    double lyapunov = 0.0;     // F(n)
    double gap = 0.0;          // H(n); NaN on subcritical models
    double dissipation = 0.0;  // K(n)
    Eigen::VectorXd w;            // workloads over J* (empty when subcritical)
    Eigen::VectorXd feasibility;  // per-resource margin of the capacity bound
};

struct FluidTrajectory {
    std::vector<FluidSample> samples;
    double dt = 0.0;      // internal step actually used
    long long steps = 0;  // internal steps taken
};

struct IntegrateOptions {
    // Internal Euler step; 0 selects the default 1e-3 * min_i (1/mu_i).
    double dt = 0.0;
    // Components at or below this are treated as zero (and stay frozen).
    double n_floor = 1e-12;
    // Record the gap H at samples (needs a lift solve per sample).
    bool with_gap = true;
    // Abort with InvariantViolation if H rises by more than the monotonicity
    // tolerance 1e-6 + 10 dt max|K| between consecutive samples.
    bool check_monotonicity = true;
    AllocOptions alloc;
};

// Right-hand side of the fluid dynamics: nu_i - mu_i Lambda_i(n) on positive
// components. A component at or below n_floor is held at zero while the
// allocation of the others leaves room for its load on every resource it
// crosses; once that reservation overruns a resource, the component is
// entrained back into the system and leaves zero.
Eigen::VectorXd drift(const NetworkModel& model, const Eigen::VectorXd& n,
                      const AllocOptions& opts = {}, double n_floor = 1e-12);

// Per-resource slack of the fluid capacity bound: routes with n_i = 0
// contribute their load rho_i in place of an allocation.
Eigen::VectorXd feasibility_margin(const NetworkModel& model, const Eigen::VectorXd& n,
                                   const AllocOptions& opts = {}, double n_floor = 1e-12);

std::vector<double> uniform_grid(double horizon, int intervals);

// Explicit Euler with exact zero-crossing splitting. A component reaching
// zero is held there while the boundary rule of drift() allows it and is
// released otherwise. Samples are recorded at the output grid times (which
// must be increasing and within [0, horizon]).
FluidTrajectory integrate(const NetworkModel& model, const Eigen::VectorXd& n0, double horizon,
                          const std::vector<double>& output_grid,
                          const IntegrateOptions& opts = {});

}  // namespace bwshare
