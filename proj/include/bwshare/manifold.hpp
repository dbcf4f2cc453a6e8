#pragma once

#include <Eigen/Dense>

#include "bwshare/allocator.hpp"
#include "bwshare/network.hpp"

namespace bwshare {

// Invariant state parametrized by q >= 0 over the critical resources.
struct ManifoldPoint {
    Eigen::VectorXd q;  // length J*
    Eigen::VectorXd n;  // length I
    Eigen::VectorXd w;  // length J*, workload image of n
};

// Solution of the workload lifting program: the minimum-F state whose
// workload dominates w, with its dual prices and optimal value.
struct LiftResult {
    Eigen::VectorXd n;       // length I
    Eigen::VectorXd prices;  // length J*, >= 0
    double f_min = 0.0;      // F underbar (w)
    double kkt_residual = 0.0;
    int iterations = 0;
};

struct InvarianceCheck {
    bool invariant = false;
    double residual = 0.0;  // ||n - Delta(w(n))||
    double gap = 0.0;       // H(n)
    double dissipation = 0.0;  // K(n)
};

// F(n) = 1/(alpha+1) sum_i nu_i kappa_i mu_i^{alpha-1} (n_i/nu_i)^{alpha+1}
double lyapunov_F(const NetworkModel& model, const Eigen::VectorXd& n);

// K(n) = sum_{i: n_i>0} kappa_i (mu_i n_i / nu_i)^alpha (rho_i - Lambda_i(n)).
// Nonpositive; zero exactly on the invariant manifold.
double dissipation_K(const NetworkModel& model, const Eigen::VectorXd& n,
                     const AllocOptions& opts = {});
double dissipation_K(const NetworkModel& model, const Eigen::VectorXd& n,
                     const Eigen::VectorXd& lambda);

// w_j(n) = sum_i A_ji n_i / mu_i over critical resources.
// Throws SubcriticalError when J* is empty.
Eigen::VectorXd workload(const NetworkModel& model, const Eigen::VectorXd& n);

// Lifting map Delta: minimize F(n) subject to workload(n) >= w, n >= 0.
LiftResult lift_delta(const NetworkModel& model, const Eigen::VectorXd& w,
                      const AllocOptions& opts = {});

// H(n) = F(n) - F_underbar(w(n)); >= 0, zero exactly on the manifold.
double gap_H(const NetworkModel& model, const Eigen::VectorXd& n,
             const AllocOptions& opts = {});

// n_i = rho_i (sum_{j in J*} q_j A_ji / kappa_i)^{1/alpha}
ManifoldPoint invariant_from_q(const NetworkModel& model, const Eigen::VectorXd& q);

// True iff ||n - Delta(w(n))|| <= tol, with diagnostics.
InvarianceCheck is_invariant(const NetworkModel& model, const Eigen::VectorXd& n,
                             double tol = 1e-6, const AllocOptions& opts = {});

// Workload-cone membership, decided through the lifting map: w lies in the
// cone iff workload(Delta(w)) == w within tol relative to ||w|| + 1.
bool cone_contains(const NetworkModel& model, const Eigen::VectorXd& w,
                   double tol = 1e-6, const AllocOptions& opts = {});

// Closed form for the two-resource linear network (three routes, kappa = mu = 1,
// C = (1,1), rho_1 + rho_3 = rho_2 + rho_3 = 1):
//   w_1 >= 0 and w_1 rho_3 <= w_2 <= w_1 / rho_3.
bool cone_closed_form_linear(double rho3, const Eigen::Vector2d& w);

// Same, extracting rho_3 from the model. Throws TopologyMismatch unless the
// model is that linear network.
bool cone_closed_form_linear(const NetworkModel& model, const Eigen::Vector2d& w);

}  // namespace bwshare
