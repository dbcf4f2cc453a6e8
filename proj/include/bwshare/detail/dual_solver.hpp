#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

namespace bwshare::detail {

// Projected gradient descent with a guarded Newton step on the dual of a
// monotone separable convex program. The weighted alpha-fair allocation
// program and the workload lifting program share this machinery: in both,
// the primal is a closed-form function of the dual prices, so the dual is
// the natural unknown.
//
// Problem must provide:
//   Eigen::VectorXd primal(const Eigen::VectorXd& p) const;
//   double value(const Eigen::VectorXd& p, const Eigen::VectorXd& x) const;
//     (dual objective to minimize; +inf allowed)
//   Eigen::VectorXd gradient(const Eigen::VectorXd& p, const Eigen::VectorXd& x) const;
//   Eigen::MatrixXd hessian(const Eigen::VectorXd& p, const Eigen::VectorXd& x) const;
//   double residual(const Eigen::VectorXd& p, const Eigen::VectorXd& x) const;
//     (stopping criterion, in the caller's units)

struct DualSolveResult {
    Eigen::VectorXd prices;
    Eigen::VectorXd primal;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

template <class Problem>
DualSolveResult solve_dual(const Problem& prob, Eigen::VectorXd p, double tol, int max_iters) {
    DualSolveResult best;
    best.prices = p;
    best.primal = prob.primal(p);
    best.residual = prob.residual(best.prices, best.primal);
    best.iterations = 0;

    Eigen::VectorXd x = best.primal;
    double res = best.residual;
    double step = 1.0;
    const int m = static_cast<int>(p.size());

    for (int iter = 0; iter < max_iters; ++iter) {
        if (res <= tol) {
            best.prices = p;
            best.primal = x;
            best.residual = res;
            best.iterations = iter;
            best.converged = true;
            return best;
        }
        if (res < best.residual) {
            best.prices = p;
            best.primal = x;
            best.residual = res;
            best.iterations = iter;
        }

        const Eigen::VectorXd grad = prob.gradient(p, x);

        // Guarded Newton step on the free coordinates. Cheap at these sizes
        // and gives the quadratic tail the 1e-9 residual target needs.
        bool accepted = false;
        {
            Eigen::MatrixXd hess = prob.hessian(p, x);
            const double ridge = 1e-14 * (hess.trace() + 1.0);
            for (int j = 0; j < m; ++j) hess(j, j) += ridge;
            Eigen::VectorXd dir = Eigen::VectorXd::Zero(m);
            // Coordinates pinned at zero with outward gradient stay fixed.
            std::vector<int> free;
            free.reserve(m);
            for (int j = 0; j < m; ++j)
                if (p(j) > 0.0 || grad(j) < 0.0) free.push_back(j);
            if (!free.empty()) {
                Eigen::MatrixXd hf(free.size(), free.size());
                Eigen::VectorXd gf(free.size());
                for (std::size_t a = 0; a < free.size(); ++a) {
                    gf(a) = grad(free[a]);
                    for (std::size_t b = 0; b < free.size(); ++b)
                        hf(a, b) = hess(free[a], free[b]);
                }
                Eigen::VectorXd df = hf.ldlt().solve(-gf);
                if (df.allFinite()) {
                    for (std::size_t a = 0; a < free.size(); ++a) dir(free[a]) = df(a);
                    Eigen::VectorXd p_try = (p + dir).cwiseMax(0.0);
                    Eigen::VectorXd x_try = prob.primal(p_try);
                    double res_try = prob.residual(p_try, x_try);
                    if (std::isfinite(res_try) && res_try < 0.99 * res) {
                        p = std::move(p_try);
                        x = std::move(x_try);
                        res = res_try;
                        accepted = true;
                    }
                }
            } else {
                // p = 0 with nonnegative gradient everywhere: stationary.
                best.prices = p;
                best.primal = x;
                best.residual = res;
                best.iterations = iter;
                best.converged = res <= tol;
                return best;
            }
        }
        if (accepted) continue;

        // Backtracking projected gradient step.
        const double fval = prob.value(p, x);
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            Eigen::VectorXd p_try = (p - step * grad).cwiseMax(0.0);
            if ((p_try - p).lpNorm<Eigen::Infinity>() == 0.0) {
                step *= 0.5;
                continue;
            }
            Eigen::VectorXd x_try = prob.primal(p_try);
            const double f_try = prob.value(p_try, x_try);
            const double decrease = grad.dot(p_try - p);
            if (std::isfinite(f_try) && f_try <= fval + 1e-4 * decrease) {
                p = std::move(p_try);
                x = std::move(x_try);
                res = prob.residual(p, x);
                step *= 1.5;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            // Step collapsed; nothing better reachable from here.
            if (res < best.residual) {
                best.prices = p;
                best.primal = x;
                best.residual = res;
            }
            best.iterations = iter + 1;
            best.converged = best.residual <= tol;
            return best;
        }
    }

    Eigen::VectorXd x_final = prob.primal(p);
    const double res_final = prob.residual(p, x_final);
    if (res_final < best.residual) {
        best.prices = p;
        best.primal = std::move(x_final);
        best.residual = res_final;
    }
    best.iterations = max_iters;
    best.converged = best.residual <= tol;
    return best;
}

}  // namespace bwshare::detail
