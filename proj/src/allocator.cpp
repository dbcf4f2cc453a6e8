#include "bwshare/allocator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bwshare/detail/dual_solver.hpp"
#include "bwshare/errors.hpp"

namespace bwshare {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_log_utility(double alpha) { return std::abs(alpha - 1.0) < 1e-12; }

// Dual of the allocation program, restricted to routes with n_i > 0.
// Primal closed form: lambda_i = n_i (kappa_i / s_i)^{1/alpha}, s = B^T p.
struct AllocDual {
    Eigen::MatrixXd incidence;  // J x P (active routes only)
    Eigen::VectorXd capacities;
    Eigen::VectorXd n;      // active components, normalized
    Eigen::VectorXd kappa;  // active components
    double alpha;

    Eigen::VectorXd primal(const Eigen::VectorXd& p) const {
        Eigen::VectorXd s = incidence.transpose() * p;
        Eigen::VectorXd lam(n.size());
        for (int i = 0; i < n.size(); ++i)
            lam(i) = s(i) > 0.0 ? n(i) * std::pow(kappa(i) / s(i), 1.0 / alpha) : kInf;
        return lam;
    }

    double value(const Eigen::VectorXd& p, const Eigen::VectorXd& lam) const {
        if (!lam.allFinite()) return kInf;
        double g = 0.0;
        if (is_log_utility(alpha)) {
            for (int i = 0; i < n.size(); ++i) g += kappa(i) * n(i) * std::log(lam(i));
        } else {
            for (int i = 0; i < n.size(); ++i)
                g += kappa(i) * std::pow(n(i), alpha) * std::pow(lam(i), 1.0 - alpha) /
                     (1.0 - alpha);
        }
        g += p.dot(capacities - incidence * lam);
        return std::isfinite(g) ? g : kInf;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd&, const Eigen::VectorXd& lam) const {
        if (!lam.allFinite())
            return Eigen::VectorXd::Constant(capacities.size(), -kInf);
        return capacities - incidence * lam;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& p, const Eigen::VectorXd& lam) const {
        Eigen::VectorXd s = incidence.transpose() * p;
        Eigen::VectorXd d(n.size());
        for (int i = 0; i < n.size(); ++i) {
            d(i) = (s(i) > 0.0 && std::isfinite(lam(i))) ? lam(i) / (alpha * s(i)) : 1e18;
            d(i) = std::min(d(i), 1e18);
        }
        return incidence * d.asDiagonal() * incidence.transpose();
    }

    // Stationarity holds by construction; infeasibility and complementary
    // slackness drive the stop rule. comp_scale converts the normalized
    // problem's slackness back to the caller's units.
    double comp_scale = 1.0;

    double residual(const Eigen::VectorXd& p, const Eigen::VectorXd& lam) const {
        if (!lam.allFinite()) return kInf;
        const Eigen::VectorXd used = incidence * lam;
        double r = 0.0;
        for (int j = 0; j < capacities.size(); ++j) {
            r = std::max(r, used(j) - capacities(j));
            r = std::max(r, comp_scale * std::abs(p(j) * (capacities(j) - used(j))));
        }
        return r;
    }
};

}  // namespace

double objective(const NetworkModel& model, const Eigen::VectorXd& n,
                 const Eigen::VectorXd& lambda) {
    const double alpha = model.traffic.alpha;
    bool any_positive = false;
    double g = 0.0;
    for (int i = 0; i < n.size(); ++i) {
        if (n(i) <= 0.0) continue;
        any_positive = true;
        const double kappa = model.traffic.weights(i);
        if (is_log_utility(alpha)) {
            if (lambda(i) <= 0.0) return -kInf;
            g += kappa * n(i) * std::log(lambda(i));
        } else if (alpha > 1.0) {
            if (lambda(i) <= 0.0) return -kInf;
            g += kappa * std::pow(n(i), alpha) * std::pow(lambda(i), 1.0 - alpha) / (1.0 - alpha);
        } else {
            g += kappa * std::pow(n(i), alpha) * std::pow(lambda(i), 1.0 - alpha) / (1.0 - alpha);
        }
    }
    if (!any_positive)
        throw std::invalid_argument("objective is undefined at n = 0 (no active routes)");
    return g;
}

Allocation allocate(const NetworkModel& model, const Eigen::VectorXd& n,
                    const AllocOptions& opts) {
    const int num_routes = model.route_count();
    const int num_resources = model.resource_count();
    const double alpha = model.traffic.alpha;

    Allocation out;
    out.lambda = Eigen::VectorXd::Zero(num_routes);
    out.prices = Eigen::VectorXd::Zero(num_resources);

    std::vector<int> active;
    for (int i = 0; i < num_routes; ++i)
        if (n(i) > 0.0) active.push_back(i);
    if (active.empty()) return out;  // Lambda = 0, p = 0 at the empty state

    // The allocation is invariant under scaling of n, so solve at unit scale
    // and map the prices back (they scale as r^alpha through stationarity).
    double scale = 0.0;
    for (int i : active) scale = std::max(scale, n(i));
    const double price_scale = std::pow(scale, alpha);

    AllocDual prob;
    prob.alpha = alpha;
    prob.capacities = model.topology.capacities;
    prob.incidence.resize(num_resources, static_cast<int>(active.size()));
    prob.n.resize(active.size());
    prob.kappa.resize(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
        prob.incidence.col(static_cast<int>(k)) = model.topology.incidence.col(active[k]);
        prob.n(static_cast<int>(k)) = n(active[k]) / scale;
        prob.kappa(static_cast<int>(k)) = model.traffic.weights(active[k]);
    }
    prob.comp_scale = price_scale;

    Eigen::VectorXd p0;
    if (opts.warm_prices.size() == num_resources &&
        opts.warm_prices.minCoeff() >= 0.0) {
        p0 = opts.warm_prices / price_scale;
        p0 = p0.cwiseMax(1e-8);
    } else {
        p0.resize(num_resources);
        for (int j = 0; j < num_resources; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < active.size(); ++k)
                acc += prob.incidence(j, static_cast<int>(k)) * prob.kappa(static_cast<int>(k)) *
                       std::pow(prob.n(static_cast<int>(k)) / prob.capacities(j), alpha);
            p0(j) = std::max(1e-8, acc);
        }
    }

    Eigen::VectorXd lam_active;
    double inner_tol = 0.5 * opts.eps_kkt;
    detail::DualSolveResult sol;
    // The feasibility rescale below perturbs the certificate slightly, so if
    // the public residual misses the target, re-solve to a tighter inner
    // tolerance (warm-started) before giving up.
    for (int attempt = 0; attempt < 3; ++attempt) {
        sol = detail::solve_dual(prob, p0, inner_tol, opts.max_iters);

        // Exact feasibility restore: scale the allocation onto the capacity
        // region if the residual left it marginally outside. Keeps AL <= C
        // exactly so cumulative unused capacity stays nondecreasing
        // downstream. Prices are rescaled in step: stationarity is preserved
        // because s = B^T p is linear in p.
        lam_active = sol.primal;
        if (lam_active.allFinite()) {
            const Eigen::VectorXd used = prob.incidence * lam_active;
            double factor = 1.0;
            for (int j = 0; j < num_resources; ++j)
                if (used(j) > prob.capacities(j))
                    factor = std::min(factor, prob.capacities(j) / used(j));
            if (factor < 1.0) {
                lam_active *= factor;
                sol.prices /= std::pow(factor, alpha);
            }
        } else {
            lam_active =
                lam_active.unaryExpr([](double v) { return std::isfinite(v) ? v : 0.0; });
        }

        out.lambda.setZero();
        for (std::size_t k = 0; k < active.size(); ++k)
            out.lambda(active[k]) = lam_active(static_cast<int>(k));
        // The rescale above works in the normalized problem; rounding in the
        // caller-unit product A * lambda can still land an ulp outside a
        // capacity. Nudge down until the bound holds exactly in the units
        // every consumer recomputes, so per-resource slack is never negative.
        for (int guard = 0; guard < 100; ++guard) {
            const Eigen::VectorXd slack =
                model.topology.capacities - model.topology.incidence * out.lambda;
            if (slack.minCoeff() >= 0.0) break;
            out.lambda *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
        }
        out.prices = sol.prices * price_scale;
        out.iterations += sol.iterations;
        out.kkt_residual = kkt_residual(model, n, out.lambda, out.prices);
        if (out.kkt_residual <= opts.eps_kkt) break;
        p0 = sol.prices;
        inner_tol *= 0.01;
    }

    if (out.kkt_residual > opts.eps_kkt) {
        Eigen::VectorXd best_lambda = Eigen::VectorXd::Zero(num_routes);
        for (std::size_t k = 0; k < active.size(); ++k)
            best_lambda(active[k]) = lam_active(static_cast<int>(k));
        throw SolverError("allocation solver did not reach the KKT tolerance", best_lambda,
                          out.prices, out.kkt_residual, out.iterations);
    }
    return out;
}

double kkt_residual(const NetworkModel& model, const Eigen::VectorXd& n,
                    const Eigen::VectorXd& lambda, const Eigen::VectorXd& prices) {
    const auto& a = model.topology.incidence;
    const auto& caps = model.topology.capacities;
    const double alpha = model.traffic.alpha;
    const Eigen::VectorXd used = a * lambda;

    double r = 0.0;
    for (int j = 0; j < model.resource_count(); ++j) {
        r = std::max(r, used(j) - caps(j));                             // primal feasibility
        r = std::max(r, std::abs(prices(j) * (caps(j) - used(j))));     // complementary slackness
    }
    for (int i = 0; i < model.route_count(); ++i) {
        if (n(i) <= 0.0) continue;
        if (lambda(i) <= 0.0) return kInf;
        const double s = a.col(i).dot(prices);
        const double stat = model.traffic.weights(i) * std::pow(n(i) / lambda(i), alpha) - s;
        r = std::max(r, std::abs(stat));
    }
    return r;
}

}  // namespace bwshare
