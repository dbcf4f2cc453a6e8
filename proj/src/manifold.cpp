#include "bwshare/manifold.hpp"

#include <cmath>
#include <limits>

#include "bwshare/detail/dual_solver.hpp"
#include "bwshare/errors.hpp"

namespace bwshare {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dual of the lifting program. Primal closed form:
// n_i = rho_i (s_i / kappa_i)^{1/alpha}, s = A_*^T p.
struct LiftDual {
    Eigen::MatrixXd critical_incidence;  // J* x I
    Eigen::MatrixXd workload_map;        // J* x I, A_* diag(1/mu)
    Eigen::VectorXd w;                   // normalized target workloads
    Eigen::VectorXd rho;
    Eigen::VectorXd kappa;
    Eigen::VectorXd mu;
    Eigen::VectorXd nu;
    double alpha;
    double infeas_scale = 1.0;  // converts scaled infeasibility to caller units
    double comp_scale = 1.0;    // likewise for complementary slackness

    Eigen::VectorXd primal(const Eigen::VectorXd& p) const {
        Eigen::VectorXd s = critical_incidence.transpose() * p;
        Eigen::VectorXd n(rho.size());
        for (int i = 0; i < rho.size(); ++i)
            n(i) = s(i) > 0.0 ? rho(i) * std::pow(s(i) / kappa(i), 1.0 / alpha) : 0.0;
        return n;
    }

    double lyapunov(const Eigen::VectorXd& n) const {
        double f = 0.0;
        for (int i = 0; i < n.size(); ++i)
            f += nu(i) * kappa(i) * std::pow(mu(i), alpha - 1.0) *
                 std::pow(n(i) / nu(i), alpha + 1.0);
        return f / (alpha + 1.0);
    }

    // phi = -(F(n(p)) + p . (w - W n(p))), minimized over p >= 0.
    double value(const Eigen::VectorXd& p, const Eigen::VectorXd& n) const {
        return -(lyapunov(n) + p.dot(w - workload_map * n));
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd&, const Eigen::VectorXd& n) const {
        return workload_map * n - w;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& p, const Eigen::VectorXd& n) const {
        Eigen::VectorXd s = critical_incidence.transpose() * p;
        Eigen::VectorXd d(n.size());
        for (int i = 0; i < n.size(); ++i) {
            d(i) = s(i) > 1e-14 ? n(i) / (alpha * s(i)) : 0.0;
            d(i) = std::min(d(i), 1e18);
        }
        return workload_map * d.asDiagonal() * critical_incidence.transpose();
    }

    double residual(const Eigen::VectorXd& p, const Eigen::VectorXd& n) const {
        const Eigen::VectorXd got = workload_map * n;
        double r = 0.0;
        for (int j = 0; j < w.size(); ++j) {
            r = std::max(r, infeas_scale * (w(j) - got(j)));
            r = std::max(r, comp_scale * std::abs(p(j) * (got(j) - w(j))));
        }
        return r;
    }
};

void require_critical(const NetworkModel& model, const char* what) {
    if (model.subcritical())
        throw SubcriticalError(std::string(what) +
                               " is degenerate on a subcritical model (J* is empty; "
                               "the invariant manifold is {0})");
}

}  // namespace

double lyapunov_F(const NetworkModel& model, const Eigen::VectorXd& n) {
    const double alpha = model.traffic.alpha;
    const auto& nu = model.traffic.arrival_rates;
    const auto& mu = model.traffic.service_rates;
    const auto& kappa = model.traffic.weights;
    double f = 0.0;
    for (int i = 0; i < n.size(); ++i)
        f += nu(i) * kappa(i) * std::pow(mu(i), alpha - 1.0) * std::pow(n(i) / nu(i), alpha + 1.0);
    return f / (alpha + 1.0);
}

double dissipation_K(const NetworkModel& model, const Eigen::VectorXd& n,
                     const Eigen::VectorXd& lambda) {
    const double alpha = model.traffic.alpha;
    double k = 0.0;
    for (int i = 0; i < n.size(); ++i) {
        if (n(i) <= 0.0) continue;
        k += model.traffic.weights(i) *
             std::pow(model.traffic.service_rates(i) * n(i) / model.traffic.arrival_rates(i),
                      alpha) *
             (model.loads(i) - lambda(i));
    }
    return k;
}

double dissipation_K(const NetworkModel& model, const Eigen::VectorXd& n,
                     const AllocOptions& opts) {
    if (n.maxCoeff() <= 0.0) return 0.0;
    return dissipation_K(model, n, allocate(model, n, opts).lambda);
}

Eigen::VectorXd workload(const NetworkModel& model, const Eigen::VectorXd& n) {
    require_critical(model, "workload");
    const Eigen::VectorXd per_unit_work = n.cwiseQuotient(model.traffic.service_rates);
    return model.critical_incidence() * per_unit_work;
}

namespace {

// KKT residual of a lift candidate in the caller's units: workload
// infeasibility plus complementary slackness (stationarity is exact by
// construction of n(p)).
double lift_residual(const Eigen::MatrixXd& workload_map, const Eigen::VectorXd& w,
                     const Eigen::VectorXd& n, const Eigen::VectorXd& p) {
    const Eigen::VectorXd got = workload_map * n;
    double r = 0.0;
    for (int j = 0; j < w.size(); ++j) {
        r = std::max(r, w(j) - got(j));
        r = std::max(r, std::abs(p(j) * (got(j) - w(j))));
    }
    return r;
}

}  // namespace

LiftResult lift_delta(const NetworkModel& model, const Eigen::VectorXd& w,
                      const AllocOptions& opts) {
    require_critical(model, "lift_delta");
    const int num_critical = model.critical_count();
    const int num_routes = model.route_count();
    if (w.size() != num_critical)
        throw std::invalid_argument("lift_delta: w must have one entry per critical resource");

    const double alpha = model.traffic.alpha;
    const Eigen::MatrixXd a_star = model.critical_incidence();
    const Eigen::MatrixXd workload_map =
        a_star * model.traffic.service_rates.cwiseInverse().asDiagonal();
    const auto& rho = model.loads;
    const auto& kappa = model.traffic.weights;

    LiftResult out;
    out.n = Eigen::VectorXd::Zero(num_routes);
    out.prices = Eigen::VectorXd::Zero(num_critical);
    if (w.maxCoeff() <= 0.0) return out;

    const double scale = w.maxCoeff();
    const double price_scale = std::pow(scale, alpha);
    const Eigen::VectorXd w_unit = w / scale;

    auto primal_at = [&](const Eigen::VectorXd& p) {
        const Eigen::VectorXd s = a_star.transpose() * p;
        Eigen::VectorXd n(num_routes);
        for (int i = 0; i < num_routes; ++i)
            n(i) = s(i) > 0.0 ? rho(i) * std::pow(s(i) / kappa(i), 1.0 / alpha) : 0.0;
        return n;
    };

    // The dual has a power-law singularity at p_j = 0 when alpha > 1, so a
    // projected method crawls whenever an optimal price is tiny. J* is small,
    // so enumerate the binding sets instead and solve each equality system
    // with damped Newton in log-prices, where positivity is built in and the
    // power laws are nearly linear. Generic case first: everything binding.
    Eigen::VectorXd p_init(num_critical);
    const Eigen::VectorXd base_work = workload_map * rho;
    const double kappa_mean = kappa.mean();
    for (int j = 0; j < num_critical; ++j)
        p_init(j) = std::max(
            1e-6, kappa_mean * std::pow(std::max(w_unit(j), 1e-3) / (base_work(j) + 1e-12),
                                        alpha));
    if (opts.warm_prices.size() == num_critical && opts.warm_prices.minCoeff() > 0.0)
        p_init = (opts.warm_prices / price_scale).cwiseMax(1e-12);

    std::vector<std::vector<int>> binding_sets;
    for (unsigned mask = (1u << num_critical) - 1; mask > 0; --mask) {
        std::vector<int> set;
        bool admissible = true;
        for (int j = 0; j < num_critical; ++j)
            if (mask & (1u << j)) {
                if (w_unit(j) <= 0.0) admissible = false;  // never binding
                set.push_back(j);
            }
        if (admissible) binding_sets.push_back(std::move(set));
    }

    double best_residual = std::numeric_limits<double>::infinity();
    int total_iters = 0;

    for (const auto& set : binding_sets) {
        const int m = static_cast<int>(set.size());
        Eigen::VectorXd x(m);
        for (int a = 0; a < m; ++a) x(a) = std::log(p_init(set[a]));

        Eigen::VectorXd p = Eigen::VectorXd::Zero(num_critical);
        Eigen::VectorXd n;
        double err = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 200; ++iter, ++total_iters) {
            for (int a = 0; a < m; ++a) p(set[a]) = std::exp(x(a));
            n = primal_at(p);
            const Eigen::VectorXd got = workload_map * n;
            Eigen::VectorXd f(m);
            for (int a = 0; a < m; ++a) f(a) = got(set[a]) - w_unit(set[a]);
            err = f.lpNorm<Eigen::Infinity>();
            if (err <= 1e-14 * (1.0 + w_unit.lpNorm<Eigen::Infinity>())) break;

            // d got_j / d x_b = sum_i W_ji (n_i / (alpha s_i)) A_bi p_b
            const Eigen::VectorXd s = a_star.transpose() * p;
            Eigen::VectorXd d(num_routes);
            for (int i = 0; i < num_routes; ++i)
                d(i) = s(i) > 0.0 ? n(i) / (alpha * s(i)) : 0.0;
            Eigen::MatrixXd jac(m, m);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) {
                    double acc = 0.0;
                    for (int i = 0; i < num_routes; ++i)
                        acc += workload_map(set[a], i) * d(i) * a_star(set[b], i);
                    jac(a, b) = acc * p(set[b]);
                }
            const double ridge = 1e-14 * (jac.trace() + 1.0);
            for (int a = 0; a < m; ++a) jac(a, a) += ridge;
            // The column scaling by p_b makes this matrix nonsymmetric.
            Eigen::VectorXd dx = jac.fullPivLu().solve(-f);
            if (!dx.allFinite()) break;
            // Cap the log step; power laws make overshoots explode.
            const double cap = 4.0;
            if (dx.lpNorm<Eigen::Infinity>() > cap) dx *= cap / dx.lpNorm<Eigen::Infinity>();

            double step = 1.0;
            bool moved = false;
            for (int bt = 0; bt < 40; ++bt) {
                Eigen::VectorXd x_try = x + step * dx;
                Eigen::VectorXd p_try = Eigen::VectorXd::Zero(num_critical);
                for (int a = 0; a < m; ++a) p_try(set[a]) = std::exp(x_try(a));
                const Eigen::VectorXd got_try = workload_map * primal_at(p_try);
                double err_try = 0.0;
                for (int a = 0; a < m; ++a)
                    err_try = std::max(err_try, std::abs(got_try(set[a]) - w_unit(set[a])));
                if (err_try < err) {
                    x = std::move(x_try);
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }

        for (int a = 0; a < m; ++a) p(set[a]) = std::exp(x(a));
        n = primal_at(p);
        const double res = lift_residual(workload_map, w, n * scale, p * price_scale);
        if (res < best_residual) {
            best_residual = res;
            out.n = n * scale;
            out.prices = p * price_scale;
        }
        if (best_residual <= opts.eps_kkt) break;
    }

    out.iterations = total_iters;
    out.f_min = lyapunov_F(model, out.n);
    out.kkt_residual = lift_residual(workload_map, w, out.n, out.prices);
    if (out.kkt_residual > opts.eps_kkt)
        throw SolverError("lifting solver did not reach the KKT tolerance", out.n, out.prices,
                          out.kkt_residual, out.iterations);
    return out;
}

double gap_H(const NetworkModel& model, const Eigen::VectorXd& n, const AllocOptions& opts) {
    require_critical(model, "gap_H");
    return lyapunov_F(model, n) - lift_delta(model, workload(model, n), opts).f_min;
}

ManifoldPoint invariant_from_q(const NetworkModel& model, const Eigen::VectorXd& q) {
    require_critical(model, "invariant_from_q");
    if (q.size() != model.critical_count())
        throw std::invalid_argument("invariant_from_q: q must have one entry per critical resource");

    ManifoldPoint pt;
    pt.q = q;
    const Eigen::MatrixXd a_star = model.critical_incidence();
    const Eigen::VectorXd s = a_star.transpose() * q;
    pt.n.resize(model.route_count());
    for (int i = 0; i < model.route_count(); ++i) {
        const double arg = s(i) / model.traffic.weights(i);
        pt.n(i) = arg > 0.0 ? model.loads(i) * std::pow(arg, 1.0 / model.traffic.alpha) : 0.0;
    }
    pt.w = workload(model, pt.n);
    return pt;
}

InvarianceCheck is_invariant(const NetworkModel& model, const Eigen::VectorXd& n, double tol,
                             const AllocOptions& opts) {
    require_critical(model, "is_invariant");
    InvarianceCheck check;
    const LiftResult lift = lift_delta(model, workload(model, n), opts);
    check.residual = (n - lift.n).norm();
    check.gap = lyapunov_F(model, n) - lift.f_min;
    check.dissipation = dissipation_K(model, n, opts);
    check.invariant = check.residual <= tol;
    return check;
}

bool cone_contains(const NetworkModel& model, const Eigen::VectorXd& w, double tol,
                   const AllocOptions& opts) {
    require_critical(model, "cone_contains");
    const LiftResult lift = lift_delta(model, w, opts);
    const Eigen::VectorXd w_back = workload(model, lift.n);
    return (w_back - w).norm() <= tol * (w.norm() + 1.0);
}

bool cone_closed_form_linear(double rho3, const Eigen::Vector2d& w) {
    return w(0) >= 0.0 && w(0) * rho3 <= w(1) && w(1) <= w(0) / rho3;
}

bool cone_closed_form_linear(const NetworkModel& model, const Eigen::Vector2d& w) {
    const auto& topo = model.topology;
    Eigen::MatrixXd expected(2, 3);
    expected << 1, 0, 1, 0, 1, 1;
    const bool shape_ok = topo.resource_count() == 2 && topo.route_count() == 3 &&
                          topo.incidence == expected &&
                          topo.capacities.isApprox(Eigen::Vector2d::Ones());
    const bool params_ok =
        shape_ok && model.traffic.weights.isApprox(Eigen::Vector3d::Ones()) &&
        model.traffic.service_rates.isApprox(Eigen::Vector3d::Ones()) &&
        std::abs(model.loads(0) + model.loads(2) - 1.0) <= 1e-9 &&
        std::abs(model.loads(1) + model.loads(2) - 1.0) <= 1e-9;
    if (!params_ok)
        throw TopologyMismatch(
            "cone_closed_form_linear needs the critical two-resource linear network "
            "(three routes, kappa = mu = 1, C = (1,1))");
    return cone_closed_form_linear(model.loads(2), w);
}

}  // namespace bwshare
