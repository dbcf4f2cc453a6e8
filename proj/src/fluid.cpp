#include "bwshare/fluid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bwshare/errors.hpp"
#include "bwshare/manifold.hpp"

namespace bwshare {

namespace {

Eigen::VectorXd masked_state(const Eigen::VectorXd& n, double n_floor) {
    Eigen::VectorXd m = n;
    for (int i = 0; i < m.size(); ++i)
        if (m(i) <= n_floor) m(i) = 0.0;
    return m;
}

// Drift with the boundary rule: a component at zero stays frozen only while
// the state remains feasible with the route's load substituted for its
// allocation. If that reservation overruns a resource the route crosses, the
// component must leave zero ("entrainment"); its instantaneous service at
// size zero-plus is immaterial, so it is released at its arrival rate and the
// regular dynamics take over from the next step.
Eigen::VectorXd drift_from_allocation(const NetworkModel& model, const Eigen::VectorXd& n_masked,
                                      const Eigen::VectorXd& lambda, double feas_tol) {
    const auto& a = model.topology.incidence;
    Eigen::VectorXd d(n_masked.size());
    Eigen::VectorXd reserved = a * lambda;
    bool any_zero = false;
    for (int i = 0; i < n_masked.size(); ++i) {
        if (n_masked(i) > 0.0) {
            d(i) = model.traffic.arrival_rates(i) -
                   model.traffic.service_rates(i) * lambda(i);
        } else {
            d(i) = 0.0;
            any_zero = true;
            reserved += a.col(i) * model.loads(i);
        }
    }
    if (any_zero) {
        for (int j = 0; j < model.resource_count(); ++j) {
            const double cap = model.topology.capacities(j);
            if (reserved(j) <= cap + feas_tol * std::max(1.0, cap)) continue;
            for (int i = 0; i < n_masked.size(); ++i)
                if (n_masked(i) <= 0.0 && a(j, i) > 0.0)
                    d(i) = model.traffic.arrival_rates(i);
        }
    }
    return d;
}

Eigen::VectorXd margin_from_allocation(const NetworkModel& model, const Eigen::VectorXd& n_masked,
                                       const Eigen::VectorXd& lambda) {
    Eigen::VectorXd used = Eigen::VectorXd::Zero(model.resource_count());
    for (int i = 0; i < n_masked.size(); ++i) {
        const double share = n_masked(i) > 0.0 ? lambda(i) : model.loads(i);
        used += model.topology.incidence.col(i) * share;
    }
    return model.topology.capacities - used;
}

double default_dt(const NetworkModel& model) {
    return 1e-3 / model.traffic.service_rates.maxCoeff();
}

}  // namespace

Eigen::VectorXd drift(const NetworkModel& model, const Eigen::VectorXd& n,
                      const AllocOptions& opts, double n_floor) {
    const Eigen::VectorXd m = masked_state(n, n_floor);
    const Allocation alloc = allocate(model, m, opts);
    return drift_from_allocation(model, m, alloc.lambda, 10.0 * opts.eps_kkt);
}

Eigen::VectorXd feasibility_margin(const NetworkModel& model, const Eigen::VectorXd& n,
                                   const AllocOptions& opts, double n_floor) {
    const Eigen::VectorXd m = masked_state(n, n_floor);
    const Allocation alloc = allocate(model, m, opts);
    return margin_from_allocation(model, m, alloc.lambda);
}

std::vector<double> uniform_grid(double horizon, int intervals) {
    std::vector<double> grid;
    grid.reserve(intervals + 1);
    for (int k = 0; k <= intervals; ++k)
        grid.push_back(horizon * static_cast<double>(k) / intervals);
    return grid;
}

FluidTrajectory integrate(const NetworkModel& model, const Eigen::VectorXd& n0, double horizon,
                          const std::vector<double>& output_grid, const IntegrateOptions& opts) {
    if (n0.size() != model.route_count())
        throw std::invalid_argument("integrate: n0 has wrong dimension");
    if (n0.minCoeff() < 0.0) throw std::invalid_argument("integrate: n0 must be nonnegative");
    for (std::size_t k = 0; k + 1 < output_grid.size(); ++k)
        if (!(output_grid[k] < output_grid[k + 1]))
            throw std::invalid_argument("integrate: output grid must be strictly increasing");
    if (!output_grid.empty() && output_grid.back() > horizon + 1e-12)
        throw std::invalid_argument("integrate: output grid extends past the horizon");

    FluidTrajectory traj;
    traj.dt = opts.dt > 0.0 ? opts.dt : default_dt(model);
    const double dt = traj.dt;
    const bool critical = !model.subcritical();
    const bool with_gap = opts.with_gap && critical;

    Eigen::VectorXd n = masked_state(n0, opts.n_floor);
    double t = 0.0;
    std::size_t next_out = 0;

    AllocOptions alloc_opts = opts.alloc;
    AllocOptions lift_opts = opts.alloc;
    double prev_gap = std::numeric_limits<double>::infinity();
    double max_abs_k = 0.0;
    const double time_eps = 1e-12;
    const double feas_tol = 10.0 * opts.alloc.eps_kkt;

    auto record = [&](double stamp, const Eigen::VectorXd& lambda) {
        FluidSample s;
        s.t = stamp;
        s.n = n;
        s.drift = drift_from_allocation(model, n, lambda, feas_tol);
        s.lyapunov = lyapunov_F(model, n);
        s.dissipation = dissipation_K(model, n, lambda);
        s.feasibility = margin_from_allocation(model, n, lambda);
        if (critical) {
            s.w = workload(model, n);
            if (with_gap) {
                const LiftResult lift = lift_delta(model, s.w, lift_opts);
                lift_opts.warm_prices = lift.prices;
                s.gap = s.lyapunov - lift.f_min;
                max_abs_k = std::max(max_abs_k, std::abs(s.dissipation));
                const double tol_mono = 1e-6 + 10.0 * dt * max_abs_k;
                if (opts.check_monotonicity && s.gap > prev_gap + tol_mono)
                    throw InvariantViolation("gap function H increased along the trajectory", stamp,
                                             s.gap - prev_gap);
                prev_gap = s.gap;
            } else {
                s.gap = std::numeric_limits<double>::quiet_NaN();
            }
        } else {
            s.gap = std::numeric_limits<double>::quiet_NaN();
        }
        traj.samples.push_back(std::move(s));
    };

    while (true) {
        const Allocation alloc = allocate(model, n, alloc_opts);
        alloc_opts.warm_prices = alloc.prices;

        while (next_out < output_grid.size() && output_grid[next_out] <= t + time_eps) {
            record(output_grid[next_out], alloc.lambda);
            ++next_out;
        }
        if (t >= horizon - time_eps) break;

        const Eigen::VectorXd d = drift_from_allocation(model, n, alloc.lambda, feas_tol);

        // Step to the nearest of: full step, horizon, next output time.
        double h = std::min(dt, horizon - t);
        if (next_out < output_grid.size()) h = std::min(h, output_grid[next_out] - t);

        // Split the step at the first zero crossing. The drift is constant
        // within an Euler step, so the crossing time is exact.
        for (int i = 0; i < n.size(); ++i) {
            if (d(i) < 0.0 && n(i) > 0.0) {
                const double t_cross = n(i) / (-d(i));
                if (t_cross < h) h = t_cross;
            }
        }
        h = std::max(h, time_eps);

        n += h * d;
        for (int i = 0; i < n.size(); ++i)
            if (n(i) <= opts.n_floor) n(i) = 0.0;  // sticky boundary
        t += h;
        ++traj.steps;
    }
    return traj;
}

}  // namespace bwshare
