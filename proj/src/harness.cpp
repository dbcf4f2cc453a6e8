#include "bwshare/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bwshare/allocator.hpp"
#include "bwshare/ctmc.hpp"
#include "bwshare/errors.hpp"
#include "bwshare/fluid.hpp"
#include "bwshare/manifold.hpp"

namespace bwshare {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config error: cannot open \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write \"" + path + "\"");
    out << content;
}

// Every output file gets a sibling manifest tying it to config, parameters,
// seed and tolerances.
void write_manifest(const ExperimentSpec& spec, const std::string& config_text,
                    double wall_ms, const json& diagnostics) {
    if (spec.out_path.empty()) return;
    json m;
    m["tool_version"] = kToolVersion;
    m["command"] = spec.command;
    m["config_path"] = spec.config_path;
    char digest[20];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(fnv1a(config_text)));
    m["config_digest_fnv1a"] = digest;
    json params;
    params["state"] = spec.state;
    params["n0"] = spec.n0;
    params["q"] = spec.q;
    params["w"] = spec.w;
    params["horizon"] = spec.horizon;
    params["dt"] = spec.dt;
    params["eps_kkt"] = spec.eps_kkt;
    params["tol"] = spec.tol;
    params["out_points"] = spec.out_points;
    params["scales"] = spec.scales;
    params["num_seeds"] = spec.num_seeds;
    params["grid_points"] = spec.grid_points;
    params["cone_wmax"] = spec.cone_wmax;
    params["execution"] = spec.exec == Execution::parallel ? "parallel" : "serial";
    m["parameters"] = params;
    if (spec.has_seed) m["seed"] = spec.seed;
    m["wall_ms"] = wall_ms;
    m["diagnostics"] = diagnostics;
    write_file(spec.out_path + ".manifest.json", m.dump(2) + "\n");
}

void emit(const ExperimentSpec& spec, const std::string& content) {
    if (spec.out_path.empty())
        std::cout << content;
    else
        write_file(spec.out_path, content);
}

int run_allocate(const ExperimentSpec& spec, const NetworkModel& model, json& diagnostics) {
    const Eigen::VectorXd n = parse_vector(spec.state);
    if (n.size() != model.route_count())
        throw std::invalid_argument("--state must have one entry per route");
    AllocOptions opts;
    opts.eps_kkt = spec.eps_kkt;
    const Allocation alloc = allocate(model, n, opts);
    json out;
    out["lambda"] = to_std(alloc.lambda);
    out["p"] = to_std(alloc.prices);
    out["residual"] = alloc.kkt_residual;
    out["iterations"] = alloc.iterations;
    emit(spec, out.dump(2) + "\n");
    diagnostics["iterations"] = alloc.iterations;
    diagnostics["max_residual"] = alloc.kkt_residual;
    return exit_code::ok;
}

int run_fluid(const ExperimentSpec& spec, const NetworkModel& model, json& diagnostics) {
    const Eigen::VectorXd n0 = parse_vector(spec.n0);
    if (n0.size() != model.route_count())
        throw std::invalid_argument("--n0 must have one entry per route");
    IntegrateOptions opts;
    opts.dt = spec.dt;
    opts.alloc.eps_kkt = spec.eps_kkt;
    const auto grid = uniform_grid(spec.horizon, spec.out_points);
    const FluidTrajectory traj = integrate(model, n0, spec.horizon, grid, opts);

    std::ostringstream csv;
    csv << "t";
    for (int i = 0; i < model.route_count(); ++i) csv << ",n_" << i + 1;
    csv << ",F,H,K";
    for (int j : model.critical_set) csv << ",w_" << j + 1;
    for (int j = 0; j < model.resource_count(); ++j) csv << ",feas_" << j + 1;
    csv << "\n";
    for (const auto& s : traj.samples) {
        csv << fmt(s.t);
        for (int i = 0; i < s.n.size(); ++i) csv << "," << fmt(s.n(i));
        csv << "," << fmt(s.lyapunov) << "," << fmt(s.gap) << "," << fmt(s.dissipation);
        for (int k = 0; k < s.w.size(); ++k) csv << "," << fmt(s.w(k));
        for (int j = 0; j < s.feasibility.size(); ++j) csv << "," << fmt(s.feasibility(j));
        csv << "\n";
    }
    emit(spec, csv.str());
    diagnostics["steps"] = traj.steps;
    diagnostics["dt"] = traj.dt;
    if (!traj.samples.empty()) {
        diagnostics["terminal_H"] = traj.samples.back().gap;
        diagnostics["terminal_F"] = traj.samples.back().lyapunov;
    }
    return exit_code::ok;
}

int run_simulate(const ExperimentSpec& spec, const NetworkModel& model, json& diagnostics) {
    const Eigen::VectorXd n0 = parse_vector(spec.n0);
    if (n0.size() != model.route_count())
        throw std::invalid_argument("--n0 must have one entry per route");
    if (!spec.has_seed) throw std::invalid_argument("simulate requires --seed");
    Eigen::VectorXi start(n0.size());
    for (int i = 0; i < n0.size(); ++i) start(i) = static_cast<int>(std::lround(n0(i)));
    SimOptions opts;
    opts.alloc.eps_kkt = spec.eps_kkt;
    const EventPath path = simulate(model, start, spec.horizon, spec.seed, opts);

    std::ostringstream csv;
    csv << "t,event,i";
    for (int i = 0; i < model.route_count(); ++i) csv << ",N_" << i + 1;
    for (int j = 0; j < model.resource_count(); ++j) csv << ",U_" << j + 1;
    csv << "\n";
    csv << "0,init,0";
    for (int i = 0; i < model.route_count(); ++i) csv << "," << path.initial_state(i);
    for (int j = 0; j < model.resource_count(); ++j) csv << ",0";
    csv << "\n";
    for (std::size_t k = 0; k < path.event_count(); ++k) {
        csv << fmt(path.jump_times[k]) << ","
            << (path.events[k].type == EventType::arrival ? "arrival" : "departure") << ","
            << path.events[k].route + 1;
        const Eigen::VectorXi st = path.state_at(k);
        for (int i = 0; i < st.size(); ++i) csv << "," << st(i);
        const Eigen::VectorXd u = path.unused_capacity_at(k);
        for (int j = 0; j < u.size(); ++j) csv << "," << fmt(u(j));
        csv << "\n";
    }
    emit(spec, csv.str());
    diagnostics["events"] = path.event_count();
    return exit_code::ok;
}

int run_fluidlimit(const ExperimentSpec& spec, const NetworkModel& model, json& diagnostics) {
    const Eigen::VectorXd n0 = parse_vector(spec.n0);
    if (n0.size() != model.route_count())
        throw std::invalid_argument("--n0 must have one entry per route");
    if (!spec.has_seed) throw std::invalid_argument("fluidlimit requires --seed");
    const Eigen::VectorXd scale_vec = parse_vector(spec.scales);
    const std::vector<double> scales = to_std(scale_vec);
    const double horizon = spec.horizon > 0.0 ? spec.horizon : 5.0;
    const auto grid = uniform_grid(horizon, spec.grid_points);
    SimOptions opts;
    opts.alloc.eps_kkt = spec.eps_kkt;
    const FluidLimitReport report = fluid_limit_experiment(
        model, n0, scales, spec.num_seeds, spec.seed, grid, spec.exec, opts, spec.dt);

    std::ostringstream csv;
    csv << "r,seed,sup_error,median_for_r\n";
    for (std::size_t s = 0; s < scales.size(); ++s)
        for (int k = 0; k < spec.num_seeds; ++k)
            csv << fmt(scales[s]) << "," << k << "," << fmt(report.sup_errors[s][k]) << ","
                << fmt(report.median_sup_error[s]) << "\n";
    emit(spec, csv.str());
    diagnostics["medians"] = report.median_sup_error;
    return exit_code::ok;
}

int run_manifold(const ExperimentSpec& spec, const NetworkModel& model, json& diagnostics) {
    const Eigen::VectorXd q = parse_vector(spec.q);
    AllocOptions opts;
    opts.eps_kkt = spec.eps_kkt;
    const ManifoldPoint pt = invariant_from_q(model, q);
    json out;
    out["q"] = to_std(pt.q);
    out["n"] = to_std(pt.n);
    out["w"] = to_std(pt.w);
    // Postcondition check: the allocation equals the loads on positive routes.
    double lambda_vs_rho = 0.0;
    if (pt.n.maxCoeff() > 0.0) {
        const Allocation alloc = allocate(model, pt.n, opts);
        for (int i = 0; i < pt.n.size(); ++i)
            if (pt.n(i) > 0.0)
                lambda_vs_rho = std::max(lambda_vs_rho, std::abs(alloc.lambda(i) - model.loads(i)));
    }
    out["lambda_vs_rho"] = lambda_vs_rho;
    const InvarianceCheck check = is_invariant(model, pt.n, spec.tol, opts);
    out["H"] = check.gap;
    out["K"] = check.dissipation;
    out["lift_residual"] = check.residual;
    out["invariant"] = check.invariant;
    emit(spec, out.dump(2) + "\n");
    diagnostics["max_residual"] = check.residual;
    return exit_code::ok;
}

int run_lift(const ExperimentSpec& spec, const NetworkModel& model, json& diagnostics) {
    const Eigen::VectorXd w = parse_vector(spec.w);
    AllocOptions opts;
    opts.eps_kkt = spec.eps_kkt;
    const LiftResult lift = lift_delta(model, w, opts);
    json out;
    out["n"] = to_std(lift.n);
    out["p"] = to_std(lift.prices);
    out["F_min"] = lift.f_min;
    out["residual"] = lift.kkt_residual;
    out["iterations"] = lift.iterations;
    emit(spec, out.dump(2) + "\n");
    diagnostics["iterations"] = lift.iterations;
    diagnostics["max_residual"] = lift.kkt_residual;
    return exit_code::ok;
}

int run_cone(const ExperimentSpec& spec, const NetworkModel& model, json& diagnostics) {
    const auto cells = cone_grid(model, spec.grid_points, spec.cone_wmax, spec.tol, spec.exec);
    std::ostringstream csv;
    csv << "w_1,w_2,inside\n";
    for (const auto& c : cells)
        csv << fmt(c.w1) << "," << fmt(c.w2) << "," << (c.inside ? 1 : 0) << "\n";
    emit(spec, csv.str());
    diagnostics["cells"] = cells.size();
    return exit_code::ok;
}

}  // namespace

Eigen::VectorXd parse_vector(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        double v;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("cannot parse \"" + item + "\" as a number");
        }
        while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
        if (pos != item.size())
            throw std::invalid_argument("cannot parse \"" + item + "\" as a number");
        vals.push_back(v);
    }
    if (vals.empty()) throw std::invalid_argument("empty vector argument");
    return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

TrajectoryComparison compare_trajectories(const SampledPath& a, const SampledPath& b,
                                          const std::vector<double>& grid) {
    auto value_at = [](const SampledPath& path, double t) -> Eigen::VectorXd {
        if (path.times.empty() || t < path.times.front() - 1e-12 ||
            t > path.times.back() + 1e-12)
            throw std::invalid_argument("compare_trajectories: grid point outside path coverage");
        const auto it = std::lower_bound(path.times.begin(), path.times.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - path.times.begin());
        if (hi >= path.times.size()) hi = path.times.size() - 1;
        if (hi == 0) return path.values.front();
        const std::size_t lo = hi - 1;
        const double span = path.times[hi] - path.times[lo];
        const double frac = span > 0.0 ? (t - path.times[lo]) / span : 0.0;
        return path.values[lo] + frac * (path.values[hi] - path.values[lo]);
    };

    TrajectoryComparison cmp;
    for (double t : grid) {
        const Eigen::VectorXd va = value_at(a, t);
        const Eigen::VectorXd vb = value_at(b, t);
        if (va.size() != vb.size())
            throw std::invalid_argument("compare_trajectories: dimension mismatch");
        if (cmp.per_component.size() == 0) cmp.per_component = Eigen::VectorXd::Zero(va.size());
        const Eigen::VectorXd diff = (va - vb).cwiseAbs();
        cmp.sup_error = std::max(cmp.sup_error, diff.norm());
        cmp.per_component = cmp.per_component.cwiseMax(diff);
    }
    return cmp;
}

std::vector<ConeCell> cone_grid(const NetworkModel& model, int points_per_axis, double w_max,
                                double tol, Execution exec) {
    if (model.critical_count() != 2)
        throw std::invalid_argument("cone_grid expects a model with exactly two critical resources");
    const int n = points_per_axis;
    std::vector<ConeCell> cells(static_cast<std::size_t>(n) * n);

    auto fill = [&](int idx) {
        const int a = idx / n;
        const int b = idx % n;
        ConeCell& c = cells[idx];
        c.w1 = w_max * a / (n - 1);
        c.w2 = w_max * b / (n - 1);
        Eigen::VectorXd w(2);
        w << c.w1, c.w2;
        c.inside = cone_contains(model, w, tol);
    };

    const int total = n * n;
    if (exec == Execution::parallel) {
        std::string first_error;
#pragma omp parallel for schedule(dynamic, 64)
        for (int idx = 0; idx < total; ++idx) {
            try {
                fill(idx);
            } catch (const std::exception& e) {
#pragma omp critical
                if (first_error.empty()) first_error = e.what();
            }
        }
        if (!first_error.empty()) throw std::runtime_error(first_error);
    } else {
        for (int idx = 0; idx < total; ++idx) fill(idx);
    }
    return cells;
}

int run(const ExperimentSpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::string config_text = read_file(spec.config_path);
        const NetworkModel model = parse_network(config_text);

        json diagnostics;
        int code;
        if (spec.command == "allocate")
            code = run_allocate(spec, model, diagnostics);
        else if (spec.command == "fluid")
            code = run_fluid(spec, model, diagnostics);
        else if (spec.command == "simulate")
            code = run_simulate(spec, model, diagnostics);
        else if (spec.command == "fluidlimit")
            code = run_fluidlimit(spec, model, diagnostics);
        else if (spec.command == "manifold")
            code = run_manifold(spec, model, diagnostics);
        else if (spec.command == "lift")
            code = run_lift(spec, model, diagnostics);
        else if (spec.command == "cone")
            code = run_cone(spec, model, diagnostics);
        else {
            std::cerr << "unknown command: " << spec.command << "\n";
            return exit_code::usage_error;
        }

        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        write_manifest(spec, config_text, wall_ms, diagnostics);
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::config_error;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << " (best residual " << e.best_residual
                  << " after " << e.iterations << " iterations)\n";
        return exit_code::solver_error;
    } catch (const SubcriticalError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::config_error;
    } catch (const TopologyMismatch& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::config_error;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << " at t = " << e.t << " (excess "
                  << e.excess << ")\n";
        return exit_code::invariant_violation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return exit_code::usage_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::failure;
    }
}

}  // namespace bwshare
