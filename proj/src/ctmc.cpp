#include "bwshare/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bwshare/fluid.hpp"
#include "bwshare/rng.hpp"

namespace bwshare {

int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace {

struct StateKeyHash {
    std::size_t operator()(const std::vector<std::int32_t>& key) const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (std::int32_t v : key) {
            h ^= static_cast<std::uint32_t>(v);
            h *= 0x100000001b3ull;
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace

Eigen::VectorXi EventPath::state_at(std::size_t k) const {
    return Eigen::Map<const Eigen::VectorXi>(
        reinterpret_cast<const int*>(states_flat.data() + k * route_count), route_count);
}

Eigen::VectorXd EventPath::cumulative_allocation_at(std::size_t k) const {
    return Eigen::Map<const Eigen::VectorXd>(
        cumulative_allocation_flat.data() + k * route_count, route_count);
}

Eigen::VectorXd EventPath::unused_capacity_at(std::size_t k) const {
    return Eigen::Map<const Eigen::VectorXd>(unused_capacity_flat.data() + k * resource_count,
                                             resource_count);
}

std::vector<std::pair<Event, double>> transition_rates(const NetworkModel& model,
                                                       const Eigen::VectorXi& state,
                                                       const AllocOptions& opts) {
    const int num_routes = model.route_count();
    const Allocation alloc = allocate(model, state.cast<double>(), opts);
    std::vector<std::pair<Event, double>> rates;
    rates.reserve(2 * num_routes);
    for (int i = 0; i < num_routes; ++i)
        rates.push_back({{EventType::arrival, i}, model.traffic.arrival_rates(i)});
    for (int i = 0; i < num_routes; ++i)
        if (state(i) >= 1)
            rates.push_back({{EventType::departure, i},
                             model.traffic.service_rates(i) * alloc.lambda(i)});
    return rates;
}

EventPath simulate(const NetworkModel& model, const Eigen::VectorXi& initial_state,
                   double horizon, std::uint64_t seed, const SimOptions& opts) {
    const int num_routes = model.route_count();
    const int num_resources = model.resource_count();
    if (initial_state.size() != num_routes)
        throw std::invalid_argument("simulate: initial state has wrong dimension");
    if (initial_state.minCoeff() < 0)
        throw std::invalid_argument("simulate: initial state must be nonnegative");

    EventPath path;
    path.route_count = num_routes;
    path.resource_count = num_resources;
    path.initial_state = initial_state;
    path.horizon = horizon;
    path.rng_seed = seed;

    RngStream holding_stream(derive_seed(seed, 0));
    RngStream selection_stream(derive_seed(seed, 1));

    Eigen::VectorXi state = initial_state;
    Eigen::VectorXd t_cum = Eigen::VectorXd::Zero(num_routes);
    double t = 0.0;

    std::unordered_map<std::vector<std::int32_t>, Eigen::VectorXd, StateKeyHash> alloc_cache;
    AllocOptions alloc_opts = opts.alloc;
    std::vector<std::int32_t> key(num_routes);

    auto allocation_for = [&](const Eigen::VectorXi& s) -> Eigen::VectorXd {
        const long total = s.cast<long>().sum();
        const bool cacheable = total <= opts.cache_total_cap;
        if (cacheable) {
            for (int i = 0; i < num_routes; ++i) key[i] = s(i);
            auto it = alloc_cache.find(key);
            if (it != alloc_cache.end()) return it->second;
        }
        const Allocation alloc = allocate(model, s.cast<double>(), alloc_opts);
        alloc_opts.warm_prices = alloc.prices;
        if (cacheable) alloc_cache.emplace(key, alloc.lambda);
        return alloc.lambda;
    };

    // U is accumulated from its nonnegative per-interval increments
    // hold * (C - A Lambda) rather than recomputed as C t - A T(t): adding a
    // nonnegative increment can never round below the previous value, so the
    // stored U is nondecreasing exactly, while C t - A T(t) evaluated from two
    // large accumulators can wobble by an ulp of t. The allocator guarantees
    // A Lambda <= C in these exact units; the clamp is defensive.
    Eigen::VectorXd u_cum = Eigen::VectorXd::Zero(num_resources);
    auto slack_of = [&](const Eigen::VectorXd& lam) -> Eigen::VectorXd {
        return (model.topology.capacities - model.topology.incidence * lam).cwiseMax(0.0);
    };

    Eigen::VectorXd lambda = allocation_for(state);
    Eigen::VectorXd slack = slack_of(lambda);
    std::uint64_t events = 0;

    while (true) {
        double total_rate = model.traffic.arrival_rates.sum();
        for (int i = 0; i < num_routes; ++i)
            if (state(i) >= 1) total_rate += model.traffic.service_rates(i) * lambda(i);

        if (total_rate <= 0.0) break;  // absorbing (only possible with arrivals off)

        const double hold = holding_stream.exponential(total_rate);
        if (t + hold >= horizon) break;

        // Advance the piecewise-linear processes to the jump time.
        t += hold;
        t_cum += hold * lambda;
        u_cum += hold * slack;

        // Pick the event: arrivals in route order, then departures.
        double u = selection_stream.uniform() * total_rate;
        Event ev{EventType::arrival, num_routes - 1};
        bool chosen = false;
        for (int i = 0; i < num_routes && !chosen; ++i) {
            u -= model.traffic.arrival_rates(i);
            if (u < 0.0) {
                ev = {EventType::arrival, i};
                chosen = true;
            }
        }
        if (!chosen) {
            for (int i = 0; i < num_routes; ++i) {
                if (state(i) < 1) continue;
                u -= model.traffic.service_rates(i) * lambda(i);
                if (u < 0.0) {
                    ev = {EventType::departure, i};
                    chosen = true;
                    break;
                }
            }
            if (!chosen) {  // numerical edge: roll landed on the boundary
                for (int i = num_routes - 1; i >= 0; --i)
                    if (state(i) >= 1) {
                        ev = {EventType::departure, i};
                        break;
                    }
            }
        }

        state(ev.route) += ev.type == EventType::arrival ? 1 : -1;

        path.jump_times.push_back(t);
        path.events.push_back(ev);
        for (int i = 0; i < num_routes; ++i)
            path.states_flat.push_back(state(i));
        for (int i = 0; i < num_routes; ++i)
            path.cumulative_allocation_flat.push_back(t_cum(i));
        for (int j = 0; j < num_resources; ++j)
            path.unused_capacity_flat.push_back(u_cum(j));

        if (++events >= opts.event_cap)
            throw std::runtime_error("simulate: event cap exceeded (" +
                                     std::to_string(opts.event_cap) + " events)");
        lambda = allocation_for(state);
        slack = slack_of(lambda);
    }

    // Close the path at the horizon.
    const double tail = horizon - t;
    path.allocation_end = lambda;
    path.T_end = t_cum + tail * lambda;
    path.U_end = u_cum + tail * slack;
    return path;
}

ScaledPath rescale(const EventPath& path, double scale, const std::vector<double>& grid) {
    if (!grid.empty() && scale * grid.back() > path.horizon * (1.0 + 1e-12))
        throw std::invalid_argument("rescale: path horizon too short for the requested grid");

    ScaledPath out;
    out.scale = scale;
    out.grid = grid;
    out.n_bar.reserve(grid.size());
    out.t_bar.reserve(grid.size());
    out.u_bar.reserve(grid.size());

    const int num_routes = path.route_count;
    const int num_resources = path.resource_count;
    const std::size_t num_events = path.event_count();

    for (double tg : grid) {
        const double t = scale * tg;
        // Last jump strictly before t (left limits for the state process).
        const auto it = std::lower_bound(path.jump_times.begin(), path.jump_times.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - path.jump_times.begin());

        Eigen::VectorXd n = (k == 0 ? path.initial_state : path.state_at(k - 1)).cast<double>();
        out.n_bar.push_back(n / scale);

        // T and U are piecewise linear; interpolate between jump nodes.
        const double t_lo = k == 0 ? 0.0 : path.jump_times[k - 1];
        Eigen::VectorXd T_lo = k == 0 ? Eigen::VectorXd::Zero(num_routes)
                                      : path.cumulative_allocation_at(k - 1);
        Eigen::VectorXd U_lo =
            k == 0 ? Eigen::VectorXd::Zero(num_resources) : path.unused_capacity_at(k - 1);
        double t_hi;
        Eigen::VectorXd T_hi, U_hi;
        if (k < num_events) {
            t_hi = path.jump_times[k];
            T_hi = path.cumulative_allocation_at(k);
            U_hi = path.unused_capacity_at(k);
        } else {
            t_hi = path.horizon;
            T_hi = path.T_end;
            U_hi = path.U_end;
        }
        const double span = t_hi - t_lo;
        const double frac = span > 0.0 ? (t - t_lo) / span : 0.0;
        out.t_bar.push_back((T_lo + frac * (T_hi - T_lo)) / scale);
        out.u_bar.push_back((U_lo + frac * (U_hi - U_lo)) / scale);
    }
    return out;
}

FluidLimitReport fluid_limit_experiment(const NetworkModel& model, const Eigen::VectorXd& n0,
                                        const std::vector<double>& scales, int num_seeds,
                                        std::uint64_t base_seed, const std::vector<double>& grid,
                                        Execution exec, const SimOptions& opts, double fluid_dt) {
    if (grid.empty()) throw std::invalid_argument("fluid_limit_experiment: empty grid");

    IntegrateOptions fluid_opts;
    fluid_opts.dt = fluid_dt;
    fluid_opts.with_gap = false;
    fluid_opts.check_monotonicity = false;
    fluid_opts.alloc = opts.alloc;
    const FluidTrajectory fluid = integrate(model, n0, grid.back(), grid, fluid_opts);

    FluidLimitReport report;
    report.scales = scales;
    report.grid = grid;
    report.sup_errors.assign(scales.size(), std::vector<double>(num_seeds, 0.0));

    const int num_jobs = static_cast<int>(scales.size()) * num_seeds;

    auto run_job = [&](int job) {
        const int scale_idx = job / num_seeds;
        const int seed_idx = job % num_seeds;
        const double r = scales[scale_idx];
        const std::uint64_t seed = derive_seed(base_seed, scale_idx + 2, seed_idx);

        Eigen::VectorXi start(n0.size());
        for (int i = 0; i < n0.size(); ++i) start(i) = static_cast<int>(std::lround(r * n0(i)));

        const EventPath path = simulate(model, start, r * grid.back(), seed, opts);
        const ScaledPath scaled = rescale(path, r, grid);

        double sup = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g)
            sup = std::max(sup, (scaled.n_bar[g] - fluid.samples[g].n).norm());
        report.sup_errors[scale_idx][seed_idx] = sup;
    };

    if (exec == Execution::parallel) {
        // Exceptions must not cross the parallel region; capture and rethrow.
        std::string first_error;
#pragma omp parallel for schedule(dynamic)
        for (int job = 0; job < num_jobs; ++job) {
            try {
                run_job(job);
            } catch (const std::exception& e) {
#pragma omp critical
                if (first_error.empty()) first_error = e.what();
            }
        }
        if (!first_error.empty()) throw std::runtime_error(first_error);
    } else {
        for (int job = 0; job < num_jobs; ++job) run_job(job);
    }

    report.median_sup_error.resize(scales.size());
    for (std::size_t s = 0; s < scales.size(); ++s) {
        std::vector<double> errs = report.sup_errors[s];
        std::sort(errs.begin(), errs.end());
        const std::size_t m = errs.size();
        report.median_sup_error[s] =
            m % 2 == 1 ? errs[m / 2] : 0.5 * (errs[m / 2 - 1] + errs[m / 2]);
    }
    return report;
}

}  // namespace bwshare
