#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "bwshare/allocator.hpp"
#include "bwshare/network.hpp"
#include "bwshare/parallel.hpp"

namespace bwshare {

enum class EventType { arrival, departure };

struct Event {
    EventType type;
    int route;
};

// Exact sample path of the flow-count chain with the cumulative allocation
// and unused-capacity bookkeeping. Vectors of per-jump values are stored
// flat (row k holds the value just after the k-th jump).
struct EventPath {
    int route_count = 0;
    int resource_count = 0;
    Eigen::VectorXi initial_state;
    std::vector<double> jump_times;
    std::vector<Event> events;
    std::vector<std::int32_t> states_flat;          // events x I
    std::vector<double> cumulative_allocation_flat;  // events x I, T at jump times
    std::vector<double> unused_capacity_flat;        // events x J, U at jump times
    double horizon = 0.0;
    Eigen::VectorXd allocation_end;  // Lambda on the final interval
    Eigen::VectorXd T_end;           // T(horizon)
    Eigen::VectorXd U_end;           // U(horizon)
    std::uint64_t rng_seed = 0;

    std::size_t event_count() const { return events.size(); }
    Eigen::VectorXi state_at(std::size_t k) const;
    Eigen::VectorXd cumulative_allocation_at(std::size_t k) const;
    Eigen::VectorXd unused_capacity_at(std::size_t k) const;
};

// Law-of-large-numbers rescaling of an event path: samples of N(rt)/r (left
// limits) and T(rt)/r, U(rt)/r (linear interpolation) on an output grid.
struct ScaledPath {
    double scale = 1.0;
    std::vector<double> grid;
    std::vector<Eigen::VectorXd> n_bar;
    std::vector<Eigen::VectorXd> t_bar;
    std::vector<Eigen::VectorXd> u_bar;
};

struct SimOptions {
    std::uint64_t event_cap = 100000000ull;
    // States whose total flow count is at most this are worth caching the
    // allocation for; the chain revisits low states constantly.
    int cache_total_cap = 64;
    AllocOptions alloc;
};

// Enabled transitions at integer state N: arrival(i) at rate nu_i for every
// route, departure(i) at rate mu_i Lambda_i(N) for routes with N_i >= 1.
std::vector<std::pair<Event, double>> transition_rates(const NetworkModel& model,
                                                       const Eigen::VectorXi& state,
                                                       const AllocOptions& opts = {});

// Gillespie direct method. Two named streams are derived from the seed (one
// for holding times, one for event selection), so paths are bit-reproducible.
// Throws std::runtime_error if the event cap is hit.
EventPath simulate(const NetworkModel& model, const Eigen::VectorXi& initial_state,
                   double horizon, std::uint64_t seed, const SimOptions& opts = {});

// Requires path.horizon >= scale * grid.back().
ScaledPath rescale(const EventPath& path, double scale, const std::vector<double>& grid);

struct FluidLimitReport {
    std::vector<double> scales;
    std::vector<double> grid;
    std::vector<std::vector<double>> sup_errors;  // [scale][seed]
    std::vector<double> median_sup_error;         // per scale
};

// Theorem-style fluid-limit experiment: for each scale r and seed, simulate
// from round(r * n0), rescale, and take the sup over the grid of the distance
// to the fluid trajectory started at n0. Runs fan out over (scale, seed).
FluidLimitReport fluid_limit_experiment(const NetworkModel& model, const Eigen::VectorXd& n0,
                                        const std::vector<double>& scales, int num_seeds,
                                        std::uint64_t base_seed, const std::vector<double>& grid,
                                        Execution exec = Execution::parallel,
                                        const SimOptions& opts = {}, double fluid_dt = 0.0);

}  // namespace bwshare
