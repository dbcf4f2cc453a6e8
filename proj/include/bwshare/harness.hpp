#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bwshare/network.hpp"
#include "bwshare/parallel.hpp"

namespace bwshare {

inline constexpr const char* kToolVersion = "0.1.0";

// Process exit codes used by the CLI.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config_error = 2;
inline constexpr int solver_error = 3;
inline constexpr int invariant_violation = 4;
inline constexpr int usage_error = 5;
}  // namespace exit_code

// One CLI invocation, fully specified. Fields not used by the chosen
// command are ignored.
struct ExperimentSpec {
    std::string command;  // allocate | fluid | simulate | fluidlimit | manifold | lift | cone
    std::string config_path;
    std::string state;       // allocate: comma-separated n
    std::string n0;          // fluid / simulate / fluidlimit
    std::string q;           // manifold
    std::string w;           // lift
    double horizon = 0.0;    // fluid / simulate / fluidlimit (fluid time)
    double dt = 0.0;         // fluid integrator step (0 = default)
    double eps_kkt = 1e-9;
    double tol = 1e-6;
    int out_points = 200;    // fluid output grid intervals
    std::string scales = "20,100,500";  // fluidlimit
    int num_seeds = 20;                 // fluidlimit
    int grid_points = 100;              // fluidlimit time grid / cone w grid
    double cone_wmax = 3.0;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::string out_path;  // empty: JSON commands print to stdout
    Execution exec = Execution::parallel;
};

// Dispatches to the owning module, writes the data file plus a sibling
// ".manifest.json", and returns a process exit code. Human-readable errors
// go to stderr.
int run(const ExperimentSpec& spec);

// A path sampled at increasing times, for comparisons.
struct SampledPath {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> values;
};

struct TrajectoryComparison {
    double sup_error = 0.0;           // sup over grid of Euclidean distance
    Eigen::VectorXd per_component;    // per-component maxima
};

// Sup-norm comparison on a grid both paths must cover (linear interpolation
// between samples). Throws std::invalid_argument on coverage gaps.
TrajectoryComparison compare_trajectories(const SampledPath& a, const SampledPath& b,
                                          const std::vector<double>& grid);

// Cone-membership scan over a uniform 2-D workload grid (models with two
// critical resources). Returns rows (w1, w2, inside).
struct ConeCell {
    double w1, w2;
    bool inside;
};
std::vector<ConeCell> cone_grid(const NetworkModel& model, int points_per_axis,
                                double w_max, double tol = 1e-6,
                                Execution exec = Execution::parallel);

// "a,b,c" -> vector. Throws std::invalid_argument on junk.
Eigen::VectorXd parse_vector(const std::string& text);

}  // namespace bwshare
