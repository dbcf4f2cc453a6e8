#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace bwshare {

// Relative tolerance for classifying a resource as critical:
// |sum_i A_ji rho_i - C_j| <= kCriticalityTol * C_j.
inline constexpr double kCriticalityTol = 1e-9;

// Singular values below kRankTol * sigma_max count as zero in the
// full-row-rank check.
inline constexpr double kRankTol = 1e-10;

// Routes, resources and capacities. `incidence` is the J x I matrix with
// entry (j, i) = 1 iff resource j lies on route i.
struct Topology {
    Eigen::MatrixXd incidence;
    Eigen::VectorXd capacities;
    std::vector<std::string> resource_names;
    std::vector<std::string> route_names;

    int resource_count() const { return static_cast<int>(incidence.rows()); }
    int route_count() const { return static_cast<int>(incidence.cols()); }
};

// Per-route traffic parameters and the fairness exponent.
struct TrafficParams {
    Eigen::VectorXd arrival_rates;  // nu_i, flows per unit time
    Eigen::VectorXd service_rates;  // mu_i, reciprocal mean document size
    Eigen::VectorXd weights;        // kappa_i
    double alpha = 1.0;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

// Validated network with derived loads and critical set. Immutable after
// construction; safe to share read-only across threads.
struct NetworkModel {
    Topology topology;
    TrafficParams traffic;
    Eigen::VectorXd loads;          // rho_i = nu_i / mu_i
    std::vector<int> critical_set;  // ascending resource indices with load ratio 1

    bool subcritical() const { return critical_set.empty(); }
    int route_count() const { return topology.route_count(); }
    int resource_count() const { return topology.resource_count(); }
    int critical_count() const { return static_cast<int>(critical_set.size()); }

    // J* x I sub-matrix of the incidence matrix (critical rows only).
    Eigen::MatrixXd critical_incidence() const;
};

// Structural checks on the topology: 0/1 entries, no empty route, full row
// rank, positive finite capacities. Report-style; never throws.
ValidationReport validate(const Topology& topology);

// Parameter checks: strictly positive nu, mu, kappa, alpha, and size
// consistency against the topology.
ValidationReport validate(const Topology& topology, const TrafficParams& traffic);

// Builds the model, computing loads and the critical set. Throws ConfigError
// if validation fails or if any resource is overloaded (load ratio > 1).
NetworkModel make_model(Topology topology, TrafficParams traffic);

// (sum_i A_ji rho_i) / C_j per resource.
Eigen::VectorXd load_ratios(const NetworkModel& model);

// Resources whose load ratio equals 1 within kCriticalityTol.
std::vector<int> critical_resources(const NetworkModel& model);

// Parse the JSON config schema:
// { "resources": [{"name", "capacity"}],
//   "routes": [{"name", "resources": [names], "nu", "mu", "kappa"}],
//   "alpha": num }
// Route order fixes route indexing; resource order fixes resource indexing.
NetworkModel parse_network(const std::string& json_text);
NetworkModel load_network(const std::string& path);

}  // namespace bwshare
