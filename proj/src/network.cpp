#include "bwshare/network.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bwshare/errors.hpp"

namespace bwshare {

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (std::size_t k = 0; k < violations.size(); ++k) {
        if (k > 0) os << "; ";
        os << violations[k];
    }
    return os.str();
}

Eigen::MatrixXd NetworkModel::critical_incidence() const {
    Eigen::MatrixXd out(critical_count(), route_count());
    for (int k = 0; k < critical_count(); ++k)
        out.row(k) = topology.incidence.row(critical_set[k]);
    return out;
}

ValidationReport validate(const Topology& topology) {
    ValidationReport report;
    const auto& a = topology.incidence;
    const int num_resources = topology.resource_count();
    const int num_routes = topology.route_count();

    if (num_resources < 1) report.violations.push_back("no resources");
    if (num_routes < 1) report.violations.push_back("no routes");
    if (topology.capacities.size() != num_resources)
        report.violations.push_back("capacity vector size mismatch");

    for (int j = 0; j < num_resources; ++j)
        for (int i = 0; i < num_routes; ++i)
            if (a(j, i) != 0.0 && a(j, i) != 1.0) {
                report.violations.push_back("incidence entries must be 0 or 1");
                goto entries_done;
            }
entries_done:
    for (int i = 0; i < num_routes; ++i)
        if (num_resources > 0 && a.col(i).maxCoeff() == 0.0) {
            report.violations.push_back("empty route: column " + std::to_string(i) +
                                        " of the incidence matrix is all-zero");
        }

    if (num_resources >= 1 && num_routes >= 1 && topology.capacities.size() == num_resources) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
        const auto& sigma = svd.singularValues();
        const double cutoff = kRankTol * sigma(0);
        int rank = 0;
        for (int k = 0; k < sigma.size(); ++k)
            if (sigma(k) > cutoff) ++rank;
        if (rank < num_resources)
            report.violations.push_back("rank deficient: incidence matrix has rank " +
                                        std::to_string(rank) + " < " + std::to_string(num_resources));
        for (int j = 0; j < num_resources; ++j) {
            const double c = topology.capacities(j);
            if (!(c > 0.0) || !std::isfinite(c)) {
                report.violations.push_back("capacity of resource " + std::to_string(j) +
                                            " must be positive and finite");
            }
        }
    }
    return report;
}

ValidationReport validate(const Topology& topology, const TrafficParams& traffic) {
    ValidationReport report = validate(topology);
    const int num_routes = topology.route_count();
    auto check_vec = [&](const Eigen::VectorXd& v, const char* name) {
        if (v.size() != num_routes) {
            report.violations.push_back(std::string(name) + " vector size mismatch");
            return;
        }
        for (int i = 0; i < v.size(); ++i)
            if (!(v(i) > 0.0) || !std::isfinite(v(i)))
                report.violations.push_back(std::string(name) + "[" + std::to_string(i) +
                                            "] must be positive and finite");
    };
    check_vec(traffic.arrival_rates, "nu");
    check_vec(traffic.service_rates, "mu");
    check_vec(traffic.weights, "kappa");
    if (!(traffic.alpha > 0.0) || !std::isfinite(traffic.alpha))
        report.violations.push_back("alpha must be positive and finite");
    return report;
}

NetworkModel make_model(Topology topology, TrafficParams traffic) {
    ValidationReport report = validate(topology, traffic);
    if (!report.ok()) throw ConfigError("invalid network: " + report.to_string());

    NetworkModel model;
    model.topology = std::move(topology);
    model.traffic = std::move(traffic);
    model.loads = model.traffic.arrival_rates.cwiseQuotient(model.traffic.service_rates);

    const Eigen::VectorXd resource_load = model.topology.incidence * model.loads;
    for (int j = 0; j < model.resource_count(); ++j) {
        const double cap = model.topology.capacities(j);
        if (resource_load(j) > cap * (1.0 + kCriticalityTol))
            throw ConfigError("resource " + std::to_string(j) + " is overloaded: load " +
                              std::to_string(resource_load(j)) + " > capacity " +
                              std::to_string(cap));
        if (std::abs(resource_load(j) - cap) <= kCriticalityTol * cap)
            model.critical_set.push_back(j);
    }
    return model;
}

Eigen::VectorXd load_ratios(const NetworkModel& model) {
    return (model.topology.incidence * model.loads)
        .cwiseQuotient(model.topology.capacities);
}

std::vector<int> critical_resources(const NetworkModel& model) {
    std::vector<int> out;
    const Eigen::VectorXd ratios = load_ratios(model);
    for (int j = 0; j < model.resource_count(); ++j)
        if (std::abs(ratios(j) - 1.0) <= kCriticalityTol) out.push_back(j);
    return out;
}

namespace {

double require_number(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_number())
        throw ConfigError("config error: missing or non-numeric field \"" + std::string(key) +
                          "\" in " + where);
    return obj[key].get<double>();
}

}  // namespace

NetworkModel parse_network(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config error: invalid JSON: ") + e.what());
    }
    if (!doc.contains("resources") || !doc["resources"].is_array() || doc["resources"].empty())
        throw ConfigError("config error: \"resources\" must be a nonempty array");
    if (!doc.contains("routes") || !doc["routes"].is_array() || doc["routes"].empty())
        throw ConfigError("config error: \"routes\" must be a nonempty array");

    Topology topo;
    const auto& resources = doc["resources"];
    const auto& routes = doc["routes"];
    const int num_resources = static_cast<int>(resources.size());
    const int num_routes = static_cast<int>(routes.size());

    topo.capacities.resize(num_resources);
    std::map<std::string, int> resource_index;
    for (int j = 0; j < num_resources; ++j) {
        const auto& r = resources[j];
        std::string name = r.value("name", "resource" + std::to_string(j));
        if (resource_index.count(name))
            throw ConfigError("config error: duplicate resource name \"" + name + "\"");
        resource_index[name] = j;
        topo.resource_names.push_back(name);
        topo.capacities(j) = require_number(r, "capacity", "resource \"" + name + "\"");
    }

    topo.incidence = Eigen::MatrixXd::Zero(num_resources, num_routes);
    TrafficParams traffic;
    traffic.arrival_rates.resize(num_routes);
    traffic.service_rates.resize(num_routes);
    traffic.weights.resize(num_routes);
    for (int i = 0; i < num_routes; ++i) {
        const auto& r = routes[i];
        std::string name = r.value("name", "route" + std::to_string(i));
        topo.route_names.push_back(name);
        if (!r.contains("resources") || !r["resources"].is_array())
            throw ConfigError("config error: route \"" + name + "\" needs a \"resources\" array");
        for (const auto& rn : r["resources"]) {
            const std::string rname = rn.get<std::string>();
            auto it = resource_index.find(rname);
            if (it == resource_index.end())
                throw ConfigError("config error: route \"" + name +
                                  "\" references unknown resource \"" + rname + "\"");
            topo.incidence(it->second, i) = 1.0;
        }
        traffic.arrival_rates(i) = require_number(r, "nu", "route \"" + name + "\"");
        traffic.service_rates(i) = require_number(r, "mu", "route \"" + name + "\"");
        traffic.weights(i) = r.contains("kappa") ? require_number(r, "kappa", "route \"" + name + "\"") : 1.0;
    }
    traffic.alpha = require_number(doc, "alpha", "top level");

    return make_model(std::move(topo), std::move(traffic));
}

NetworkModel load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config error: cannot open \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_network(buf.str());
}

}  // namespace bwshare
