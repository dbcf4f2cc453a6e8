// Times the batch kernels in both execution modes and checks the outputs
// agree, so the parallel paths can be trusted as drop-in replacements.

#include <chrono>
#include <cmath>
#include <cstdio>

#include "bwshare/ctmc.hpp"
#include "bwshare/fluid.hpp"
#include "bwshare/harness.hpp"
#include "bwshare/network.hpp"

using namespace bwshare;

namespace {

NetworkModel linear_network(double nu3, double alpha) {
    Topology topo;
    topo.incidence.resize(2, 3);
    topo.incidence << 1, 0, 1,
                      0, 1, 1;
    topo.capacities = Eigen::Vector2d(1.0, 1.0);
    topo.resource_names = {"r1", "r2"};
    topo.route_names = {"a", "b", "ab"};
    TrafficParams traffic;
    traffic.arrival_rates = Eigen::Vector3d(1.0 - nu3, 1.0 - nu3, nu3);
    traffic.service_rates = Eigen::Vector3d::Ones();
    traffic.weights = Eigen::Vector3d::Ones();
    traffic.alpha = alpha;
    return make_model(topo, traffic);
}

template <typename F>
double time_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

int main() {
    const NetworkModel model = linear_network(0.4, 1.0);
    std::printf("threads available: %d\n\n", hardware_threads());

    {
        const Eigen::Vector3d n0(2.0, 1.0, 1.5);
        const std::vector<double> scales = {20.0, 50.0, 100.0};
        const int seeds = 8;
        const auto grid = uniform_grid(3.0, 60);

        FluidLimitReport serial_report, parallel_report;
        const double ts = time_ms([&] {
            serial_report =
                fluid_limit_experiment(model, n0, scales, seeds, 7, grid, Execution::serial);
        });
        const double tp = time_ms([&] {
            parallel_report =
                fluid_limit_experiment(model, n0, scales, seeds, 7, grid, Execution::parallel);
        });

        double max_diff = 0.0;
        for (std::size_t s = 0; s < scales.size(); ++s)
            for (int k = 0; k < seeds; ++k)
                max_diff = std::max(max_diff, std::abs(serial_report.sup_errors[s][k] -
                                                       parallel_report.sup_errors[s][k]));
        std::printf("fluid-limit fan-out (%zu scales x %d seeds)\n", scales.size(), seeds);
        std::printf("  serial:   %9.1f ms\n", ts);
        std::printf("  parallel: %9.1f ms  (speedup %.2fx, max output diff %.3g)\n\n",
                    tp, ts / tp, max_diff);
        if (max_diff != 0.0) {
            std::printf("FAIL: execution modes disagree\n");
            return 1;
        }
    }

    {
        const int grid_points = 80;
        std::vector<ConeCell> serial_cells, parallel_cells;
        const double ts = time_ms(
            [&] { serial_cells = cone_grid(model, grid_points, 3.0, 1e-6, Execution::serial); });
        const double tp = time_ms([&] {
            parallel_cells = cone_grid(model, grid_points, 3.0, 1e-6, Execution::parallel);
        });

        int diffs = 0;
        for (std::size_t i = 0; i < serial_cells.size(); ++i)
            if (serial_cells[i].inside != parallel_cells[i].inside) ++diffs;
        std::printf("cone grid scan (%d x %d)\n", grid_points, grid_points);
        std::printf("  serial:   %9.1f ms\n", ts);
        std::printf("  parallel: %9.1f ms  (speedup %.2fx, cell disagreements %d)\n",
                    tp, ts / tp, diffs);
        if (diffs != 0) {
            std::printf("FAIL: execution modes disagree\n");
            return 1;
        }
    }
    return 0;
}
