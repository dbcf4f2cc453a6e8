#include <CLI11.hpp>

#include "bwshare/harness.hpp"

namespace {

void add_common(CLI::App* cmd, bwshare::ExperimentSpec& spec, bool& serial) {
    cmd->add_option("--config", spec.config_path, "Network config JSON")->required();
    cmd->add_option("--out", spec.out_path, "Output file (default: stdout for JSON commands)");
    cmd->add_option("--seed", spec.seed, "RNG seed");
    cmd->add_option("--eps-kkt", spec.eps_kkt, "KKT residual target for the convex solver");
    cmd->add_flag("--serial", serial, "Run batch kernels on one thread");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flow-level bandwidth sharing under weighted alpha-fair allocation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", bwshare::kToolVersion);

    bwshare::ExperimentSpec spec;
    bool serial = false;

    auto* allocate = app.add_subcommand("allocate", "Solve the allocation at a state");
    add_common(allocate, spec, serial);
    allocate->add_option("--state", spec.state, "Flow counts n, comma-separated")->required();

    auto* fluid = app.add_subcommand("fluid", "Integrate the fluid model");
    add_common(fluid, spec, serial);
    fluid->add_option("--n0", spec.n0, "Initial fluid state, comma-separated")->required();
    fluid->add_option("--horizon", spec.horizon, "Integration horizon")->required();
    fluid->add_option("--dt", spec.dt, "Euler step (default 1e-3 / max mu)");
    fluid->add_option("--points", spec.out_points, "Output grid intervals");

    auto* simulate = app.add_subcommand("simulate", "Simulate the flow-count Markov chain");
    add_common(simulate, spec, serial);
    simulate->add_option("--n0", spec.n0, "Initial flow counts, comma-separated")->required();
    simulate->add_option("--horizon", spec.horizon, "Simulation horizon")->required();

    auto* fluidlimit = app.add_subcommand("fluidlimit", "Scaled-simulation convergence study");
    add_common(fluidlimit, spec, serial);
    fluidlimit->add_option("--n0", spec.n0, "Initial fluid state, comma-separated")->required();
    fluidlimit->add_option("--horizon", spec.horizon, "Fluid-time horizon");
    fluidlimit->add_option("--scales", spec.scales, "Scaling factors r, comma-separated");
    fluidlimit->add_option("--seeds", spec.num_seeds, "Replications per scale");
    fluidlimit->add_option("--grid", spec.grid_points, "Comparison grid intervals");
    fluidlimit->add_option("--dt", spec.dt, "Fluid Euler step");

    auto* manifold = app.add_subcommand("manifold", "Invariant state from workload prices q");
    add_common(manifold, spec, serial);
    manifold->add_option("--q", spec.q, "Prices over critical resources, comma-separated")
        ->required();
    manifold->add_option("--tol", spec.tol, "Invariance tolerance");

    auto* lift = app.add_subcommand("lift", "Minimum-Lyapunov state above a workload");
    add_common(lift, spec, serial);
    lift->add_option("--w", spec.w, "Workload over critical resources, comma-separated")
        ->required();

    auto* cone = app.add_subcommand("cone", "Workload-cone membership scan");
    add_common(cone, spec, serial);
    cone->add_option("--grid", spec.grid_points, "Grid points per axis");
    cone->add_option("--wmax", spec.cone_wmax, "Upper bound of each workload axis");
    cone->add_option("--tol", spec.tol, "Cone membership tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : bwshare::exit_code::usage_error;
    }

    spec.command = app.get_subcommands().front()->get_name();
    spec.has_seed = app.get_subcommands().front()->count("--seed") > 0;
    spec.exec = serial ? bwshare::Execution::serial : bwshare::Execution::parallel;
    return bwshare::run(spec);
}
