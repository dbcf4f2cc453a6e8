#include <doctest.h>

#include <cmath>

#include "bwshare/errors.hpp"
#include "bwshare/fluid.hpp"
#include "bwshare/manifold.hpp"
#include "test_util.hpp"

using namespace bwshare;

TEST_CASE("drift by hand on the linear network") {
    // Lambda(1,1,1) = (2/3, 2/3, 1/3), so the drift is nu - Lambda.
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const Eigen::VectorXd d = drift(model, Eigen::Vector3d::Ones());
    CHECK(d(0) == doctest::Approx(0.6 - 2.0 / 3.0).epsilon(1e-9));
    CHECK(d(1) == doctest::Approx(0.6 - 2.0 / 3.0).epsilon(1e-9));
    CHECK(d(2) == doctest::Approx(0.4 - 1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("drift vanishes on invariant states and at zero components") {
    const NetworkModel model = testutil::linear_network(0.4, 2.0);
    const ManifoldPoint pt = invariant_from_q(model, Eigen::Vector2d(0.7, 1.3));
    CHECK(drift(model, pt.n).lpNorm<Eigen::Infinity>() <= 1e-7);

    // n = (0, 3, 1): Lambda = (0, 0.75, 0.25), so resource 1 keeps enough
    // slack (0.75 >= rho_1 = 0.6) to carry route a's load: a stays frozen.
    const Eigen::VectorXd d = drift(model, Eigen::Vector3d(0.0, 3.0, 1.0));
    CHECK(d(0) == 0.0);
}

TEST_CASE("a zero route behind an overcommitted resource is entrained") {
    // n = (1, 0, 1): Lambda = (0.5, 0, 0.5) saturates resource 2, leaving no
    // room for route b's load rho_2 = 0.6. Route b must leave zero; the drift
    // releases it at its arrival rate.
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const Eigen::VectorXd d = drift(model, Eigen::Vector3d(1.0, 0.0, 1.0));
    CHECK(d(1) == doctest::Approx(0.6).epsilon(1e-12));

    // Along a trajectory, route b leaves zero and climbs back up.
    IntegrateOptions opts;
    opts.with_gap = false;
    const FluidTrajectory traj =
        integrate(model, Eigen::Vector3d(1.0, 0.0, 1.0), 5.0, uniform_grid(5.0, 10), opts);
    CHECK(traj.samples.back().n(1) > 0.05);
}

TEST_CASE("feasibility margin substitutes loads on empty routes") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    // n = (1, 0, 1): Lambda = (0.5, 0, 0.5). Resource 1 uses 0.5 + 0.5 = 1;
    // resource 2 uses rho_2 + 0.5 = 1.1, margin -0.1.
    const Eigen::VectorXd margin = feasibility_margin(model, Eigen::Vector3d(1.0, 0.0, 1.0));
    CHECK(margin(0) == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(margin(1) == doctest::Approx(-0.1).epsilon(1e-8));
}

TEST_CASE("uniform grid endpoints and spacing") {
    const auto grid = uniform_grid(2.0, 4);
    REQUIRE(grid.size() == 5);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 2.0);
    CHECK(grid[1] == doctest::Approx(0.5));
}

TEST_CASE("input validation of the integrator") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    CHECK_THROWS_AS(integrate(model, Eigen::Vector2d::Ones(), 1.0, uniform_grid(1.0, 2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(integrate(model, Eigen::Vector3d(-1.0, 1.0, 1.0), 1.0, uniform_grid(1.0, 2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(integrate(model, Eigen::Vector3d::Ones(), 1.0, {0.0, 2.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(integrate(model, Eigen::Vector3d::Ones(), 1.0, {0.5, 0.5}),
                    std::invalid_argument);
}

TEST_CASE("samples land exactly on the output grid") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const auto grid = uniform_grid(1.0, 7);
    const FluidTrajectory traj = integrate(model, Eigen::Vector3d::Ones(), 1.0, grid);
    REQUIRE(traj.samples.size() == grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(traj.samples[k].t == grid[k]);
}

TEST_CASE("F and H decrease and w is conserved on the critical linear network") {
    for (double alpha : {0.5, 1.0, 2.0}) {
        const NetworkModel model = testutil::linear_network(0.4, alpha);
        const FluidTrajectory traj =
            integrate(model, Eigen::Vector3d(2.0, 0.5, 1.0), 20.0, uniform_grid(20.0, 40));
        const double tol = 1e-6 + 10.0 * traj.dt;
        for (std::size_t k = 1; k < traj.samples.size(); ++k) {
            const auto& prev = traj.samples[k - 1];
            const auto& cur = traj.samples[k];
            CHECK(cur.lyapunov <= prev.lyapunov + tol);
            CHECK(cur.gap <= prev.gap + tol);
            CHECK(cur.w(0) >= prev.w(0) - tol);
            CHECK(cur.w(1) >= prev.w(1) - tol);
            // Near the manifold K is a difference of nearly equal terms; the
            // 1e-9 solver residual shows up here directly.
            CHECK(cur.dissipation <= 1e-8);
            CHECK(cur.gap >= -1e-8);
        }
    }
}

TEST_CASE("discrete dF/dt matches the dissipation K") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const double dt = 1e-3;
    IntegrateOptions opts;
    opts.dt = dt;
    // Output spacing equal to the internal step makes the secant slope an
    // honest one-step difference quotient.
    const int intervals = 200;
    const FluidTrajectory traj =
        integrate(model, Eigen::Vector3d(2.0, 1.0, 1.5), intervals * dt,
                  uniform_grid(intervals * dt, intervals), opts);
    double max_k = 0.0;
    for (const auto& s : traj.samples) max_k = std::max(max_k, std::abs(s.dissipation));
    for (std::size_t k = 1; k < traj.samples.size(); ++k) {
        const auto& prev = traj.samples[k - 1];
        const auto& cur = traj.samples[k];
        const double slope = (cur.lyapunov - prev.lyapunov) / (cur.t - prev.t);
        CHECK(std::abs(slope - prev.dissipation) <= 10.0 * dt * (max_k + 1.0));
    }
}

TEST_CASE("a zero route stays frozen while its resources keep slack") {
    // Subcritical at half load, rho = (0.3, 0.3, 0.2). With n = (0, b, ab)
    // and b >= ab, route ab takes at most half of resource 1, which leaves
    // room for rho_1 = 0.3: route a never leaves zero, and the whole state
    // eventually settles exactly at the origin.
    const NetworkModel model = testutil::linear_network(0.4, 1.0, 0.5);
    IntegrateOptions opts;
    opts.with_gap = false;
    const FluidTrajectory traj =
        integrate(model, Eigen::Vector3d(0.0, 1.0, 1.0), 10.0, uniform_grid(10.0, 50), opts);
    for (const auto& s : traj.samples) {
        CHECK(s.n(0) == 0.0);
        CHECK(s.drift(0) == 0.0);
    }
    CHECK(traj.samples.back().n.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("subcritical trajectories drain toward the origin") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0, 0.6);
    const FluidTrajectory traj =
        integrate(model, Eigen::Vector3d::Ones(), 50.0, uniform_grid(50.0, 25));
    CHECK(std::isnan(traj.samples.back().gap));
    CHECK(traj.samples.back().n.lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(traj.samples.back().w.size() == 0);
}

TEST_CASE("trajectories started on the manifold stay on it") {
    for (double alpha : {0.5, 1.0, 2.0}) {
        const NetworkModel model = testutil::linear_network(0.4, alpha);
        const ManifoldPoint pt = invariant_from_q(model, Eigen::Vector2d(1.0, 0.5));
        const FluidTrajectory traj = integrate(model, pt.n, 5.0, uniform_grid(5.0, 10));
        for (const auto& s : traj.samples) {
            CHECK((s.n - pt.n).lpNorm<Eigen::Infinity>() <= 1e-5);
            CHECK(s.gap <= 1e-7);
        }
    }
}

TEST_CASE("long trajectories converge to the manifold") {
    RngStream rng(81);
    for (double alpha : {0.5, 1.0, 2.0}) {
        const NetworkModel model = testutil::linear_network(0.4, alpha);
        const Eigen::VectorXd n0 = testutil::random_state(rng, 3, 5.0);
        const FluidTrajectory traj = integrate(model, n0, 200.0, {0.0, 200.0});
        const auto& last = traj.samples.back();
        CHECK(last.gap < 1e-3);
        const LiftResult lift = lift_delta(model, last.w);
        CHECK((last.n - lift.n).norm() < 1e-2);
    }
}
