#include <doctest.h>

#include <cmath>

#include "bwshare/allocator.hpp"
#include "bwshare/errors.hpp"
#include "test_util.hpp"

using namespace bwshare;

TEST_CASE("single link proportional fairness splits by flow counts") {
    const NetworkModel model = testutil::single_link(0.5, 1.0, 1.0, 1.0, 3);
    Eigen::Vector3d n(3.0, 1.0, 2.0);
    const Allocation alloc = allocate(model, n);
    CHECK(alloc.lambda(0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(alloc.lambda(1) == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
    CHECK(alloc.lambda(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(alloc.kkt_residual <= 1e-9);
}

TEST_CASE("linear network at n=(1,1,1), alpha=1 gives (2/3, 2/3, 1/3)") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const Allocation alloc = allocate(model, Eigen::Vector3d::Ones());
    CHECK(alloc.lambda(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(alloc.lambda(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(alloc.lambda(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(alloc.kkt_residual <= 1e-9);
}

TEST_CASE("routes with zero flows get zero bandwidth and the rest expand") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const Allocation alloc = allocate(model, Eigen::Vector3d(1.0, 0.0, 1.0));
    CHECK(alloc.lambda(1) == 0.0);
    // Route b gone: route a and the long route split link 1 equally, and the
    // long route is then capped by link 1, not link 2.
    CHECK(alloc.lambda(0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(alloc.lambda(2) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("empty state allocates nothing without solving") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const Allocation alloc = allocate(model, Eigen::Vector3d::Zero());
    CHECK(alloc.lambda.isZero());
    CHECK(alloc.prices.isZero());
}

TEST_CASE("objective conventions") {
    const NetworkModel model = testutil::linear_network(0.4, 2.0);
    const Eigen::Vector3d n(1.0, 1.0, 1.0);
    CHECK(objective(model, n, Eigen::Vector3d(0.5, 0.5, 0.0)) ==
          -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(objective(model, Eigen::Vector3d::Zero(), n), std::invalid_argument);

    // Finite case, alpha = 2: G = -sum n_i^2 / lambda_i.
    const double g = objective(model, n, Eigen::Vector3d(0.5, 0.5, 0.25));
    CHECK(g == doctest::Approx(-(2.0 + 2.0 + 4.0)).epsilon(1e-12));
}

TEST_CASE("allocation maximizes the objective among feasible competitors") {
    const NetworkModel model = testutil::linear_network(0.4, 0.5);
    const Eigen::Vector3d n(2.0, 1.0, 1.5);
    const Allocation alloc = allocate(model, n);
    const double g_star = objective(model, n, alloc.lambda);
    RngStream rng(5);
    for (int k = 0; k < 200; ++k) {
        Eigen::Vector3d lam(rng.uniform_open(), rng.uniform_open(), rng.uniform_open());
        const Eigen::VectorXd used = model.topology.incidence * lam;
        const double shrink = (model.topology.capacities.cwiseQuotient(used)).minCoeff();
        lam *= std::min(1.0, shrink);
        CHECK(objective(model, n, lam) <= g_star + 1e-9);
    }
}

TEST_CASE("allocation matches the grid-search oracle on small networks") {
    RngStream rng(11);
    for (double alpha : {0.5, 1.0, 2.0}) {
        const NetworkModel linear = testutil::linear_network(0.4, alpha);
        const NetworkModel link = testutil::single_link(0.5, 1.0, 1.0, alpha, 2);
        for (int k = 0; k < 5; ++k) {
            for (const NetworkModel* model : {&linear, &link}) {
                const Eigen::VectorXd n = testutil::random_state(rng, model->route_count(), 3.0);
                const Allocation alloc = allocate(*model, n);
                const Eigen::VectorXd oracle = testutil::oracle_allocation(*model, n);
                CHECK((alloc.lambda - oracle).lpNorm<Eigen::Infinity>() <= 5e-3);
            }
        }
    }
}

TEST_CASE("feasibility, scale invariance and KKT residual on random models") {
    RngStream rng(21);
    for (double alpha : {0.5, 1.0, 2.0}) {
        for (int k = 0; k < 40; ++k) {
            const NetworkModel model = testutil::random_model(rng, 6, 4, alpha);
            const Eigen::VectorXd n =
                testutil::random_state(rng, model.route_count(), 5.0, 0.2);
            const Allocation alloc = allocate(model, n);
            CHECK(alloc.kkt_residual <= 1e-9);
            const Eigen::VectorXd used = model.topology.incidence * alloc.lambda;
            CHECK(((used - model.topology.capacities).array() <= 1e-8).all());
            CHECK((alloc.lambda.array() >= 0.0).all());

            for (double r : {0.1, 3.0, 100.0}) {
                const Allocation scaled = allocate(model, r * n);
                CHECK((scaled.lambda - alloc.lambda).norm() <= 1e-6);
            }
        }
    }
}

TEST_CASE("warm-started solves agree with cold solves") {
    const NetworkModel model = testutil::linear_network(0.4, 2.0);
    const Eigen::Vector3d n(1.0, 2.0, 0.5);
    const Allocation cold = allocate(model, n);
    AllocOptions warm_opts;
    warm_opts.warm_prices = cold.prices;
    const Allocation warm = allocate(model, Eigen::Vector3d(1.1, 1.9, 0.6), warm_opts);
    const Allocation direct = allocate(model, Eigen::Vector3d(1.1, 1.9, 0.6));
    CHECK((warm.lambda - direct.lambda).norm() <= 1e-8);
    CHECK(warm.kkt_residual <= 1e-9);
}

TEST_CASE("limit of the allocation as one route empties") {
    // As n_b -> 0 the allocation on the surviving routes converges to the
    // n_b = 0 solution, while the vanishing route soaks up the slack link 2
    // leaves behind: Lambda_b -> 1 - Lambda_ab = 1/2, not 0.
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const Allocation at_limit = allocate(model, Eigen::Vector3d(1.0, 0.0, 1.0));
    double prev_dist = std::numeric_limits<double>::infinity();
    double lambda_b = 0.0;
    for (double eps : {1e-2, 1e-4, 1e-6}) {
        const Allocation near = allocate(model, Eigen::Vector3d(1.0, eps, 1.0));
        const double dist = std::max(std::abs(near.lambda(0) - at_limit.lambda(0)),
                                     std::abs(near.lambda(2) - at_limit.lambda(2)));
        CHECK(dist < prev_dist + 1e-12);
        prev_dist = dist;
        lambda_b = near.lambda(1);
    }
    CHECK(prev_dist <= 1e-4);
    CHECK(lambda_b == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("prices certify optimality through complementary slackness") {
    const NetworkModel model = testutil::linear_network(0.4, 1.0);
    const Eigen::Vector3d n(1.0, 1.0, 1.0);
    const Allocation alloc = allocate(model, n);
    const Eigen::VectorXd slack =
        model.topology.capacities - model.topology.incidence * alloc.lambda;
    for (int j = 0; j < 2; ++j) CHECK(std::abs(alloc.prices(j) * slack(j)) <= 1e-9);
    CHECK(kkt_residual(model, n, alloc.lambda, alloc.prices) <= 1e-9);
    // Perturbed prices must show up in the residual.
    Eigen::VectorXd bad = alloc.prices;
    bad(0) += 0.1;
    CHECK(kkt_residual(model, n, alloc.lambda, bad) > 1e-3);
}
