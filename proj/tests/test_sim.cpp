#include "flowagree/errors.hpp"
#include "flowagree/regulator.hpp"
#include "flowagree/sim.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace flowagree;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const Graph kRing = ring_graph(3);

Exosystem harmonic() { return Exosystem::skew(fixture::rotation(), Box::uniform(2, -1, 1)); }

ClosedLoop routing_loop(const MatrixXd& P = fixture::ring3_supply()) {
  const MatrixXd H = compute_H(kRing, VectorXd::Ones(3), P).flow;
  return assemble(kRing, harmonic(), Plant::inventory(P),
                  Controller::inventory_routing(kRing, fixture::rotation(), H));
}

// Closed-loop matrix of the inventory routing loop built directly from the
// interconnection: state (w, x, eta), eta stacked edge by edge.
MatrixXd routing_matrix(const MatrixXd& S, const MatrixXd& P, const MatrixXd& H) {
  const MatrixXd& B = kRing.incidence();
  const int n = 3, m = 3, q = 2;
  MatrixXd Hbar = MatrixXd::Zero(m, m * q);  // lambda_model = Hbar eta
  for (int k = 0; k < m; ++k) Hbar.block(k, k * q, 1, q) = H.row(k);
  MatrixXd A = MatrixXd::Zero(q + n + m * q, q + n + m * q);
  A.block(0, 0, q, q) = S;
  A.block(q, 0, n, q) = P;
  A.block(q, q, n, n) = -B * B.transpose();
  A.block(q, q + n, n, m * q) = B * Hbar;
  A.block(q + n, q, m * q, n) = -Hbar.transpose() * B.transpose();
  for (int k = 0; k < m; ++k) A.block(q + n + k * q, q + n + k * q, q, q) = S;
  return A;
}

}  // namespace

TEST_CASE("assembly checks every pairing") {
  const MatrixXd P = fixture::ring3_supply();
  const CostFunction cost = CostFunction::quadratic(VectorXd::Ones(3));
  auto expect_pair = [](auto&& build, const std::string& pair) {
    try {
      build();
      FAIL("expected AssemblyError for " << pair);
    } catch (const AssemblyError& e) {
      CHECK(std::string(e.what()).find(pair) != std::string::npos);
    }
  };
  CHECK_NOTHROW(routing_loop());
  expect_pair(
      [&] {
        assemble(kRing, harmonic(), Plant::inventory(P), Controller::static_bregman(kRing, cost));
      },
      "controller/exosystem");
  expect_pair(
      [&] {
        assemble(ring_graph(4), harmonic(), Plant::inventory(P),
                 Controller::static_bregman(kRing, cost));
      },
      "plant/graph");
  expect_pair(
      [&] {
        assemble(kRing, Exosystem::constant(1, Box::uniform(1, 0, 1)), Plant::inventory(P),
                 Controller::static_bregman(kRing, cost));
      },
      "plant/exosystem");
  expect_pair(
      [&] {
        assemble(kRing, harmonic(), fixture::linear_ring3_plant(),
                 Controller::inventory_routing(kRing, fixture::rotation(), MatrixXd::Zero(3, 2)));
      },
      "controller/plant");
  expect_pair(
      [&] {
        assemble(kRing, harmonic(), Plant::inventory(P),
                 Controller::inventory_routing(kRing, -fixture::rotation(), MatrixXd::Zero(3, 2)));
      },
      "controller/exosystem");
  expect_pair(
      [&] {
        assemble(kRing, harmonic(), Plant::inventory(P),
                 Controller::inventory_routing(Graph(3, {{0, 1}, {1, 2}, {0, 2}}),
                                               fixture::rotation(), MatrixXd::Zero(3, 2)));
      },
      "controller/graph");
  expect_pair(
      [&] {
        assemble(kRing, harmonic(), fixture::vector_output_plant(3, 2),
                 Controller::edge_internal_model(kRing, harmonic(), MatrixXd::Zero(3, 2), 1));
      },
      "controller/plant");
}

TEST_CASE("vector outputs are lifted with B (x) I_p") {
  const Graph g = ring_graph(4);
  const RegulatorSolution reg = [&] {
    const auto model = fixture::vector_output_plant(4, 2).linear_model();
    return solve_sylvester(model->A, model->G, model->C, model->P, fixture::rotation(), g, 2);
  }();
  const ClosedLoop loop =
      assemble(g, harmonic(), fixture::vector_output_plant(4, 2),
               Controller::edge_internal_model(g, harmonic(), reg.H, 2));
  CHECK(loop.output_dim() == 2);
  CHECK(loop.x_dim() == 8);
  CHECK(loop.xi_dim() == 8);
  std::mt19937_64 rng(5);
  const VectorXd s = oracle::normal_vector(rng, loop.state_dim());
  const LoopSignals sig = loop.signals(s);
  CHECK(sig.z.size() == 8);
  CHECK(sig.lambda.size() == 8);
  CHECK(sig.u.size() == 8);
  CHECK((sig.z - kron_identity(g.incidence(), 2).transpose() * sig.y).norm() <= 1e-14);
  CHECK(loop.vector_field(s).size() == loop.state_dim());
}

TEST_CASE("RK4 step") {
  SUBCASE("zero vector field leaves the state unchanged") {
    const ClosedLoop loop = routing_loop(MatrixXd::Zero(3, 2));
    const VectorXd s = loop.pack(VectorXd::Zero(2), VectorXd::Constant(3, 0.4), VectorXd::Zero(6));
    CHECK(step_rk4(loop, 0.0, s, 1e-3) == s);
  }
  SUBCASE("exosystem block against the closed form") {
    const ClosedLoop loop = routing_loop();
    const VectorXd w0 = fixture::vec({0.6, -0.9});
    const VectorXd s = loop.pack(w0, VectorXd::Zero(3), VectorXd::Zero(6));
    const VectorXd next = step_rk4(loop, 0.0, s, 1e-3);
    CHECK((loop.w_of(next) - closed_form(harmonic(), w0, 1e-3)).cwiseAbs().maxCoeff() <= 1e-13);
  }
  SUBCASE("linear loop against a dense matrix exponential") {
    const MatrixXd P = fixture::ring3_supply();
    const MatrixXd H = compute_H(kRing, VectorXd::Ones(3), P).flow;
    const ClosedLoop loop = routing_loop(P);
    std::mt19937_64 rng(8);
    const VectorXd s0 = oracle::normal_vector(rng, loop.state_dim());
    VectorXd s = s0;
    for (int k = 0; k < 1000; ++k) s = step_rk4(loop, k * 1e-3, s, 1e-3);
    const VectorXd exact = oracle::expm(routing_matrix(fixture::rotation(), P, H)) * s0;
    CHECK((s - exact).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("step size must be positive") {
    const ClosedLoop loop = routing_loop();
    CHECK_THROWS_AS(step_rk4(loop, 0.0, VectorXd::Zero(loop.state_dim()), 0.0), PreconditionError);
  }
}

TEST_CASE("zero data gives the zero trajectory") {
  const ClosedLoop loop = routing_loop();
  const Trajectory traj = run(loop, VectorXd::Zero(loop.state_dim()), {1e-3, 2.0, 10});
  CHECK(traj.size() == 201);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    CHECK(traj.x[k].norm() == 0.0);
    CHECK(traj.xi[k].norm() == 0.0);
    CHECK(traj.agreement_error[k] == 0.0);
  }
}

TEST_CASE("recording grid") {
  const ClosedLoop loop = routing_loop();
  const Trajectory traj = run(loop, VectorXd::Zero(loop.state_dim()), {1e-3, 1.0, 100});
  REQUIRE(traj.size() == 11);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    CHECK(traj.times[k] == doctest::Approx(0.1 * k).epsilon(1e-14));
  }
  for (const auto* series : {&traj.agreement_error, &traj.routing_error, &traj.gamma_dist,
                             &traj.lyapunov, &traj.dissipated}) {
    CHECK(series->size() == traj.size());
  }
  CHECK_THROWS_AS(run(loop, VectorXd::Zero(loop.state_dim()), {0.0, 1.0, 1}), PreconditionError);
  CHECK_THROWS_AS(run(loop, VectorXd::Zero(2), {1e-3, 1.0, 1}), DimensionError);
}

TEST_CASE("inventory routing run: conservation, dissipation, determinism") {
  const ClosedLoop loop = routing_loop();
  std::mt19937_64 rng(12);
  const VectorXd s0 = loop.pack(fixture::vec({1, 0}), oracle::uniform_vector(rng, 3, 0, 1),
                                VectorXd::Zero(6));
  const Trajectory traj = run(loop, s0, {1e-3, 20.0, 1});
  const double total0 = traj.x.front().sum();
  double drift = 0.0;
  for (const auto& x : traj.x) drift = std::max(drift, std::abs(x.sum() - total0));
  CHECK(drift <= 1e-8);
  const auto violation = dissipation_check(traj);
  REQUIRE(violation);
  CHECK(*violation <= 1e-4);
  CHECK(traj.agreement_error.back() < 0.1 * traj.agreement_error.front());

  const Trajectory again = run(loop, s0, {1e-3, 20.0, 1});
  CHECK(again.x.back() == traj.x.back());
  CHECK(again.lyapunov == traj.lyapunov);
}

TEST_CASE("matched initialization stays on the steady manifold") {
  const ClosedLoop loop = routing_loop();
  const VectorXd w0 = fixture::vec({0.3, 0.8});
  const VectorXd xi = loop.controller().init_matched(w0);
  const VectorXd s0 = loop.pack(w0, VectorXd::Constant(3, 0.5), xi);
  const Trajectory traj = run(loop, s0, {1e-3, 10.0, 10});
  for (std::size_t k = 0; k < traj.size(); ++k) {
    CHECK(traj.routing_error[k] <= 1e-6);
    CHECK(traj.agreement_error[k] <= 1e-12);
    CHECK(std::abs(traj.lyapunov[k] - traj.lyapunov[0]) <= 1e-8);
  }
}

TEST_CASE("no steady reference for nonlinear drifts") {
  const Graph g = ring_graph(3);
  const Exosystem exo = Exosystem::constant(1, Box::uniform(1, 0, 1));
  const ClosedLoop loop =
      assemble(g, exo, fixture::gradient_plant(),
               Controller::edge_internal_model(g, exo, MatrixXd::Zero(3, 1), 1));
  const VectorXd s0 = loop.pack(fixture::vec({0}), fixture::vec({1, -1, 0.5}), VectorXd::Zero(3));
  const Trajectory traj = run(loop, s0, {1e-3, 10.0, 100});
  CHECK_FALSE(dissipation_check(traj));
  CHECK(std::isnan(traj.lyapunov.front()));
  CHECK(traj.agreement_error.back() < 1e-3);
}

TEST_CASE("divergence is flagged, not thrown") {
  const Graph g = ring_graph(3);
  // w' = 10 w overflows near t = 71
  const Exosystem exo = Exosystem::gradient(-10.0 * MatrixXd::Identity(1, 1), Box::uniform(1, 0, 1));
  const ClosedLoop loop = assemble(g, exo, Plant::inventory(MatrixXd::Zero(3, 1)),
                                   Controller::edge_internal_model(g, exo, MatrixXd::Zero(3, 1), 1));
  const VectorXd s0 = loop.pack(fixture::vec({1}), VectorXd::Zero(3), VectorXd::Zero(3));
  const Trajectory traj = run(loop, s0, {1e-2, 100.0, 100});
  CHECK(traj.diverged);
  CHECK(traj.divergence_time > 60.0);
  CHECK(traj.divergence_time < 80.0);
  CHECK(traj.times.back() < traj.divergence_time);
  VectorXd s = s0;
  bool thrown = false;
  try {
    for (int k = 0; k < 10000; ++k) s = step_rk4(loop, k * 1e-2, s, 1e-2);
  } catch (const DivergenceError& e) {
    thrown = true;
    CHECK(e.time() > 60.0);
  }
  CHECK(thrown);
}
