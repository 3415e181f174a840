#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spnc/optimizer.hpp"
#include "spnc/oracle.hpp"
#include "test_util.hpp"

using namespace spnc;
using namespace spnc::test;

namespace {

Dataset pair_dataset(std::size_t m = 1000, std::uint64_t seed = 42) {
  return sample_dataset(pair_table(), m, seed);
}

Dataset exact_uniform_dataset(std::size_t per_state = 25) {
  Dataset d;
  d.variables = vars(2);
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::size_t i = 0; i < per_state; ++i) d.rows.push_back(s);
  return d;
}

std::vector<double> empirical_frequencies(const Dataset& d, int n) {
  std::vector<double> freq(std::size_t{1} << n, 0.0);
  for (std::uint64_t row : d.rows) freq[row] += 1.0;
  for (double& f : freq) f /= static_cast<double>(d.rows.size());
  return freq;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Nearest point on the 2-simplex by dense scan plus local refinement; the
// independent oracle project_simplex is checked against.
std::vector<double> simplex2_nearest(double v0, double v1) {
  auto dist2 = [&](double t) {
    return (t - v0) * (t - v0) + (1.0 - t - v1) * (1.0 - t - v1);
  };
  double best_t = 0.0, best = dist2(0.0);
  for (int i = 1; i <= 10000; ++i) {
    const double t = i / 10000.0;
    const double d = dist2(t);
    if (d < best) {
      best = d;
      best_t = t;
    }
  }
  double lo = std::max(0.0, best_t - 1e-4), hi = std::min(1.0, best_t + 1e-4);
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (dist2(m1) < dist2(m2))
      hi = m2;
    else
      lo = m1;
  }
  const double t = (lo + hi) / 2;
  return {t, 1.0 - t};
}

}  // namespace

TEST_CASE("project_simplex fixed points and frozen cases") {
  const auto a = project_simplex(std::vector<double>{0.5, 0.5});
  CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(0.5).epsilon(1e-15));

  const auto b = project_simplex(std::vector<double>{2.0, 2.0});
  CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(0.5).epsilon(1e-15));

  // quadratic-program oracle on the 2-simplex
  const auto oracle = simplex2_nearest(1.2, -0.2);
  const auto c = project_simplex(std::vector<double>{1.2, -0.2});
  CHECK(c[0] == doctest::Approx(oracle[0]).epsilon(1e-4));
  CHECK(c[1] == doctest::Approx(oracle[1]).epsilon(2e-4));
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(0.0).epsilon(1e-15));

  CHECK_THROWS_AS(project_simplex(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("project_simplex is a valid nearest-point map") {
  Rng rng(51);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.next_below(6);
    std::vector<double> v(n);
    for (double& x : v) x = 4.0 * rng.next_double() - 2.0;
    const auto p = project_simplex(v);

    double sum = 0.0;
    for (double x : p) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);

    // projecting twice changes nothing
    const auto q = project_simplex(p);
    CHECK(max_abs_diff(p, q) < 1e-12);

    // no random simplex point is closer
    double pd = 0.0;
    for (std::size_t i = 0; i < n; ++i) pd += (p[i] - v[i]) * (p[i] - v[i]);
    for (int probe = 0; probe < 20; ++probe) {
      std::vector<double> z(n);
      double zs = 0.0;
      for (double& x : z) {
        x = rng.next_exponential();
        zs += x;
      }
      double zd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        z[i] /= zs;
        zd += (z[i] - v[i]) * (z[i] - v[i]);
      }
      CHECK(pd <= zd + 1e-12);
    }
  }
}

TEST_CASE("fit_mle recovers the empirical distribution of a full-joint model") {
  const Dataset data = pair_dataset();
  TrainConfig config;
  config.max_iters = 20000;
  config.tol_grad = 1e-9;

  const FitResult result = fit_mle(pair_circuit(), data, config);
  CHECK(result.report.reason == TerminationReason::Converged);

  const auto freq = empirical_frequencies(data, 2);
  CHECK(max_abs_diff(result.circuit.weights(), freq) < 1e-6);
  CHECK(result.report.final_log_likelihood ==
        doctest::Approx(log_likelihood(result.circuit, data)).epsilon(1e-12));
}

TEST_CASE("fit_mle on a single repeated row concentrates the weight") {
  Dataset d;
  d.variables = vars(2);
  for (int i = 0; i < 32; ++i) d.rows.push_back(0b11);
  TrainConfig config;
  config.max_iters = 20000;
  config.tol_grad = 1e-9;
  const FitResult result = fit_mle(pair_circuit(), d, config);
  CHECK(result.circuit.weights()[3] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fit_mle on an exactly uniform dataset returns uniform weights") {
  TrainConfig config;
  config.max_iters = 20000;
  config.tol_grad = 1e-9;
  const FitResult result = fit_mle(pair_circuit(), exact_uniform_dataset(), config);
  for (double w : result.circuit.weights())
    CHECK(w == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("fit_soft with zero penalty reproduces the mle trajectory") {
  const Dataset data = pair_dataset();
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_independence({0, 1, {}, {}}, model);

  TrainConfig config;
  config.max_iters = 4000;
  config.lambda.assign(sys.size(), 0.0);
  const FitResult soft = fit_soft(model, data, sys, config);

  TrainConfig mle_config = config;
  mle_config.lambda.clear();
  const FitResult mle = fit_mle(model, data, mle_config);

  CHECK(soft.circuit.weights() == mle.circuit.weights());  // bitwise
  CHECK(soft.report.objective_trace == mle.report.objective_trace);
}

TEST_CASE("fit_soft drives the independence residuals down") {
  const Dataset data = pair_dataset();
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_independence({0, 1, {}, {}}, model);

  TrainConfig config;
  config.max_iters = 30000;
  config.tol_grad = 1e-9;

  config.lambda.assign(sys.size(), 0.0);
  const FitResult loose = fit_soft(model, data, sys, config);

  config.lambda.assign(sys.size(), 1000.0);
  const FitResult tight = fit_soft(model, data, sys, config);

  CHECK(tight.report.max_abs_residual() < 1e-3);
  CHECK(tight.report.max_abs_residual() <= loose.report.max_abs_residual());

  // the oracle agrees on the fitted table
  const auto check = check_constraint(enumerate_joint(tight.circuit),
                                      Independence{0, 1, {}, {}}, 5e-3);
  CHECK(check.satisfied);
}

TEST_CASE("fit_soft leaves already-satisfied constraints at the mle") {
  const Dataset data = exact_uniform_dataset();
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_independence({0, 1, {}, {}}, model);

  TrainConfig config;
  config.max_iters = 20000;
  config.tol_grad = 1e-9;
  config.lambda.assign(sys.size(), 50.0);
  const FitResult soft = fit_soft(model, data, sys, config);

  TrainConfig mle_config = config;
  mle_config.lambda.clear();
  const FitResult mle = fit_mle(model, data, mle_config);
  CHECK(max_abs_diff(soft.circuit.weights(), mle.circuit.weights()) < 1e-4);
}

TEST_CASE("fit_soft penalized objective does not decrease") {
  const Dataset data = pair_dataset();
  Circuit model = pair_circuit();
  const ResidualSystem sys = compile_independence({0, 1, {}, {}}, model);

  TrainConfig config;
  config.max_iters = 500;
  config.lambda.assign(sys.size(), 10.0);
  const FitResult result = fit_soft(model, data, sys, config);

  // objective at the uniform initial point
  std::vector<double> w(model.weights().size(), 0.25);
  model.set_weights(w);
  double initial = log_likelihood(model, data);
  for (double c : residual_values(sys, model)) initial -= 10.0 * c * c;

  double final_obj = log_likelihood(result.circuit, data);
  for (double c : residual_values(sys, result.circuit)) final_obj -= 10.0 * c * c;

  CHECK(final_obj >= initial);
  for (std::size_t i = 1; i < result.report.objective_trace.size(); ++i)
    CHECK(result.report.objective_trace[i] >= result.report.objective_trace[i - 1]);
}

TEST_CASE("fit_soft residuals are non-increasing along the lambda sweep") {
  const Dataset data = pair_dataset();
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_independence({0, 1, {}, {}}, model);

  TrainConfig config;
  config.max_iters = 30000;
  config.tol_grad = 1e-9;

  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 1.0, 10.0, 100.0, 1000.0}) {
    config.lambda.assign(sys.size(), lambda);
    const FitResult result = fit_soft(model, data, sys, config);
    CHECK(result.report.max_abs_residual() <= previous + 1e-9);
    previous = result.report.max_abs_residual();
  }
}

TEST_CASE("fit_hard satisfies a conditional equality to oracle precision") {
  const Dataset data = pair_dataset();
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_conditional({0, 1, {}, false}, model);

  TrainConfig config;
  config.mode = FitMode::Hard;
  config.max_iters = 20000;
  config.tol_grad = 1e-10;
  config.tol_residual = 1e-8;

  const FitResult result = fit_hard(model, data, sys, config);
  CHECK(result.report.reason == TerminationReason::Converged);

  const JointTable fitted = enumerate_joint(result.circuit);
  const double diff = std::abs(
      table_conditional(fitted, asgn({{0, 1}}), asgn({{1, 1}})) -
      table_conditional(fitted, asgn({{0, 1}}), asgn({{1, 0}})));
  CHECK(diff < 1e-6);
}

TEST_CASE("fit_hard with an already-satisfied constraint stays at the mle") {
  const Dataset data = exact_uniform_dataset();
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_conditional({0, 1, {}, false}, model);

  TrainConfig config;
  config.mode = FitMode::Hard;
  config.max_iters = 20000;
  config.tol_grad = 1e-9;

  const FitResult hard = fit_hard(model, data, sys, config);
  CHECK(hard.report.reason == TerminationReason::Converged);

  TrainConfig mle_config;
  mle_config.max_iters = 20000;
  mle_config.tol_grad = 1e-9;
  const FitResult mle = fit_mle(model, data, mle_config);
  CHECK(max_abs_diff(hard.circuit.weights(), mle.circuit.weights()) < 1e-4);
}

TEST_CASE("fit_hard on an infeasible system fails loudly instead of looping") {
  const Circuit model = pair_circuit();
  Dataset d;
  d.variables = vars(2);
  for (int i = 0; i < 16; ++i) d.rows.push_back(0b11);

  TrainConfig config;
  config.mode = FitMode::Hard;
  config.max_iters = 400;

  SUBCASE("jointly unsatisfiable residuals escalate mu past the cap") {
    // Pr(X1=1) = 0 and Pr(X1=0) = 0 cannot hold together
    ResidualSystem sys;
    sys.residuals.push_back({ResidualTerm{+1.0, {asgn({{0, 1}})}}});
    sys.provenance.push_back({0, "Pr(X1=1)", false});
    sys.residuals.push_back({ResidualTerm{+1.0, {asgn({{0, 0}})}}});
    sys.provenance.push_back({0, "Pr(X1=0)", false});

    const FitResult result = fit_hard(model, d, sys, config);
    CHECK(result.report.reason == TerminationReason::NumericalFailure);
  }

  SUBCASE("forcing probability zero against all-ones data still terminates") {
    // Satisfiable in the weight space (the likelihood floor caps the fight),
    // so any of the declared outcomes is fine; the contract is termination.
    ResidualSystem sys;
    for (int k = 0; k < 2; ++k) {
      sys.residuals.push_back({ResidualTerm{+1.0, {asgn({{0, 1}})}}});
      sys.provenance.push_back({0, "Pr(X1=1)", false});
    }
    const FitResult result = fit_hard(model, d, sys, config);
    CHECK((result.report.reason == TerminationReason::Converged ||
           result.report.reason == TerminationReason::MaxIters ||
           result.report.reason == TerminationReason::NumericalFailure));
    if (result.report.reason == TerminationReason::Converged)
      CHECK(result.report.max_abs_residual() < config.tol_residual);
  }
}

TEST_CASE("every optimizer step keeps each sum node on the simplex") {
  const Dataset data = pair_dataset(200, 9);
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_independence({0, 1, {}, {}}, model);

  for (int steps = 1; steps <= 12; ++steps) {
    TrainConfig config;
    config.max_iters = steps;
    config.lambda.assign(sys.size(), 25.0);
    config.init = InitScheme::RandomDirichlet;
    config.seed = 77;
    const FitResult result = fit_soft(model, data, sys, config);

    const Circuit& c = result.circuit;
    const auto w = c.weights();
    for (NodeId id = 0; id < c.node_count(); ++id) {
      if (c.node(id).kind != NodeKind::Sum) continue;
      double sum = 0.0;
      for (std::size_t j = 0; j < c.node(id).children.size(); ++j) {
        CHECK(w[c.edge_offset(id) + j] >= 0.0);
        sum += w[c.edge_offset(id) + j];
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("training is bitwise deterministic") {
  const Dataset data = pair_dataset();
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_independence({0, 1, {}, {}}, model);

  TrainConfig config;
  config.max_iters = 600;
  config.lambda.assign(sys.size(), 100.0);
  config.init = InitScheme::RandomDirichlet;
  config.seed = 1234;

  const FitResult a = fit_soft(model, data, sys, config);
  const FitResult b = fit_soft(model, data, sys, config);
  CHECK(a.report.objective_trace == b.report.objective_trace);
  CHECK(a.circuit.weights() == b.circuit.weights());
  CHECK(a.report.final_residuals == b.report.final_residuals);
}

TEST_CASE("report invariants") {
  const Dataset data = pair_dataset(200, 5);
  TrainConfig config;
  config.max_iters = 50;
  const FitResult result = fit_mle(pair_circuit(), data, config);
  CHECK(result.report.objective_trace.size() ==
        static_cast<std::size_t>(result.report.iterations));

  CHECK_THROWS_AS(fit_mle(pair_circuit(), data, TrainConfig{.max_iters = 0}),
                  std::invalid_argument);
  TrainConfig bad;
  bad.rho = 0.5;
  CHECK_THROWS_AS(fit_mle(pair_circuit(), data, bad), std::invalid_argument);
}

TEST_CASE("lambda length must match the residual count in soft mode") {
  const Dataset data = pair_dataset(100, 3);
  const Circuit model = pair_circuit();
  const ResidualSystem sys = compile_independence({0, 1, {}, {}}, model);
  TrainConfig config;
  config.lambda = {1.0, 2.0};  // system has 4 residuals
  CHECK_THROWS_AS(fit_soft(model, data, sys, config), std::invalid_argument);
}

TEST_CASE("hierarchical circuits train too") {
  // mixture-of-Bernoullis model fitted to dependent pair data
  Rng rng(61);
  Circuit model = naive_bayes_circuit(2, 2, rng);
  const Dataset data = pair_dataset();

  TrainConfig config;
  config.max_iters = 6000;
  config.tol_grad = 1e-8;
  config.init = InitScheme::RandomDirichlet;
  config.seed = 8;

  const FitResult result = fit_mle(model, data, config);
  // a 2-component mixture over 2 binary variables can represent the
  // empirical joint, so the fit should get close to the empirical LL
  const auto freq = empirical_frequencies(data, 2);
  const Circuit best = full_joint_circuit(vars(2), freq);
  CHECK(result.report.final_log_likelihood >= log_likelihood(best, data) - 1e-3);
}
