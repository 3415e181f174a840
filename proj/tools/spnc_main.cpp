// spnc: train, query, and verify sum-product networks under declared
// probabilistic constraints.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spnc/constraints.hpp"
#include "spnc/dataset.hpp"
#include "spnc/model_io.hpp"
#include "spnc/optimizer.hpp"
#include "spnc/oracle.hpp"
#include "spnc/query.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolations = 1;
constexpr int kExitInputError = 2;
constexpr int kExitMaxIters = 3;
constexpr int kExitNumericalFailure = 4;

struct TrainOptions {
  std::string model_path;
  std::string data_path;
  std::string constraints_path;
  std::string out_path;
  std::string mode = "mle";
  std::string init = "uniform";
  std::vector<double> lambda;
  spnc::TrainConfig config;
};

spnc::Circuit load_valid_model(const std::string& path) {
  spnc::Circuit circuit = spnc::load_model(path);
  const auto report = circuit.validate();
  if (!report.ok())
    throw std::runtime_error("model '" + path + "' is not a valid SPN:\n" +
                             report.to_string());
  return circuit;
}

int cmd_validate(const std::string& model_path) {
  spnc::Circuit circuit = spnc::load_model(model_path);
  const auto report = circuit.validate();
  std::cout << report.to_string();
  if (!report.ok()) std::cout << report.violations.size() << " violation(s)\n";
  return report.ok() ? kExitOk : kExitViolations;
}

int cmd_train(const TrainOptions& opt) {
  spnc::Circuit circuit = load_valid_model(opt.model_path);
  const spnc::Dataset data = spnc::load_csv_file(opt.data_path);

  spnc::TrainConfig config = opt.config;
  if (opt.init == "uniform")
    config.init = spnc::InitScheme::Uniform;
  else if (opt.init == "dirichlet")
    config.init = spnc::InitScheme::RandomDirichlet;
  else
    throw std::runtime_error("unknown init scheme '" + opt.init + "'");

  spnc::ResidualSystem system;
  if (opt.mode == "mle") {
    config.mode = spnc::FitMode::Mle;
    if (!opt.constraints_path.empty())
      std::cerr << "warning: --constraints is ignored in mle mode\n";
  } else {
    if (opt.mode == "soft")
      config.mode = spnc::FitMode::Soft;
    else if (opt.mode == "hard")
      config.mode = spnc::FitMode::Hard;
    else
      throw std::runtime_error("unknown mode '" + opt.mode + "'");
    if (opt.constraints_path.empty())
      throw std::runtime_error("--constraints is required for mode " + opt.mode);
    const auto constraints = spnc::load_constraints(opt.constraints_path, circuit);
    system = spnc::compile(constraints, circuit);
  }

  config.lambda = opt.lambda;
  if (config.mode != spnc::FitMode::Mle) {
    if (config.lambda.size() == 1)
      config.lambda.assign(system.size(), opt.lambda[0]);  // broadcast
    if (config.mode == spnc::FitMode::Soft && config.lambda.empty())
      config.lambda.assign(system.size(), 1.0);
    if (!config.lambda.empty() && config.lambda.size() != system.size())
      throw std::runtime_error("--lambda has " + std::to_string(opt.lambda.size()) +
                               " values but the system has " +
                               std::to_string(system.size()) + " residuals");
  }

  spnc::FitResult result;
  switch (config.mode) {
    case spnc::FitMode::Mle:
      result = spnc::fit_mle(std::move(circuit), data, config);
      break;
    case spnc::FitMode::Soft:
      result = spnc::fit_soft(std::move(circuit), data, system, config);
      break;
    case spnc::FitMode::Hard:
      result = spnc::fit_hard(std::move(circuit), data, system, config);
      break;
  }

  spnc::save_model(result.circuit, opt.out_path);

  std::cout << "train report\n"
            << spnc::report_table(result.report) << '\n'
            << "mode=" << opt.mode << '\n'
            << spnc::report_key_values(result.report);

  switch (result.report.reason) {
    case spnc::TerminationReason::Converged: return kExitOk;
    case spnc::TerminationReason::MaxIters: return kExitMaxIters;
    case spnc::TerminationReason::NumericalFailure: return kExitNumericalFailure;
  }
  return kExitOk;
}

int cmd_query(const std::string& model_path, const std::string& expr) {
  const spnc::Circuit circuit = load_valid_model(model_path);
  const spnc::QueryExpr query = spnc::parse_query(expr, circuit);
  const double p = spnc::eval_query(circuit, query);
  std::cout << spnc::format_probability(p) << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& model_path, const std::string& constraints_path,
               double tol) {
  const spnc::Circuit circuit = load_valid_model(model_path);
  const auto constraints = spnc::load_constraints(constraints_path, circuit);
  if (constraints.empty()) {
    std::cout << "0 constraints\n";
    return kExitOk;
  }

  bool all_ok = true;
  if (circuit.num_variables() <= 20) {
    const spnc::JointTable table = spnc::enumerate_joint(circuit);
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      const auto check = spnc::check_constraint(table, constraints[i], tol);
      std::printf("constraint %zu: %s %s (max violation %.3e)\n", i + 1,
                  spnc::describe(constraints[i], circuit).c_str(),
                  check.satisfied ? "PASS" : "FAIL", check.max_violation);
      all_ok &= check.satisfied;
    }
  } else {
    // beyond enumeration scale, fall back to the compiled residuals
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      const auto system = spnc::compile({&constraints[i], 1}, circuit);
      double worst = 0.0;
      for (double r : spnc::residual_values(system, circuit))
        worst = std::max(worst, std::abs(r));
      const bool ok = worst <= tol;
      std::printf("constraint %zu: %s %s (max residual %.3e)\n", i + 1,
                  spnc::describe(constraints[i], circuit).c_str(),
                  ok ? "PASS" : "FAIL", worst);
      all_ok &= ok;
    }
  }
  return all_ok ? kExitOk : kExitViolations;
}

int cmd_compile(const std::string& model_path, const std::string& constraints_path) {
  const spnc::Circuit circuit = load_valid_model(model_path);
  const auto constraints = spnc::load_constraints(constraints_path, circuit);
  const spnc::ResidualSystem system = spnc::compile(constraints, circuit);
  for (const auto& residual : system.residuals)
    std::cout << spnc::format_residual(residual, circuit) << '\n';
  return kExitOk;
}

int cmd_sample(const std::string& model_path, long n, std::uint64_t seed,
               const std::string& out_path) {
  if (n < 1) throw std::runtime_error("--n must be at least 1");
  const spnc::Circuit circuit = load_valid_model(model_path);
  spnc::JointTable table = spnc::enumerate_joint(circuit);
  const spnc::Dataset data =
      spnc::sample_dataset(table, static_cast<std::size_t>(n), seed);
  spnc::save_csv(data, out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sum-product networks with probabilistic constraints"};
  app.require_subcommand(1);

  std::string model_path, data_path, constraints_path, out_path, expr;
  double tol = 1e-6;
  long sample_n = 0;
  std::uint64_t sample_seed = 0;

  auto* validate = app.add_subcommand("validate", "check SPN structural invariants");
  validate->add_option("--model", model_path, "model file")->required();

  TrainOptions train_opt;
  auto* train = app.add_subcommand("train", "fit weights by (constrained) maximum likelihood");
  train->add_option("--model", train_opt.model_path, "model file")->required();
  train->add_option("--data", train_opt.data_path, "CSV dataset")->required();
  train->add_option("--constraints", train_opt.constraints_path, "constraints file");
  train->add_option("--mode", train_opt.mode, "mle | soft | hard");
  train->add_option("--lambda", train_opt.lambda, "penalty weights / initial multipliers")
      ->delimiter(',');
  train->add_option("--max-iters", train_opt.config.max_iters, "iteration budget");
  train->add_option("--step", train_opt.config.step_size, "base step size");
  train->add_option("--tol-grad", train_opt.config.tol_grad, "projected-gradient tolerance");
  train->add_option("--tol-residual", train_opt.config.tol_residual, "residual tolerance (hard)");
  train->add_option("--mu", train_opt.config.mu_init, "initial penalty coefficient (hard)");
  train->add_option("--rho", train_opt.config.rho, "penalty growth factor (hard)");
  train->add_option("--seed", train_opt.config.seed, "rng seed");
  train->add_option("--init", train_opt.init, "uniform | dirichlet");
  train->add_option("--out", train_opt.out_path, "output model file")->required();

  auto* query = app.add_subcommand("query", "evaluate a probability expression");
  query->add_option("--model", model_path, "model file")->required();
  query->add_option("--expr", expr, "P(...), P(..|..), P(..|do(..);parents=..)")->required();

  auto* verify = app.add_subcommand("verify", "check constraints against a model");
  verify->add_option("--model", model_path, "model file")->required();
  verify->add_option("--constraints", constraints_path, "constraints file")->required();
  verify->add_option("--tol", tol, "violation tolerance");

  auto* compile = app.add_subcommand("compile", "print the residual system for constraints");
  compile->add_option("--model", model_path, "model file")->required();
  compile->add_option("--constraints", constraints_path, "constraints file")->required();

  auto* sample = app.add_subcommand("sample", "draw rows from the model distribution");
  sample->add_option("--model", model_path, "model file")->required();
  sample->add_option("--n", sample_n, "row count")->required();
  sample->add_option("--seed", sample_seed, "rng seed");
  sample->add_option("--out", out_path, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return kExitInputError;
  }

  try {
    if (validate->parsed()) return cmd_validate(model_path);
    if (train->parsed()) return cmd_train(train_opt);
    if (query->parsed()) return cmd_query(model_path, expr);
    if (verify->parsed()) return cmd_verify(model_path, constraints_path, tol);
    if (compile->parsed()) return cmd_compile(model_path, constraints_path);
    if (sample->parsed()) return cmd_sample(model_path, sample_n, sample_seed, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}
