#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spnc/circuit.hpp"
#include "spnc/constraints.hpp"
#include "spnc/dataset.hpp"

namespace spnc {

enum class FitMode { Mle, Soft, Hard };
enum class InitScheme { Uniform, RandomDirichlet };
enum class TerminationReason { Converged, MaxIters, NumericalFailure };

const char* to_string(TerminationReason reason);

struct TrainConfig {
  FitMode mode = FitMode::Mle;
  int max_iters = 5000;
  double step_size = 0.25;
  double tol_grad = 1e-8;
  double tol_residual = 1e-8;
  // Penalty weights (soft) or initial multipliers (hard). Length must match
  // the residual count; empty means all-zero multipliers in hard mode.
  std::vector<double> lambda;
  double mu_init = 1.0;   // hard: initial penalty coefficient, > 0
  double rho = 10.0;      // hard: penalty growth factor, > 1
  std::uint64_t seed = 0;
  InitScheme init = InitScheme::Uniform;
};

struct TrainReport {
  int iterations = 0;
  double final_log_likelihood = 0.0;
  std::vector<double> final_residuals;
  std::vector<double> objective_trace;  // one entry per iteration
  TerminationReason reason = TerminationReason::Converged;
  int floored_rows = 0;  // rows still at the 1e-12 probability floor at exit

  double max_abs_residual() const;
};

std::string report_table(const TrainReport& report);
std::string report_key_values(const TrainReport& report);

// Euclidean projection onto the probability simplex (sorted-threshold
// algorithm); the unique nearest point with non-negative entries summing
// to 1.
std::vector<double> project_simplex(std::span<const double> values);

struct FitResult {
  Circuit circuit;
  TrainReport report;
};

// Projected gradient ascent on the average log-likelihood; every step
// re-projects each sum node's weight block onto the simplex.
FitResult fit_mle(Circuit circuit, const Dataset& data, const TrainConfig& config);

// Maximizes L(w) - Σ_k λ_k C_k(w)^2.
FitResult fit_soft(Circuit circuit, const Dataset& data, const ResidualSystem& system,
                   const TrainConfig& config);

// Augmented Lagrangian: inner maximization of
// L(w) - Σ λ_k C_k(w) - (μ/2) Σ C_k(w)^2, outer multiplier updates
// λ_k += μ C_k and penalty growth μ *= ρ while the residual norm stalls.
FitResult fit_hard(Circuit circuit, const Dataset& data, const ResidualSystem& system,
                   const TrainConfig& config);

}  // namespace spnc
