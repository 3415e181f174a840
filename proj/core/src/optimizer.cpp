#include "spnc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "spnc/rng.hpp"

namespace spnc {

namespace {

constexpr double kLogFloor = 1e-12;
constexpr double kMuCap = 1e12;
constexpr int kMaxHalvings = 20;

using Histogram = std::vector<std::pair<std::uint64_t, std::size_t>>;

void check_config(const TrainConfig& config) {
  if (config.max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (!(config.step_size > 0)) throw std::invalid_argument("step_size must be positive");
  if (!(config.tol_grad > 0)) throw std::invalid_argument("tol_grad must be positive");
  if (!(config.tol_residual > 0)) throw std::invalid_argument("tol_residual must be positive");
  if (!(config.mu_init > 0)) throw std::invalid_argument("mu_init must be positive");
  if (!(config.rho > 1)) throw std::invalid_argument("rho must exceed 1");
}

void init_weights(Circuit& circuit, const TrainConfig& config) {
  std::vector<double> w = circuit.weights();
  Rng rng(config.seed);
  for (NodeId id = 0; id < circuit.node_count(); ++id) {
    const Node& n = circuit.node(id);
    if (n.kind != NodeKind::Sum) continue;
    const std::size_t off = circuit.edge_offset(id);
    const std::size_t k = n.children.size();
    if (config.init == InitScheme::Uniform) {
      for (std::size_t j = 0; j < k; ++j) w[off + j] = 1.0 / static_cast<double>(k);
    } else {
      // symmetric Dirichlet(1): normalized Exp(1) draws
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        w[off + j] = rng.next_exponential();
        total += w[off + j];
      }
      for (std::size_t j = 0; j < k; ++j) w[off + j] /= total;
    }
  }
  circuit.set_weights(w);
}

std::vector<double> project_all(const Circuit& circuit, std::vector<double> w) {
  for (NodeId id = 0; id < circuit.node_count(); ++id) {
    const Node& n = circuit.node(id);
    if (n.kind != NodeKind::Sum) continue;
    const std::size_t off = circuit.edge_offset(id);
    const auto block = project_simplex({w.data() + off, n.children.size()});
    std::copy(block.begin(), block.end(), w.begin() + off);
  }
  return w;
}

// Training state shared by the three fit modes. The penalty shape is
// controlled by per-residual gradient coefficients and a penalty value, so
// the same ascent loop serves mle / soft / hard.
struct Trainer {
  Trainer(Circuit& c, const Histogram& h, double rows, const ResidualSystem* sys)
      : circuit(c), hist(h), m(rows), system(sys) {}

  Circuit& circuit;
  const Histogram& hist;
  double m = 0;
  const ResidualSystem* system = nullptr;

  // objective = avg log-likelihood - penalty(residuals)
  std::function<double(std::span<const double>)> penalty_value;
  std::function<double(double, std::size_t)> penalty_grad_coeff;  // d penalty / d C_k

  double last_ll = 0.0;
  int last_floored = 0;
  std::vector<double> last_residuals;

  double log_likelihood_at_current(int* floored) {
    const double z = circuit.evaluate(PartialAssignment{});
    if (z <= 0.0) throw std::runtime_error("degenerate circuit during training");
    double total = 0.0;
    int below = 0;
    const int n = circuit.num_variables();
    for (const auto& [state, count] : hist) {
      const double p = circuit.evaluate(PartialAssignment::complete(state, n)) / z;
      if (p < kLogFloor) below += static_cast<int>(count);
      total += static_cast<double>(count) * std::log(std::max(p, kLogFloor));
    }
    if (floored) *floored = below;
    return total / m;
  }

  double objective() {
    last_ll = log_likelihood_at_current(&last_floored);
    double obj = last_ll;
    if (system) {
      last_residuals = residual_values(*system, circuit);
      obj -= penalty_value(last_residuals);
    }
    return obj;
  }

  std::vector<double> gradient() {
    const int n = circuit.num_variables();
    const double z = circuit.evaluate(PartialAssignment{});
    if (z <= 0.0) throw std::runtime_error("degenerate circuit during training");
    const std::vector<double> gz = circuit.gradient(PartialAssignment{});

    std::vector<double> grad(circuit.weight_count(), 0.0);
    for (const auto& [state, count] : hist) {
      const PartialAssignment row = PartialAssignment::complete(state, n);
      const double v = circuit.evaluate(row);
      const std::vector<double> gv = circuit.gradient(row);
      const double p = v / z;
      const double denom = std::max(p, kLogFloor);
      const double scale = static_cast<double>(count) / denom;
      for (std::size_t j = 0; j < grad.size(); ++j)
        grad[j] += scale * (gv[j] * z - v * gz[j]) / (z * z);
    }
    for (double& g : grad) g /= m;

    if (system) {
      const std::vector<double> c = residual_values(*system, circuit);
      const Jacobian jac = residual_jacobian(*system, circuit);
      for (std::size_t k = 0; k < c.size(); ++k) {
        const double coeff = penalty_grad_coeff(c[k], k);
        if (coeff == 0.0) continue;
        const auto row = jac.row(k);
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] -= coeff * row[j];
      }
    }
    return grad;
  }
};

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Projected gradient ascent with halving backtracking. Returns the
// termination reason; accepted-step objectives are appended to `trace`.
TerminationReason ascend(Trainer& t, const TrainConfig& config, int budget,
                         std::vector<double>& trace, int& iterations) {
  double f = t.objective();
  std::vector<double> w = t.circuit.weights();

  for (int it = 0; it < budget; ++it) {
    const std::vector<double> g = t.gradient();

    std::vector<double> cand(w.size());
    for (std::size_t j = 0; j < w.size(); ++j)
      cand[j] = w[j] + config.step_size * g[j];
    cand = project_all(t.circuit, std::move(cand));

    std::vector<double> pg(w.size());
    for (std::size_t j = 0; j < w.size(); ++j)
      pg[j] = (cand[j] - w[j]) / config.step_size;
    if (norm2(pg) < config.tol_grad) return TerminationReason::Converged;

    // Backtrack while the step would lower the objective.
    double step = config.step_size;
    bool accepted = false;
    std::vector<double> next = std::move(cand);
    for (int h = 0; h <= kMaxHalvings; ++h) {
      if (h > 0) {
        for (std::size_t j = 0; j < w.size(); ++j)
          next[j] = w[j] + step * g[j];
        next = project_all(t.circuit, std::move(next));
      }
      t.circuit.set_weights(next);
      const double f_next = t.objective();
      if (f_next >= f) {
        f = f_next;
        w = next;
        accepted = true;
        break;
      }
      step /= 2;
    }
    if (!accepted) {
      // No improving step at any scale: restore and stop.
      t.circuit.set_weights(w);
      t.objective();
      return TerminationReason::Converged;
    }
    trace.push_back(f);
    ++iterations;
  }
  return TerminationReason::MaxIters;
}

Histogram make_histogram(const Dataset& data) { return state_histogram(data); }

Dataset prepare(const Circuit& circuit, const Dataset& data) {
  if (data.rows.empty()) throw std::invalid_argument("empty dataset");
  return align_dataset(data, circuit);
}

TrainReport finish(Trainer& t, TerminationReason reason, int iterations,
                   std::vector<double> trace) {
  TrainReport report;
  report.iterations = iterations;
  report.reason = reason;
  report.objective_trace = std::move(trace);
  report.final_log_likelihood = t.log_likelihood_at_current(&report.floored_rows);
  if (t.system) report.final_residuals = residual_values(*t.system, t.circuit);
  return report;
}

}  // namespace

const char* to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::Converged: return "converged";
    case TerminationReason::MaxIters: return "max-iters";
    case TerminationReason::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

double TrainReport::max_abs_residual() const {
  double m = 0.0;
  for (double r : final_residuals) m = std::max(m, std::abs(r));
  return m;
}

std::vector<double> project_simplex(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("project_simplex: empty vector");
  const std::size_t n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  double running = 0.0;
  double tau = 0.0;
  std::size_t support = 0;
  for (std::size_t j = 0; j < n; ++j) {
    running += sorted[j];
    const double candidate = (running - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0) {
      tau = candidate;
      support = j + 1;
    }
  }
  (void)support;

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(values[i] - tau, 0.0);
  return out;
}

FitResult fit_mle(Circuit circuit, const Dataset& data, const TrainConfig& config) {
  check_config(config);
  const Dataset aligned = prepare(circuit, data);
  const Histogram hist = make_histogram(aligned);

  init_weights(circuit, config);
  Trainer t(circuit, hist, static_cast<double>(aligned.rows.size()), nullptr);

  std::vector<double> trace;
  int iterations = 0;
  const TerminationReason reason = ascend(t, config, config.max_iters, trace, iterations);
  TrainReport report = finish(t, reason, iterations, std::move(trace));
  return {std::move(circuit), std::move(report)};
}

FitResult fit_soft(Circuit circuit, const Dataset& data, const ResidualSystem& system,
                   const TrainConfig& config) {
  check_config(config);
  if (config.lambda.size() != system.size())
    throw std::invalid_argument("lambda has " + std::to_string(config.lambda.size()) +
                                " entries, system has " + std::to_string(system.size()) +
                                " residuals");
  for (double l : config.lambda)
    if (!(l >= 0)) throw std::invalid_argument("penalty weights must be non-negative");

  const Dataset aligned = prepare(circuit, data);
  const Histogram hist = make_histogram(aligned);

  init_weights(circuit, config);
  const std::vector<double> lambda = config.lambda;
  Trainer t(circuit, hist, static_cast<double>(aligned.rows.size()), &system);
  t.penalty_value = [&lambda](std::span<const double> c) {
    double p = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) p += lambda[k] * c[k] * c[k];
    return p;
  };
  t.penalty_grad_coeff = [&lambda](double ck, std::size_t k) { return 2.0 * lambda[k] * ck; };

  std::vector<double> trace;
  int iterations = 0;
  const TerminationReason reason = ascend(t, config, config.max_iters, trace, iterations);
  TrainReport report = finish(t, reason, iterations, std::move(trace));
  return {std::move(circuit), std::move(report)};
}

FitResult fit_hard(Circuit circuit, const Dataset& data, const ResidualSystem& system,
                   const TrainConfig& config) {
  check_config(config);
  if (!config.lambda.empty() && config.lambda.size() != system.size())
    throw std::invalid_argument("multiplier vector length does not match residual count");

  const Dataset aligned = prepare(circuit, data);
  const Histogram hist = make_histogram(aligned);

  init_weights(circuit, config);
  std::vector<double> lambda = config.lambda;
  lambda.resize(system.size(), 0.0);
  double mu = config.mu_init;

  Trainer t(circuit, hist, static_cast<double>(aligned.rows.size()), &system);
  t.penalty_value = [&lambda, &mu](std::span<const double> c) {
    double p = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k)
      p += lambda[k] * c[k] + 0.5 * mu * c[k] * c[k];
    return p;
  };
  t.penalty_grad_coeff = [&lambda, &mu](double ck, std::size_t k) {
    return lambda[k] + mu * ck;
  };

  std::vector<double> trace;
  int iterations = 0;
  TerminationReason reason = TerminationReason::MaxIters;
  double prev_norm = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < config.max_iters; ++outer) {
    const TerminationReason inner =
        ascend(t, config, config.max_iters, trace, iterations);

    const std::vector<double> c = residual_values(system, circuit);
    double res_norm = 0.0;
    for (double ck : c) res_norm = std::max(res_norm, std::abs(ck));

    if (res_norm < config.tol_residual && inner == TerminationReason::Converged) {
      reason = TerminationReason::Converged;
      break;
    }

    for (std::size_t k = 0; k < c.size(); ++k) lambda[k] += mu * c[k];
    if (res_norm > 0.5 * prev_norm) mu *= config.rho;
    prev_norm = res_norm;

    if (mu > kMuCap) {
      reason = TerminationReason::NumericalFailure;
      break;
    }
  }

  TrainReport report = finish(t, reason, iterations, std::move(trace));
  return {std::move(circuit), std::move(report)};
}

std::string report_table(const TrainReport& report) {
  std::ostringstream out;
  out << "  iterations        " << report.iterations << '\n'
      << "  termination       " << to_string(report.reason) << '\n'
      << "  log_likelihood    " << report.final_log_likelihood << '\n';
  if (!report.final_residuals.empty())
    out << "  max_abs_residual  " << report.max_abs_residual() << '\n';
  if (report.floored_rows > 0)
    out << "  floored_rows      " << report.floored_rows << '\n';
  return out.str();
}

std::string report_key_values(const TrainReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "iterations=" << report.iterations << '\n'
      << "termination=" << to_string(report.reason) << '\n'
      << "log_likelihood=" << report.final_log_likelihood << '\n'
      << "floored_rows=" << report.floored_rows << '\n';
  out << "residuals=";
  for (std::size_t k = 0; k < report.final_residuals.size(); ++k)
    out << (k ? "," : "") << report.final_residuals[k];
  out << '\n';
  out << "trace=";
  for (std::size_t k = 0; k < report.objective_trace.size(); ++k)
    out << (k ? "," : "") << report.objective_trace[k];
  out << '\n';
  return out.str();
}

}  // namespace spnc
