#pragma once

// Projected gradient descent on distance matrices.
//
// Each epoch evaluates
//   loss(D) = mu * ||D_X - D||_F^2 + batched smoothed delta(D)
// on freshly sampled batches, takes an Adam step on the upper-triangular
// entries and maps the result back onto the metric cone with Floyd-Warshall
// (the largest metric lying entrywise below the weights).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "treefit/error.hpp"
#include "treefit/format.hpp"
#include "treefit/matrix.hpp"
#include "treefit/metric.hpp"
#include "treefit/parallel.hpp"
#include "treefit/rng.hpp"
#include "treefit/smooth_delta.hpp"

namespace treefit {

struct FitConfig {
  double mu = 0.1;
  double lambda = 10.0;
  std::size_t batches = 8;     // K
  std::size_t batch_size = 8;  // m
  double lr = 0.01;
  std::size_t max_epochs = 1000;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  double weight_floor = 1e-6;
  std::size_t accum_chunks = 1;

  void validate(std::size_t n) const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be nonnegative");
    SmoothingParams{lambda}.validate();
    if (batches < 1) throw ConfigError("K must be at least 1");
    if (batch_size < 4) throw ConfigError("m must be at least 4");
    if (batch_size > n)
      throw ConfigError("m=" + std::to_string(batch_size) + " exceeds n=" + std::to_string(n));
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be nonnegative");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (!(weight_floor > 0.0)) throw ConfigError("weight floor must be positive");
    if (accum_chunks < 1) throw ConfigError("accum_chunks must be at least 1");
  }
};

struct AdamState {
  GradientMatrix first_moment;
  GradientMatrix second_moment;
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;

  explicit AdamState(std::size_t n = 0) : first_moment(n), second_moment(n) {}
};

// In-place bias-corrected Adam on the upper triangle, mirrored. The result
// may leave the metric cone; project_metric repairs it.
inline void adam_update(DistanceMatrix& d, const GradientMatrix& grad, AdamState& state, double lr) {
  const std::size_t n = d.size();
  require_same_size(n, grad.size(), "adam_step");
  if (state.first_moment.size() != n) state = AdamState(n);
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double g = grad(i, j);
      const double m = state.beta1 * state.first_moment(i, j) + (1.0 - state.beta1) * g;
      const double v = state.beta2 * state.second_moment(i, j) + (1.0 - state.beta2) * g * g;
      state.first_moment.set(i, j, m);
      state.second_moment.set(i, j, v);
      const double step = lr * (m / c1) / (std::sqrt(v / c2) + state.eps_hat);
      d.set(i, j, d(i, j) - step);
    }
  }
}

struct AdamStepResult {
  DistanceMatrix matrix;
  AdamState state;
};

inline AdamStepResult adam_step(DistanceMatrix d, const GradientMatrix& grad, AdamState state, double lr) {
  adam_update(d, grad, state, lr);
  return {std::move(d), std::move(state)};
}

// Off-diagonal entries are raised to at least `floor`, then replaced by
// all-pairs shortest paths. The k phases run in order; rows within a phase
// are independent since row k and column k do not change during phase k.
inline DistanceMatrix project_metric(const DistanceMatrix& w, double floor = 1e-6) {
  if (!(floor > 0.0)) throw ValueError("project_metric: floor must be positive");
  const std::size_t n = w.size();
  DenseMatrix buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = w(i, j);
      if (std::isnan(v)) throw ValueError("project_metric: NaN entry");
      buf(i, j) = v < floor ? floor : v;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::span<const double> via = buf.row(k);
    parallel_for(
        0, n,
        [&](std::size_t i) {
          if (i == k) return;
          auto row = buf.row(i);
          const double dik = row[k];
          for (std::size_t j = 0; j < n; ++j) {
            const double cand = dik + via[j];
            if (cand < row[j]) row[j] = cand;
          }
        },
        64);
  }
  DistanceMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.set(i, j, buf(i, j));
  return out;
}

inline DistanceMatrix project_metric(const std::vector<std::vector<double>>& rows, double floor = 1e-6) {
  return project_metric(DistanceMatrix::from_rows(rows), floor);
}

struct ObjectiveValue {
  double loss = 0.0;
  double fidelity = 0.0;
  double delta_term = 0.0;
};

inline double fidelity_term(const DistanceMatrix& d, const DistanceMatrix& target, double mu) {
  require_same_size(d.size(), target.size(), "objective");
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      const double diff = target(i, j) - d(i, j);
      sum += 2.0 * diff * diff;
    }
  return mu * sum;
}

inline ObjectiveValue objective(const DistanceMatrix& d, const DistanceMatrix& target, const FitConfig& cfg,
                                const BatchSet& batches) {
  ObjectiveValue v;
  v.fidelity = fidelity_term(d, target, cfg.mu);
  v.delta_term = delta_batched(d, SmoothingParams{cfg.lambda}, batches);
  v.loss = v.fidelity + v.delta_term;
  return v;
}

struct ObjectiveWithGradient {
  ObjectiveValue value;
  GradientMatrix gradient;
};

// Gradient with respect to the unordered pair variables; the fidelity part
// is 4 mu (D - D_X) because each pair appears twice in the full norm.
inline ObjectiveWithGradient objective_with_gradient(const DistanceMatrix& d, const DistanceMatrix& target,
                                                     const FitConfig& cfg, const BatchSet& batches) {
  auto batched = evaluate_delta_batched(d, SmoothingParams{cfg.lambda}, batches, true, cfg.accum_chunks);
  ObjectiveWithGradient out;
  out.value.fidelity = fidelity_term(d, target, cfg.mu);
  out.value.delta_term = batched.value;
  out.value.loss = out.value.fidelity + out.value.delta_term;
  out.gradient = std::move(batched.gradient);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) out.gradient.add(i, j, 4.0 * cfg.mu * (d(i, j) - target(i, j)));
  return out;
}

struct TraceRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double fidelity = 0.0;
  double delta_term = 0.0;
  double linf = 0.0;  // distance of the iterate to the input
};

struct FitResult {
  DistanceMatrix best_matrix;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::vector<TraceRecord> trace;
  std::size_t epochs_run = 0;
  bool stopped_early = false;
};

// Starts from the projected input. Stops once `patience` consecutive epochs
// fail to lower the best loss, or after max_epochs; the returned matrix is
// the projected iterate of the best epoch.
//
// Batches are redrawn from the seeded stream after every step that moves
// the iterate. A step that leaves the projected iterate bitwise unchanged
// re-evaluates it on the same batches, so a stalled iterate cannot produce
// a spurious improvement from sampling noise alone.
inline FitResult fit(const DistanceMatrix& input, const FitConfig& cfg) {
  const std::size_t n = input.size();
  cfg.validate(n);
  Rng rng(cfg.seed);
  DistanceMatrix current = project_metric(input, cfg.weight_floor);
  AdamState adam(n);
  BatchSet batches;
  bool resample = true;
  std::size_t stall = 0;

  FitResult result;
  result.trace.reserve(std::min<std::size_t>(cfg.max_epochs, 4096));
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (resample) batches = sample_batches(n, cfg.batches, cfg.batch_size, rng);
    auto eval = objective_with_gradient(current, input, cfg, batches);
    result.trace.push_back({epoch, eval.value.loss, eval.value.fidelity, eval.value.delta_term,
                            distortion_linf(current, input)});
    result.epochs_run = epoch + 1;
    if (eval.value.loss < result.best_loss) {
      result.best_loss = eval.value.loss;
      result.best_epoch = epoch;
      result.best_matrix = current;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
    if (epoch + 1 == cfg.max_epochs) break;

    DistanceMatrix stepped = current;
    adam_update(stepped, eval.gradient, adam, cfg.lr);
    DistanceMatrix next = project_metric(stepped, cfg.weight_floor);
    resample = !(next == current);
    current = std::move(next);
  }
  return result;
}

// Worst-case additive distortion constant
//   2 delta log2(n-2) + (1 - 2 log2(n-2) mu) * gap.
inline double theorem2_bound(double delta_input, std::size_t n, double mu, double gap_linf) {
  if (n <= 3) throw ValueError("theorem2_bound: needs n >= 4");
  if (gap_linf < 0.0) throw ValueError("theorem2_bound: gap must be nonnegative");
  const double l = std::log2(static_cast<double>(n - 2));
  return 2.0 * delta_input * l + (1.0 - 2.0 * l * mu) * gap_linf;
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "epoch,loss,fidelity,delta_term,linf\n";
  for (const auto& r : trace)
    out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.fidelity) << ','
        << format_double(r.delta_term) << ',' << format_double(r.linf) << '\n';
}

}  // namespace treefit
