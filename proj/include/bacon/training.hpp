#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bacon/csv.hpp"
#include "bacon/errors.hpp"
#include "bacon/network.hpp"

namespace bacon::training {

using network::BaconGrads;
using network::BaconParams;
using network::Inputs;
using network::Matrix;
using network::NetworkSpec;

enum class SupervisionMode {
  PerHead,     // each head sees its own target (e.g. a low-pass pyramid level)
  SharedTarget // every head sees the full-resolution target
};

struct TrainConfig {
  int total_steps = 1000;
  double lr_start = 1e-3;
  double lr_end = 1e-3;
  std::size_t batch_size = 0;  // 0: task default
  std::uint64_t seed = 0;
  SupervisionMode mode = SupervisionMode::PerHead;

  void validate() const {
    if (total_steps < 0) throw InvalidInput("TrainConfig: total_steps must be >= 0");
    if (!(lr_end > 0.0) || !(lr_start >= lr_end)) throw InvalidInput("TrainConfig: need lr_start >= lr_end > 0");
  }
};

// Geometric interpolation lr_start (lr_end / lr_start)^(step / total_steps).
inline double lr_at(int step, const TrainConfig& c) {
  if (step < 0 || step > std::max(c.total_steps, 0)) throw DomainError("lr_at: step " + std::to_string(step) + " out of range");
  if (c.total_steps == 0) return c.lr_start;
  const double t = static_cast<double>(step) / static_cast<double>(c.total_steps);
  return c.lr_start * std::pow(c.lr_end / c.lr_start, t);
}

// --- Adam ------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments for each trainable tensor, in trainable_tensors order. Frequencies
// are not trainable and have no entry.
template <class T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  long step = 0;

  static AdamState for_params(BaconParams<T>& p) {
    AdamState s;
    for (auto t : network::trainable_tensors(p)) {
      s.m.emplace_back(t.size(), T(0));
      s.v.emplace_back(t.size(), T(0));
    }
    return s;
  }
};

// One bias-corrected Adam update on a flat tensor; `step` counts from 1.
template <class T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, long step, double lr,
                 const AdamConfig& c = {}) {
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  const T step_size = static_cast<T>(lr / corr1);
  const T inv_sqrt_corr2 = static_cast<T>(1.0 / std::sqrt(corr2));
  const T eps = static_cast<T>(c.eps);
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * grad[i];
    v[i] = b2 * v[i] + (T(1) - b2) * grad[i] * grad[i];
    param[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_corr2 + eps);
  }
}

template <class T>
void adam_step(BaconParams<T>& p, BaconGrads<T>& g, AdamState<T>& s, double lr, const AdamConfig& c = {}) {
  auto params = network::trainable_tensors(p);
  auto grads = network::trainable_tensors(g);
  if (params.size() != grads.size() || params.size() != s.m.size())
    throw InvalidInput("adam_step: optimizer state does not match parameters");
  for (const auto& t : grads)
    for (T x : t)
      if (!std::isfinite(x)) throw TrainingDiverged(static_cast<int>(s.step), "non-finite gradient");
  ++s.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != s.m[i].size()) throw InvalidInput("adam_step: optimizer state shape mismatch");
    adam_update<T>(params[i], grads[i], s.m[i], s.v[i], s.step, lr, c);
  }
}

// --- losses ----------------------------------------------------------------

template <class T>
struct LossResult {
  double total = 0.0;
  std::vector<double> per_head;
  std::vector<Matrix<T>> grads;  // dL/dy per head
};

namespace detail {

// weight * mean((y - t)^2) and its gradient, accumulated in double.
template <class T>
double weighted_mse(const Matrix<T>& y, const Matrix<T>& t, double weight, Matrix<T>& grad) {
  if (y.rows() != t.rows() || y.cols() != t.cols()) throw InvalidInput("loss: output and target shapes differ");
  if (y.size() == 0) throw InvalidInput("loss: empty output");
  const double n = static_cast<double>(y.size());
  Matrix<T> diff = y - t;
  const double loss = weight * diff.template cast<double>().squaredNorm() / n;
  grad = diff * static_cast<T>(2.0 * weight / n);
  return loss;
}

}  // namespace detail

// Sum over heads of mean squared error. Gradients are 2 (y - y_gt) / count.
template <class T>
LossResult<T> image_loss(const std::vector<Matrix<T>>& outputs, const std::vector<Matrix<T>>& targets) {
  if (outputs.size() != targets.size()) throw InvalidInput("image_loss: need one target per head");
  LossResult<T> r;
  r.grads.resize(outputs.size());
  for (std::size_t h = 0; h < outputs.size(); ++h) {
    r.per_head.push_back(detail::weighted_mse(outputs[h], targets[h], 1.0, r.grads[h]));
    r.total += r.per_head.back();
  }
  return r;
}

template <class T>
struct SdfLossResult {
  double total = 0.0;
  std::vector<double> per_head;
  std::vector<Matrix<T>> coarse_grads;
  std::vector<Matrix<T>> fine_grads;
};

// lambda * mse(coarse) + mse(fine), summed over heads. Ground truth is shared
// by every head (1 x batch).
template <class T>
SdfLossResult<T> sdf_loss(const std::vector<Matrix<T>>& coarse, const Matrix<T>& coarse_gt, const std::vector<Matrix<T>>& fine,
                          const Matrix<T>& fine_gt, double lambda = 0.01) {
  if (!(lambda >= 0.0)) throw InvalidInput("sdf_loss: lambda must be >= 0");
  if (coarse.size() != fine.size()) throw InvalidInput("sdf_loss: coarse and fine head counts differ");
  SdfLossResult<T> r;
  r.coarse_grads.resize(coarse.size());
  r.fine_grads.resize(fine.size());
  for (std::size_t h = 0; h < coarse.size(); ++h) {
    const double l = detail::weighted_mse(coarse[h], coarse_gt, lambda, r.coarse_grads[h]) +
                     detail::weighted_mse(fine[h], fine_gt, 1.0, r.fine_grads[h]);
    r.per_head.push_back(l);
    r.total += l;
  }
  return r;
}

// --- training loop -----------------------------------------------------------

// One forward/backward batch. targets holds one entry per head; an empty entry
// leaves that head unsupervised. The group contributes weight * mse per head.
template <class T>
struct SupervisionGroup {
  Inputs inputs;
  std::vector<Matrix<T>> targets;
  double weight = 1.0;
};

// Fills or refreshes the groups for a step. Must be deterministic in (seed, step).
template <class T>
using Sampler = std::function<void(int step, std::vector<SupervisionGroup<T>>& groups)>;

struct StepLog {
  int step = 0;
  double lr = 0.0;
  double total = 0.0;
  std::vector<double> per_head;
};

template <class T>
struct TrainResult {
  BaconParams<T> params;
  std::vector<StepLog> curve;
};

// Loss and gradients of every group for the current parameters.
template <class T>
std::pair<StepLog, BaconGrads<T>> evaluate_groups(const BaconParams<T>& p, const NetworkSpec& spec,
                                                  const std::vector<SupervisionGroup<T>>& groups,
                                                  std::vector<network::SineBasis<T>>* cache = nullptr) {
  StepLog log;
  log.per_head.assign(static_cast<std::size_t>(spec.num_heads()), 0.0);
  auto grads = BaconGrads<T>::zeros_like(p);
  if (cache) cache->resize(groups.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    if (static_cast<int>(g.targets.size()) != spec.num_heads()) throw InvalidInput("train: group needs one target slot per head");
    const network::SineBasis<T>* basis = nullptr;
    if (cache) {
      auto& b = (*cache)[k];
      if (!b.matches(g.inputs)) b = network::sine_basis(p, spec, g.inputs);
      basis = &b;
    }
    auto trace = network::forward(p, spec, g.inputs, basis);
    std::vector<Matrix<T>> dy(g.targets.size());
    for (std::size_t h = 0; h < g.targets.size(); ++h) {
      if (g.targets[h].size() == 0) continue;
      const double l = detail::weighted_mse(trace.heads[h], g.targets[h], g.weight, dy[h]);
      log.per_head[h] += l;
      log.total += l;
    }
    grads += network::backward(p, spec, trace, dy);
  }
  return {log, grads};
}

template <class T>
TrainResult<T> train(BaconParams<T> params, const NetworkSpec& spec, const Sampler<T>& sampler, const TrainConfig& config,
                     const AdamConfig& adam = {}) {
  config.validate();
  auto state = AdamState<T>::for_params(params);
  TrainResult<T> result;
  std::vector<SupervisionGroup<T>> groups;
  std::vector<network::SineBasis<T>> cache;
  for (int step = 0; step < config.total_steps; ++step) {
    sampler(step, groups);
    auto [log, grads] = evaluate_groups(params, spec, groups, &cache);
    log.step = step;
    log.lr = lr_at(step, config);
    if (!std::isfinite(log.total)) throw TrainingDiverged(step, "loss is not finite");
    adam_step(params, grads, state, log.lr, adam);
    result.curve.push_back(std::move(log));
  }
  result.params = std::move(params);
  return result;
}

inline CsvTable loss_curve_table(const std::vector<StepLog>& curve, int num_heads) {
  std::vector<std::string> header{"step", "lr", "total_loss"};
  for (int h = 0; h < num_heads; ++h) header.push_back("head" + std::to_string(h) + "_loss");
  CsvTable t(header);
  for (const auto& s : curve) {
    auto r = t.row();
    r << s.step << s.lr << s.total;
    for (double l : s.per_head) r << l;
  }
  return t;
}

}  // namespace bacon::training
