#pragma once

// Parameter containers, layers built from autodiff primitives, and the AdamW
// optimizer shared by both transformer stages.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "debatts/autodiff.hpp"
#include "debatts/errors.hpp"
#include "debatts/tensor.hpp"

namespace debatts {

using Rng = std::mt19937_64;

template <class T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    ad::Var<T> var;
    bool decay = true;
  };

  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  ad::Var<T> create(std::string name, Tensor<T> init, bool decay = true) {
    for (const auto& e : entries_)
      if (e.name == name) throw StateError("duplicate parameter name '" + name + "'");
    auto v = ad::Var<T>::parameter(std::move(init));
    entries_.push_back({std::move(name), v, decay});
    return v;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.var.value().size();
    return n;
  }

  const ad::Var<T>* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e.var;
    return nullptr;
  }

  void zero_grad() {
    for (auto& e : entries_) e.var.zero_grad();
  }

 private:
  std::vector<Entry> entries_;
};

template <class T>
struct Linear {
  ad::Var<T> weight;  // [in x out]
  ad::Var<T> bias;    // [out], invalid when the layer has no bias

  ad::Var<T> operator()(const ad::Var<T>& x) const {
    auto y = ad::matmul(x, weight);
    return bias.valid() ? ad::add_row(y, bias) : y;
  }
};

template <class T>
Linear<T> make_linear(ParameterSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                      bool with_bias, double init_std, Rng& rng) {
  Linear<T> l;
  l.weight = params.create(name + ".weight", normal_tensor<T>({in, out}, init_std, rng));
  if (with_bias) l.bias = params.create(name + ".bias", Tensor<T>({out}), false);
  return l;
}

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
  // Global gradient-norm clip; <= 0 disables.
  double clip_norm = 1.0;
};

// Decoupled weight decay Adam. Decay applies only to entries flagged decay.
template <class T>
class AdamW {
 public:
  AdamW(ParameterSet<T>& params, AdamWConfig cfg) : params_(&params), cfg_(cfg) {
    for (const auto& e : params.entries()) {
      m_.emplace_back(e.var.shape());
      v_.emplace_back(e.var.shape());
    }
  }

  const AdamWConfig& config() const { return cfg_; }
  long steps_taken() const { return t_; }

  // Applies one update from accumulated grads, then clears them. Returns the
  // pre-clip global grad norm.
  double step(double lr) {
    auto& entries = params_->entries();
    if (entries.size() != m_.size()) throw StateError("AdamW: parameter set changed after construction");
    double sq = 0;
    for (const auto& e : entries)
      if (e.var.has_grad())
        for (auto g : e.var.grad().values()) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("AdamW: non-finite gradient norm");
    const double clip = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto var = entries[i].var;
      if (!var.has_grad()) continue;
      auto& w = var.mutable_value();
      auto& g = var.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      const double decay = entries[i].decay ? cfg_.weight_decay : 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double gk = static_cast<double>(g[k]) * clip;
        const double mk = cfg_.beta1 * static_cast<double>(m[k]) + (1.0 - cfg_.beta1) * gk;
        const double vk = cfg_.beta2 * static_cast<double>(v[k]) + (1.0 - cfg_.beta2) * gk * gk;
        m[k] = static_cast<T>(mk);
        v[k] = static_cast<T>(vk);
        const double update = (mk / bc1) / (std::sqrt(vk / bc2) + cfg_.eps);
        w[k] = static_cast<T>(static_cast<double>(w[k]) * (1.0 - lr * decay) - lr * update);
      }
      g.fill(T(0));
    }
    return norm;
  }

  double step() { return step(cfg_.lr); }

 private:
  ParameterSet<T>* params_;
  AdamWConfig cfg_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  long t_ = 0;
};

// Linear warmup then cosine decay to 10% of the peak.
inline double warmup_cosine_lr(double peak, long step, long total, long warmup) {
  if (warmup > 0 && step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total <= warmup) return peak;
  const double p = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(total - warmup));
  return peak * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * p)));
}

}  // namespace debatts
