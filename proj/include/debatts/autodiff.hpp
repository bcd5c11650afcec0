#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Var is a shared handle to a graph node. Ops build new nodes whose backward
// closures accumulate into their parents' grad buffers. Calling backward() on a
// scalar result walks the graph in reverse topological order. Parameters are
// leaf nodes created with requires_grad = true; their grads persist across
// graphs until zero_grad().

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "debatts/errors.hpp"
#include "debatts/tensor.hpp"

namespace debatts::ad {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <class T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

template <class T>
MatMap<T> as_mat(Tensor<T>& t) {
  return MatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
template <class T>
ConstMatMap<T> as_mat(const Tensor<T>& t) {
  return ConstMatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

// Additive pre-softmax mask for disallowed attention links.
inline constexpr double kMaskValue = -1e30;

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_mode_flag(); }

class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool has_grad() const { return !grad.shape().empty(); }

  Tensor<T>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <class T>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }
  static Var parameter(Tensor<T> value) { return leaf(std::move(value), true); }

  static Var leaf(Tensor<T> value, bool requires_grad) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  bool valid() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad(); }
  // Zero-filled buffer when nothing has been accumulated yet.
  const Tensor<T>& grad() const { return node_->grad_buffer(); }
  Tensor<T>& grad() { return node_->grad_buffer(); }
  void zero_grad() {
    if (node_->has_grad()) node_->grad.fill(T(0));
  }
  const NodePtr& node() const { return node_; }

  T item() const {
    if (value().size() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape()));
    return value()[0];
  }

  void backward() const {
    if (value().size() != 1) throw ShapeError("backward() requires a scalar root, got " + shape_str(shape()));
    if (!node_->requires_grad) return;
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node<T>* p = n->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    node_->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* n = *it;
      if (n->backward && n->has_grad()) n->backward(*n);
    }
  }

 private:
  NodePtr node_;
};

namespace detail {

template <class T>
Var<T> make_result(Tensor<T> value, std::vector<typename Var<T>::NodePtr> parents,
                   std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  bool needs = false;
  if (grad_enabled())
    for (const auto& p : parents) needs = needs || p->requires_grad;
  n->requires_grad = needs;
  if (needs) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Var<T>(std::move(n));
}

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class T>
void require_matrix(const Var<T>& a, const char* op) {
  if (a.value().rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

template <class T>
Tensor<T>* grad_of(Node<T>& n, std::size_t parent) {
  auto& p = n.parents[parent];
  return p->requires_grad ? &p->grad_buffer() : nullptr;
}

}  // namespace detail

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out({a.rows(), b.cols()});
  if (a.cols() > 0) as_mat(out).noalias() = as_mat(a.value()) * as_mat(b.value());
  return detail::make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    auto g = as_mat(static_cast<const Tensor<T>&>(n.grad));
    if (auto* ga = detail::grad_of(n, 0)) as_mat(*ga).noalias() += g * as_mat(bv).transpose();
    if (auto* gb = detail::grad_of(n, 1)) as_mat(*gb).noalias() += as_mat(av).transpose() * g;
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return detail::make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (auto* g = detail::grad_of(n, k))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return detail::make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    if (auto* g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * bv[i];
    if (auto* g = detail::grad_of(n, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * av[i];
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& x : out.values()) x *= s;
  return detail::make_result<T>(std::move(out), {a.node()}, [s](Node<T>& n) {
    if (auto* g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * s;
  });
}

// a[m x n] + bias[n], broadcast over rows.
template <class T>
Var<T> add_row(const Var<T>& a, const Var<T>& bias) {
  if (bias.value().size() != a.cols())
    throw ShapeError("add_row: bias " + shape_str(bias.shape()) + " does not match " + shape_str(a.shape()));
  Tensor<T> out = a.value();
  const std::size_t m = out.rows(), c = out.cols();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < c; ++j) out.at(r, j) += bias.value()[j];
  return detail::make_result<T>(std::move(out), {a.node(), bias.node()}, [](Node<T>& n) {
    if (auto* g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
    if (auto* g = detail::grad_of(n, 1)) {
      const std::size_t rows = n.grad.rows(), c = n.grad.cols();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) (*g)[j] += n.grad.at(r, j);
    }
  });
}

template <class T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (auto x : a.value().values()) s += x;
  return detail::make_result<T>(Tensor<T>({1}, std::vector<T>{s}), {a.node()}, [](Node<T>& n) {
    if (auto* g = detail::grad_of(n, 0))
      for (auto& x : g->values()) x += n.grad[0];
  });
}

// Gathers rows of table[V x d]; backward scatter-adds into the table.
template <class T>
Var<T> embedding(const Var<T>& table, std::span<const int> ids) {
  detail::require_matrix(table, "embedding");
  const std::size_t vocab = table.rows(), d = table.cols();
  Tensor<T> out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab)
      throw IndexError("embedding: id " + std::to_string(ids[r]) + " outside [0, " + std::to_string(vocab) + ")");
    std::copy_n(table.value().data() + static_cast<std::size_t>(ids[r]) * d, d, out.data() + r * d);
  }
  return detail::make_result<T>(std::move(out), {table.node()},
                                [idx = std::vector<int>(ids.begin(), ids.end()), d](Node<T>& n) {
                                  auto* g = detail::grad_of(n, 0);
                                  if (!g) return;
                                  for (std::size_t r = 0; r < idx.size(); ++r) {
                                    T* dst = g->data() + static_cast<std::size_t>(idx[r]) * d;
                                    const T* src = n.grad.data() + r * d;
                                    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                                  }
                                });
}

template <class T>
Var<T> rms_norm(const Var<T>& x, const Var<T>& gain, T eps = T(1e-6)) {
  detail::require_matrix(x, "rms_norm");
  const std::size_t m = x.rows(), c = x.cols();
  if (gain.value().size() != c) throw ShapeError("rms_norm: gain size mismatch " + shape_str(gain.shape()));
  Tensor<T> out({m, c});
  std::vector<T> inv(m);
  for (std::size_t r = 0; r < m; ++r) {
    auto xr = x.value().row(r);
    T ms = 0;
    for (auto v : xr) ms += v * v;
    inv[r] = T(1) / std::sqrt(ms / T(c) + eps);
    for (std::size_t j = 0; j < c; ++j) out.at(r, j) = xr[j] * inv[r] * gain.value()[j];
  }
  return detail::make_result<T>(std::move(out), {x.node(), gain.node()}, [inv = std::move(inv)](Node<T>& n) {
    const auto& xv = n.parents[0]->value;
    const auto& gv = n.parents[1]->value;
    auto* gx = detail::grad_of(n, 0);
    auto* gg = detail::grad_of(n, 1);
    const std::size_t m = xv.rows(), c = xv.cols();
    std::vector<T> dxhat(c);
    for (std::size_t r = 0; r < m; ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const T xhat = xv.at(r, j) * inv[r];
        const T dy = n.grad.at(r, j);
        if (gg) (*gg)[j] += dy * xhat;
        dxhat[j] = dy * gv[j];
        dot += dxhat[j] * xhat;
      }
      if (!gx) continue;
      dot /= T(c);
      for (std::size_t j = 0; j < c; ++j) gx->at(r, j) += inv[r] * (dxhat[j] - xv.at(r, j) * inv[r] * dot);
    }
  });
}

template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5)) {
  detail::require_matrix(x, "layer_norm");
  const std::size_t m = x.rows(), c = x.cols();
  if (gain.value().size() != c || bias.value().size() != c) throw ShapeError("layer_norm: affine size mismatch");
  Tensor<T> out({m, c});
  Tensor<T> xhat({m, c});
  std::vector<T> inv(m);
  for (std::size_t r = 0; r < m; ++r) {
    auto xr = x.value().row(r);
    T mu = 0;
    for (auto v : xr) mu += v;
    mu /= T(c);
    T var = 0;
    for (auto v : xr) var += (v - mu) * (v - mu);
    inv[r] = T(1) / std::sqrt(var / T(c) + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat.at(r, j) = (xr[j] - mu) * inv[r];
      out.at(r, j) = xhat.at(r, j) * gain.value()[j] + bias.value()[j];
    }
  }
  return detail::make_result<T>(
      std::move(out), {x.node(), gain.node(), bias.node()},
      [xhat = std::move(xhat), inv = std::move(inv)](Node<T>& n) {
        const auto& gv = n.parents[1]->value;
        auto* gx = detail::grad_of(n, 0);
        auto* gg = detail::grad_of(n, 1);
        auto* gb = detail::grad_of(n, 2);
        const std::size_t m = xhat.rows(), c = xhat.cols();
        std::vector<T> dxhat(c);
        for (std::size_t r = 0; r < m; ++r) {
          T mean_d = 0, mean_dx = 0;
          for (std::size_t j = 0; j < c; ++j) {
            const T dy = n.grad.at(r, j);
            if (gg) (*gg)[j] += dy * xhat.at(r, j);
            if (gb) (*gb)[j] += dy;
            dxhat[j] = dy * gv[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat.at(r, j);
          }
          if (!gx) continue;
          mean_d /= T(c);
          mean_dx /= T(c);
          for (std::size_t j = 0; j < c; ++j)
            gx->at(r, j) += inv[r] * (dxhat[j] - mean_d - xhat.at(r, j) * mean_dx);
        }
      });
}

// tanh approximation of GELU.
template <class T>
Var<T> gelu(const Var<T>& x) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = T(0.5) * v * (T(1) + std::tanh(c * (v + k * v * v * v)));
  return detail::make_result<T>(std::move(out), {x.node()}, [](Node<T>& n) {
    auto* g = detail::grad_of(n, 0);
    if (!g) return;
    const auto& xv = n.parents[0]->value;
    for (std::size_t i = 0; i < g->size(); ++i) {
      const T v = xv[i];
      const T t = std::tanh(c * (v + k * v * v * v));
      const T d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * c * (T(1) + T(3) * k * v * v);
      (*g)[i] += n.grad[i] * d;
    }
  });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = v > T(0) ? v : T(0);
  return detail::make_result<T>(std::move(out), {x.node()}, [](Node<T>& n) {
    auto* g = detail::grad_of(n, 0);
    if (!g) return;
    const auto& xv = n.parents[0]->value;
    for (std::size_t i = 0; i < g->size(); ++i)
      if (xv[i] > T(0)) (*g)[i] += n.grad[i];
  });
}

namespace detail {

// Rotates consecutive pairs within each head by position-dependent angles.
template <class T>
void rotate_pairs(const T* src, T* dst, std::size_t rows, std::size_t d, std::size_t n_heads,
                  std::span<const int> positions, T base, bool inverse, bool accumulate) {
  const std::size_t dh = d / n_heads;
  std::vector<T> inv_freq(dh / 2), cs(dh / 2), sn(dh / 2);
  for (std::size_t i = 0; i < dh / 2; ++i) inv_freq[i] = std::pow(base, -T(2 * i) / T(dh));
  for (std::size_t r = 0; r < rows; ++r) {
    const T pos = static_cast<T>(positions[r]);
    for (std::size_t i = 0; i < dh / 2; ++i) {
      cs[i] = std::cos(pos * inv_freq[i]);
      sn[i] = inverse ? -std::sin(pos * inv_freq[i]) : std::sin(pos * inv_freq[i]);
    }
    for (std::size_t h = 0; h < n_heads; ++h) {
      for (std::size_t i = 0; i < dh / 2; ++i) {
        const std::size_t at = r * d + h * dh + 2 * i;
        const T x0 = src[at], x1 = src[at + 1];
        const T y0 = x0 * cs[i] - x1 * sn[i];
        const T y1 = x0 * sn[i] + x1 * cs[i];
        if (accumulate) {
          dst[at] += y0;
          dst[at + 1] += y1;
        } else {
          dst[at] = y0;
          dst[at + 1] = y1;
        }
      }
    }
  }
}

}  // namespace detail

// Rotary position embedding applied per head; positions[r] is the in-sequence
// index of row r.
template <class T>
Var<T> rope(const Var<T>& x, std::span<const int> positions, std::size_t n_heads, T base = T(10000)) {
  detail::require_matrix(x, "rope");
  const std::size_t rows = x.rows(), d = x.cols();
  if (positions.size() != rows) throw ShapeError("rope: one position per row required");
  if (n_heads == 0 || d % n_heads != 0 || (d / n_heads) % 2 != 0)
    throw ShapeError("rope: head width must be even and divide the model width");
  Tensor<T> out({rows, d});
  detail::rotate_pairs(x.value().data(), out.data(), rows, d, n_heads, positions, base, false, false);
  return detail::make_result<T>(
      std::move(out), {x.node()},
      [pos = std::vector<int>(positions.begin(), positions.end()), n_heads, base](Node<T>& n) {
        auto* g = detail::grad_of(n, 0);
        if (!g) return;
        detail::rotate_pairs(n.grad.data(), g->data(), n.grad.rows(), n.grad.cols(), n_heads,
                             std::span<const int>(pos), base, true, true);
      });
}

// Half-open row range of one sequence inside a packed batch.
struct RowSpan {
  std::size_t offset = 0;
  std::size_t length = 0;
};

namespace detail {

template <class T>
void softmax_row_inplace(T* row, std::size_t n) {
  if (n == 0) return;
  T mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  T s = 0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    s += row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= s;
}

template <class T>
void check_spans(std::span<const RowSpan> spans, std::size_t rows) {
  std::size_t expect = 0;
  for (const auto& s : spans) {
    if (s.offset != expect) throw ShapeError("attention: row spans must tile the batch contiguously");
    expect += s.length;
  }
  if (expect != rows) throw ShapeError("attention: row spans cover " + std::to_string(expect) + " of " +
                                       std::to_string(rows) + " rows");
}

// Attention probabilities for every (span, head), row-major [L x L] each.
template <class T>
std::vector<RowMat<T>> attention_probs(const Tensor<T>& q, const Tensor<T>& k, std::span<const RowSpan> spans,
                                       std::size_t n_heads, bool causal) {
  const std::size_t d = q.cols(), dh = d / n_heads;
  const T scale = T(1) / std::sqrt(T(dh));
  std::vector<RowMat<T>> probs;
  probs.reserve(spans.size() * n_heads);
  for (const auto& s : spans) {
    const auto L = static_cast<Eigen::Index>(s.length);
    for (std::size_t h = 0; h < n_heads; ++h) {
      ConstStridedMap<T> qh(q.data() + s.offset * d + h * dh, L, static_cast<Eigen::Index>(dh),
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      ConstStridedMap<T> kh(k.data() + s.offset * d + h * dh, L, static_cast<Eigen::Index>(dh),
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      RowMat<T> p(L, L);
      if (L > 0) p.noalias() = (qh * kh.transpose()) * scale;
      if (causal)
        for (Eigen::Index i = 0; i < L; ++i)
          for (Eigen::Index j = i + 1; j < L; ++j) p(i, j) += static_cast<T>(kMaskValue);
      for (Eigen::Index i = 0; i < L; ++i) softmax_row_inplace(p.data() + i * L, static_cast<std::size_t>(L));
      probs.push_back(std::move(p));
    }
  }
  return probs;
}

}  // namespace detail

// Multi-head scaled dot-product attention over a packed batch. q, k, v are
// [rows x d]; each span attends only within itself. Causal masking forbids
// links to later rows of the same span.
template <class T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, std::span<const RowSpan> spans,
                 std::size_t n_heads, bool causal) {
  detail::require_same_shape(q, k, "attention");
  detail::require_same_shape(q, v, "attention");
  detail::require_matrix(q, "attention");
  const std::size_t rows = q.rows(), d = q.cols();
  if (n_heads == 0 || d % n_heads != 0) throw ShapeError("attention: n_heads must divide the model width");
  detail::check_spans<T>(spans, rows);
  const std::size_t dh = d / n_heads;
  const auto ED = static_cast<Eigen::Index>(d);
  const auto EH = static_cast<Eigen::Index>(dh);

  auto probs = detail::attention_probs(q.value(), k.value(), spans, n_heads, causal);
  Tensor<T> out({rows, d});
  for (std::size_t si = 0; si < spans.size(); ++si) {
    const auto& s = spans[si];
    const auto L = static_cast<Eigen::Index>(s.length);
    if (L == 0) continue;
    for (std::size_t h = 0; h < n_heads; ++h) {
      ConstStridedMap<T> vh(v.value().data() + s.offset * d + h * dh, L, EH, Eigen::OuterStride<>(ED));
      StridedMap<T> oh(out.data() + s.offset * d + h * dh, L, EH, Eigen::OuterStride<>(ED));
      oh.noalias() = probs[si * n_heads + h] * vh;
    }
  }

  return detail::make_result<T>(
      std::move(out), {q.node(), k.node(), v.node()},
      [probs = std::move(probs), sp = std::vector<RowSpan>(spans.begin(), spans.end()), n_heads, d, dh, ED,
       EH](Node<T>& n) {
        const T scale = T(1) / std::sqrt(T(dh));
        const auto& qv = n.parents[0]->value;
        const auto& kv = n.parents[1]->value;
        const auto& vv = n.parents[2]->value;
        auto* gq = detail::grad_of(n, 0);
        auto* gk = detail::grad_of(n, 1);
        auto* gv = detail::grad_of(n, 2);
        for (std::size_t si = 0; si < sp.size(); ++si) {
          const auto& s = sp[si];
          const auto L = static_cast<Eigen::Index>(s.length);
          if (L == 0) continue;
          const std::size_t base = s.offset * d;
          for (std::size_t h = 0; h < n_heads; ++h) {
            const auto& p = probs[si * n_heads + h];
            const Eigen::OuterStride<> st(ED);
            ConstStridedMap<T> go(n.grad.data() + base + h * dh, L, EH, st);
            ConstStridedMap<T> qh(qv.data() + base + h * dh, L, EH, st);
            ConstStridedMap<T> kh(kv.data() + base + h * dh, L, EH, st);
            ConstStridedMap<T> vh(vv.data() + base + h * dh, L, EH, st);
            if (gv) {
              StridedMap<T> gvh(gv->data() + base + h * dh, L, EH, st);
              gvh.noalias() += p.transpose() * go;
            }
            if (!gq && !gk) continue;
            RowMat<T> dp = go * vh.transpose();
            RowMat<T> ds(L, L);
            for (Eigen::Index i = 0; i < L; ++i) {
              T dot = 0;
              for (Eigen::Index j = 0; j < L; ++j) dot += dp(i, j) * p(i, j);
              for (Eigen::Index j = 0; j < L; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot) * scale;
            }
            if (gq) {
              StridedMap<T> gqh(gq->data() + base + h * dh, L, EH, st);
              gqh.noalias() += ds * kh;
            }
            if (gk) {
              StridedMap<T> gkh(gk->data() + base + h * dh, L, EH, st);
              gkh.noalias() += ds.transpose() * qh;
            }
          }
        }
      });
}

template <class T>
Var<T> slice_rows(const Var<T>& x, std::size_t offset, std::size_t count) {
  detail::require_matrix(x, "slice_rows");
  if (offset + count > x.rows()) throw ShapeError("slice_rows: range exceeds " + shape_str(x.shape()));
  const std::size_t c = x.cols();
  Tensor<T> out({count, c});
  std::copy_n(x.value().data() + offset * c, count * c, out.data());
  return detail::make_result<T>(std::move(out), {x.node()}, [offset, c](Node<T>& n) {
    auto* g = detail::grad_of(n, 0);
    if (!g) return;
    T* dst = g->data() + offset * c;
    for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += n.grad[i];
  });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t rows = 0;
  std::vector<typename Var<T>::NodePtr> nodes;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_rows");
    if (p.cols() != c) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
    nodes.push_back(p.node());
  }
  Tensor<T> out({rows, c});
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + at);
    at += p.value().size();
  }
  return detail::make_result<T>(std::move(out), std::move(nodes), [](Node<T>& n) {
    std::size_t at = 0;
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      const std::size_t sz = n.parents[k]->value.size();
      if (auto* g = detail::grad_of(n, k))
        for (std::size_t i = 0; i < sz; ++i) (*g)[i] += n.grad[at + i];
      at += sz;
    }
  });
}

// Mean negative log-likelihood over rows with mask[t] set. Rows with mask[t]
// unset receive exactly zero gradient.
template <class T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> targets, const std::vector<bool>& mask) {
  detail::require_matrix(logits, "softmax_cross_entropy");
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows || mask.size() != rows)
    throw ShapeError("softmax_cross_entropy: targets/mask length must equal logits rows");
  std::size_t count = 0;
  for (std::size_t t = 0; t < rows; ++t) {
    if (!mask[t]) continue;
    ++count;
    if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= vocab)
      throw IndexError("softmax_cross_entropy: target " + std::to_string(targets[t]) + " outside [0, " +
                       std::to_string(vocab) + ")");
  }
  if (count == 0) throw DomainError("softmax_cross_entropy: loss mask selects no positions");
  Tensor<T> probs({rows, vocab});
  T loss = 0;
  for (std::size_t t = 0; t < rows; ++t) {
    if (!mask[t]) continue;
    auto src = logits.value().row(t);
    auto p = probs.row(t);
    std::copy(src.begin(), src.end(), p.begin());
    T mx = p[0];
    for (auto x : p) mx = std::max(mx, x);
    T s = 0;
    for (auto x : p) s += std::exp(x - mx);
    const T lse = mx + std::log(s);
    loss += lse - src[static_cast<std::size_t>(targets[t])];
    for (auto& x : p) x = std::exp(x - lse);
  }
  const T inv = T(1) / static_cast<T>(count);
  return detail::make_result<T>(
      Tensor<T>({1}, std::vector<T>{loss * inv}), {logits.node()},
      [probs = std::move(probs), tg = std::vector<int>(targets.begin(), targets.end()), m = mask, inv](Node<T>& n) {
        auto* g = detail::grad_of(n, 0);
        if (!g) return;
        const T up = n.grad[0] * inv;
        for (std::size_t t = 0; t < tg.size(); ++t) {
          if (!m[t]) continue;
          auto gr = g->row(t);
          auto p = probs.row(t);
          for (std::size_t j = 0; j < gr.size(); ++j) gr[j] += up * p[j];
          gr[static_cast<std::size_t>(tg[t])] -= up;
        }
      });
}

// Row-wise softmax of a plain matrix.
template <class T>
Tensor<T> softmax_rows(Tensor<T> x) {
  for (std::size_t r = 0; r < x.rows(); ++r) detail::softmax_row_inplace(x.data() + r * x.cols(), x.cols());
  return x;
}

}  // namespace debatts::ad
