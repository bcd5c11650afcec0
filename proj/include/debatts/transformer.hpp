#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "debatts/autodiff.hpp"
#include "debatts/nn.hpp"

namespace debatts {

// Pre-norm block: x += o(attn(rope(q), rope(k), v)); x += down(gelu(up(norm(x)))).
template <class T>
struct TransformerBlock {
  ad::Var<T> attn_norm;
  Linear<T> wq, wk, wv, wo;
  ad::Var<T> mlp_norm;
  Linear<T> up, down;
};

template <class T>
std::vector<TransformerBlock<T>> make_blocks(ParameterSet<T>& params, const std::string& prefix, int n_layers,
                                             std::size_t d, std::size_t ff, Rng& rng) {
  const double std_in = 0.02;
  const double std_res = 0.02 / std::sqrt(2.0 * std::max(1, n_layers));
  std::vector<TransformerBlock<T>> blocks;
  for (int l = 0; l < n_layers; ++l) {
    const std::string p = prefix + std::to_string(l) + ".";
    TransformerBlock<T> b;
    b.attn_norm = params.create(p + "attn_norm", Tensor<T>({d}, T(1)), false);
    b.wq = make_linear(params, p + "attn.q", d, d, false, std_in, rng);
    b.wk = make_linear(params, p + "attn.k", d, d, false, std_in, rng);
    b.wv = make_linear(params, p + "attn.v", d, d, false, std_in, rng);
    b.wo = make_linear(params, p + "attn.o", d, d, false, std_res, rng);
    b.mlp_norm = params.create(p + "mlp_norm", Tensor<T>({d}, T(1)), false);
    b.up = make_linear(params, p + "mlp.up", d, ff, true, std_in, rng);
    b.down = make_linear(params, p + "mlp.down", ff, d, true, std_res, rng);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

// Positions restart at zero for every span.
inline std::vector<int> span_positions(std::size_t rows, std::span<const ad::RowSpan> spans) {
  std::vector<int> pos(rows);
  for (const auto& s : spans)
    for (std::size_t i = 0; i < s.length && s.offset + i < rows; ++i) pos[s.offset + i] = static_cast<int>(i);
  return pos;
}

template <class T>
ad::Var<T> run_blocks(const std::vector<TransformerBlock<T>>& blocks, ad::Var<T> x, std::span<const ad::RowSpan> spans,
                      std::size_t n_heads, bool causal) {
  const auto positions = span_positions(x.rows(), spans);
  const std::span<const int> pos(positions);
  for (const auto& b : blocks) {
    auto h = ad::rms_norm(x, b.attn_norm);
    auto q = ad::rope(b.wq(h), pos, n_heads);
    auto k = ad::rope(b.wk(h), pos, n_heads);
    auto v = b.wv(h);
    x = ad::add(x, b.wo(ad::attention(q, k, v, spans, n_heads, causal)));
    auto m = ad::rms_norm(x, b.mlp_norm);
    x = ad::add(x, b.down(ad::gelu(b.up(m))));
  }
  return x;
}

}  // namespace debatts
