#pragma once

// Objective evaluation over externally supplied transcripts, embeddings and
// style labels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "debatts/errors.hpp"

namespace debatts::metrics {

// Unit-cost Levenshtein distance with two rolling rows.
template <class Tok>
std::size_t edit_distance(std::span<const Tok> ref, std::span<const Tok> hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

// (S + I + D) / |ref|. Can exceed 1 when the hypothesis is long.
template <class Tok>
double wer(std::span<const Tok> ref, std::span<const Tok> hyp) {
  if (ref.empty()) throw DomainError("wer: reference must be nonempty");
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

template <class Tok>
double wer(const std::vector<Tok>& ref, const std::vector<Tok>& hyp) {
  return wer(std::span<const Tok>(ref), std::span<const Tok>(hyp));
}

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DomainError("cosine_similarity: length mismatch");
  if (u.empty()) throw DomainError("cosine_similarity: empty vectors");
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) throw DomainError("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine_similarity(std::span<const double>(u), std::span<const double>(v));
}

// Per-utterance agreement averaged over utterances.
inline double style_consistency(const std::vector<std::string>& generated, const std::vector<std::string>& reference) {
  if (generated.size() != reference.size()) throw DomainError("style_consistency: length mismatch");
  if (generated.empty()) throw DomainError("style_consistency: no labels");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < generated.size(); ++i) agree += generated[i] == reference[i];
  return static_cast<double>(agree) / static_cast<double>(generated.size());
}

}  // namespace debatts::metrics
