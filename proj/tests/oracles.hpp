// Test-only reference computations. Nothing here calls the analytic backward
// pass or the production span search.
#pragma once

#include "ssmix/corpus.hpp"
#include "ssmix/model.hpp"
#include "ssmix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

/// Central-difference gradient of `loss` with respect to every parameter.
/// The PAD embedding row is a frozen constant and keeps a zero gradient.
inline ssmix::Parameters fd_param_grads(ssmix::ToyTextClassifier model,
                                        const std::function<double(const ssmix::ToyTextClassifier&)>& loss,
                                        double step = 1e-3) {
  ssmix::Parameters out = ssmix::Parameters::zeros(model.dims());
  auto params = model.params().tensors();
  auto grads = out.tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    const std::size_t first = t == 0 ? model.dims().embed_dim : 0;
    for (std::size_t i = first; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + step;
      const double plus = loss(model);
      params[t][i] = saved - step;
      const double minus = loss(model);
      params[t][i] = saved;
      grads[t][i] = (plus - minus) / (2.0 * step);
    }
  }
  return out;
}

/// |a - b| <= rtol * max(|a|, |b|) + atol
inline bool close(double a, double b, double rtol, double atol = 1e-9) {
  return std::abs(a - b) <= rtol * std::max(std::abs(a), std::abs(b)) + atol;
}

/// Enumerates every window, sorts by (sum, start) and picks the first (least)
/// or the one with the largest sum and smallest start (most).
inline std::pair<std::size_t, std::size_t> brute_force_span(const std::vector<double>& scores,
                                                            const std::vector<bool>& special,
                                                            std::size_t length, bool most) {
  std::vector<std::pair<double, std::size_t>> windows;
  for (std::size_t start = 0; start + length <= scores.size(); ++start) {
    bool ok = true;
    double sum = 0.0;
    for (std::size_t k = 0; k < length; ++k) {
      ok = ok && !special[start + k];
      sum += scores[start + k];
    }
    if (ok) {
      windows.emplace_back(most ? -sum : sum, start);
    }
  }
  std::sort(windows.begin(), windows.end());
  return {windows.front().second, length};
}

/// E[max(X, 1 - X)] for X ~ Beta(a, a), by Simpson's rule after the
/// substitution u = (1 - x)^a, which removes the endpoint singularity.
inline double beta_max_mean(double a, std::size_t intervals = 20000) {
  const double beta_fn = std::tgamma(a) * std::tgamma(a) / std::tgamma(2.0 * a);
  const double upper = std::pow(0.5, a);
  auto integrand = [a](double u) { return std::pow(1.0 - std::pow(u, 1.0 / a), a); };
  const double h = upper / static_cast<double>(intervals);
  double sum = integrand(0.0) + integrand(upper);
  for (std::size_t k = 1; k < intervals; ++k) {
    sum += integrand(h * static_cast<double>(k)) * (k % 2 ? 4.0 : 2.0);
  }
  const double integral = sum * h / 3.0;
  return 2.0 / (a * beta_fn) * integral;
}

/// Random small model with every parameter populated (biases too).
inline ssmix::ToyTextClassifier random_model(const ssmix::ModelDims& dims, ssmix::Rng& rng, double scale = 0.8) {
  ssmix::ToyTextClassifier model(dims);
  for (auto t : model.params().tensors()) {
    for (double& x : t) {
      x = (2.0 * ssmix::uniform01(rng) - 1.0) * scale;
    }
  }
  model.zero_pad_row();
  return model;
}

/// [CLS] random content [SEP] with ids in [4, V).
inline ssmix::TokenSequence random_sequence(ssmix::Rng& rng, std::size_t vocab, std::size_t content) {
  std::vector<ssmix::TokenId> ids;
  for (std::size_t i = 0; i < content; ++i) {
    ids.push_back(static_cast<ssmix::TokenId>(4 + ssmix::uniform_index(rng, vocab - 4)));
  }
  return ssmix::TokenSequence::from_content(ids);
}

} // namespace oracle
