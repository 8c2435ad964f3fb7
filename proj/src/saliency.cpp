#include "ssmix/saliency.hpp"

#include "ssmix/error.hpp"

#include <cmath>

namespace ssmix {

std::vector<SaliencyMap> compute_saliency(const ToyTextClassifier& model, const LabeledExample& example,
                                          std::size_t label) {
  const auto trace = forward(model, example, SoftLabel::hard(label));
  const auto grads = backward(model, trace);
  std::vector<SaliencyMap> maps;
  for (const auto& per_source : grads.embeddings) {
    const Matrix& g = per_source.front();
    SaliencyMap map;
    map.scores.resize(g.rows);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double sq = 0.0;
      for (const double x : g.row(i)) {
        sq += x * x;
      }
      map.scores[i] = std::sqrt(sq);
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

std::vector<SaliencyMap> saliency_fd_oracle(const ToyTextClassifier& model, const LabeledExample& example,
                                            std::size_t label, double step) {
  if (!(step > 0.0)) {
    throw UsageError("finite-difference step must be positive");
  }
  std::vector<SentenceInput> base;
  for (const auto* seq : {&example.first, example.second ? &*example.second : nullptr}) {
    if (seq != nullptr) {
      SentenceInput in;
      in.sources.push_back(lookup(model, seq->ids));
      in.weights = {1.0};
      base.push_back(std::move(in));
    }
  }
  const SoftLabel target = SoftLabel::hard(label);

  std::vector<SaliencyMap> maps;
  for (std::size_t s = 0; s < base.size(); ++s) {
    const Matrix& emb = base[s].sources.front().embeddings;
    SaliencyMap map;
    map.scores.assign(emb.rows, 0.0);
    for (std::size_t i = 0; i < emb.rows; ++i) {
      double sq = 0.0;
      for (std::size_t j = 0; j < emb.cols; ++j) {
        auto plus = base;
        auto minus = base;
        plus[s].sources.front().embeddings(i, j) += step;
        minus[s].sources.front().embeddings(i, j) -= step;
        const double lp = forward_inputs(model, std::move(plus), target).loss;
        const double lm = forward_inputs(model, std::move(minus), target).loss;
        const double fd = (lp - lm) / (2.0 * step);
        sq += fd * fd;
      }
      map.scores[i] = std::sqrt(sq);
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

} // namespace ssmix
