#pragma once

#include "ssmix/corpus.hpp"
#include "ssmix/model.hpp"

#include <cstddef>
#include <vector>

namespace ssmix {

/// Per-position saliency scores aligned with a TokenSequence.
struct SaliencyMap {
  std::vector<double> scores;

  std::size_t size() const { return scores.size(); }
};

/// L2 norm of dL/de_i for every position of every sentence, where L is the
/// cross-entropy against the hard label `label`. Returns one map per sentence.
/// Parameter gradients from this pass are discarded.
std::vector<SaliencyMap> compute_saliency(const ToyTextClassifier& model, const LabeledExample& example,
                                          std::size_t label);

/// Same quantity by central differences, perturbing one embedding coordinate
/// of one position at a time (O(L * d) forward passes).
std::vector<SaliencyMap> saliency_fd_oracle(const ToyTextClassifier& model, const LabeledExample& example,
                                            std::size_t label, double step);

} // namespace ssmix
