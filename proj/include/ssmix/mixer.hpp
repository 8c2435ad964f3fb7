#pragma once

#include "ssmix/corpus.hpp"
#include "ssmix/model.hpp"
#include "ssmix/rng.hpp"
#include "ssmix/saliency.hpp"

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace ssmix {

/// Contiguous run of content positions [start, start + length).
struct Span {
  std::size_t start = 0;
  std::size_t length = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

/// Where the replaced tokens of one sentence came from.
struct SentenceProvenance {
  std::vector<std::size_t> replaced;  // positions in the mixed sentence, ascending
  std::vector<std::size_t> source;    // matching positions in x^B (empty for UNK replacement)
  std::optional<Span> span_a;         // span variants only
  std::optional<Span> span_b;
};

struct MixResult {
  LabeledExample mixed; // label field carries y_A
  SoftLabel soft_label;
  std::vector<SentenceProvenance> provenance; // one per sentence
  double lambda = 0.0;
};

enum class Variant { none, ssmix, random_span, random_token, unk_replace, embedmix, hiddenmix };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant v);
/// Variants that splice tokens (as opposed to interpolating vectors).
bool is_input_level(Variant v);

struct MixConfig {
  double lambda0 = 0.1;
  Variant variant = Variant::ssmix;
  double alpha = 0.2;

  /// Throws UsageError unless 0 < lambda0 < 1 and alpha > 0.
  void validate() const;
};

/// max(min(floor(lambda0 * len_a), len_b), 1).
std::size_t span_length(double lambda0, std::size_t len_a, std::size_t len_b);

enum class SpanMode { least, most };

/// Window of `length` consecutive content positions with the smallest (least)
/// or largest (most) score sum; ties go to the smallest start.
Span select_span(const SaliencyMap& saliency, const std::vector<bool>& special_mask, std::size_t length,
                 SpanMode mode);

/// Replaces the least salient span of each sentence of `a` with the most
/// salient equal-length span of the matching sentence of `b`. Works for single
/// and paired examples; lambda = replaced tokens / content tokens of the mix.
MixResult ssmix(const LabeledExample& a, const LabeledExample& b, const std::vector<SaliencyMap>& sal_a,
                const std::vector<SaliencyMap>& sal_b, double lambda0);

/// ssmix restricted to paired examples.
MixResult ssmix_paired(const LabeledExample& a, const LabeledExample& b,
                       const std::vector<SaliencyMap>& sal_a, const std::vector<SaliencyMap>& sal_b,
                       double lambda0);

/// ssmix with both spans drawn uniformly over valid windows.
MixResult random_span_mix(const LabeledExample& a, const LabeledExample& b, double lambda0, Rng& rng);

/// Position-preserving replacement of l uniformly chosen content positions
/// shared by both sentences.
MixResult random_token_mix(const LabeledExample& a, const LabeledExample& b, double lambda0, Rng& rng);

/// Replaces max(min(floor(lambda0 * len), len), 1) random content tokens with
/// UNK; the label stays y_A (lambda = 0).
MixResult unk_replace(const LabeledExample& a, double lambda0, Rng& rng);

/// lambda' ~ Beta(alpha, alpha) via two Gamma draws; returns max(lambda', 1 - lambda').
double sample_interp_lambda(double alpha, Rng& rng);

/// Dispatches an input-level variant. Saliency maps are only read for ssmix.
MixResult mix_examples(Variant variant, const LabeledExample& a, const LabeledExample& b,
                       const std::vector<SaliencyMap>& sal_a, const std::vector<SaliencyMap>& sal_b,
                       double lambda0, Rng& rng);

} // namespace ssmix
