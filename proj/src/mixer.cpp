#include "ssmix/mixer.hpp"

#include "ssmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace ssmix {

Variant parse_variant(std::string_view name) {
  for (const auto v : {Variant::none, Variant::ssmix, Variant::random_span, Variant::random_token,
                       Variant::unk_replace, Variant::embedmix, Variant::hiddenmix}) {
    if (to_string(v) == name) {
      return v;
    }
  }
  throw UsageError("unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(Variant v) {
  switch (v) {
  case Variant::none:
    return "none";
  case Variant::ssmix:
    return "ssmix";
  case Variant::random_span:
    return "random_span";
  case Variant::random_token:
    return "random_token";
  case Variant::unk_replace:
    return "unk_replace";
  case Variant::embedmix:
    return "embedmix";
  case Variant::hiddenmix:
    return "hiddenmix";
  }
  return "?";
}

bool is_input_level(Variant v) {
  return v == Variant::ssmix || v == Variant::random_span || v == Variant::random_token ||
         v == Variant::unk_replace;
}

void MixConfig::validate() const {
  if (!(lambda0 > 0.0 && lambda0 < 1.0)) {
    throw UsageError("lambda0 must lie in (0, 1)");
  }
  if (!(alpha > 0.0)) {
    throw UsageError("alpha must be positive");
  }
}

std::size_t span_length(double lambda0, std::size_t len_a, std::size_t len_b) {
  if (len_a == 0 || len_b == 0) {
    throw DataError("span length needs non-empty sentences");
  }
  const auto prior = static_cast<std::size_t>(std::floor(lambda0 * static_cast<double>(len_a)));
  return std::max<std::size_t>(std::min(prior, len_b), 1);
}

namespace {

// Content positions, checked to form one contiguous block.
std::vector<std::size_t> content_block(const std::vector<bool>& special_mask) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < special_mask.size(); ++i) {
    if (!special_mask[i]) {
      pos.push_back(i);
    }
  }
  if (!pos.empty() && pos.back() - pos.front() + 1 != pos.size()) {
    throw DataError("content tokens are not contiguous");
  }
  return pos;
}

struct SentenceMix {
  TokenSequence mixed;
  SentenceProvenance provenance;
};

SentenceMix splice_spans(const TokenSequence& a, const TokenSequence& b, Span span_a, Span span_b) {
  SentenceMix out{a, {}};
  for (std::size_t k = 0; k < span_a.length; ++k) {
    out.mixed.ids[span_a.start + k] = b.ids[span_b.start + k];
    out.provenance.replaced.push_back(span_a.start + k);
    out.provenance.source.push_back(span_b.start + k);
  }
  out.provenance.span_a = span_a;
  out.provenance.span_b = span_b;
  return out;
}

const TokenSequence& sentence(const LabeledExample& ex, std::size_t s) {
  return s == 0 ? ex.first : *ex.second;
}

std::size_t num_sentences(const LabeledExample& ex) { return ex.paired() ? 2 : 1; }

void check_compatible(const LabeledExample& a, const LabeledExample& b) {
  if (a.paired() != b.paired()) {
    throw DataError("cannot mix a paired example with a single-sentence one");
  }
}

// Assembles the example-level result; lambda = replaced / content of the mix.
MixResult assemble(const LabeledExample& a, std::size_t y_b, std::vector<SentenceMix> parts,
                   bool mix_label) {
  MixResult out;
  out.mixed.label = a.label;
  std::size_t replaced = 0;
  std::size_t content = 0;
  for (std::size_t s = 0; s < parts.size(); ++s) {
    replaced += parts[s].provenance.replaced.size();
    content += parts[s].mixed.content_length();
    if (s == 0) {
      out.mixed.first = std::move(parts[s].mixed);
    } else {
      out.mixed.second = std::move(parts[s].mixed);
    }
    out.provenance.push_back(std::move(parts[s].provenance));
  }
  out.lambda = mix_label ? static_cast<double>(replaced) / static_cast<double>(content) : 0.0;
  out.soft_label = SoftLabel{a.label, mix_label ? y_b : a.label, out.lambda};
  return out;
}

// k distinct draws from `pool`, returned ascending.
std::vector<std::size_t> sample_positions(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

} // namespace

Span select_span(const SaliencyMap& saliency, const std::vector<bool>& special_mask, std::size_t length,
                 SpanMode mode) {
  if (saliency.size() != special_mask.size()) {
    throw DataError("saliency map and sequence differ in length");
  }
  const auto content = content_block(special_mask);
  if (length == 0 || length > content.size()) {
    throw DataError("span length " + std::to_string(length) + " does not fit " +
                    std::to_string(content.size()) + " content tokens");
  }
  Span best{content.front(), length};
  double best_score = 0.0;
  for (std::size_t w = 0; w + length <= content.size(); ++w) {
    double score = 0.0;
    for (std::size_t k = 0; k < length; ++k) {
      score += saliency.scores[content[w + k]];
    }
    const bool better = mode == SpanMode::least ? score < best_score : score > best_score;
    if (w == 0 || better) {
      best = Span{content[w], length};
      best_score = score;
    }
  }
  return best;
}

MixResult ssmix(const LabeledExample& a, const LabeledExample& b, const std::vector<SaliencyMap>& sal_a,
                const std::vector<SaliencyMap>& sal_b, double lambda0) {
  check_compatible(a, b);
  const std::size_t n = num_sentences(a);
  if (sal_a.size() != n || sal_b.size() != n) {
    throw DataError("expected one saliency map per sentence");
  }
  std::vector<SentenceMix> parts;
  for (std::size_t s = 0; s < n; ++s) {
    const auto& xa = sentence(a, s);
    const auto& xb = sentence(b, s);
    const std::size_t l = span_length(lambda0, xa.content_length(), xb.content_length());
    const Span span_a = select_span(sal_a[s], xa.special_mask, l, SpanMode::least);
    const Span span_b = select_span(sal_b[s], xb.special_mask, l, SpanMode::most);
    parts.push_back(splice_spans(xa, xb, span_a, span_b));
  }
  return assemble(a, b.label, std::move(parts), true);
}

MixResult ssmix_paired(const LabeledExample& a, const LabeledExample& b,
                       const std::vector<SaliencyMap>& sal_a, const std::vector<SaliencyMap>& sal_b,
                       double lambda0) {
  if (!a.paired() || !b.paired()) {
    throw DataError("ssmix_paired needs paired examples");
  }
  return ssmix(a, b, sal_a, sal_b, lambda0);
}

MixResult random_span_mix(const LabeledExample& a, const LabeledExample& b, double lambda0, Rng& rng) {
  check_compatible(a, b);
  std::vector<SentenceMix> parts;
  for (std::size_t s = 0; s < num_sentences(a); ++s) {
    const auto& xa = sentence(a, s);
    const auto& xb = sentence(b, s);
    const auto ca = content_block(xa.special_mask);
    const auto cb = content_block(xb.special_mask);
    const std::size_t l = span_length(lambda0, ca.size(), cb.size());
    const Span span_a{ca[uniform_index(rng, ca.size() - l + 1)], l};
    const Span span_b{cb[uniform_index(rng, cb.size() - l + 1)], l};
    parts.push_back(splice_spans(xa, xb, span_a, span_b));
  }
  return assemble(a, b.label, std::move(parts), true);
}

MixResult random_token_mix(const LabeledExample& a, const LabeledExample& b, double lambda0, Rng& rng) {
  check_compatible(a, b);
  std::vector<SentenceMix> parts;
  for (std::size_t s = 0; s < num_sentences(a); ++s) {
    const auto& xa = sentence(a, s);
    const auto& xb = sentence(b, s);
    std::vector<std::size_t> shared;
    for (std::size_t i = 0; i < std::min(xa.size(), xb.size()); ++i) {
      if (!xa.special_mask[i] && !xb.special_mask[i]) {
        shared.push_back(i);
      }
    }
    if (shared.empty()) {
      throw DataError("no content positions shared by both sentences");
    }
    const std::size_t l =
        std::min(span_length(lambda0, xa.content_length(), xb.content_length()), shared.size());
    SentenceMix part{xa, {}};
    for (const std::size_t pos : sample_positions(std::move(shared), l, rng)) {
      part.mixed.ids[pos] = xb.ids[pos];
      part.provenance.replaced.push_back(pos);
      part.provenance.source.push_back(pos);
    }
    parts.push_back(std::move(part));
  }
  return assemble(a, b.label, std::move(parts), true);
}

MixResult unk_replace(const LabeledExample& a, double lambda0, Rng& rng) {
  std::vector<SentenceMix> parts;
  for (std::size_t s = 0; s < num_sentences(a); ++s) {
    const auto& xa = sentence(a, s);
    auto content = xa.content_positions();
    if (content.empty()) {
      throw DataError("cannot replace tokens in an empty sentence");
    }
    const std::size_t k = span_length(lambda0, content.size(), content.size());
    SentenceMix part{xa, {}};
    for (const std::size_t pos : sample_positions(std::move(content), k, rng)) {
      part.mixed.ids[pos] = kUnk;
      part.provenance.replaced.push_back(pos);
    }
    parts.push_back(std::move(part));
  }
  return assemble(a, a.label, std::move(parts), false);
}

double sample_interp_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) {
    throw UsageError("alpha must be positive");
  }
  // Beta(a, a) = X / (X + Y) with X, Y ~ Gamma(a, 1).
  std::gamma_distribution<double> gamma(alpha, 1.0);
  double x = 0.0;
  double y = 0.0;
  do {
    x = gamma(rng);
    y = gamma(rng);
  } while (x + y == 0.0);
  const double draw = x / (x + y);
  return std::max(draw, 1.0 - draw);
}

MixResult mix_examples(Variant variant, const LabeledExample& a, const LabeledExample& b,
                       const std::vector<SaliencyMap>& sal_a, const std::vector<SaliencyMap>& sal_b,
                       double lambda0, Rng& rng) {
  switch (variant) {
  case Variant::ssmix:
    return ssmix(a, b, sal_a, sal_b, lambda0);
  case Variant::random_span:
    return random_span_mix(a, b, lambda0, rng);
  case Variant::random_token:
    return random_token_mix(a, b, lambda0, rng);
  case Variant::unk_replace:
    return unk_replace(a, lambda0, rng);
  default:
    throw UsageError("variant '" + std::string(to_string(variant)) + "' does not splice tokens");
  }
}

} // namespace ssmix
