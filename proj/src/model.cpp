#include "ssmix/model.hpp"

#include "ssmix/error.hpp"
#include "ssmix/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

namespace ssmix {

// ---------------------------------------------------------------------------
// Parameters

Parameters Parameters::zeros(const ModelDims& dims) {
  Parameters p;
  p.embedding = Matrix(dims.vocab_size, dims.embed_dim);
  p.w1 = Matrix(dims.embed_dim, dims.hidden_dim);
  p.b1.assign(dims.hidden_dim, 0.0);
  p.w2 = Matrix(dims.pooled_dim(), dims.num_classes);
  p.b2.assign(dims.num_classes, 0.0);
  return p;
}

std::array<std::span<double>, 5> Parameters::tensors() {
  return {std::span<double>(embedding.data), std::span<double>(w1.data), std::span<double>(b1),
          std::span<double>(w2.data), std::span<double>(b2)};
}

std::array<std::span<const double>, 5> Parameters::tensors() const {
  return {std::span<const double>(embedding.data), std::span<const double>(w1.data),
          std::span<const double>(b1), std::span<const double>(w2.data),
          std::span<const double>(b2)};
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const auto t : tensors()) {
    n += t.size();
  }
  return n;
}

void accumulate(Parameters& dst, const Parameters& src, double scale) {
  auto d = dst.tensors();
  const auto s = src.tensors();
  for (std::size_t t = 0; t < d.size(); ++t) {
    for (std::size_t i = 0; i < d[t].size(); ++i) {
      d[t][i] += scale * s[t][i];
    }
  }
}

// ---------------------------------------------------------------------------
// Model

ToyTextClassifier::ToyTextClassifier(const ModelDims& dims)
    : dims_(dims), params_(Parameters::zeros(dims)) {
  if (dims.vocab_size <= static_cast<std::size_t>(kPad) || dims.embed_dim == 0 ||
      dims.hidden_dim == 0 || dims.num_classes < 2) {
    throw UsageError("model dimensions must be positive with at least 2 classes");
  }
}

ToyTextClassifier ToyTextClassifier::initialize(const ModelDims& dims, std::uint64_t seed) {
  ToyTextClassifier model(dims);
  Rng rng = derive_rng(seed, 0x1417);
  auto normal = [&rng] {
    // Box-Muller on the portable uniform.
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  auto glorot = [&rng](Matrix& m) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    for (auto& x : m.data) {
      x = (2.0 * uniform01(rng) - 1.0) * bound;
    }
  };
  for (auto& x : model.params_.embedding.data) {
    x = 0.1 * normal();
  }
  glorot(model.params_.w1);
  glorot(model.params_.w2);
  model.zero_pad_row();
  return model;
}

void ToyTextClassifier::zero_pad_row() {
  auto pad = params_.embedding.row(static_cast<std::size_t>(kPad));
  std::fill(pad.begin(), pad.end(), 0.0);
}

bool ToyTextClassifier::all_finite() const {
  for (const auto t : params_.tensors()) {
    if (!std::all_of(t.begin(), t.end(), [](double x) { return std::isfinite(x); })) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Losses

SoftLabel apply_weighting(const SoftLabel& label, LossWeighting weighting) {
  if (weighting == LossWeighting::algorithm1) {
    return {label.y_a, label.y_b, 1.0 - label.lambda};
  }
  return label;
}

namespace {

double log_sum_exp(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (const double z : logits) {
    s += std::exp(z - m);
  }
  return m + std::log(s);
}

void check_label(const SoftLabel& label, std::size_t num_classes) {
  if (!(label.lambda >= 0.0 && label.lambda <= 1.0)) {
    throw NumericError("mixup lambda " + std::to_string(label.lambda) + " outside [0, 1]");
  }
  if (label.y_a >= num_classes || label.y_b >= num_classes) {
    throw DataError("label index out of range for " + std::to_string(num_classes) + " classes");
  }
}

} // namespace

double cross_entropy(std::span<const double> logits, std::size_t y) {
  if (y >= logits.size()) {
    throw DataError("label index out of range");
  }
  return log_sum_exp(logits) - logits[y];
}

double mixup_loss(std::span<const double> logits, const SoftLabel& label) {
  check_label(label, logits.size());
  const double lse = log_sum_exp(logits);
  return (1.0 - label.lambda) * (lse - logits[label.y_a]) + label.lambda * (lse - logits[label.y_b]);
}

// ---------------------------------------------------------------------------
// Forward

TokenSource lookup(const ToyTextClassifier& model, const std::vector<TokenId>& ids) {
  const auto& emb = model.params().embedding;
  TokenSource src;
  src.ids = ids;
  src.embeddings = Matrix(ids.size(), emb.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= emb.rows) {
      throw DataError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                      std::to_string(emb.rows));
    }
    const auto row = emb.row(static_cast<std::size_t>(ids[i]));
    std::copy(row.begin(), row.end(), src.embeddings.row(i).begin());
  }
  return src;
}

namespace {

// out = tanh(W1^T x + b1)
void dense_tanh(const ToyTextClassifier& model, std::span<const double> x, std::span<double> out) {
  const auto& w1 = model.params().w1;
  const auto& b1 = model.params().b1;
  for (std::size_t k = 0; k < w1.cols; ++k) {
    double z = b1[k];
    for (std::size_t j = 0; j < w1.rows; ++j) {
      z += w1(j, k) * x[j];
    }
    out[k] = std::tanh(z);
  }
}

SentenceTrace forward_sentence(const ToyTextClassifier& model, SentenceInput input) {
  const auto& dims = model.dims();
  if (input.sources.empty() || input.sources.size() != input.weights.size()) {
    throw UsageError("sentence input needs one weight per source");
  }
  if (input.sources.size() > 1 && input.layer == MixLayer::none) {
    throw UsageError("multiple sources require an interpolation layer");
  }
  const std::size_t len = input.sources.front().ids.size();
  for (const auto& src : input.sources) {
    if (src.ids.size() != len || src.embeddings.rows != len || src.embeddings.cols != dims.embed_dim) {
      throw DataError("interpolated sources differ in length or embedding width");
    }
  }

  SentenceTrace tr;
  tr.active.assign(len, false);
  for (const auto& src : input.sources) {
    for (std::size_t i = 0; i < len; ++i) {
      if (src.ids[i] != kPad) {
        tr.active[i] = true;
      }
    }
  }
  tr.n_active = static_cast<std::size_t>(std::count(tr.active.begin(), tr.active.end(), true));
  if (tr.n_active == 0) {
    throw DataError("sentence has no non-PAD tokens");
  }

  tr.combined_hidden = Matrix(len, dims.hidden_dim);
  if (input.layer == MixLayer::hidden) {
    for (const auto& src : input.sources) {
      Matrix h(len, dims.hidden_dim);
      for (std::size_t i = 0; i < len; ++i) {
        if (src.ids[i] != kPad) {
          dense_tanh(model, src.embeddings.row(i), h.row(i));
        }
      }
      tr.hidden.push_back(std::move(h));
    }
    for (std::size_t s = 0; s < input.sources.size(); ++s) {
      for (std::size_t i = 0; i < len; ++i) {
        if (!tr.active[i]) {
          continue;
        }
        for (std::size_t k = 0; k < dims.hidden_dim; ++k) {
          tr.combined_hidden(i, k) += input.weights[s] * tr.hidden[s](i, k);
        }
      }
    }
  } else {
    tr.combined_embedding = Matrix(len, dims.embed_dim);
    for (std::size_t s = 0; s < input.sources.size(); ++s) {
      const auto& e = input.sources[s].embeddings;
      for (std::size_t n = 0; n < e.data.size(); ++n) {
        tr.combined_embedding.data[n] += input.weights[s] * e.data[n];
      }
    }
    for (std::size_t i = 0; i < len; ++i) {
      if (tr.active[i]) {
        dense_tanh(model, tr.combined_embedding.row(i), tr.combined_hidden.row(i));
      }
    }
    tr.hidden.push_back(tr.combined_hidden);
  }

  tr.pooled.assign(dims.hidden_dim, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    if (!tr.active[i]) {
      continue;
    }
    for (std::size_t k = 0; k < dims.hidden_dim; ++k) {
      tr.pooled[k] += tr.combined_hidden(i, k);
    }
  }
  for (auto& x : tr.pooled) {
    x /= static_cast<double>(tr.n_active);
  }
  tr.input = std::move(input);
  return tr;
}

SentenceInput single_source(const ToyTextClassifier& model, const TokenSequence& seq) {
  SentenceInput in;
  in.sources.push_back(lookup(model, seq.ids));
  in.weights = {1.0};
  return in;
}

std::vector<TokenId> padded(const std::vector<TokenId>& ids, std::size_t len) {
  auto out = ids;
  out.resize(len, kPad);
  return out;
}

SentenceInput interpolated(const ToyTextClassifier& model, const TokenSequence& a,
                           const TokenSequence& b, double lambda, MixLayer layer) {
  const std::size_t len = std::max(a.size(), b.size());
  SentenceInput in;
  in.sources.push_back(lookup(model, padded(a.ids, len)));
  in.sources.push_back(lookup(model, padded(b.ids, len)));
  in.weights = {lambda, 1.0 - lambda};
  in.layer = layer;
  return in;
}

} // namespace

ForwardTrace forward_inputs(const ToyTextClassifier& model, std::vector<SentenceInput> inputs,
                            const SoftLabel& label) {
  const auto& dims = model.dims();
  const std::size_t expected = dims.paired ? 2 : 1;
  if (inputs.size() != expected) {
    throw DataError(dims.paired ? "paired model needs two sentences" : "single-sentence model got a pair");
  }
  check_label(label, dims.num_classes);

  ForwardTrace tr;
  tr.label = label;
  for (auto& in : inputs) {
    tr.sentences.push_back(forward_sentence(model, std::move(in)));
    const auto& p = tr.sentences.back().pooled;
    tr.pooled.insert(tr.pooled.end(), p.begin(), p.end());
  }

  const auto& w2 = model.params().w2;
  tr.logits = model.params().b2;
  for (std::size_t k = 0; k < w2.rows; ++k) {
    for (std::size_t c = 0; c < w2.cols; ++c) {
      tr.logits[c] += w2(k, c) * tr.pooled[k];
    }
  }
  const double lse = log_sum_exp(tr.logits);
  tr.probs.resize(tr.logits.size());
  for (std::size_t c = 0; c < tr.logits.size(); ++c) {
    tr.probs[c] = std::exp(tr.logits[c] - lse);
  }
  tr.loss = mixup_loss(tr.logits, label);
  return tr;
}

ForwardTrace forward(const ToyTextClassifier& model, const LabeledExample& example,
                     const SoftLabel& label) {
  std::vector<SentenceInput> inputs;
  inputs.push_back(single_source(model, example.first));
  if (example.second) {
    inputs.push_back(single_source(model, *example.second));
  }
  return forward_inputs(model, std::move(inputs), label);
}

ForwardTrace forward(const ToyTextClassifier& model, const LabeledExample& example) {
  return forward(model, example, SoftLabel::hard(example.label));
}

ForwardTrace forward_hiddenmix(const ToyTextClassifier& model, const LabeledExample& a,
                               const LabeledExample& b, double lambda, MixLayer layer) {
  if (layer == MixLayer::none) {
    throw UsageError("hidden mix needs layer embed or hidden");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw NumericError("interpolation weight outside [0, 1]");
  }
  if (a.paired() != b.paired()) {
    throw DataError("cannot interpolate a paired example with a single one");
  }
  std::vector<SentenceInput> inputs;
  inputs.push_back(interpolated(model, a.first, b.first, lambda, layer));
  if (a.second) {
    inputs.push_back(interpolated(model, *a.second, *b.second, lambda, layer));
  }
  return forward_inputs(model, std::move(inputs), SoftLabel{a.label, b.label, 1.0 - lambda});
}

ForwardTrace forward_embedmix(const ToyTextClassifier& model, const LabeledExample& a,
                              const LabeledExample& b, double lambda) {
  return forward_hiddenmix(model, a, b, lambda, MixLayer::embed);
}

// ---------------------------------------------------------------------------
// Backward

Gradients backward(const ToyTextClassifier& model, const ForwardTrace& trace) {
  const auto& dims = model.dims();
  const auto& p = model.params();
  Gradients g;
  g.params = Parameters::zeros(dims);

  // dL/dlogits = softmax - soft target
  std::vector<double> dlogits = trace.probs;
  dlogits[trace.label.y_a] -= 1.0 - trace.label.lambda;
  dlogits[trace.label.y_b] -= trace.label.lambda;

  g.params.b2 = dlogits;
  std::vector<double> dpooled(p.w2.rows, 0.0);
  for (std::size_t k = 0; k < p.w2.rows; ++k) {
    for (std::size_t c = 0; c < p.w2.cols; ++c) {
      g.params.w2(k, c) = trace.pooled[k] * dlogits[c];
      dpooled[k] += p.w2(k, c) * dlogits[c];
    }
  }

  const std::size_t h = dims.hidden_dim;
  const std::size_t d = dims.embed_dim;
  std::vector<double> dz(h);
  std::vector<double> de(d);

  // Accumulates dz into W1/b1 given the layer input x, and writes dL/dx into de.
  auto through_dense = [&](std::span<const double> x, std::span<const double> hid,
                           std::span<const double> dhid) {
    for (std::size_t k = 0; k < h; ++k) {
      dz[k] = dhid[k] * (1.0 - hid[k] * hid[k]);
      g.params.b1[k] += dz[k];
    }
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        g.params.w1(j, k) += x[j] * dz[k];
        acc += p.w1(j, k) * dz[k];
      }
      de[j] = acc;
    }
  };

  for (std::size_t s = 0; s < trace.sentences.size(); ++s) {
    const auto& st = trace.sentences[s];
    const auto& in = st.input;
    const std::size_t len = st.active.size();
    const double inv_n = 1.0 / static_cast<double>(st.n_active);
    std::vector<double> dhid(h);
    for (std::size_t k = 0; k < h; ++k) {
      dhid[k] = dpooled[s * h + k] * inv_n;
    }

    std::vector<Matrix> demb;
    for (std::size_t src = 0; src < in.sources.size(); ++src) {
      demb.emplace_back(len, d);
    }

    std::vector<double> dhid_src(h);
    for (std::size_t i = 0; i < len; ++i) {
      if (!st.active[i]) {
        continue;
      }
      if (in.layer == MixLayer::hidden) {
        for (std::size_t src = 0; src < in.sources.size(); ++src) {
          if (in.sources[src].ids[i] == kPad) {
            continue;
          }
          for (std::size_t k = 0; k < h; ++k) {
            dhid_src[k] = in.weights[src] * dhid[k];
          }
          through_dense(in.sources[src].embeddings.row(i), st.hidden[src].row(i), dhid_src);
          std::copy(de.begin(), de.end(), demb[src].row(i).begin());
        }
      } else {
        through_dense(st.combined_embedding.row(i), st.combined_hidden.row(i), dhid);
        for (std::size_t src = 0; src < in.sources.size(); ++src) {
          auto out = demb[src].row(i);
          for (std::size_t j = 0; j < d; ++j) {
            out[j] = in.weights[src] * de[j];
          }
        }
      }
    }

    // Scatter per-position gradients onto embedding rows; the PAD row is a
    // constant zero and gets no gradient.
    for (std::size_t src = 0; src < in.sources.size(); ++src) {
      const auto& ids = in.sources[src].ids;
      for (std::size_t i = 0; i < len; ++i) {
        if (ids[i] == kPad) {
          continue;
        }
        auto row = g.params.embedding.row(static_cast<std::size_t>(ids[i]));
        const auto grad = demb[src].row(i);
        for (std::size_t j = 0; j < d; ++j) {
          row[j] += grad[j];
        }
      }
    }
    g.embeddings.push_back(std::move(demb));
  }
  return g;
}

std::size_t argmax(std::span<const double> logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::size_t predict(const ToyTextClassifier& model, const LabeledExample& example) {
  return argmax(forward(model, example, SoftLabel::hard(0)).logits);
}

// ---------------------------------------------------------------------------
// Optimizers

namespace {

void check_finite(const Parameters& grads) {
  for (const auto t : grads.tensors()) {
    for (const double x : t) {
      if (!std::isfinite(x)) {
        throw NumericError("non-finite gradient");
      }
    }
  }
}

} // namespace

AdamW::AdamW(const ModelDims& dims, AdamWConfig config)
    : config_(config), m_(Parameters::zeros(dims)), v_(Parameters::zeros(dims)) {}

void AdamW::step(ToyTextClassifier& model, const Parameters& grads, double lr) {
  check_finite(grads);
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  auto params = model.params().tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  const auto g = grads.tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      double& p = params[t][i];
      p *= 1.0 - lr * config_.weight_decay;
      m[t][i] = config_.beta1 * m[t][i] + (1.0 - config_.beta1) * g[t][i];
      v[t][i] = config_.beta2 * v[t][i] + (1.0 - config_.beta2) * g[t][i] * g[t][i];
      const double m_hat = m[t][i] / bc1;
      const double v_hat = v[t][i] / bc2;
      p -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
  model.zero_pad_row();
}

void sgd_step(ToyTextClassifier& model, const Parameters& grads, double lr, double weight_decay) {
  check_finite(grads);
  auto params = model.params().tensors();
  const auto g = grads.tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      params[t][i] -= lr * (g[t][i] + weight_decay * params[t][i]);
    }
  }
  model.zero_pad_row();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'S', 'M', 'I', 'X', 'C', 'K', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw DataError("truncated checkpoint");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return v;
}

} // namespace

void save_checkpoint(const ToyTextClassifier& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write checkpoint " + path.string());
  }
  const auto& dims = model.dims();
  out.write(kMagic, sizeof kMagic);
  put_u64(out, kFormatVersion);
  put_u64(out, dims.vocab_size);
  put_u64(out, dims.embed_dim);
  put_u64(out, dims.hidden_dim);
  put_u64(out, dims.num_classes);
  put_u64(out, dims.paired ? 1 : 0);
  put_u64(out, model.nonlinearity().size());
  out.write(model.nonlinearity().data(), static_cast<std::streamsize>(model.nonlinearity().size()));
  for (const auto t : model.params().tensors()) {
    for (const double x : t) {
      put_u64(out, std::bit_cast<std::uint64_t>(x));
    }
  }
  if (!out) {
    throw DataError("failed writing checkpoint " + path.string());
  }
}

ToyTextClassifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read checkpoint " + path.string());
  }
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic)) {
    throw DataError(path.string() + " is not a checkpoint");
  }
  if (const auto version = get_u64(in); version != kFormatVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelDims dims;
  dims.vocab_size = get_u64(in);
  dims.embed_dim = get_u64(in);
  dims.hidden_dim = get_u64(in);
  dims.num_classes = get_u64(in);
  dims.paired = get_u64(in) != 0;
  const auto tag_len = get_u64(in);
  if (tag_len > 64) {
    throw DataError("corrupt checkpoint header");
  }
  std::string tag(tag_len, '\0');
  in.read(tag.data(), static_cast<std::streamsize>(tag_len));
  if (tag != "tanh") {
    throw DataError("unsupported nonlinearity '" + tag + "'");
  }
  ToyTextClassifier model(dims);
  for (auto t : model.params().tensors()) {
    for (double& x : t) {
      x = std::bit_cast<double>(get_u64(in));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes in checkpoint " + path.string());
  }
  return model;
}

} // namespace ssmix
