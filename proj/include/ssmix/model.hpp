#pragma once

#include "ssmix/corpus.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ssmix {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t num_classes = 2;
  bool paired = false;

  std::size_t pooled_dim() const { return paired ? 2 * hidden_dim : hidden_dim; }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Trainable tensors. Also used as the gradient and optimizer-moment container.
struct Parameters {
  Matrix embedding; // V x d, row kPad is held at zero
  Matrix w1;        // d x h
  std::vector<double> b1;
  Matrix w2; // pooled_dim x C
  std::vector<double> b2;

  static Parameters zeros(const ModelDims& dims);

  std::array<std::span<double>, 5> tensors();
  std::array<std::span<const double>, 5> tensors() const;
  std::size_t count() const;

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// Embedding lookup -> per-token tanh dense layer -> mean pool over non-PAD
/// positions -> linear logits. Paired inputs pool each sentence separately and
/// concatenate the two pooled vectors.
class ToyTextClassifier {
public:
  ToyTextClassifier() = default;
  explicit ToyTextClassifier(const ModelDims& dims);

  /// Small random init: embeddings N(0, 0.1^2), Glorot-uniform dense layers,
  /// zero biases.
  static ToyTextClassifier initialize(const ModelDims& dims, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  const std::string& nonlinearity() const { return nonlinearity_; }
  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }

  /// Restores the PAD-row invariant.
  void zero_pad_row();
  bool all_finite() const;

  friend bool operator==(const ToyTextClassifier&, const ToyTextClassifier&) = default;

private:
  ModelDims dims_;
  std::string nonlinearity_ = "tanh";
  Parameters params_;
};

/// Target distribution (1 - lambda) * onehot(y_a) + lambda * onehot(y_b).
struct SoftLabel {
  std::size_t y_a = 0;
  std::size_t y_b = 0;
  double lambda = 0.0;

  static SoftLabel hard(std::size_t y) { return {y, y, 0.0}; }
};

/// Which weighting mixed losses use. `label_definition` puts (1 - lambda) on
/// y_a; `algorithm1` transposes the weights.
enum class LossWeighting { label_definition, algorithm1 };

SoftLabel apply_weighting(const SoftLabel& label, LossWeighting weighting);

/// Softmax cross-entropy of `logits` against class y.
double cross_entropy(std::span<const double> logits, std::size_t y);

/// (1 - lambda) * CE(logits, y_a) + lambda * CE(logits, y_b).
double mixup_loss(std::span<const double> logits, const SoftLabel& label);

enum class MixLayer { none, embed, hidden };

/// One token source feeding a sentence slot: ids and their embedding vectors.
struct TokenSource {
  std::vector<TokenId> ids;
  Matrix embeddings; // L x d
};

/// One sentence slot: a single source, or two sources interpolated at
/// `layer` with `weights`.
struct SentenceInput {
  std::vector<TokenSource> sources;
  std::vector<double> weights;
  MixLayer layer = MixLayer::none;
};

struct SentenceTrace {
  SentenceInput input;
  std::vector<bool> active; // non-PAD in any source
  std::size_t n_active = 0;
  Matrix combined_embedding; // L x d, layer none/embed
  std::vector<Matrix> hidden; // per source for layer hidden, else one entry
  Matrix combined_hidden;    // L x h, what gets pooled
  std::vector<double> pooled;
};

struct ForwardTrace {
  std::vector<SentenceTrace> sentences;
  std::vector<double> pooled;
  std::vector<double> logits;
  std::vector<double> probs;
  SoftLabel label;
  double loss = 0.0;
};

struct Gradients {
  Parameters params;
  /// [sentence][source] -> L x d gradient w.r.t. that position's input embedding.
  std::vector<std::vector<Matrix>> embeddings;
};

/// Plain embedding lookup for a token sequence.
TokenSource lookup(const ToyTextClassifier& model, const std::vector<TokenId>& ids);

ForwardTrace forward(const ToyTextClassifier& model, const LabeledExample& example,
                     const SoftLabel& label);
/// Forward against the example's own hard label.
ForwardTrace forward(const ToyTextClassifier& model, const LabeledExample& example);
/// Forward from explicit embedding inputs (one SentenceInput per sentence slot).
ForwardTrace forward_inputs(const ToyTextClassifier& model, std::vector<SentenceInput> inputs,
                            const SoftLabel& label);

/// Interpolates the embeddings of two examples: lambda * e_A + (1 - lambda) * e_B.
/// The trace's label is SoftLabel(y_A, y_B, 1 - lambda).
ForwardTrace forward_embedmix(const ToyTextClassifier& model, const LabeledExample& a,
                              const LabeledExample& b, double lambda);
/// As forward_embedmix, but interpolating at `layer` (embed or hidden).
ForwardTrace forward_hiddenmix(const ToyTextClassifier& model, const LabeledExample& a,
                               const LabeledExample& b, double lambda, MixLayer layer);

Gradients backward(const ToyTextClassifier& model, const ForwardTrace& trace);

/// Index of the largest logit; ties go to the smallest index.
std::size_t argmax(std::span<const double> logits);
std::size_t predict(const ToyTextClassifier& model, const LabeledExample& example);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// AdamW with decoupled weight decay (p *= 1 - lr * wd before the Adam step).
class AdamW {
public:
  AdamW() = default;
  AdamW(const ModelDims& dims, AdamWConfig config);

  /// Throws NumericError on any non-finite gradient before touching the model.
  void step(ToyTextClassifier& model, const Parameters& grads, double lr);
  std::uint64_t steps_taken() const { return t_; }
  const AdamWConfig& config() const { return config_; }

private:
  AdamWConfig config_;
  Parameters m_;
  Parameters v_;
  std::uint64_t t_ = 0;
};

/// Plain SGD with decoupled weight decay; debugging alternative to AdamW.
void sgd_step(ToyTextClassifier& model, const Parameters& grads, double lr, double weight_decay);

/// Adds `scale * src` into `dst`.
void accumulate(Parameters& dst, const Parameters& src, double scale);

/// Binary checkpoint: magic, format version, dims, nonlinearity tag, then all
/// tensors as little-endian IEEE-754 doubles.
void save_checkpoint(const ToyTextClassifier& model, const std::filesystem::path& path);
ToyTextClassifier load_checkpoint(const std::filesystem::path& path);

} // namespace ssmix
