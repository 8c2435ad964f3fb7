#pragma once

#include "ssmix/corpus.hpp"
#include "ssmix/mixer.hpp"
#include "ssmix/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssmix {

enum class OptimizerKind { adamw, sgd };

struct PhaseConfig {
  double lr = 5e-5;
  std::size_t epochs = 3;
};

struct TrainConfig {
  PhaseConfig step1{5e-5, 3};
  PhaseConfig step2{1e-5, 5};
  std::size_t batch_size = 32;
  double lambda0 = 0.1;
  double alpha = 0.2;
  Variant variant = Variant::ssmix;
  MixLayer hiddenmix_layer = MixLayer::hidden;
  LossWeighting loss_weighting = LossWeighting::label_definition;
  std::size_t eval_every = 0; // optimizer steps between evaluations; 0 = once per epoch
  std::uint64_t seed = 0;
  double weight_decay = 1e-4;
  double warmup = 0.1; // fraction of the phase's steps
  OptimizerKind optimizer = OptimizerKind::adamw;

  /// Throws UsageError on an odd batch size, non-positive rates, or a bad mix config.
  void validate() const;
};

struct EvalRecord {
  std::size_t step = 0;
  std::string phase; // "step1" | "step2"
  Split split = Split::valid;
  double accuracy = 0.0;
  double loss = 0.0;
  double lambda_mean = 0.0;
};

struct RunMetrics {
  std::vector<EvalRecord> records;
  std::optional<double> best_accuracy;
  std::optional<std::size_t> best_record; // index into records
  std::vector<double> epoch_train_loss;   // mean batch loss per epoch
  std::vector<double> epoch_lambda_mean;  // mean soft-label lambda of mixed examples per epoch
  double seconds = 0.0;
};

struct PhaseResult {
  ToyTextClassifier best;
  RunMetrics metrics;
};

/// Called whenever a phase finds a new best validation accuracy.
using BestCallback = std::function<void(const ToyTextClassifier&, const EvalRecord&)>;

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0; // mean cross-entropy
};

EvalResult evaluate_full(const ToyTextClassifier& model, const Dataset& data);
/// Argmax accuracy; logit ties resolve to the smallest class index.
double evaluate(const ToyTextClassifier& model, const Dataset& data);

/// Linear warmup over the first `warmup` fraction of `total` steps, then
/// linear decay to zero. `completed` counts optimizer steps already taken.
double scheduled_lr(double base_lr, std::size_t completed, std::size_t total, double warmup);

struct BatchLoss {
  double loss = 0.0;
  Parameters grads;
  std::vector<double> term_losses;    // CE(B1), CE(B2), mix(B1,B2), mix(B2,B1)
  std::vector<double> lambdas;        // soft-label lambda of every mixed example
  std::size_t clean_correct = 0;
  std::size_t clean_count = 0;
};

/// Mean of the four group losses CE(B1), CE(B2), mix(B1, B2), mix(B2, B1),
/// with gradients accumulated across all four. B1[i] pairs with B2[i].
/// Variant::none uses only the two clean terms.
BatchLoss mixup_batch_loss(const ToyTextClassifier& model, std::span<const LabeledExample> first_half,
                           std::span<const LabeledExample> second_half, const TrainConfig& cfg,
                           Rng& rng);

/// Mean cross-entropy over a batch without mixing.
BatchLoss plain_batch_loss(const ToyTextClassifier& model, std::span<const LabeledExample> batch);

/// Standard mini-batch training without mixup; returns the best validation checkpoint.
PhaseResult train_step1(const ToyTextClassifier& initial, const Dataset& train, const Dataset& valid,
                        const TrainConfig& cfg, const BestCallback& on_best = {});

/// Mixup fine-tuning from the step-1 best checkpoint. Evaluates once before
/// the first update so the handoff is recorded.
PhaseResult train_step2(const ToyTextClassifier& step1_best, const Dataset& train, const Dataset& valid,
                        const TrainConfig& cfg, const BestCallback& on_best = {});

struct TwoStepResult {
  PhaseResult step1;
  PhaseResult step2;

  /// max(step-1 best, step-2 best); step 1 wins ties.
  double best_accuracy() const;
  const ToyTextClassifier& best_model() const;
};

TwoStepResult train_two_step(const ToyTextClassifier& initial, const Dataset& train, const Dataset& valid,
                             const TrainConfig& cfg, const BestCallback& on_best = {});

inline constexpr const char* kMetricsHeader = "step,phase,split,accuracy,loss,lambda_mean";
void write_metrics_rows(std::ostream& out, const RunMetrics& metrics);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double x);

} // namespace ssmix
