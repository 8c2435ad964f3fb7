#include "ssmix/trainer.hpp"

#include "ssmix/error.hpp"
#include "ssmix/saliency.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

namespace ssmix {

namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kMixerStream = 2;

} // namespace

void TrainConfig::validate() const {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw UsageError("batch size must be even and at least 2");
  }
  if (!(step1.lr > 0.0) || !(step2.lr > 0.0)) {
    throw UsageError("learning rates must be positive");
  }
  if (!(weight_decay >= 0.0) || !(warmup >= 0.0 && warmup < 1.0)) {
    throw UsageError("weight decay must be >= 0 and warmup in [0, 1)");
  }
  if (hiddenmix_layer == MixLayer::none) {
    throw UsageError("hiddenmix layer must be embed or hidden");
  }
  MixConfig{lambda0, variant, alpha}.validate();
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

EvalResult evaluate_full(const ToyTextClassifier& model, const Dataset& data) {
  if (data.examples.empty()) {
    throw DataError("cannot evaluate on an empty dataset");
  }
  std::size_t correct = 0;
  double loss = 0.0;
  for (const auto& ex : data.examples) {
    const auto trace = forward(model, ex);
    loss += trace.loss;
    if (argmax(trace.logits) == ex.label) {
      ++correct;
    }
  }
  const auto n = static_cast<double>(data.examples.size());
  return {static_cast<double>(correct) / n, loss / n};
}

double evaluate(const ToyTextClassifier& model, const Dataset& data) {
  return evaluate_full(model, data).accuracy;
}

double scheduled_lr(double base_lr, std::size_t completed, std::size_t total, double warmup) {
  const auto warm = static_cast<std::size_t>(std::floor(warmup * static_cast<double>(total)));
  if (completed < warm) {
    return base_lr * static_cast<double>(completed) / static_cast<double>(warm);
  }
  if (total <= warm) {
    return base_lr;
  }
  const double remaining = static_cast<double>(total - std::min(completed, total));
  return base_lr * remaining / static_cast<double>(total - warm);
}

// ---------------------------------------------------------------------------
// Batch losses

namespace {

struct TermAccumulator {
  const ToyTextClassifier& model;
  BatchLoss& out;
  double weight; // gradient scale per example

  double add(const ForwardTrace& trace) {
    accumulate(out.grads, backward(model, trace).params, weight);
    return trace.loss;
  }
};

double clean_term(const ToyTextClassifier& model, std::span<const LabeledExample> group, BatchLoss& out,
                  double grad_weight) {
  TermAccumulator acc{model, out, grad_weight};
  double sum = 0.0;
  for (const auto& ex : group) {
    const auto trace = forward(model, ex);
    sum += acc.add(trace);
    ++out.clean_count;
    if (argmax(trace.logits) == ex.label) {
      ++out.clean_correct;
    }
  }
  return sum / static_cast<double>(group.size());
}

double mixed_term(const ToyTextClassifier& model, std::span<const LabeledExample> targets,
                  std::span<const LabeledExample> sources, const TrainConfig& cfg, Rng& rng,
                  BatchLoss& out, double grad_weight) {
  TermAccumulator acc{model, out, grad_weight};
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& a = targets[i];
    const auto& b = sources[i];
    if (is_input_level(cfg.variant)) {
      std::vector<SaliencyMap> sal_a;
      std::vector<SaliencyMap> sal_b;
      if (cfg.variant == Variant::ssmix) {
        sal_a = compute_saliency(model, a, a.label);
        sal_b = compute_saliency(model, b, b.label);
      }
      const auto mix = mix_examples(cfg.variant, a, b, sal_a, sal_b, cfg.lambda0, rng);
      out.lambdas.push_back(mix.soft_label.lambda);
      sum += acc.add(forward(model, mix.mixed, apply_weighting(mix.soft_label, cfg.loss_weighting)));
    } else {
      const double weight_a = sample_interp_lambda(cfg.alpha, rng);
      const MixLayer layer = cfg.variant == Variant::embedmix ? MixLayer::embed : cfg.hiddenmix_layer;
      auto trace = forward_hiddenmix(model, a, b, weight_a, layer);
      out.lambdas.push_back(trace.label.lambda);
      if (cfg.loss_weighting == LossWeighting::algorithm1) {
        trace.label = apply_weighting(trace.label, cfg.loss_weighting);
        trace.loss = mixup_loss(trace.logits, trace.label);
      }
      sum += acc.add(trace);
    }
  }
  return sum / static_cast<double>(targets.size());
}

} // namespace

BatchLoss plain_batch_loss(const ToyTextClassifier& model, std::span<const LabeledExample> batch) {
  if (batch.empty()) {
    throw DataError("empty batch");
  }
  BatchLoss out;
  out.grads = Parameters::zeros(model.dims());
  out.loss = clean_term(model, batch, out, 1.0 / static_cast<double>(batch.size()));
  out.term_losses = {out.loss};
  return out;
}

BatchLoss mixup_batch_loss(const ToyTextClassifier& model, std::span<const LabeledExample> first_half,
                           std::span<const LabeledExample> second_half, const TrainConfig& cfg,
                           Rng& rng) {
  if (first_half.size() != second_half.size() || first_half.empty()) {
    throw DataError("mixup halves must be non-empty and equal in size");
  }
  BatchLoss out;
  out.grads = Parameters::zeros(model.dims());
  const auto n = static_cast<double>(first_half.size());
  const bool mixing = cfg.variant != Variant::none;
  const double terms = mixing ? 4.0 : 2.0;
  const double w = 1.0 / (terms * n);

  out.term_losses.push_back(clean_term(model, first_half, out, w));
  out.term_losses.push_back(clean_term(model, second_half, out, w));
  if (mixing) {
    out.term_losses.push_back(mixed_term(model, first_half, second_half, cfg, rng, out, w));
    out.term_losses.push_back(mixed_term(model, second_half, first_half, cfg, rng, out, w));
  }
  out.loss = std::accumulate(out.term_losses.begin(), out.term_losses.end(), 0.0) / terms;
  return out;
}

// ---------------------------------------------------------------------------
// Phases

namespace {

class Stepper {
public:
  Stepper(const TrainConfig& cfg, const ModelDims& dims) : cfg_(cfg) {
    if (cfg.optimizer == OptimizerKind::adamw) {
      adam_ = AdamW(dims, AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
    }
  }

  void step(ToyTextClassifier& model, const Parameters& grads, double lr) {
    if (cfg_.optimizer == OptimizerKind::adamw) {
      adam_.step(model, grads, lr);
    } else {
      sgd_step(model, grads, lr, cfg_.weight_decay);
    }
  }

private:
  const TrainConfig& cfg_;
  AdamW adam_;
};

std::vector<std::size_t> batch_sizes(std::size_t n, std::size_t batch, bool halve) {
  std::vector<std::size_t> sizes;
  for (std::size_t start = 0; start < n; start += batch) {
    std::size_t size = std::min(batch, n - start);
    if (halve) {
      size -= size % 2;
    }
    if (size > 0) {
      sizes.push_back(size);
    }
  }
  return sizes;
}

PhaseResult run_phase(const ToyTextClassifier& initial, const Dataset& train, const Dataset& valid,
                      const TrainConfig& cfg, bool mixup_phase, const BestCallback& on_best) {
  cfg.validate();
  if (train.examples.empty() || valid.examples.empty()) {
    throw DataError("training and validation sets must be non-empty");
  }
  const auto started = std::chrono::steady_clock::now();
  const PhaseConfig& phase = mixup_phase ? cfg.step2 : cfg.step1;
  const std::string phase_name = mixup_phase ? "step2" : "step1";

  PhaseResult result{initial, {}};
  ToyTextClassifier model = initial;
  Stepper optimizer(cfg, model.dims());
  Rng shuffle_rng = derive_rng(cfg.seed, kShuffleStream + (mixup_phase ? 100 : 0));
  Rng mixer_rng = derive_rng(cfg.seed, kMixerStream + (mixup_phase ? 100 : 0));

  const auto sizes = batch_sizes(train.size(), cfg.batch_size, mixup_phase);
  const std::size_t total_steps = sizes.size() * phase.epochs;
  std::size_t step = 0;

  // Running sums since the last evaluation.
  double window_loss = 0.0;
  std::size_t window_batches = 0;
  std::size_t window_correct = 0;
  std::size_t window_clean = 0;
  double window_lambda = 0.0;
  std::size_t window_mixed = 0;

  auto record_eval = [&](bool with_train_row) {
    const double lambda_mean = window_mixed ? window_lambda / static_cast<double>(window_mixed) : 0.0;
    if (with_train_row) {
      EvalRecord tr{step, phase_name, Split::train,
                    window_clean ? static_cast<double>(window_correct) / static_cast<double>(window_clean)
                                 : 0.0,
                    window_batches ? window_loss / static_cast<double>(window_batches) : 0.0,
                    lambda_mean};
      result.metrics.records.push_back(tr);
    }
    const auto ev = evaluate_full(model, valid);
    result.metrics.records.push_back(
        EvalRecord{step, phase_name, Split::valid, ev.accuracy, ev.loss, lambda_mean});
    if (!result.metrics.best_accuracy || ev.accuracy > *result.metrics.best_accuracy) {
      result.metrics.best_accuracy = ev.accuracy;
      result.metrics.best_record = result.metrics.records.size() - 1;
      result.best = model;
      if (on_best) {
        on_best(model, result.metrics.records.back());
      }
    }
    window_loss = 0.0;
    window_batches = 0;
    window_correct = 0;
    window_clean = 0;
    window_lambda = 0.0;
    window_mixed = 0;
  };

  if (mixup_phase) {
    record_eval(false);
  }

  std::vector<std::size_t> order(train.size());
  std::vector<LabeledExample> first;
  std::vector<LabeledExample> second;
  for (std::size_t epoch = 0; epoch < phase.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, shuffle_rng);
    double epoch_loss = 0.0;
    double epoch_lambda = 0.0;
    std::size_t epoch_mixed = 0;

    std::size_t offset = 0;
    for (const std::size_t size : sizes) {
      BatchLoss batch;
      if (mixup_phase) {
        first.clear();
        second.clear();
        for (std::size_t k = 0; k < size / 2; ++k) {
          first.push_back(train.examples[order[offset + k]]);
          second.push_back(train.examples[order[offset + size / 2 + k]]);
        }
        batch = mixup_batch_loss(model, first, second, cfg, mixer_rng);
      } else {
        first.clear();
        for (std::size_t k = 0; k < size; ++k) {
          first.push_back(train.examples[order[offset + k]]);
        }
        batch = plain_batch_loss(model, first);
      }
      offset += std::min(cfg.batch_size, train.size() - offset);

      if (!std::isfinite(batch.loss)) {
        throw NumericError("training loss became non-finite at " + phase_name + " step " +
                           std::to_string(step));
      }
      optimizer.step(model, batch.grads, scheduled_lr(phase.lr, step, total_steps, cfg.warmup));
      ++step;

      window_loss += batch.loss;
      ++window_batches;
      window_correct += batch.clean_correct;
      window_clean += batch.clean_count;
      for (const double l : batch.lambdas) {
        window_lambda += l;
        epoch_lambda += l;
      }
      window_mixed += batch.lambdas.size();
      epoch_mixed += batch.lambdas.size();
      epoch_loss += batch.loss;

      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
        record_eval(true);
      }
    }
    result.metrics.epoch_train_loss.push_back(sizes.empty() ? 0.0
                                                            : epoch_loss / static_cast<double>(sizes.size()));
    result.metrics.epoch_lambda_mean.push_back(epoch_mixed ? epoch_lambda / static_cast<double>(epoch_mixed)
                                                           : 0.0);
    if (cfg.eval_every == 0) {
      record_eval(true);
    }
  }

  result.metrics.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

} // namespace

PhaseResult train_step1(const ToyTextClassifier& initial, const Dataset& train, const Dataset& valid,
                        const TrainConfig& cfg, const BestCallback& on_best) {
  return run_phase(initial, train, valid, cfg, false, on_best);
}

PhaseResult train_step2(const ToyTextClassifier& step1_best, const Dataset& train, const Dataset& valid,
                        const TrainConfig& cfg, const BestCallback& on_best) {
  return run_phase(step1_best, train, valid, cfg, true, on_best);
}

double TwoStepResult::best_accuracy() const {
  const double a = step1.metrics.best_accuracy.value_or(0.0);
  const double b = step2.metrics.best_accuracy.value_or(0.0);
  return std::max(a, b);
}

const ToyTextClassifier& TwoStepResult::best_model() const {
  const double a = step1.metrics.best_accuracy.value_or(-1.0);
  const double b = step2.metrics.best_accuracy.value_or(-1.0);
  return b > a ? step2.best : step1.best;
}

TwoStepResult train_two_step(const ToyTextClassifier& initial, const Dataset& train, const Dataset& valid,
                             const TrainConfig& cfg, const BestCallback& on_best) {
  TwoStepResult out;
  out.step1 = train_step1(initial, train, valid, cfg, on_best);
  out.step2 = train_step2(out.step1.best, train, valid, cfg, on_best);
  return out;
}

void write_metrics_rows(std::ostream& out, const RunMetrics& metrics) {
  for (const auto& r : metrics.records) {
    out << r.step << ',' << r.phase << ',' << to_string(r.split) << ',' << format_double(r.accuracy) << ','
        << format_double(r.loss) << ',' << format_double(r.lambda_mean) << '\n';
  }
}

} // namespace ssmix
