#include "oracles.hpp"

#include "ssmix/error.hpp"
#include "ssmix/model.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace ssmix;

namespace {

LabeledExample single(TokenSequence seq, std::size_t label) {
  LabeledExample ex;
  ex.first = std::move(seq);
  ex.label = label;
  return ex;
}

void check_params_close(const Parameters& analytic, const Parameters& numeric, double rtol) {
  const auto a = analytic.tensors();
  const auto n = numeric.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      INFO("tensor " << t << " index " << i);
      CHECK(oracle::close(a[t][i], n[t][i], rtol, 1e-8));
    }
  }
}

} // namespace

TEST_CASE("all-zero model gives uniform softmax") {
  for (const std::size_t classes : {2, 3, 6}) {
    ToyTextClassifier model(ModelDims{10, 3, 4, classes, false});
    const auto ex = single(TokenSequence::from_content({5, 6, 7}), 1);
    const auto tr = forward(model, ex);
    for (const double z : tr.logits) {
      CHECK(z == 0.0);
    }
    CHECK(tr.loss == doctest::Approx(std::log(static_cast<double>(classes))).epsilon(1e-15));
  }
}

TEST_CASE("forward matches a scalar hand computation") {
  ToyTextClassifier model(ModelDims{5, 1, 1, 2, false});
  auto& p = model.params();
  p.embedding(kCls, 0) = 0.3;
  p.embedding(kSep, 0) = -0.2;
  p.embedding(4, 0) = 1.5;
  p.w1(0, 0) = 0.7;
  p.b1[0] = 0.1;
  p.w2(0, 0) = 2.0;
  p.w2(0, 1) = -1.0;
  p.b2 = {0.05, -0.3};
  const auto ex = single(TokenSequence::from_content({4}), 1);

  const double h_cls = std::tanh(0.7 * 0.3 + 0.1);
  const double h_tok = std::tanh(0.7 * 1.5 + 0.1);
  const double h_sep = std::tanh(0.7 * -0.2 + 0.1);
  const double pooled = (h_cls + h_tok + h_sep) / 3.0;
  const double z0 = 2.0 * pooled + 0.05;
  const double z1 = -1.0 * pooled - 0.3;
  const double expected = std::log(std::exp(z0) + std::exp(z1)) - z1;

  const auto tr = forward(model, ex);
  CHECK(tr.logits[0] == doctest::Approx(z0).epsilon(1e-14));
  CHECK(tr.logits[1] == doctest::Approx(z1).epsilon(1e-14));
  CHECK(tr.loss == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("forward is deterministic and validates ids") {
  Rng rng(3);
  const auto model = oracle::random_model(ModelDims{12, 3, 4, 3, false}, rng);
  const auto ex = single(oracle::random_sequence(rng, 12, 5), 2);
  const auto a = forward(model, ex);
  const auto b = forward(model, ex);
  CHECK(a.logits == b.logits);
  CHECK(a.loss == b.loss);

  auto bad = ex;
  bad.first.ids[2] = 12;
  CHECK_THROWS_AS(forward(model, bad), DataError);
  CHECK_THROWS_AS(forward(model, ex, SoftLabel{0, 3, 0.5}), DataError);
}

TEST_CASE("mixup_loss") {
  const std::vector<double> zero{0.0, 0.0};
  CHECK(mixup_loss(zero, SoftLabel{0, 1, 0.2}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const std::vector<double> logits{0.3, -1.2, 2.0};
  CHECK(mixup_loss(logits, SoftLabel{0, 2, 0.0}) == cross_entropy(logits, 0));
  CHECK(mixup_loss(logits, SoftLabel{0, 2, 1.0}) == cross_entropy(logits, 2));
  CHECK_THROWS_AS(mixup_loss(logits, SoftLabel{0, 2, 1.5}), NumericError);
  CHECK_THROWS_AS(mixup_loss(logits, SoftLabel{0, 2, -0.1}), NumericError);

  // equals CE against the soft target distribution
  const double lse = std::log(std::exp(0.3) + std::exp(-1.2) + std::exp(2.0));
  const double soft = -(0.75 * (0.3 - lse) + 0.25 * (2.0 - lse));
  CHECK(mixup_loss(logits, SoftLabel{0, 2, 0.25}) == doctest::Approx(soft).epsilon(1e-14));

  // linear in lambda
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const double lam = uniform01(rng);
    const double l0 = mixup_loss(logits, SoftLabel{1, 2, 0.0});
    const double l1 = mixup_loss(logits, SoftLabel{1, 2, 1.0});
    CHECK(std::abs(mixup_loss(logits, SoftLabel{1, 2, lam}) - ((1 - lam) * l0 + lam * l1)) <= 1e-12);
    CHECK(mixup_loss(logits, SoftLabel{1, 2, lam}) > 0.0);
  }

  CHECK(apply_weighting(SoftLabel{0, 1, 0.2}, LossWeighting::algorithm1).lambda == doctest::Approx(0.8));
  CHECK(apply_weighting(SoftLabel{0, 1, 0.2}, LossWeighting::label_definition).lambda == 0.2);
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const bool paired = trial % 3 == 2;
    const ModelDims dims{4 + uniform_index(rng, 16), 1 + uniform_index(rng, 4), 1 + uniform_index(rng, 4),
                         2 + uniform_index(rng, 3), paired};
    const auto model = oracle::random_model(dims, rng);
    LabeledExample ex = single(oracle::random_sequence(rng, dims.vocab_size, 1 + uniform_index(rng, 4)),
                               uniform_index(rng, dims.num_classes));
    if (paired) {
      ex.second = oracle::random_sequence(rng, dims.vocab_size, 1 + uniform_index(rng, 4));
    }
    const SoftLabel label{ex.label, uniform_index(rng, dims.num_classes), uniform01(rng)};
    const auto analytic = backward(model, forward(model, ex, label)).params;
    const auto numeric = oracle::fd_param_grads(
        model, [&](const ToyTextClassifier& m) { return forward(m, ex, label).loss; });
    check_params_close(analytic, numeric, 1e-4);
  }
}

TEST_CASE("backward through interpolated forwards matches finite differences") {
  Rng rng(77);
  for (const MixLayer layer : {MixLayer::embed, MixLayer::hidden}) {
    for (int trial = 0; trial < 4; ++trial) {
      const ModelDims dims{12, 3, 4, 3, trial % 2 == 1};
      const auto model = oracle::random_model(dims, rng);
      LabeledExample a = single(oracle::random_sequence(rng, 12, 2 + uniform_index(rng, 3)), 0);
      LabeledExample b = single(oracle::random_sequence(rng, 12, 2 + uniform_index(rng, 3)), 2);
      if (dims.paired) {
        a.second = oracle::random_sequence(rng, 12, 3);
        b.second = oracle::random_sequence(rng, 12, 1);
      }
      const double lam = 0.5 + 0.5 * uniform01(rng);
      const auto analytic = backward(model, forward_hiddenmix(model, a, b, lam, layer)).params;
      const auto numeric = oracle::fd_param_grads(
          model, [&](const ToyTextClassifier& m) { return forward_hiddenmix(m, a, b, lam, layer).loss; });
      check_params_close(analytic, numeric, 1e-4);
    }
  }
}

TEST_CASE("embedding gradient is zero at PAD positions") {
  Rng rng(5);
  const auto model = oracle::random_model(ModelDims{10, 3, 3, 2, false}, rng);
  LabeledExample ex = single(oracle::random_sequence(rng, 10, 3), 1);
  ex.first.ids.push_back(kPad);
  ex.first.special_mask.push_back(true);
  const auto g = backward(model, forward(model, ex));
  const auto& pad_grad = g.embeddings[0][0];
  for (const double x : pad_grad.row(ex.first.size() - 1)) {
    CHECK(x == 0.0);
  }
  for (const double x : g.params.embedding.row(kPad)) {
    CHECK(x == 0.0);
  }
}

TEST_CASE("lambda = 0 soft label reduces to plain cross-entropy gradients") {
  Rng rng(9);
  const auto model = oracle::random_model(ModelDims{10, 3, 3, 3, false}, rng);
  const auto ex = single(oracle::random_sequence(rng, 10, 4), 1);
  const auto hard = backward(model, forward(model, ex, SoftLabel::hard(1))).params;
  const auto soft = backward(model, forward(model, ex, SoftLabel{1, 2, 0.0})).params;
  CHECK(hard == soft);
}

TEST_CASE("embedmix and hiddenmix") {
  Rng rng(31);
  const auto model = oracle::random_model(ModelDims{15, 3, 4, 3, false}, rng);
  const auto a = single(oracle::random_sequence(rng, 15, 5), 0);
  const auto b = single(oracle::random_sequence(rng, 15, 3), 2);

  SUBCASE("lambda = 1 reproduces forward(A)") {
    const auto plain = forward(model, a);
    for (const MixLayer layer : {MixLayer::embed, MixLayer::hidden}) {
      const auto mixed = forward_hiddenmix(model, a, b, 1.0, layer);
      CHECK(mixed.logits == plain.logits);
      CHECK(mixed.loss == plain.loss);
      CHECK(mixed.label.lambda == 0.0);
    }
  }
  SUBCASE("identical inputs give forward(A) logits for any lambda") {
    const auto plain = forward(model, a);
    for (const double lam : {0.5, 0.73, 0.99}) {
      for (const MixLayer layer : {MixLayer::embed, MixLayer::hidden}) {
        const auto mixed = forward_hiddenmix(model, a, a, lam, layer);
        for (std::size_t c = 0; c < plain.logits.size(); ++c) {
          CHECK(mixed.logits[c] == doctest::Approx(plain.logits[c]).epsilon(1e-13));
        }
      }
    }
  }
  SUBCASE("layer=embed is forward_embedmix") {
    const auto x = forward_embedmix(model, a, b, 0.8);
    const auto y = forward_hiddenmix(model, a, b, 0.8, MixLayer::embed);
    CHECK(x.logits == y.logits);
    CHECK(x.loss == y.loss);
    CHECK(x.label.y_a == 0);
    CHECK(x.label.y_b == 2);
    CHECK(x.label.lambda == doctest::Approx(0.2));
  }
  SUBCASE("scalar oracle for lambda = 0.5") {
    ToyTextClassifier m(ModelDims{6, 1, 1, 2, false});
    auto& p = m.params();
    p.embedding(kCls, 0) = 0.2;
    p.embedding(kSep, 0) = -0.4;
    p.embedding(4, 0) = 1.0;
    p.embedding(5, 0) = -2.0;
    p.w1(0, 0) = 0.9;
    p.b1[0] = -0.1;
    p.w2(0, 0) = 1.0;
    const auto ea = single(TokenSequence::from_content({4, 4}), 0);
    const auto eb = single(TokenSequence::from_content({5}), 1);
    // A = [CLS 4 4 SEP], B padded = [CLS 5 SEP PAD]
    const double e[4] = {0.2, 0.5 * 1.0 + 0.5 * -2.0, 0.5 * 1.0 + 0.5 * -0.4, 0.5 * -0.4 + 0.0};
    double pooled = 0.0;
    for (const double x : e) {
      pooled += std::tanh(0.9 * x - 0.1);
    }
    pooled /= 4.0;
    const auto tr = forward_embedmix(m, ea, eb, 0.5);
    CHECK(tr.pooled[0] == doctest::Approx(pooled).epsilon(1e-14));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(forward_embedmix(model, a, b, 1.2), NumericError);
    LabeledExample paired = a;
    paired.second = a.first;
    CHECK_THROWS_AS(forward_embedmix(model, a, paired, 0.7), DataError);
  }
}

TEST_CASE("AdamW") {
  SUBCASE("zero gradients and zero weight decay leave parameters unchanged") {
    Rng rng(1);
    auto model = oracle::random_model(ModelDims{8, 2, 3, 2, false}, rng);
    const auto before = model;
    AdamW opt(model.dims(), AdamWConfig{0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 5; ++i) {
      opt.step(model, Parameters::zeros(model.dims()), 0.01);
    }
    CHECK(model == before);
  }
  SUBCASE("matches a hand-stepped scalar trace on f(p) = p^2 / 2") {
    auto model = ToyTextClassifier(ModelDims{5, 1, 1, 2, false});
    model.params().b1[0] = 1.5;
    AdamW opt(model.dims(), AdamWConfig{0.9, 0.999, 1e-8, 1e-4});
    double p = 1.5;
    double m = 0.0;
    double v = 0.0;
    const double lr = 0.1;
    for (int t = 1; t <= 3; ++t) {
      const double g = p; // d/dp (p^2 / 2)
      auto grads = Parameters::zeros(model.dims());
      grads.b1[0] = model.params().b1[0];
      opt.step(model, grads, lr);

      p *= 1.0 - lr * 1e-4;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double m_hat = m / (1.0 - std::pow(0.9, t));
      const double v_hat = v / (1.0 - std::pow(0.999, t));
      p -= lr * m_hat / (std::sqrt(v_hat) + 1e-8);
      CHECK(model.params().b1[0] == doctest::Approx(p).epsilon(1e-15));
    }
    // first Adam step moves by ~lr regardless of gradient scale
    CHECK(p < 1.5);
  }
  SUBCASE("PAD row stays zero") {
    Rng rng(4);
    auto model = oracle::random_model(ModelDims{8, 3, 3, 2, false}, rng);
    AdamW opt(model.dims(), AdamWConfig{});
    for (int i = 0; i < 100; ++i) {
      auto grads = Parameters::zeros(model.dims());
      for (auto t : grads.tensors()) {
        for (double& x : t) {
          x = 2.0 * uniform01(rng) - 1.0;
        }
      }
      opt.step(model, grads, 0.05);
    }
    for (const double x : model.params().embedding.row(kPad)) {
      CHECK(x == 0.0);
    }
  }
  SUBCASE("non-finite gradient fails fast") {
    Rng rng(4);
    auto model = oracle::random_model(ModelDims{8, 3, 3, 2, false}, rng);
    const auto before = model;
    AdamW opt(model.dims(), AdamWConfig{});
    auto grads = Parameters::zeros(model.dims());
    grads.w2(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(opt.step(model, grads, 0.1), NumericError);
    CHECK(model == before);
    CHECK_THROWS_AS(sgd_step(model, grads, 0.1, 0.0), NumericError);
  }
  SUBCASE("plain SGD step") {
    ToyTextClassifier model(ModelDims{5, 1, 1, 2, false});
    model.params().b2 = {1.0, -1.0};
    auto grads = Parameters::zeros(model.dims());
    grads.b2 = {0.5, 0.25};
    sgd_step(model, grads, 0.1, 0.0);
    CHECK(model.params().b2[0] == doctest::Approx(0.95));
    CHECK(model.params().b2[1] == doctest::Approx(-1.025));
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng rng(8);
  const auto model = oracle::random_model(ModelDims{17, 3, 5, 4, true}, rng);
  const auto dir = std::filesystem::temp_directory_path() / "ssmix_model_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.ckpt";
  save_checkpoint(model, path);
  const auto back = load_checkpoint(path);
  CHECK(back == model);
  CHECK(back.dims() == model.dims());
  CHECK(back.nonlinearity() == "tanh");

  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), DataError);
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    bytes.resize(bytes.size() - 3);
    std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes;
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), DataError);
}

TEST_CASE("initialize is seeded and keeps PAD at zero") {
  const ModelDims dims{30, 8, 16, 3, false};
  const auto a = ToyTextClassifier::initialize(dims, 42);
  const auto b = ToyTextClassifier::initialize(dims, 42);
  const auto c = ToyTextClassifier::initialize(dims, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.all_finite());
  for (const double x : a.params().embedding.row(kPad)) {
    CHECK(x == 0.0);
  }
}
