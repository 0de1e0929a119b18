#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "rdw/nn/adam.hpp"
#include "rdw/nn/gradcheck.hpp"
#include "rdw/nn/model_io.hpp"
#include "rdw/nn/saccadenet.hpp"
#include "rdw/nn/train.hpp"
#include "rdw/synthgen.hpp"

using namespace rdw;
using namespace rdw::nn;

namespace {

Mat<double> random_input(Rng& rng, Eigen::Index batch, double scale = 2.0) {
  Mat<double> x(90, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-scale, scale);
  return x;
}

// Direct loops over the documented layer semantics, one window at a time.
double naive_forward(const SaccadeNet<double>& net, const double* window) {
  const std::size_t len = 10;
  std::vector<std::vector<double>> x(9, std::vector<double>(len));
  for (std::size_t c = 0; c < 9; ++c)
    for (std::size_t l = 0; l < len; ++l) x[c][l] = window[c * len + l];
  const double slope = net.options.leaky_slope;
  auto leaky = [&](double v) { return v < 0 ? slope * v : v; };
  for (const auto& layer : net.conv) {
    const std::size_t cout = layer.w.shape[0], cin = layer.w.shape[1];
    std::vector<std::vector<double>> y(cout, std::vector<double>(len));
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t l = 0; l < len; ++l) {
        double s = layer.b[o];
        for (std::size_t i = 0; i < cin; ++i)
          for (std::size_t k = 0; k < 3; ++k) {
            const long src = static_cast<long>(l) + static_cast<long>(k) - 1;
            if (src >= 0 && src < static_cast<long>(len)) s += layer.w[(o * cin + i) * 3 + k] * x[i][src];
          }
        y[o][l] = leaky(s);
      }
    x = std::move(y);
  }
  std::vector<double> h;
  for (const auto& ch : x) h.insert(h.end(), ch.begin(), ch.end());
  for (std::size_t d = 0; d < net.dense.size(); ++d) {
    const auto& layer = net.dense[d];
    const std::size_t out = layer.w.shape[0], in = layer.w.shape[1];
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = layer.b[o];
      for (std::size_t i = 0; i < in; ++i) s += layer.w[o * in + i] * h[i];
      if (d == 4) z[o] = 1.0 / (1.0 + std::exp(-s));
      else if (d == 3 && net.options.head_relu) z[o] = std::max(0.0, s);
      else z[o] = leaky(s);
    }
    h = std::move(z);
  }
  return h[0];
}

Dataset small_corpus(std::size_t sessions = 3, double duration = 40.0) {
  synth::TaskConfig task;
  task.duration = duration;
  task.targets_per_minute = 60.0;
  task.seed = 77;
  return synth::generate_corpus(sessions, task, {}).dataset;
}

}  // namespace

TEST(SaccadeNet, ShapeChain) {
  const std::vector<Shape> want{{9, 10},   {16, 10}, {32, 10}, {64, 10}, {128, 10}, {1280},
                                {1024},    {512},    {256},    {128},    {1}};
  EXPECT_EQ(SaccadeNet<double>().shape_chain(), want);
  EXPECT_EQ(SaccadeNet<float>().shape_chain(), want);
}

TEST(SaccadeNet, ParameterCount) {
  SaccadeNet<double> net;
  std::size_t n = 0;
  for (const auto* p : std::as_const(net).parameters()) n += p->size();
  EXPECT_EQ(n, SaccadeNet<double>::parameter_count());
  EXPECT_EQ(n, 2033825u);
  EXPECT_EQ(SaccadeNet<double>::parameter_names().size(), 18u);
}

TEST(SaccadeNet, InitIsSeededAndBounded) {
  Rng a(1), b(1);
  SaccadeNet<double> n1, n2;
  n1.init(a);
  n2.init(b);
  EXPECT_EQ(n1.dense[0].w.data, n2.dense[0].w.data);
  const double bound = std::sqrt(6.0 / 27.0);
  for (double w : n1.conv[0].w.data) EXPECT_LE(std::abs(w), bound);
  for (double v : n1.dense[2].b.data) EXPECT_EQ(v, 0.0);
}

TEST(SaccadeNet, ForwardMatchesNaiveLoops) {
  Rng rng(2);
  for (bool head_relu : {true, false}) {
    SaccadeNet<double> net({0.01, head_relu});
    net.init(rng);
    for (auto& l : net.dense) for (auto& b : l.b.data) b = rng.uniform(-0.1, 0.1);
    for (auto& l : net.conv) for (auto& b : l.b.data) b = rng.uniform(-0.1, 0.1);
    const auto x = random_input(rng, 4);
    const auto p = net.forward(x);
    for (Eigen::Index j = 0; j < 4; ++j)
      EXPECT_NEAR(p(0, j), naive_forward(net, x.col(j).data()), 1e-12);
  }
}

TEST(SaccadeNet, BatchColumnsAreIndependent) {
  Rng rng(3);
  SaccadeNet<double> net;
  net.init(rng);
  const auto x = random_input(rng, 6);
  const auto p = net.forward(x);
  for (Eigen::Index j = 0; j < 6; ++j) {
    const Mat<double> one = x.col(j);
    EXPECT_NEAR(net.forward(one)(0, 0), p(0, j), 1e-13);
  }
}

TEST(SaccadeNet, OutputsAreProbabilities) {
  Rng rng(4);
  SaccadeNet<double> net;
  net.init(rng);
  const auto p = net.forward(random_input(rng, 32, 50.0));
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    EXPECT_GE(p(0, j), 0.0);
    EXPECT_LE(p(0, j), 1.0);
  }
}

TEST(SaccadeNet, RejectsBadInput) {
  SaccadeNet<double> net;
  try {
    net.forward(Mat<double>::Zero(89, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
  }
  Mat<double> x = Mat<double>::Zero(90, 1);
  x(3, 0) = std::nan("");
  try {
    net.forward(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
  }
}

TEST(Conv1d, SingleSampleMatchesDirectSum) {
  Rng rng(5);
  Tensor<double> w({4, 3, 3}), b({4}), x({3, 7});
  for (auto& v : w.data) v = rng.uniform(-1, 1);
  for (auto& v : b.data) v = rng.uniform(-1, 1);
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  const auto y = conv1d_forward(x, w, b);
  ASSERT_EQ(y.shape, (Shape{4, 7}));
  for (std::size_t o = 0; o < 4; ++o)
    for (std::size_t l = 0; l < 7; ++l) {
      double s = b[o];
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 3; ++k) {
          const long src = static_cast<long>(l + k) - 1;
          if (src >= 0 && src < 7) s += w[(o * 3 + i) * 3 + k] * x[i * 7 + static_cast<std::size_t>(src)];
        }
      EXPECT_NEAR(y[o * 7 + l], s, 1e-14);
    }
  EXPECT_THROW(conv1d_forward(Tensor<double>({2, 7}), w, b), Error);
}

TEST(Conv1d, Col2imIsAdjointOfIm2col) {
  Rng rng(6);
  const Eigen::Index len = 10;
  Mat<double> x(5, len * 3), y(15, len * 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform(-1, 1);
  Mat<double> cols, back;
  im2col(x, len, cols);
  col2im(y, 5, len, back);
  EXPECT_NEAR((cols.array() * y.array()).sum(), (x.array() * back.array()).sum(), 1e-12);
}

TEST(Loss, FusedLogitGradientMatchesChainRule) {
  const std::vector<double> p{0.2, 0.7, 0.9, 0.05};
  const std::vector<std::uint8_t> y{1, 0, 1, 0};
  const std::vector<double> yd(y.begin(), y.end());
  for (double w : {1.0, 3.0}) {
    const auto bce = bce_loss(p, yd, w);
    Mat<double> prob(1, 4);
    for (int j = 0; j < 4; ++j) prob(0, j) = p[static_cast<std::size_t>(j)];
    const auto g = bce_logit_grad(prob, y, w);
    for (int j = 0; j < 4; ++j) {
      const double pj = p[static_cast<std::size_t>(j)];
      EXPECT_NEAR(g(0, j), bce.grad[static_cast<std::size_t>(j)] * pj * (1.0 - pj), 1e-15);
    }
    EXPECT_NEAR(bce.loss, mean_bce(p, y, w), 1e-15);
  }
}

TEST(Loss, ClampKeepsLossFinite) {
  const std::vector<double> p{0.0, 1.0};
  const std::vector<double> y{1.0, 0.0};
  const auto r = bce_loss(p, y);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, -std::log(kBceEps), 1e-6);
}

TEST(GradCheck, AnalyticMatchesCentralDifferences) {
  Rng rng(11);
  for (bool head_relu : {true, false}) {
    SaccadeNet<double> net({0.01, head_relu});
    net.init(rng);
    const auto x = random_input(rng, 1);
    const std::vector<std::uint8_t> y{head_relu ? std::uint8_t{1} : std::uint8_t{0}};
    GradCheckOptions opt;
    opt.samples_per_layer = 25;
    const auto r = gradient_check(net, x, y, rng, opt);
    EXPECT_EQ(r.tensors.size(), 18u);
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(GradCheck, WeightedLossAndBatch) {
  Rng rng(12);
  SaccadeNet<double> net;
  net.init(rng);
  const auto x = random_input(rng, 2);
  const std::vector<std::uint8_t> y{1, 0};
  GradCheckOptions opt;
  opt.samples_per_layer = 10;
  opt.pos_weight = 4.0;
  EXPECT_LT(gradient_check(net, x, y, rng, opt).max_rel_error, 1e-4);
}

TEST(Adam, FirstStepsMatchHandComputation) {
  Tensor<double> p({2}, {1.0, -2.0});
  std::vector<Tensor<double>*> params{&p};
  auto state = AdamState<double>::like(params);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;

  std::vector<Tensor<double>> g{Tensor<double>({2}, {0.5, -4.0})};
  adam_step<double>(params, g, state, cfg);
  // step 1: m_hat = g, v_hat = g^2, so each parameter moves lr * sign(g)
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_NEAR(p[1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-12);

  const double p1 = p[0];
  g[0].data = {0.25, 0.0};
  adam_step<double>(params, g, state, cfg);
  const double m = (0.9 * 0.05 + 0.1 * 0.25) / (1 - 0.81);
  const double v = (0.999 * 0.00025 + 0.001 * 0.0625) / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], p1 - 0.1 * m / (std::sqrt(v) + 1e-8), 1e-12);
  EXPECT_EQ(state.step, 2u);

  std::vector<Tensor<double>> bad{Tensor<double>({3})};
  EXPECT_THROW(adam_step<double>(params, bad, state, cfg), Error);
}

TEST(ModelIo, RoundTripIsByteExact) {
  Rng rng(13);
  Model m;
  m.net.init(rng);
  m.normalizer.mean[2] = 3.5;
  m.normalizer.stddev.fill(2.0);
  m.config.seed = 99;
  m.config.pos_weight = 2.5;
  const auto bytes = serialize_model(m);
  const auto back = deserialize_model(bytes);
  EXPECT_EQ(serialize_model(back), bytes);
  EXPECT_EQ(back.config.seed, 99u);
  EXPECT_EQ(back.config.pos_weight, 2.5);
  EXPECT_EQ(back.net.dense[1].w.data, m.net.dense[1].w.data);

  const std::vector<double> raw(90, 0.3);
  EXPECT_EQ(back.predict(raw), m.predict(raw));
}

TEST(ModelIo, RejectsCorruptFiles) {
  Model m;
  const auto bytes = serialize_model(m);
  auto expect_schema = [](const std::string& b) {
    try {
      deserialize_model(b);
      FAIL() << "expected schema error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::schema);
    }
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_schema(bad_magic);
  auto bad_major = bytes;
  bad_major[8] = 2;
  expect_schema(bad_major);
  expect_schema(bytes.substr(0, bytes.size() - 8));
  expect_schema(bytes + "x");
  expect_schema("");
  EXPECT_THROW(load_model("/nonexistent/model.bin"), Error);
}

TEST(Split, WindowSplitIsAPartition) {
  Dataset ds;
  const std::vector<double> w(90, 0.0);
  for (int i = 0; i < 1000; ++i) ds.push(w, i % 2, static_cast<std::uint32_t>(i / 100));
  TrainConfig cfg;
  Rng rng(1);
  const auto s = split_dataset(ds, cfg, rng);
  EXPECT_EQ(s.train.size(), 800u);
  EXPECT_EQ(s.validation.size(), 100u);
  EXPECT_EQ(s.test.size(), 100u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 1000u);
}

TEST(Split, SessionSplitKeepsSessionsTogether) {
  Dataset ds;
  const std::vector<double> w(90, 0.0);
  for (int i = 0; i < 1000; ++i) ds.push(w, i % 2, static_cast<std::uint32_t>(i / 100));
  TrainConfig cfg;
  cfg.session_split = true;
  Rng rng(1);
  const auto s = split_dataset(ds, cfg, rng);
  auto sessions = [&](const std::vector<std::size_t>& idx) {
    std::set<std::uint32_t> out;
    for (auto i : idx) out.insert(ds.sessions[i]);
    return out;
  };
  const auto a = sessions(s.train), b = sessions(s.validation), c = sessions(s.test);
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(b.size(), 1u);
  EXPECT_EQ(c.size(), 1u);
  for (auto x : b) EXPECT_FALSE(a.count(x) || c.count(x));
}

TEST(Train, SingleClassFails) {
  Dataset ds;
  const std::vector<double> w(90, 1.0);
  for (int i = 0; i < 20; ++i) ds.push(w, 0, 0);
  try {
    train(ds, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::single_class);
  }
}

TEST(Train, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.split = {0.5, 0.2, 0.2};
  EXPECT_THROW(validate(cfg), Error);
}

TEST(Train, DeterministicAndLearnsSmallCorpus) {
  const auto ds = small_corpus();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 5;
  const auto a = train(ds, cfg);
  const auto b = train(ds, cfg);
  EXPECT_EQ(serialize_model({a.net, a.normalizer, cfg}), serialize_model({b.net, b.normalizer, cfg}));
  ASSERT_EQ(a.history.size(), 2u);
  EXPECT_LT(a.history[1].train_loss, a.history[0].train_loss);
  const auto ev = evaluate_subset(a.net, a.normalizer, ds, a.split.test);
  ASSERT_TRUE(ev.val_auc.has_value());
  EXPECT_GT(*ev.val_auc, 0.9);
}

TEST(Train, DoublePrecisionPathRuns) {
  const auto ds = small_corpus(2, 20.0);
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto r = train<double>(ds, cfg);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.history[0].train_loss));
}
