#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "fform/error.hpp"
#include "fform/turntaking.hpp"
#include "oracles.hpp"

using namespace fform;

namespace {

std::vector<ActivityRecord> records_for(const std::vector<int>& speak_a, const std::vector<int>& speak_b) {
  std::vector<ActivityRecord> out;
  for (std::size_t f = 0; f < speak_a.size(); ++f) {
    ActivityRecord a{0, static_cast<int>(f), {}};
    a.set(Activity::kSpeaking, speak_a[f] != 0);
    ActivityRecord b{1, static_cast<int>(f), {}};
    b.set(Activity::kSpeaking, speak_b[f] != 0);
    out.push_back(a);
    out.push_back(b);
  }
  return out;
}

TurnSample random_sample(std::mt19937_64& rng, int width, int steps) {
  std::bernoulli_distribution bit(0.5);
  std::uniform_int_distribution<int> label(0, 3);
  TurnSample s;
  s.input.resize(width, steps);
  for (int r = 0; r < width; ++r) {
    for (int c = 0; c < steps; ++c) s.input(r, c) = bit(rng) ? 1.0 : 0.0;
  }
  s.label = static_cast<TurnClass>(label(rng));
  return s;
}

double max_abs(TurnParams& p) {
  double m = 0.0;
  for (const auto& t : p.tensors()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) m = std::max(m, std::abs(t.data[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("turn labels") {
  CHECK(turn_label(true, false) == TurnClass::kSpeaker1);
  CHECK(turn_label(false, true) == TurnClass::kSpeaker2);
  CHECK(turn_label(true, true) == TurnClass::kOverlap);
  CHECK(turn_label(false, false) == TurnClass::kSilence);
}

TEST_CASE("pearson") {
  const std::vector<double> x = {1, 2, 3, 4}, y = {1, 3, 2, 4};
  CHECK(std::abs(pearson(x, y) - 0.8) < 1e-12);
  CHECK(pearson(x, x) == 1.0);
  const std::vector<double> neg = {-1, -2, -3, -4};
  CHECK(pearson(x, neg) == -1.0);
  const std::vector<double> flat = {2, 2, 2, 2};
  CHECK_THROWS_WITH_AS(pearson(x, flat), doctest::Contains("undefined correlation"), ComputationError);
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("feature ranking finds a shifted copy of the target") {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.4);
  std::vector<int> sa(200), sb(200);
  for (auto& v : sa) v = coin(rng);
  for (auto& v : sb) v = coin(rng);
  auto recs = records_for(sa, sb);
  for (auto& r : recs) {
    const auto& s = r.person_id == 0 ? sa : sb;
    if (r.frame + 1 < 200) r.set(Activity::kHandGesturing, s[static_cast<std::size_t>(r.frame) + 1] != 0);
    r.set(Activity::kLaughing, coin(rng));
  }
  const auto ranking = rank_features(recs, 0, 1);
  REQUIRE(ranking.size() == kActivityCount);
  CHECK(ranking[0].feature == Activity::kHandGesturing);
  CHECK(ranking[0].r == doctest::Approx(1.0));
  // never-set flags are undefined and sort last
  CHECK_FALSE(ranking.back().defined);
  const auto top = top_features(ranking, 3);
  CHECK(top.size() == 3);
  CHECK(top[0] == Activity::kHandGesturing);
}

TEST_CASE("dataset sample count and split") {
  std::vector<int> sa(100), sb(100);
  for (int f = 0; f < 100; ++f) sa[f] = (f / 10) % 2;
  const auto recs = records_for(sa, sb);
  DatasetOptions opt;
  const auto d = build_dataset(recs, 0, 1, opt);
  CHECK(d.total_samples == 90);
  CHECK(d.train.size() == 63);
  CHECK(d.val.size() == 18 - 10);
  CHECK(d.test.size() == 9);
  CHECK(d.train.front().input.rows() == 6);
  CHECK(d.train.front().input.cols() == 10);
  // no validation or test window reaches back into a training frame or label
  const int last_train_label = d.train.back().frame + opt.horizon;
  CHECK(d.val.front().frame - opt.window + 1 > last_train_label);
  CHECK(d.test.front().frame - opt.window + 1 > last_train_label);
  int hist = 0;
  for (int c : d.histogram) hist += c;
  CHECK(hist == 90);
}

TEST_CASE("dataset edge cases") {
  const std::vector<int> silent(40, 0);
  const auto d = build_dataset(records_for(silent, silent), 0, 1, DatasetOptions{});
  for (const auto& s : d.train) CHECK(s.label == TurnClass::kSilence);
  CHECK(d.histogram[3] == d.total_samples);
  CHECK_THROWS_AS(build_dataset(records_for(std::vector<int>(10, 0), std::vector<int>(10, 0)), 0, 1,
                                DatasetOptions{}),
                  ValidationError);
  CHECK_THROWS_AS(build_dataset(records_for(silent, silent), 0, 7, DatasetOptions{}), ValidationError);
}

TEST_CASE("zero model predicts uniform probabilities") {
  TurnModel m(TurnModelConfig{});
  const auto p = m.forward(Eigen::MatrixXd::Ones(6, 10));
  for (int i = 0; i < 4; ++i) CHECK(p(i) == doctest::Approx(0.25));
  CHECK_THROWS_AS(m.forward(Eigen::MatrixXd::Ones(5, 10)), ValidationError);
}

TEST_CASE("softmax outputs are normalized") {
  std::mt19937_64 rng(4);
  const auto m = TurnModel::initialized(TurnModelConfig{}, 9);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_sample(rng, 6, 10);
    const auto p = m.forward(s.input);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("small model matches the scalar recurrence") {
  TurnModelConfig cfg{1, 2, {3, 2, 2}};
  auto m = TurnModel::initialized(cfg, 17);
  auto& p = m.params();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  oracle::TinyLstm t{};
  for (int g = 0; g < 4; ++g) {
    for (int unit = 0; unit < 2; ++unit) {
      const int row = g * 2 + unit;
      p.lstm_input(row, 0) = t.w_in[g][unit] = u(rng);
      p.lstm_bias(row) = t.bias[g][unit] = u(rng);
      for (int from = 0; from < 2; ++from) p.lstm_recurrent(row, from) = t.w_rec[g][unit][from] = u(rng);
    }
  }
  for (int l = 0; l < 4; ++l) {
    auto& w = p.dense_weights[static_cast<std::size_t>(l)];
    auto& b = p.dense_biases[static_cast<std::size_t>(l)];
    t.dense_w[l].assign(static_cast<std::size_t>(w.rows()), std::vector<double>(static_cast<std::size_t>(w.cols())));
    t.dense_b[l].resize(static_cast<std::size_t>(b.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      b(r) = t.dense_b[l][r] = u(rng);
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = t.dense_w[l][r][c] = u(rng);
    }
  }
  Eigen::MatrixXd input(1, 2);
  input << 0.7, -0.3;
  const auto got = m.forward(input);
  const auto want = oracle::tiny_forward(t, {0.7, -0.3});
  for (int i = 0; i < 4; ++i) CHECK(std::abs(got(i) - want[i]) < 1e-12);
}

TEST_CASE("gradients match finite differences") {
  TurnModelConfig cfg{3, 4, {5, 4, 3}};
  auto m = TurnModel::initialized(cfg, 5);
  std::mt19937_64 rng(6);
  std::vector<TurnSample> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(random_sample(rng, 3, 4));
  auto grads = TurnParams::zeros(cfg);
  backward(m, batch, grads);
  auto gt = grads.tensors();
  auto pt = m.params().tensors();
  const double eps = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < pt.size(); ++k) {
    for (Eigen::Index i = 0; i < pt[k].size(); ++i) {
      const double keep = pt[k].data[i];
      pt[k].data[i] = keep + eps;
      const double up = mean_loss(m, batch);
      pt[k].data[i] = keep - eps;
      const double down = mean_loss(m, batch);
      pt[k].data[i] = keep;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = gt[k].data[i];
      const double rel = std::abs(numeric - analytic) /
                         std::max({std::abs(numeric), std::abs(analytic), 1e-7});
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("duplicated sample doubles the summed gradient") {
  TurnModelConfig cfg{2, 3, {3, 3, 3}};
  const auto m = TurnModel::initialized(cfg, 3);
  std::mt19937_64 rng(8);
  const auto s = random_sample(rng, 2, 5);
  auto one = TurnParams::zeros(cfg), two = TurnParams::zeros(cfg);
  const TurnSample* single[] = {&s};
  const TurnSample* pair[] = {&s, &s};
  const double l1 = accumulate_gradients(m, single, one);
  const double l2 = accumulate_gradients(m, pair, two);
  CHECK(l2 == doctest::Approx(2 * l1));
  auto a = one.tensors(), b = two.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (Eigen::Index i = 0; i < a[k].size(); ++i) CHECK(b[k].data[i] == doctest::Approx(2 * a[k].data[i]));
  }
}

TEST_CASE("a confidently correct sample has vanishing gradient") {
  TurnModelConfig cfg{1, 2, {2, 2, 2}};
  TurnModel m(cfg);
  m.params().dense_biases[3] << 40.0, 0.0, 0.0, 0.0;
  TurnSample s;
  s.input = Eigen::MatrixXd::Ones(1, 3);
  s.label = TurnClass::kSpeaker1;
  auto g = TurnParams::zeros(cfg);
  const double loss = backward(m, std::vector<TurnSample>{s}, g);
  CHECK(loss < 1e-15);
  CHECK(max_abs(g) < 1e-15);
}

TEST_CASE("a small step against the gradient lowers the loss") {
  TurnModelConfig cfg{2, 4, {4, 4, 4}};
  auto m = TurnModel::initialized(cfg, 12);
  std::mt19937_64 rng(12);
  std::vector<TurnSample> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_sample(rng, 2, 6));
  auto g = TurnParams::zeros(cfg);
  const double before = backward(m, batch, g);
  auto gt = g.tensors();
  auto pt = m.params().tensors();
  for (std::size_t k = 0; k < pt.size(); ++k) {
    for (Eigen::Index i = 0; i < pt[k].size(); ++i) pt[k].data[i] -= 1e-3 * gt[k].data[i];
  }
  CHECK(mean_loss(m, batch) < before);
}

TEST_CASE("training learns a simple rule and is reproducible") {
  // next label copies the speaking pattern of the last input column
  std::mt19937_64 rng(21);
  TurnDataset d;
  d.features = {Activity::kSpeaking};
  auto make = [&](int n) {
    std::vector<TurnSample> out;
    std::bernoulli_distribution bit(0.5);
    for (int i = 0; i < n; ++i) {
      TurnSample s;
      s.input = Eigen::MatrixXd::Zero(2, 3);
      const bool a = bit(rng), b = bit(rng);
      s.input(0, 2) = a ? 1.0 : 0.0;
      s.input(1, 2) = b ? 1.0 : 0.0;
      s.label = turn_label(a, b);
      out.push_back(s);
    }
    return out;
  };
  d.train = make(512);
  d.val = make(64);
  d.test = make(64);
  TurnModelConfig cfg{2, 8, {16, 8, 8}};
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.epochs = 15;
  tc.seed = 3;
  const auto r1 = train(TurnModel::initialized(cfg, 1), d, tc);
  const auto r2 = train(TurnModel::initialized(cfg, 1), d, tc);
  REQUIRE(r1.history.size() == 15);
  CHECK_FALSE(r1.early_stopped);
  for (std::size_t e = 0; e < r1.history.size(); ++e) {
    CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
    CHECK(r1.history[e].val_loss == r2.history[e].val_loss);
  }
  const auto ev = evaluate(r1.model, d.test);
  CHECK(ev.accuracy >= 0.95);
  CHECK(r1.history.back().train_loss < r1.history.front().train_loss);
}

TEST_CASE("early stopping triggers with a short patience") {
  TurnDataset d;
  TurnSample s;
  s.input = Eigen::MatrixXd::Zero(1, 2);
  s.label = TurnClass::kSilence;
  d.train = {s, s};
  d.val = {s};
  TurnModelConfig cfg{1, 2, {2, 2, 2}};
  TrainConfig tc;
  tc.learning_rate = 1e-30;
  tc.patience = 2;
  tc.epochs = 15;
  const auto r = train(TurnModel::initialized(cfg, 1), d, tc);
  CHECK(r.early_stopped);
  CHECK(r.history.size() == 3);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), ValidationError);
  tc = {};
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.validate(), ValidationError);
  tc = {};
  tc.beta1 = 1.0;
  CHECK_THROWS_AS(tc.validate(), ValidationError);
}

TEST_CASE("evaluation of a perfect and a constant predictor") {
  TurnModelConfig cfg{1, 2, {2, 2, 2}};
  TurnModel m(cfg);
  m.params().dense_biases[3] << 0.0, 0.0, 0.0, 5.0;
  std::vector<TurnSample> silent(8);
  for (auto& s : silent) {
    s.input = Eigen::MatrixXd::Zero(1, 2);
    s.label = TurnClass::kSilence;
  }
  const auto perfect = evaluate(m, silent);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.counts[3][3] == 8);
  CHECK(perfect.normalized[3][3] == 1.0);
  for (int i = 0; i < 3; ++i) CHECK(perfect.normalized[i][3] == 0.0);

  std::vector<TurnSample> balanced;
  for (int c = 0; c < 4; ++c) {
    for (int k = 0; k < 5; ++k) {
      TurnSample s;
      s.input = Eigen::MatrixXd::Zero(1, 2);
      s.label = static_cast<TurnClass>(c);
      balanced.push_back(s);
    }
  }
  CHECK(evaluate(m, balanced).accuracy == doctest::Approx(0.25));
}

TEST_CASE("model save and load round trip") {
  TurnModelConfig cfg{4, 3, {5, 4, 3}};
  const auto m = TurnModel::initialized(cfg, 77);
  std::stringstream buf;
  save_model(buf, m);
  const auto back = load_model(buf);
  CHECK(back.config().hidden == 3);
  CHECK(back.config().dense == cfg.dense);
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(4, 6, 0.5);
  CHECK(back.forward(x) == m.forward(x));

  std::stringstream junk("not a model\n");
  CHECK_THROWS_AS(load_model(junk), ValidationError);
}
