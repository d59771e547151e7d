#include "fform/turntaking.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fform/error.hpp"

namespace fform {

TurnClass turn_label(bool speaking1, bool speaking2) {
  if (speaking1 && speaking2) return TurnClass::kOverlap;
  if (speaking1) return TurnClass::kSpeaker1;
  if (speaking2) return TurnClass::kSpeaker2;
  return TurnClass::kSilence;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: series lengths differ");
  if (x.size() < 2) throw ValidationError("pearson: need at least two samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ComputationError("undefined correlation (constant series)");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// person -> frame -> record
using RecordIndex = std::map<int, std::map<int, const ActivityRecord*>>;

RecordIndex index_records(std::span<const ActivityRecord> records) {
  RecordIndex idx;
  for (const auto& r : records) idx[r.person_id][r.frame] = &r;
  return idx;
}

}  // namespace

std::vector<FeatureCorrelation> rank_features(std::span<const ActivityRecord> records, int person_a,
                                              int person_b, int horizon) {
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  const auto idx = index_records(records);
  std::array<std::vector<double>, kActivityCount> features;
  std::vector<double> target;
  for (int person : {person_a, person_b}) {
    auto it = idx.find(person);
    if (it == idx.end()) throw ValidationError("no activity records for person " + std::to_string(person));
    const auto& by_frame = it->second;
    for (const auto& [frame, rec] : by_frame) {
      auto next = by_frame.find(frame + horizon);
      if (next == by_frame.end()) continue;
      for (std::size_t f = 0; f < kActivityCount; ++f) features[f].push_back(rec->flags[f]);
      target.push_back(next->second->has(Activity::kSpeaking) ? 1.0 : 0.0);
    }
  }
  std::vector<FeatureCorrelation> ranking;
  for (std::size_t f = 0; f < kActivityCount; ++f) {
    FeatureCorrelation fc;
    fc.feature = static_cast<Activity>(f);
    try {
      fc.r = pearson(features[f], target);
    } catch (const ComputationError&) {
      fc.r = 0.0;
      fc.defined = false;
    }
    ranking.push_back(fc);
  }
  std::stable_sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
    if (a.defined != b.defined) return a.defined;
    return std::fabs(a.r) > std::fabs(b.r);
  });
  return ranking;
}

std::vector<Activity> top_features(std::span<const FeatureCorrelation> ranking, std::size_t count) {
  std::vector<Activity> out;
  for (const auto& fc : ranking) {
    if (out.size() == count) break;
    if (fc.defined) out.push_back(fc.feature);
  }
  return out;
}

TurnDataset build_dataset(std::span<const ActivityRecord> records, int person_a, int person_b,
                          const DatasetOptions& options) {
  if (options.window < 1 || options.horizon < 1) throw ValidationError("window and horizon must be >= 1");
  if (options.features.empty()) throw ValidationError("at least one input feature is required");
  const double total = options.train_fraction + options.val_fraction + options.test_fraction;
  if (std::fabs(total - 1.0) > 1e-9 || options.train_fraction <= 0.0 || options.val_fraction < 0.0 ||
      options.test_fraction < 0.0) {
    throw ValidationError("split fractions must be non-negative and sum to 1");
  }
  const auto idx = index_records(records);
  auto ia = idx.find(person_a), ib = idx.find(person_b);
  if (ia == idx.end() || ib == idx.end()) {
    throw ValidationError("no activity records for dyad (" + std::to_string(person_a) + ", " +
                          std::to_string(person_b) + ")");
  }
  std::vector<std::pair<const ActivityRecord*, const ActivityRecord*>> aligned;
  for (const auto& [frame, ra] : ia->second) {
    auto rb = ib->second.find(frame);
    if (rb != ib->second.end()) aligned.emplace_back(ra, rb->second);
  }
  const int frames = static_cast<int>(aligned.size());
  const int window = options.window, horizon = options.horizon;
  if (frames < window + horizon) {
    throw ValidationError("dataset too small: " + std::to_string(frames) + " aligned frames for window " +
                          std::to_string(window) + " and horizon " + std::to_string(horizon));
  }

  const auto width = static_cast<Eigen::Index>(2 * options.features.size());
  std::vector<TurnSample> samples;
  for (int last = window - 1; last + horizon < frames; ++last) {
    TurnSample s;
    s.input.resize(width, window);
    for (int t = 0; t < window; ++t) {
      const auto& [ra, rb] = aligned[static_cast<std::size_t>(last - window + 1 + t)];
      Eigen::Index row = 0;
      for (Activity f : options.features) s.input(row++, t) = ra->has(f) ? 1.0 : 0.0;
      for (Activity f : options.features) s.input(row++, t) = rb->has(f) ? 1.0 : 0.0;
    }
    const auto& [na, nb] = aligned[static_cast<std::size_t>(last + horizon)];
    s.label = turn_label(na->has(Activity::kSpeaking), nb->has(Activity::kSpeaking));
    s.frame = aligned[static_cast<std::size_t>(last)].first->frame;
    samples.push_back(std::move(s));
  }

  TurnDataset data;
  data.features = options.features;
  data.total_samples = static_cast<int>(samples.size());
  for (const auto& s : samples) ++data.histogram[static_cast<std::size_t>(s.label)];

  const int n = data.total_samples;
  const int n_train = static_cast<int>(std::floor(options.train_fraction * n + 1e-9));
  const int n_val = static_cast<int>(std::floor(options.val_fraction * n + 1e-9));
  const int gap = window + horizon - 1;
  const int val_begin = std::min(n, n_train + gap);
  const int test_begin = std::min(n, std::max(n_train + n_val, n_train + gap));
  auto take = [&](int begin, int end) {
    return std::vector<TurnSample>(std::make_move_iterator(samples.begin() + begin),
                                   std::make_move_iterator(samples.begin() + std::max(begin, end)));
  };
  data.train = take(0, n_train);
  data.val = take(val_begin, n_train + n_val);
  data.test = take(test_begin, n);
  if (data.train.empty()) throw ValidationError("dataset too small: empty training split");
  return data;
}

// ---------------------------------------------------------------------------
// Model

TurnParams TurnParams::zeros(const TurnModelConfig& config) {
  const Eigen::Index h = config.hidden, f = config.input_width;
  TurnParams p;
  p.lstm_input = Eigen::MatrixXd::Zero(4 * h, f);
  p.lstm_recurrent = Eigen::MatrixXd::Zero(4 * h, h);
  p.lstm_bias = Eigen::VectorXd::Zero(4 * h);
  const std::array<Eigen::Index, 5> sizes = {h, config.dense[0], config.dense[1], config.dense[2],
                                             kTurnClasses};
  for (std::size_t l = 0; l < 4; ++l) {
    p.dense_weights[l] = Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]);
    p.dense_biases[l] = Eigen::VectorXd::Zero(sizes[l + 1]);
  }
  return p;
}

std::vector<TurnParams::Tensor> TurnParams::tensors() {
  std::vector<Tensor> out;
  out.push_back({"lstm.input_weights", lstm_input.data(), lstm_input.rows(), lstm_input.cols()});
  out.push_back({"lstm.recurrent_weights", lstm_recurrent.data(), lstm_recurrent.rows(),
                 lstm_recurrent.cols()});
  out.push_back({"lstm.bias", lstm_bias.data(), lstm_bias.rows(), 1});
  for (std::size_t l = 0; l < 4; ++l) {
    const auto n = std::to_string(l);
    out.push_back({"dense" + n + ".weights", dense_weights[l].data(), dense_weights[l].rows(),
                   dense_weights[l].cols()});
    out.push_back({"dense" + n + ".bias", dense_biases[l].data(), dense_biases[l].rows(), 1});
  }
  return out;
}

std::size_t TurnParams::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(lstm_input.size() + lstm_recurrent.size() + lstm_bias.size());
  for (std::size_t l = 0; l < 4; ++l) {
    n += static_cast<std::size_t>(dense_weights[l].size() + dense_biases[l].size());
  }
  return n;
}

namespace {

void validate_config(const TurnModelConfig& c) {
  if (c.input_width < 1 || c.hidden < 1 || c.dense[0] < 1 || c.dense[1] < 1 || c.dense[2] < 1) {
    throw ValidationError("turn model sizes must be >= 1");
  }
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

struct ForwardCache {
  int steps = 0;
  Eigen::Index batch = 0;
  std::vector<Eigen::MatrixXd> x;      // F x B per step
  std::vector<Eigen::MatrixXd> gates;  // 4H x B activated gates per step
  std::vector<Eigen::MatrixXd> cell;   // H x B, index t+1 after step t
  std::vector<Eigen::MatrixXd> hidden;
  std::array<Eigen::MatrixXd, 4> dense_in;  // input to each dense layer
  Eigen::MatrixXd logits;
  Eigen::MatrixXd probs;
};

ForwardCache run_forward(const TurnModelConfig& config, const TurnParams& p,
                         std::span<const TurnSample* const> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  const Eigen::Index h = config.hidden;
  const auto steps = batch.front()->input.cols();
  for (const auto* s : batch) {
    if (s->input.rows() != config.input_width) {
      throw ValidationError("input width " + std::to_string(s->input.rows()) +
                            " does not match model width " + std::to_string(config.input_width));
    }
    if (s->input.cols() != steps || steps < 1) throw ValidationError("inconsistent window length in batch");
  }
  ForwardCache c;
  c.steps = static_cast<int>(steps);
  c.batch = static_cast<Eigen::Index>(batch.size());
  c.cell.push_back(Eigen::MatrixXd::Zero(h, c.batch));
  c.hidden.push_back(Eigen::MatrixXd::Zero(h, c.batch));
  for (Eigen::Index t = 0; t < steps; ++t) {
    Eigen::MatrixXd x(config.input_width, c.batch);
    for (Eigen::Index b = 0; b < c.batch; ++b) x.col(b) = batch[static_cast<std::size_t>(b)]->input.col(t);
    Eigen::MatrixXd z = p.lstm_input * x + p.lstm_recurrent * c.hidden.back();
    z.colwise() += p.lstm_bias;
    Eigen::MatrixXd g(4 * h, c.batch);
    g.topRows(2 * h) = sigmoid(z.topRows(2 * h));
    g.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
    g.bottomRows(h) = sigmoid(z.bottomRows(h));
    Eigen::MatrixXd cell = g.middleRows(h, h).cwiseProduct(c.cell.back()) +
                           g.topRows(h).cwiseProduct(g.middleRows(2 * h, h));
    Eigen::MatrixXd hid = g.bottomRows(h).cwiseProduct(cell.array().tanh().matrix());
    c.x.push_back(std::move(x));
    c.gates.push_back(std::move(g));
    c.cell.push_back(std::move(cell));
    c.hidden.push_back(std::move(hid));
  }
  Eigen::MatrixXd a = c.hidden.back();
  for (std::size_t l = 0; l < 4; ++l) {
    c.dense_in[l] = a;
    Eigen::MatrixXd z = p.dense_weights[l] * a;
    z.colwise() += p.dense_biases[l];
    a = l < 3 ? Eigen::MatrixXd(z.array().tanh().matrix()) : z;
  }
  c.logits = a;
  c.probs.resize(kTurnClasses, c.batch);
  for (Eigen::Index b = 0; b < c.batch; ++b) {
    const Eigen::VectorXd shifted = (c.logits.col(b).array() - c.logits.col(b).maxCoeff()).matrix();
    const Eigen::VectorXd e = shifted.array().exp().matrix();
    c.probs.col(b) = e / e.sum();
  }
  return c;
}

double sample_loss(const ForwardCache& c, Eigen::Index b, TurnClass label) {
  const auto col = c.logits.col(b);
  const double m = col.maxCoeff();
  const double lse = m + std::log((col.array() - m).exp().sum());
  return lse - col(static_cast<Eigen::Index>(label));
}

std::vector<const TurnSample*> pointers(std::span<const TurnSample> samples) {
  std::vector<const TurnSample*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

}  // namespace

TurnModel::TurnModel(const TurnModelConfig& config) : config_(config) {
  validate_config(config);
  params_ = TurnParams::zeros(config);
}

TurnModel TurnModel::initialized(const TurnModelConfig& config, std::uint64_t seed) {
  TurnModel m(config);
  std::mt19937_64 rng(seed);
  auto glorot = [&](Eigen::MatrixXd& w, double fan_in, double fan_out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = limit * u(rng);
    }
  };
  const double h = config.hidden;
  glorot(m.params_.lstm_input, config.input_width, 4.0 * h);
  glorot(m.params_.lstm_recurrent, h, 4.0 * h);
  m.params_.lstm_bias.segment(config.hidden, config.hidden).setOnes();
  for (auto& w : m.params_.dense_weights) {
    glorot(w, static_cast<double>(w.cols()), static_cast<double>(w.rows()));
  }
  return m;
}

Eigen::Vector4d TurnModel::forward(const Eigen::MatrixXd& input) const {
  TurnSample s;
  s.input = input;
  const TurnSample* batch[] = {&s};
  return forward_batch(batch).col(0);
}

Eigen::MatrixXd TurnModel::forward_batch(std::span<const TurnSample* const> batch) const {
  return run_forward(config_, params_, batch).probs;
}

double accumulate_gradients(const TurnModel& model, std::span<const TurnSample* const> batch,
                            TurnParams& grads, int* correct) {
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto c = run_forward(cfg, p, batch);
  const Eigen::Index h = cfg.hidden;

  double loss = 0.0;
  Eigen::MatrixXd dz = c.probs;
  for (Eigen::Index b = 0; b < c.batch; ++b) {
    const auto label = batch[static_cast<std::size_t>(b)]->label;
    loss += sample_loss(c, b, label);
    if (correct) {
      Eigen::Index arg;
      c.probs.col(b).maxCoeff(&arg);
      if (arg == static_cast<Eigen::Index>(label)) ++*correct;
    }
    dz(static_cast<Eigen::Index>(label), b) -= 1.0;
  }

  // Dense head, output layer first.
  Eigen::MatrixXd da;
  for (int l = 3; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    grads.dense_weights[li] += dz * c.dense_in[li].transpose();
    grads.dense_biases[li] += dz.rowwise().sum();
    da = p.dense_weights[li].transpose() * dz;
    if (l > 0) dz = da.cwiseProduct((1.0 - c.dense_in[li].array().square()).matrix());
  }

  // Backpropagation through time.
  Eigen::MatrixXd dh = da;
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(h, c.batch);
  Eigen::MatrixXd dgate(4 * h, c.batch);
  for (int t = c.steps - 1; t >= 0; --t) {
    const auto ti = static_cast<std::size_t>(t);
    const auto& g = c.gates[ti];
    const auto in = g.topRows(h).array();
    const auto forget = g.middleRows(h, h).array();
    const auto cand = g.middleRows(2 * h, h).array();
    const auto out = g.bottomRows(h).array();
    const Eigen::ArrayXXd tanh_c = c.cell[ti + 1].array().tanh();
    dc.array() += dh.array() * out * (1.0 - tanh_c.square());
    dgate.topRows(h) = (dc.array() * cand * in * (1.0 - in)).matrix();
    dgate.middleRows(h, h) = (dc.array() * c.cell[ti].array() * forget * (1.0 - forget)).matrix();
    dgate.middleRows(2 * h, h) = (dc.array() * in * (1.0 - cand.square())).matrix();
    dgate.bottomRows(h) = (dh.array() * tanh_c * out * (1.0 - out)).matrix();
    grads.lstm_input += dgate * c.x[ti].transpose();
    grads.lstm_recurrent += dgate * c.hidden[ti].transpose();
    grads.lstm_bias += dgate.rowwise().sum();
    dh = p.lstm_recurrent.transpose() * dgate;
    dc = (dc.array() * forget).matrix();
  }
  return loss;
}

double backward(const TurnModel& model, std::span<const TurnSample> batch, TurnParams& grads) {
  grads = TurnParams::zeros(model.config());
  const auto ptrs = pointers(batch);
  const double loss = accumulate_gradients(model, ptrs, grads);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (auto& t : grads.tensors()) {
    Eigen::Map<Eigen::VectorXd>(t.data, t.size()) *= scale;
  }
  return loss * scale;
}

double mean_loss(const TurnModel& model, std::span<const TurnSample> samples) {
  return evaluate(model, samples).loss;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (min_delta < 0.0) throw ValidationError("min delta must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("Adam epsilon must be > 0");
}

TrainResult train(TurnModel model, const TurnDataset& data, const TrainConfig& config) {
  config.validate();
  if (data.train.empty()) throw ValidationError("empty training set");

  TurnParams m = TurnParams::zeros(model.config());
  TurnParams v = TurnParams::zeros(model.config());
  TurnParams grads = TurnParams::zeros(model.config());
  auto param_t = model.params().tensors();
  auto grad_t = grads.tensors();
  auto m_t = m.tensors();
  auto v_t = v.tensors();

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{model, {}, false};
  double best = std::numeric_limits<double>::infinity();
  int waited = 0;
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const TurnSample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data.train[order[i]]);

      for (auto& t : grad_t) std::fill(t.data, t.data + t.size(), 0.0);
      const double batch_loss = accumulate_gradients(model, batch, grads, &correct);
      if (!std::isfinite(batch_loss)) {
        throw ComputationError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch starting at sample " + std::to_string(start));
      }
      loss_sum += batch_loss;

      ++step;
      const double scale = 1.0 / static_cast<double>(batch.size());
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < param_t.size(); ++k) {
        for (Eigen::Index i = 0; i < param_t[k].size(); ++i) {
          const double g = grad_t[k].data[i] * scale;
          double& mi = m_t[k].data[i];
          double& vi = v_t[k].data[i];
          mi = config.beta1 * mi + (1.0 - config.beta1) * g;
          vi = config.beta2 * vi + (1.0 - config.beta2) * g * g;
          param_t[k].data[i] -=
              config.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + config.epsilon);
        }
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    double monitored = rec.train_loss;
    if (!data.val.empty()) {
      const auto ev = evaluate(model, data.val);
      rec.val_loss = ev.loss;
      rec.val_accuracy = ev.accuracy;
      monitored = ev.loss;
    }
    result.history.push_back(rec);
    if (monitored < best - config.min_delta) {
      best = monitored;
      waited = 0;
    } else if (++waited >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  result.model = std::move(model);
  return result;
}

Evaluation evaluate(const TurnModel& model, std::span<const TurnSample> samples) {
  Evaluation ev;
  ev.samples = static_cast<int>(samples.size());
  if (samples.empty()) return ev;
  constexpr std::size_t kChunk = 256;
  double loss = 0.0;
  int correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const auto chunk = samples.subspan(start, std::min(kChunk, samples.size() - start));
    const auto ptrs = pointers(chunk);
    const auto c = run_forward(model.config(), model.params(), ptrs);
    for (Eigen::Index b = 0; b < c.batch; ++b) {
      const auto truth = static_cast<Eigen::Index>(chunk[static_cast<std::size_t>(b)].label);
      Eigen::Index pred;
      c.probs.col(b).maxCoeff(&pred);
      ++ev.counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
      if (pred == truth) ++correct;
      loss += sample_loss(c, b, static_cast<TurnClass>(truth));
    }
  }
  ev.accuracy = static_cast<double>(correct) / ev.samples;
  ev.loss = loss / ev.samples;
  for (std::size_t i = 0; i < kTurnClasses; ++i) {
    for (std::size_t j = 0; j < kTurnClasses; ++j) {
      ev.normalized[i][j] = static_cast<double>(ev.counts[i][j]) / ev.samples;
    }
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Model file

namespace {
constexpr std::string_view kModelMagic = "fform-turn-model 1";
}

void save_model(std::ostream& out, const TurnModel& model, const std::string& config_echo_json) {
  const auto& cfg = model.config();
  nlohmann::json structure = {{"input_width", cfg.input_width},
                              {"hidden", cfg.hidden},
                              {"dense", cfg.dense}};
  nlohmann::json echo = nlohmann::json::parse(config_echo_json);
  echo["model"] = structure;
  out << kModelMagic << '\n' << "config " << echo.dump() << '\n';
  TurnParams params = model.params();
  for (const auto& t : params.tensors()) {
    out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    const Eigen::Map<const Eigen::MatrixXd> m(t.data, t.rows, t.cols);
    for (Eigen::Index i = 0; i < t.rows; ++i) {
      for (Eigen::Index j = 0; j < t.cols; ++j) {
        if (j) out << ' ';
        out << format_double(m(i, j));
      }
      out << '\n';
    }
  }
  out << "end\n";
}

TurnModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kModelMagic) throw ValidationError("model file: bad magic line");
  if (!std::getline(in, line) || line.rfind("config ", 0) != 0) {
    throw ValidationError("model file: missing config line");
  }
  TurnModelConfig cfg;
  try {
    const auto echo = nlohmann::json::parse(line.substr(7));
    const auto& s = echo.at("model");
    cfg.input_width = s.at("input_width").get<int>();
    cfg.hidden = s.at("hidden").get<int>();
    cfg.dense = s.at("dense").get<std::array<int, 3>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model file: bad config: ") + e.what());
  }
  TurnModel model(cfg);
  for (auto& t : model.params().tensors()) {
    std::string word, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> word >> name >> rows >> cols) || word != "tensor" || name != t.name ||
        rows != t.rows || cols != t.cols) {
      throw ValidationError("model file: expected tensor " + t.name + " " + std::to_string(t.rows) +
                            "x" + std::to_string(t.cols));
    }
    Eigen::Map<Eigen::MatrixXd> m(t.data, t.rows, t.cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(in >> m(i, j))) throw ValidationError("model file: truncated tensor " + t.name);
      }
    }
  }
  std::string end;
  if (!(in >> end) || end != "end") throw ValidationError("model file: missing end marker");
  return model;
}

}  // namespace fform
