#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fform/annotation_io.hpp"

namespace fform {

// Speaking state of a dyad at one frame.
enum class TurnClass : int { kSpeaker1 = 0, kSpeaker2 = 1, kOverlap = 2, kSilence = 3 };
inline constexpr int kTurnClasses = 4;
inline constexpr std::array<std::string_view, kTurnClasses> kTurnClassNames = {
    "speaker1", "speaker2", "overlap", "silence"};

TurnClass turn_label(bool speaking1, bool speaking2);

// Pearson correlation. Throws ComputationError for constant series and
// ValidationError for mismatched or too-short inputs.
double pearson(std::span<const double> x, std::span<const double> y);

struct FeatureCorrelation {
  Activity feature = Activity::kSpeaking;
  double r = 0.0;
  bool defined = true;  // false when the flag (or target) never varies
};

// Correlation of each current-frame flag with the same person's speaking
// flag `horizon` frames later, pooled over both dyad members; sorted by |r|
// descending, undefined correlations last.
std::vector<FeatureCorrelation> rank_features(std::span<const ActivityRecord> records, int person_a,
                                              int person_b, int horizon = 1);

std::vector<Activity> top_features(std::span<const FeatureCorrelation> ranking, std::size_t count);

struct TurnSample {
  Eigen::MatrixXd input;  // features x window, oldest column first
  TurnClass label = TurnClass::kSilence;
  int frame = 0;  // frame of the newest input column
};

struct DatasetOptions {
  int window = 10;
  int horizon = 1;
  double train_fraction = 0.7;
  double val_fraction = 0.2;
  double test_fraction = 0.1;
  std::vector<Activity> features = {Activity::kSpeaking, Activity::kHandGesturing,
                                    Activity::kHeadGesturing};
};

struct TurnDataset {
  std::vector<TurnSample> train, val, test;
  std::vector<Activity> features;
  int total_samples = 0;  // before splitting
  std::array<int, kTurnClasses> histogram{};  // labels over all samples
};

// Sliding windows over the frames where both persons have records. The split
// is contiguous in time; the first window + horizon - 1 validation samples
// are dropped so no validation or test window shares a frame with training.
TurnDataset build_dataset(std::span<const ActivityRecord> records, int person_a, int person_b,
                          const DatasetOptions& options);

struct TurnModelConfig {
  int input_width = 6;
  int hidden = 32;
  std::array<int, 3> dense = {32, 16, 8};  // followed by the 4-way output layer
};

// All trainable tensors. Gate blocks in the stacked LSTM matrices are ordered
// input, forget, candidate, output.
struct TurnParams {
  Eigen::MatrixXd lstm_input;      // 4H x F
  Eigen::MatrixXd lstm_recurrent;  // 4H x H
  Eigen::VectorXd lstm_bias;       // 4H
  std::array<Eigen::MatrixXd, 4> dense_weights;
  std::array<Eigen::VectorXd, 4> dense_biases;

  static TurnParams zeros(const TurnModelConfig& config);

  struct Tensor {
    std::string name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index size() const { return rows * cols; }
  };
  std::vector<Tensor> tensors();
  std::size_t parameter_count() const;
};

class TurnModel {
 public:
  TurnModel() : TurnModel(TurnModelConfig{}) {}
  explicit TurnModel(const TurnModelConfig& config);

  // Glorot-uniform weights, zero biases, forget-gate bias 1.
  static TurnModel initialized(const TurnModelConfig& config, std::uint64_t seed);

  const TurnModelConfig& config() const { return config_; }
  TurnParams& params() { return params_; }
  const TurnParams& params() const { return params_; }

  // Class probabilities for one input window.
  Eigen::Vector4d forward(const Eigen::MatrixXd& input) const;
  // Probabilities for a batch, one column per sample.
  Eigen::MatrixXd forward_batch(std::span<const TurnSample* const> batch) const;

 private:
  TurnModelConfig config_;
  TurnParams params_;
};

// Adds the summed cross-entropy gradient of `batch` into `grads` and returns
// the summed loss. `correct`, when given, receives the number of argmax hits.
double accumulate_gradients(const TurnModel& model, std::span<const TurnSample* const> batch,
                            TurnParams& grads, int* correct = nullptr);

// Mean cross-entropy gradient over the batch (exact backpropagation through
// time). Returns the mean loss.
double backward(const TurnModel& model, std::span<const TurnSample> batch, TurnParams& grads);

double mean_loss(const TurnModel& model, std::span<const TurnSample> samples);

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 15;
  double min_delta = 1e-10;
  int patience = 50;  // epochs without validation-loss improvement
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  TurnModel model;
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

// Adam on mini-batches; early stopping monitors the validation loss (the
// training loss when there is no validation set).
TrainResult train(TurnModel model, const TurnDataset& data, const TrainConfig& config);

struct Evaluation {
  int samples = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  std::array<std::array<int, kTurnClasses>, kTurnClasses> counts{};         // [truth][predicted]
  std::array<std::array<double, kTurnClasses>, kTurnClasses> normalized{};  // counts / samples
};

Evaluation evaluate(const TurnModel& model, std::span<const TurnSample> samples);

// Text container: magic line, one-line JSON config echo, then each tensor as
// "tensor <name> <rows> <cols>" followed by its rows.
void save_model(std::ostream& out, const TurnModel& model, const std::string& config_echo_json = "{}");
TurnModel load_model(std::istream& in);

}  // namespace fform
