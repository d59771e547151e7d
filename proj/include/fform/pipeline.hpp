#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fform/annotation_io.hpp"
#include "fform/attention.hpp"
#include "fform/engagement.hpp"
#include "fform/grouping.hpp"
#include "fform/turntaking.hpp"

namespace fform {

// Either annotation files or a synthetic scene config, never both.
struct InputPaths {
  std::string frames;
  std::string activities;
  std::string groundtruth;
  std::string scene;

  bool synthetic() const { return !scene.empty(); }
};

struct LoadedInput {
  FrameSequence frames;
  std::vector<ActivityRecord> activities;
  std::optional<GroupingTimeline> truth;
  std::optional<SyntheticSceneConfig> scene;
};

LoadedInput load_input(const InputPaths& paths, bool need_frames, bool need_activities);

struct DetectOptions {
  InputPaths input;
  AttentionParams attention;
  ClusterParams cluster;
  double match_tolerance = 2.0 / 3.0;
  std::string out_dir;  // nothing is written when empty
};

struct DetectSummary {
  DetectionResult detection;
  GroupingTimeline timeline;
  std::optional<MatchResult> match;
  int torso_fallbacks = 0;
};

DetectSummary detect(const FrameSequence& frames, const AttentionParams& attention,
                     const ClusterParams& cluster);

// Writes groups.csv, group_counts.csv, detect_stats.csv and, with ground
// truth, match_report.json.
DetectSummary run_detect(const DetectOptions& options);

struct DyadOptions {
  InputPaths input;
  std::string groups;      // predicted or annotated groups.csv; detection runs otherwise
  bool use_truth = false;  // score against ground truth instead of detection
  AttentionParams attention;
  ClusterParams cluster;
  bool use_torso = false;
  int person_a = -1;
  int person_b = -1;
  std::string out_dir;
};

struct DyadSummary {
  std::vector<DyadRow> rows;
  std::string groups_source;  // "file", "truth" or "detected"
  std::string warning;
};

// Writes dyad_report.csv.
DyadSummary run_dyad(const DyadOptions& options);

struct PredictOptions {
  InputPaths input;
  std::optional<std::pair<int, int>> dyad;  // defaults to the scene's scripted dyad
  std::string features = "top3";           // "top3", "all" or comma-separated names
  DatasetOptions dataset;
  TurnModelConfig model;
  TrainConfig train;
  std::string out_dir;
};

struct PredictSummary {
  std::vector<FeatureCorrelation> ranking;
  std::vector<Activity> features;
  TurnDataset dataset;
  TrainResult training;
  Evaluation test;
  nlohmann::json metrics;
};

// Writes model.txt, metrics.json and history.csv.
PredictSummary run_predict(const PredictOptions& options);

struct GenOptions {
  std::string scene;
  std::string out_dir;
};

// Writes frames.csv, activities.csv and groups.csv.
SyntheticScene run_gen(const GenOptions& options);

// Output directory helpers shared with the CLI.
void write_text_file(const std::string& dir, const std::string& name, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace fform
