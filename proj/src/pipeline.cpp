#include "fform/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fform/error.hpp"

namespace fform {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_file(const std::string& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ComputationError("cannot create output directory '" + dir + "': " + ec.message());
  const auto path = (fs::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw ComputationError("cannot write '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

template <typename Parser>
auto parse_file(const std::string& path, Parser parser) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return parser(in, path);
}

}  // namespace

LoadedInput load_input(const InputPaths& paths, bool need_frames, bool need_activities) {
  const bool any_file = !paths.frames.empty() || !paths.activities.empty() || !paths.groundtruth.empty();
  if (paths.synthetic() && any_file) {
    throw ValidationError("give either annotation files or --scene, not both");
  }
  LoadedInput in;
  if (paths.synthetic()) {
    in.scene = parse_scene_config_file(paths.scene);
    auto scene = generate_scene(*in.scene);
    in.frames = std::move(scene.frames);
    in.activities = std::move(scene.activities);
    in.truth = std::move(scene.groups);
    return in;
  }
  if (need_frames && paths.frames.empty()) throw ValidationError("missing --frames (or --scene)");
  if (need_activities && paths.activities.empty()) {
    throw ValidationError("missing --activities (or --scene)");
  }
  if (!paths.frames.empty()) {
    in.frames = parse_file(paths.frames, [](std::istream& s, const std::string& n) { return parse_frames(s, n); });
  }
  if (!paths.activities.empty()) {
    in.activities = parse_file(paths.activities,
                               [](std::istream& s, const std::string& n) { return parse_activities(s, n); });
  }
  if (!paths.groundtruth.empty()) {
    in.truth = parse_file(paths.groundtruth,
                          [](std::istream& s, const std::string& n) { return parse_groundtruth(s, n); });
  }
  return in;
}

DetectSummary detect(const FrameSequence& frames, const AttentionParams& attention,
                     const ClusterParams& cluster) {
  attention.validate();
  cluster.validate();
  DetectSummary s;
  const auto series = compute_attention(frames, attention);
  s.torso_fallbacks = series.torso_fallbacks;
  s.detection = detect_formations(series, frames, cluster);
  s.timeline = s.detection.timeline();
  return s;
}

DetectSummary run_detect(const DetectOptions& options) {
  const auto input = load_input(options.input, true, false);
  if (!(options.match_tolerance > 0.0 && options.match_tolerance <= 1.0)) {
    throw ValidationError("match tolerance must lie in (0, 1]");
  }
  auto summary = detect(input.frames, options.attention, options.cluster);
  if (input.truth) summary.match = match_groups(summary.timeline, *input.truth, options.match_tolerance);
  if (options.out_dir.empty()) return summary;

  std::ostringstream groups;
  write_groups(groups, summary.timeline);
  write_text_file(options.out_dir, "groups.csv", groups.str());

  std::ostringstream counts;
  counts << "frame,group_count\n";
  for (const auto& [frame, n] : group_count_series(summary.timeline)) counts << frame << ',' << n << '\n';
  write_text_file(options.out_dir, "group_counts.csv", counts.str());

  std::ostringstream stats;
  stats << "frame,present,isolated,k_lo,k_hi,k_selected,k_candidates_evaluated,silhouette\n";
  for (std::size_t i = 0; i < summary.detection.stats.size(); ++i) {
    const auto& st = summary.detection.stats[i];
    stats << st.frame << ',' << st.present << ',' << summary.detection.groupings[i].isolated.size() << ','
          << st.k_lo << ',' << st.k_hi << ',' << st.k_selected << ',' << st.candidates_evaluated << ','
          << format_double(st.silhouette) << '\n';
  }
  write_text_file(options.out_dir, "detect_stats.csv", stats.str());

  if (summary.match) {
    const auto& m = *summary.match;
    json frames = json::array();
    for (const auto& fm : m.per_frame) {
      frames.push_back({{"frame", fm.frame},
                        {"truth_groups", fm.truth_groups},
                        {"predicted_groups", fm.predicted_groups},
                        {"matched", fm.matches.size()}});
    }
    json report = {{"tp_rate", m.tp_rate},
                   {"matched", m.matched},
                   {"truth_groups", m.truth_total},
                   {"tolerance", options.match_tolerance},
                   {"memory", options.cluster.use_memory},
                   {"torso_fallbacks", summary.torso_fallbacks},
                   {"reference", {{"dataset", "MatchNMingle (Mingle)"}, {"tp_rate", 0.85}}},
                   {"per_frame", frames}};
    write_text_file(options.out_dir, "match_report.json", report.dump(2) + "\n");
  }
  return summary;
}

DyadSummary run_dyad(const DyadOptions& options) {
  const auto input = load_input(options.input, true, false);
  const auto people = input.frames.person_ids();
  for (int p : {options.person_a, options.person_b}) {
    if (!std::binary_search(people.begin(), people.end(), p)) {
      throw ValidationError("unknown person id " + std::to_string(p));
    }
  }
  DyadSummary s;
  GroupingTimeline timeline;
  if (!options.groups.empty()) {
    timeline = parse_file(options.groups,
                          [](std::istream& in, const std::string& n) { return parse_groundtruth(in, n); });
    s.groups_source = "file";
  } else if (options.use_truth) {
    if (!input.truth) throw ValidationError("--use-truth needs --groundtruth or --scene");
    timeline = *input.truth;
    s.groups_source = "truth";
  } else {
    timeline = detect(input.frames, options.attention, options.cluster).timeline;
    s.groups_source = "detected";
  }
  DyadReportOptions ro;
  ro.attention = options.attention;
  ro.use_torso = options.use_torso;
  s.rows = dyad_report(input.frames, timeline, options.person_a, options.person_b, ro);
  if (s.rows.empty()) {
    s.warning = "persons " + std::to_string(options.person_a) + " and " + std::to_string(options.person_b) +
                " are never present in the same frame";
  }
  if (!options.out_dir.empty()) {
    std::ostringstream out;
    out << "frame,distance,reciprocal_angle,engagement\n";
    for (const auto& r : s.rows) {
      out << r.frame << ',' << format_double(r.distance) << ',' << format_double(r.reciprocal_angle) << ','
          << format_double(r.engagement) << '\n';
    }
    write_text_file(options.out_dir, "dyad_report.csv", out.str());
  }
  return s;
}

namespace {

std::vector<Activity> resolve_features(const std::string& spec, std::span<const FeatureCorrelation> ranking) {
  if (spec == "top3") return top_features(ranking, 3);
  if (spec == "all") {
    std::vector<Activity> all;
    for (std::size_t i = 0; i < kActivityCount; ++i) all.push_back(static_cast<Activity>(i));
    return all;
  }
  std::vector<Activity> out;
  std::stringstream ss(spec);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto a = activity_from_name(name);
    if (!a) throw ValidationError("unknown feature '" + name + "'");
    if (std::find(out.begin(), out.end(), *a) != out.end()) {
      throw ValidationError("feature '" + name + "' listed twice");
    }
    out.push_back(*a);
  }
  if (out.empty()) throw ValidationError("empty feature list");
  return out;
}

json class_fractions(std::span<const TurnSample> samples) {
  std::array<int, kTurnClasses> h{};
  for (const auto& s : samples) ++h[static_cast<std::size_t>(s.label)];
  json j = json::object();
  for (std::size_t c = 0; c < kTurnClasses; ++c) {
    j[std::string(kTurnClassNames[c])] =
        samples.empty() ? 0.0 : static_cast<double>(h[c]) / static_cast<double>(samples.size());
  }
  return j;
}

json reference_values() {
  return {{"dataset", "MatchNMingle (Mingle), not reproducible without the dataset"},
          {"test_accuracy", 0.98},
          {"class_frequencies", {{"speaker1", 0.26}, {"speaker2", 0.31}, {"overlap", 0.07}, {"silence", 0.36}}},
          {"pearson", {{"speaking", 0.987}, {"hand_gesturing", 0.430}, {"head_gesturing", 0.176}}},
          {"confusion_matrix_normalized",
           {{0.33, 0.0002, 0.0015, 0.0037},
            {0.0002, 0.31, 0.0015, 0.0026},
            {0.0015, 0.0019, 0.62, 0.00003},
            {0.0029, 0.0027, 0.00003, 0.27}}}};
}

}  // namespace

PredictSummary run_predict(const PredictOptions& options) {
  const auto input = load_input(options.input, false, true);
  std::pair<int, int> dyad;
  if (options.dyad) {
    dyad = *options.dyad;
  } else if (input.scene && input.scene->turn_taking) {
    dyad = {input.scene->turn_taking->person_a, input.scene->turn_taking->person_b};
  } else {
    throw ValidationError("missing --dyad");
  }
  if (dyad.first == dyad.second) throw ValidationError("dyad needs two distinct persons");

  PredictSummary s;
  s.ranking = rank_features(input.activities, dyad.first, dyad.second, options.dataset.horizon);
  s.features = resolve_features(options.features, s.ranking);
  DatasetOptions dopt = options.dataset;
  dopt.features = s.features;
  s.dataset = build_dataset(input.activities, dyad.first, dyad.second, dopt);
  if (s.dataset.test.empty()) throw ValidationError("dataset too small: empty test split");

  TurnModelConfig mcfg = options.model;
  mcfg.input_width = static_cast<int>(2 * s.features.size());
  auto model = TurnModel::initialized(mcfg, derive_seed(options.train.seed, 1));
  s.training = train(std::move(model), s.dataset, options.train);
  s.test = evaluate(s.training.model, s.dataset.test);

  json feature_names = json::array();
  for (auto f : s.features) feature_names.push_back(kActivityNames[static_cast<std::size_t>(f)]);
  json ranking = json::array();
  for (const auto& fc : s.ranking) {
    ranking.push_back({{"feature", kActivityNames[static_cast<std::size_t>(fc.feature)]},
                       {"r", fc.r},
                       {"defined", fc.defined}});
  }
  json history = json::array();
  for (const auto& e : s.training.history) {
    history.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"train_accuracy", e.train_accuracy},
                       {"val_loss", e.val_loss},
                       {"val_accuracy", e.val_accuracy}});
  }
  json all_freq = json::object();
  for (std::size_t c = 0; c < kTurnClasses; ++c) {
    all_freq[std::string(kTurnClassNames[c])] =
        static_cast<double>(s.dataset.histogram[c]) / static_cast<double>(s.dataset.total_samples);
  }
  const auto& tc = options.train;
  s.metrics = {
      {"accuracy_unit", "per sample (one prediction per frame)"},
      {"dyad", {dyad.first, dyad.second}},
      {"classes", kTurnClassNames},
      {"features", feature_names},
      {"feature_ranking", ranking},
      {"dataset",
       {{"window", dopt.window},
        {"horizon", dopt.horizon},
        {"total_samples", s.dataset.total_samples},
        {"train", s.dataset.train.size()},
        {"val", s.dataset.val.size()},
        {"test", s.dataset.test.size()},
        {"split", {dopt.train_fraction, dopt.val_fraction, dopt.test_fraction}}}},
      {"class_frequencies",
       {{"all", all_freq},
        {"train", class_fractions(s.dataset.train)},
        {"val", class_fractions(s.dataset.val)},
        {"test", class_fractions(s.dataset.test)}}},
      {"model", {{"input_width", mcfg.input_width}, {"hidden", mcfg.hidden}, {"dense", mcfg.dense}}},
      {"training",
       {{"optimizer", "adam"},
        {"learning_rate", tc.learning_rate},
        {"beta1", tc.beta1},
        {"beta2", tc.beta2},
        {"epsilon", tc.epsilon},
        {"epochs", tc.epochs},
        {"epochs_run", s.training.history.size()},
        {"batch_size", tc.batch_size},
        {"patience", tc.patience},
        {"min_delta", tc.min_delta},
        {"early_stopped", s.training.early_stopped},
        {"seed", tc.seed}}},
      {"history", history},
      {"test",
       {{"samples", s.test.samples},
        {"accuracy", s.test.accuracy},
        {"loss", s.test.loss},
        {"confusion_counts", s.test.counts},
        {"confusion_matrix_normalized", s.test.normalized}}},
      {"reference", reference_values()}};

  if (!options.out_dir.empty()) {
    json echo = {{"features", feature_names},
                 {"window", dopt.window},
                 {"horizon", dopt.horizon},
                 {"dyad", {dyad.first, dyad.second}},
                 {"training", s.metrics["training"]}};
    std::ostringstream model_out;
    save_model(model_out, s.training.model, echo.dump());
    write_text_file(options.out_dir, "model.txt", model_out.str());
    write_text_file(options.out_dir, "metrics.json", s.metrics.dump(2) + "\n");
    std::ostringstream hist;
    hist << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (const auto& e : s.training.history) {
      hist << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_accuracy) << ','
           << format_double(e.val_loss) << ',' << format_double(e.val_accuracy) << '\n';
    }
    write_text_file(options.out_dir, "history.csv", hist.str());
  }
  return s;
}

SyntheticScene run_gen(const GenOptions& options) {
  if (options.scene.empty()) throw ValidationError("missing --scene");
  auto scene = generate_scene(parse_scene_config_file(options.scene));
  if (!options.out_dir.empty()) {
    std::ostringstream frames, activities, groups;
    write_frames(frames, scene.frames);
    write_activities(activities, scene.activities);
    write_groups(groups, scene.groups);
    write_text_file(options.out_dir, "frames.csv", frames.str());
    write_text_file(options.out_dir, "activities.csv", activities.str());
    write_text_file(options.out_dir, "groups.csv", groups.str());
  }
  return scene;
}

}  // namespace fform
