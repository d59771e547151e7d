// fform: F-formation detection, dyad engagement and next-speaker prediction.
//
//   fform gen     --scene scene.json --out DIR
//   fform detect  (--frames F [--groundtruth G] | --scene S) --out DIR
//   fform dyad    (--frames F | --scene S) --pair I,J --out DIR
//   fform predict (--activities A --dyad I,J | --scene S) --out DIR
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cmath>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fform/error.hpp"
#include "fform/pipeline.hpp"

namespace {

void add_attention_flags(CLI::App& cmd, fform::AttentionParams& p) {
  cmd.add_option("--d", p.d, "Social-interaction distance in pixels")->capture_default_str();
  cmd.add_option("--window", p.window, "Smoothing window in frames")->capture_default_str();
  cmd.add_option("--torsion-threshold", p.torsion_threshold, "Head/torso torsion threshold in radians")
      ->capture_default_str();
}

void add_cluster_flags(CLI::App& cmd, fform::ClusterParams& p) {
  cmd.add_option("--k-min", p.k_min, "Smallest group count searched")->capture_default_str();
  cmd.add_option("--k-max", p.k_max, "Largest group count searched")->capture_default_str();
  cmd.add_option("--restarts", p.restarts, "K-means restarts per candidate")->capture_default_str();
  cmd.add_option("--seed", p.seed, "Clustering seed")->capture_default_str();
  cmd.add_flag("--no-memory", [&p](std::int64_t) { p.use_memory = false; },
               "Search the full group-count range at every frame");
}

void add_input_flags(CLI::App& cmd, fform::InputPaths& in, bool activities, bool truth) {
  cmd.add_option("--frames", in.frames, "frames.csv");
  if (activities) cmd.add_option("--activities", in.activities, "activities.csv");
  if (truth) cmd.add_option("--groundtruth", in.groundtruth, "Ground-truth groups.csv");
  cmd.add_option("--scene", in.scene, "Synthetic scene config (JSON) instead of annotation files");
}

std::pair<int, int> parse_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw fform::ValidationError("expected I,J but got '" + text + "'");
  try {
    return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw fform::ValidationError("expected I,J but got '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"F-formation detection, dyad engagement and next-speaker prediction"};
  app.require_subcommand(1);

  fform::GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic annotated scene");
  gen_cmd->add_option("--scene", gen.scene, "Scene config (JSON)")->required();
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();

  fform::DetectOptions det;
  auto* det_cmd = app.add_subcommand("detect", "Detect F-formations per frame");
  add_input_flags(*det_cmd, det.input, false, true);
  add_attention_flags(*det_cmd, det.attention);
  add_cluster_flags(*det_cmd, det.cluster);
  det_cmd->add_option("--match-tolerance", det.match_tolerance, "Member overlap needed for a true positive")
      ->capture_default_str();
  det_cmd->add_option("--out", det.out_dir, "Output directory")->required();

  fform::DyadOptions dyad;
  std::string dyad_pair;
  auto* dyad_cmd = app.add_subcommand("dyad", "Distance, reciprocal angle and engagement of one dyad");
  add_input_flags(*dyad_cmd, dyad.input, false, true);
  add_attention_flags(*dyad_cmd, dyad.attention);
  add_cluster_flags(*dyad_cmd, dyad.cluster);
  dyad_cmd->add_option("--pair", dyad_pair, "Person ids I,J")->required();
  dyad_cmd->add_option("--groups", dyad.groups, "Use this groups.csv instead of running detection");
  dyad_cmd->add_flag("--use-truth", dyad.use_truth, "Use the ground-truth groups");
  dyad_cmd->add_flag("--reciprocal-use-torso", dyad.use_torso,
                     "Reciprocal angle from the raw torso angle instead of the time-weighted angle");
  dyad_cmd->add_option("--out", dyad.out_dir, "Output directory")->required();

  fform::PredictOptions pred;
  std::string pred_pair;
  auto* pred_cmd = app.add_subcommand("predict", "Train and evaluate the next-speaker classifier");
  add_input_flags(*pred_cmd, pred.input, true, false);
  pred_cmd->add_option("--dyad", pred_pair, "Person ids I,J (default: the scene's scripted dyad)");
  pred_cmd->add_option("--features", pred.features, "top3, all, or comma-separated activity names")
      ->capture_default_str();
  pred_cmd->add_option("--hidden", pred.model.hidden, "LSTM hidden size")->capture_default_str();
  pred_cmd->add_option("--window-t", pred.dataset.window, "Input window in frames")->capture_default_str();
  pred_cmd->add_option("--horizon", pred.dataset.horizon, "Prediction horizon in frames")->capture_default_str();
  pred_cmd->add_option("--batch", pred.train.batch_size, "Mini-batch size")->capture_default_str();
  pred_cmd->add_option("--epochs", pred.train.epochs, "Training epochs")->capture_default_str();
  pred_cmd->add_option("--lr", pred.train.learning_rate, "Adam learning rate")->capture_default_str();
  pred_cmd->add_option("--patience", pred.train.patience, "Early-stopping patience in epochs")
      ->capture_default_str();
  pred_cmd->add_option("--min-delta", pred.train.min_delta, "Smallest validation-loss improvement")
      ->capture_default_str();
  pred_cmd->add_option("--seed", pred.train.seed, "Training seed")->capture_default_str();
  pred_cmd->add_option("--out", pred.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen_cmd) {
      const auto scene = fform::run_gen(gen);
      std::cout << "wrote " << scene.frames.size() << " frames to " << gen.out_dir << '\n';
    } else if (*det_cmd) {
      const auto s = fform::run_detect(det);
      std::cout << "detected groups over " << s.detection.groupings.size() << " frames";
      if (s.match) std::cout << "; tp_rate " << s.match->tp_rate;
      std::cout << '\n';
    } else if (*dyad_cmd) {
      std::tie(dyad.person_a, dyad.person_b) = parse_pair(dyad_pair);
      const auto s = fform::run_dyad(dyad);
      if (!s.warning.empty()) std::cerr << "warning: " << s.warning << '\n';
      std::cout << "wrote " << s.rows.size() << " rows (" << s.groups_source << " groups)\n";
    } else if (*pred_cmd) {
      if (!pred_pair.empty()) pred.dyad = parse_pair(pred_pair);
      const auto s = fform::run_predict(pred);
      std::cout << "test accuracy " << s.test.accuracy << " on " << s.test.samples << " samples\n";
    }
  } catch (const fform::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
