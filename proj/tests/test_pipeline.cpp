#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fform/error.hpp"
#include "fform/pipeline.hpp"

using namespace fform;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fform_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FFORM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string scene(const std::string& name) { return std::string(FFORM_SCENES_DIR) + "/" + name; }

void write_scene(const fs::path& path, const std::string& json) {
  std::ofstream(path) << json;
}

}  // namespace

TEST_CASE("gen writes the three tables") {
  const auto dir = scratch("gen");
  GenOptions g{scene("three_groups.json"), dir.string()};
  const auto s = run_gen(g);
  CHECK(s.frames.size() == 400);
  CHECK(first_line(dir / "frames.csv") == "person_id,frame,x,y,head_angle,torso_angle");
  CHECK(first_line(dir / "groups.csv") == "frame,group_id,member_ids");
  CHECK(first_line(dir / "activities.csv").rfind("person_id,frame,walking", 0) == 0);

  // the written files load back to the same detection result
  DetectOptions from_files;
  from_files.input.frames = (dir / "frames.csv").string();
  from_files.input.groundtruth = (dir / "groups.csv").string();
  DetectOptions from_scene;
  from_scene.input.scene = scene("three_groups.json");
  const auto a = run_detect(from_files);
  const auto b = run_detect(from_scene);
  REQUIRE(a.match.has_value());
  CHECK(a.match->tp_rate == b.match->tp_rate);
}

TEST_CASE("detect artifacts and memory statistics") {
  const auto dir = scratch("detect");
  DetectOptions opt;
  opt.input.scene = scene("three_groups.json");
  opt.out_dir = dir.string();
  const auto s = run_detect(opt);
  REQUIRE(s.match.has_value());
  CHECK(s.match->tp_rate >= 0.95);
  CHECK(first_line(dir / "group_counts.csv") == "frame,group_count");
  CHECK(first_line(dir / "detect_stats.csv") ==
        "frame,present,isolated,k_lo,k_hi,k_selected,k_candidates_evaluated,silhouette");
  const auto report = nlohmann::json::parse(slurp(dir / "match_report.json"));
  CHECK(report.at("tp_rate").get<double>() == s.match->tp_rate);
  CHECK(report.at("memory").get<bool>());
  CHECK(report.contains("reference"));

  for (std::size_t i = 1; i < s.detection.stats.size(); ++i) {
    CHECK(s.detection.stats[i].candidates_evaluated <= 4);
  }
  auto nomem = opt;
  nomem.cluster.use_memory = false;
  nomem.out_dir.clear();
  const auto n = run_detect(nomem);
  for (const auto& st : n.detection.stats) {
    CHECK(st.candidates_evaluated == std::min(15, st.present) - 1);
  }
}

TEST_CASE("input errors") {
  DetectOptions opt;
  opt.input.frames = "/definitely/missing/frames.csv";
  CHECK_THROWS_WITH_AS(run_detect(opt), doctest::Contains("/definitely/missing/frames.csv"), ValidationError);
  DetectOptions both;
  both.input.frames = "a.csv";
  both.input.scene = scene("three_groups.json");
  CHECK_THROWS_AS(run_detect(both), ValidationError);
  DetectOptions none;
  CHECK_THROWS_AS(run_detect(none), ValidationError);
}

TEST_CASE("dyad report") {
  const auto dir = scratch("dyad");
  DyadOptions opt;
  opt.input.scene = scene("three_groups.json");
  opt.person_a = 0;
  opt.person_b = 1;
  opt.out_dir = dir.string();
  const auto s = run_dyad(opt);
  CHECK(s.rows.size() == 400);
  CHECK(s.groups_source == "detected");
  CHECK(first_line(dir / "dyad_report.csv") == "frame,distance,reciprocal_angle,engagement");
  CHECK(s.rows.back().engagement == 1.0);

  auto unknown = opt;
  unknown.person_b = 99;
  unknown.out_dir.clear();
  CHECK_THROWS_AS(run_dyad(unknown), ValidationError);
}

TEST_CASE("dyad engagement dips at a scripted disturbance") {
  const auto dir = scratch("dyad_pass");
  write_scene(dir / "scene.json", R"({"seed": 2, "participant_count": 5, "duration": 40,
    "formations": [[0, 1], [2, 3], [4]],
    "events": [{"type": "pass_through", "frame": 20, "person": 4, "formation": 0, "duration": 1}]})");
  DyadOptions opt;
  opt.input.scene = (dir / "scene.json").string();
  opt.use_truth = true;
  opt.person_a = 0;
  opt.person_b = 1;
  const auto s = run_dyad(opt);
  REQUIRE(s.rows.size() == 40);
  CHECK(s.groups_source == "truth");
  for (const auto& r : s.rows) {
    if (r.frame == 20) CHECK(r.engagement == 0.5);
    else if (r.frame >= 2) CHECK(r.engagement == 1.0);
  }
}

TEST_CASE("dyad never co-present gives an empty report and a warning") {
  const auto dir = scratch("dyad_apart");
  std::ostringstream frames;
  frames << "person_id,frame,x,y,head_angle,torso_angle\n";
  for (int f = 0; f < 5; ++f) frames << "0," << f << ",0,0,0,0\n";
  for (int f = 5; f < 10; ++f) frames << "1," << f << ",10,0,0,0\n";
  std::ofstream(dir / "frames.csv") << frames.str();
  DyadOptions opt;
  opt.input.frames = (dir / "frames.csv").string();
  opt.person_a = 0;
  opt.person_b = 1;
  opt.out_dir = dir.string();
  const auto s = run_dyad(opt);
  CHECK(s.rows.empty());
  CHECK_FALSE(s.warning.empty());
  CHECK(first_line(dir / "dyad_report.csv") == "frame,distance,reciprocal_angle,engagement");
}

TEST_CASE("predict with top3 and all features") {
  const auto dir = scratch("predict");
  write_scene(dir / "scene.json", R"({"seed": 4, "participant_count": 2, "duration": 600,
    "formations": [[0, 1]], "turn_taking": {"dyad": [0, 1]}})");
  PredictOptions opt;
  opt.input.scene = (dir / "scene.json").string();
  opt.train.epochs = 2;
  opt.out_dir = (dir / "top3").string();
  const auto top = run_predict(opt);
  CHECK(top.features.size() == 3);
  CHECK(top.training.history.size() == 2);
  const auto metrics = nlohmann::json::parse(slurp(dir / "top3" / "metrics.json"));
  CHECK(metrics.at("features").size() == 3);
  CHECK(metrics.at("test").contains("confusion_matrix_normalized"));
  CHECK(fs::exists(dir / "top3" / "model.txt"));
  CHECK(first_line(dir / "top3" / "history.csv").rfind("epoch,", 0) == 0);

  opt.features = "all";
  opt.out_dir = (dir / "all").string();
  const auto all = run_predict(opt);
  CHECK(all.features.size() == kActivityCount);
  CHECK(nlohmann::json::parse(slurp(dir / "all" / "metrics.json")).at("features").size() == kActivityCount);

  opt.features = "speaking,hand_gesturing";
  opt.out_dir.clear();
  CHECK(run_predict(opt).features.size() == 2);
  opt.features = "speaking,juggling";
  CHECK_THROWS_AS(run_predict(opt), ValidationError);

  // the saved model reproduces the reported test accuracy
  std::ifstream model_in(dir / "top3" / "model.txt");
  const auto model = load_model(model_in);
  CHECK(evaluate(model, top.dataset.test).accuracy == top.test.accuracy);
}

TEST_CASE("predict needs enough frames") {
  const auto dir = scratch("predict_small");
  write_scene(dir / "scene.json", R"({"seed": 4, "participant_count": 2, "duration": 8,
    "formations": [[0, 1]], "turn_taking": {"dyad": [0, 1]}})");
  PredictOptions opt;
  opt.input.scene = (dir / "scene.json").string();
  CHECK_THROWS_WITH_AS(run_predict(opt), doctest::Contains("too small"), ValidationError);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("detect --frames /missing.csv --out " + dir.string()) == 1);
  CHECK(run_cli("detect --scene " + scene("three_groups.json") + " --k-min 1 --out " + dir.string()) == 1);
  CHECK(run_cli("dyad --scene " + scene("three_groups.json") + " --pair 0 --out " + dir.string()) == 1);
  CHECK(run_cli("detect --scene " + scene("three_groups.json") + " --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "groups.csv"));
}

TEST_CASE("cli output is byte-identical across runs") {
  const auto a = scratch("cli_a"), b = scratch("cli_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(run_cli("detect --scene " + scene("three_groups.json") + " --out " + dir.string()) == 0);
  }
  for (const char* f : {"groups.csv", "group_counts.csv", "detect_stats.csv", "match_report.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
}
