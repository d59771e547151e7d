#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fform/error.hpp"
#include "fform/pipeline.hpp"

namespace py = pybind11;
using namespace fform;

namespace {

std::vector<Point2> to_points(const std::vector<std::pair<double, double>>& xy) {
  std::vector<Point2> out;
  out.reserve(xy.size());
  for (const auto& [x, y] : xy) out.push_back({x, y});
  return out;
}

py::tuple to_tuple(Point2 p) { return py::make_tuple(p.x, p.y); }

InputPaths input_paths(const std::string& scene, const std::string& frames, const std::string& activities,
                       const std::string& groundtruth) {
  InputPaths in;
  in.scene = scene;
  in.frames = frames;
  in.activities = activities;
  in.groundtruth = groundtruth;
  return in;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "F-formation detection, dyad engagement and next-speaker prediction";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ComputationError>(m, "ComputationError", PyExc_ArithmeticError);

  // geometry
  m.def("normalize_angle", &normalize_angle, py::arg("radians"));
  m.def("circular_mean", [](const std::vector<double>& a) { return circular_mean(a); }, py::arg("angles"));
  m.def("angular_difference", &angular_difference, py::arg("a"), py::arg("b"));
  m.def(
      "smoothed_angle",
      [](const std::vector<double>& angles, int frame, int window) {
        return smoothed_angle(make_track(0, AngleKind::kHead, angles), frame, window);
      },
      py::arg("angles"), py::arg("frame"), py::arg("window") = 5,
      "Windowed circular mean of a track whose samples start at frame 0.");
  m.def(
      "time_weighted_angle",
      [](const std::vector<double>& head, const std::vector<double>& torso, int frame, int window,
         double torsion_threshold) {
        AttentionParams p;
        p.window = window;
        p.torsion_threshold = torsion_threshold;
        p.validate();
        const auto w = weighted_attention_angle(make_track(0, AngleKind::kHead, head),
                                                make_track(0, AngleKind::kTorso, torso), frame, p);
        py::dict out;
        out["theta"] = w.theta;
        out["head_weight"] = w.head_weight;
        out["head_smoothed"] = w.head_smoothed;
        out["torso_smoothed"] = w.torso_smoothed;
        return out;
      },
      py::arg("head"), py::arg("torso"), py::arg("frame"), py::arg("window") = 5,
      py::arg("torsion_threshold") = AttentionParams{}.torsion_threshold);
  m.def(
      "center_of_attention",
      [](std::pair<double, double> pos, double theta, double d) {
        return to_tuple(center_of_attention({pos.first, pos.second}, theta, d));
      },
      py::arg("position"), py::arg("theta"), py::arg("d") = 100.0);

  // clustering
  m.def(
      "kmeans",
      [](const std::vector<std::pair<double, double>>& xy, int k, int restarts, std::uint64_t seed) {
        const auto r = kmeans(to_points(xy), k, restarts, seed);
        py::list centers;
        for (const auto& c : r.centers) centers.append(to_tuple(c));
        py::dict out;
        out["assignment"] = r.assignment;
        out["centers"] = centers;
        out["wcss"] = r.wcss;
        return out;
      },
      py::arg("points"), py::arg("k"), py::arg("restarts") = 8, py::arg("seed") = 0);
  m.def(
      "silhouette",
      [](const std::vector<std::pair<double, double>>& xy, const std::vector<int>& assignment) {
        return silhouette(to_points(xy), assignment);
      },
      py::arg("points"), py::arg("assignment"));
  m.def(
      "select_group_count",
      [](const std::vector<std::pair<double, double>>& xy, int lo, int hi, std::uint64_t seed) {
        ClusterParams p;
        p.seed = seed;
        const auto s = select_group_count(to_points(xy), lo, hi, p, seed);
        py::dict out;
        out["k"] = s.k;
        out["score"] = s.score;
        out["assignment"] = s.clustering.assignment;
        out["candidates_evaluated"] = s.candidates_evaluated;
        return out;
      },
      py::arg("points"), py::arg("lo"), py::arg("hi"), py::arg("seed") = 0);

  // engagement
  m.def(
      "interpersonal_distance",
      [](std::pair<double, double> a, std::pair<double, double> b) {
        return interpersonal_distance({a.first, a.second}, {b.first, b.second});
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "reciprocal_angle",
      [](std::pair<double, double> pa, double ta, std::pair<double, double> pb, double tb) {
        return reciprocal_angle({{pa.first, pa.second}, ta}, {{pb.first, pb.second}, tb});
      },
      py::arg("position_a"), py::arg("theta_a"), py::arg("position_b"), py::arg("theta_b"));
  m.def(
      "engagement_from_membership",
      [](const std::vector<bool>& in) {
        std::unique_ptr<bool[]> buf(new bool[in.size()]);
        for (std::size_t i = 0; i < in.size(); ++i) buf[i] = in[i];
        return engagement_from_membership(std::span<const bool>(buf.get(), in.size()));
      },
      py::arg("in_formation"));

  // turn-taking
  m.def(
      "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
      py::arg("x"), py::arg("y"));

  // scenes and subcommands
  m.def(
      "generate_scene",
      [](const std::string& config_json) {
        std::istringstream in(config_json);
        const auto scene = generate_scene(parse_scene_config(in));
        std::ostringstream frames, activities, groups;
        write_frames(frames, scene.frames);
        write_activities(activities, scene.activities);
        write_groups(groups, scene.groups);
        py::dict out;
        out["frames"] = frames.str();
        out["activities"] = activities.str();
        out["groups"] = groups.str();
        return out;
      },
      py::arg("config_json"), "Generate a synthetic scene; returns the three tables as CSV text.");
  m.def(
      "run_gen",
      [](const std::string& scene, const std::string& out_dir) {
        return run_gen({scene, out_dir}).frames.size();
      },
      py::arg("scene"), py::arg("out_dir"));
  m.def(
      "run_detect",
      [](const std::string& scene, const std::string& frames, const std::string& groundtruth,
         const std::string& out_dir, bool use_memory, std::uint64_t seed) {
        DetectOptions o;
        o.input = input_paths(scene, frames, "", groundtruth);
        o.cluster.use_memory = use_memory;
        o.cluster.seed = seed;
        o.out_dir = out_dir;
        DetectSummary s;
        {
          py::gil_scoped_release release;
          s = run_detect(o);
        }
        py::dict out;
        out["frames"] = s.detection.groupings.size();
        out["tp_rate"] = s.match ? py::cast(s.match->tp_rate) : py::none();
        std::vector<int> candidates;
        for (const auto& st : s.detection.stats) candidates.push_back(st.candidates_evaluated);
        out["candidates_evaluated"] = candidates;
        return out;
      },
      py::arg("scene") = "", py::arg("frames") = "", py::arg("groundtruth") = "", py::arg("out_dir") = "",
      py::arg("use_memory") = true, py::arg("seed") = 0);
  m.def(
      "run_dyad",
      [](int person_a, int person_b, const std::string& scene, const std::string& frames,
         const std::string& groups, bool use_truth, const std::string& out_dir) {
        DyadOptions o;
        o.input = input_paths(scene, frames, "", "");
        o.groups = groups;
        o.use_truth = use_truth;
        o.person_a = person_a;
        o.person_b = person_b;
        o.out_dir = out_dir;
        const auto s = run_dyad(o);
        py::list rows;
        for (const auto& r : s.rows) rows.append(py::make_tuple(r.frame, r.distance, r.reciprocal_angle, r.engagement));
        py::dict out;
        out["rows"] = rows;
        out["groups_source"] = s.groups_source;
        out["warning"] = s.warning;
        return out;
      },
      py::arg("person_a"), py::arg("person_b"), py::arg("scene") = "", py::arg("frames") = "",
      py::arg("groups") = "", py::arg("use_truth") = false, py::arg("out_dir") = "");
  m.def(
      "run_predict",
      [](const std::string& scene, const std::string& activities, std::optional<std::pair<int, int>> dyad,
         const std::string& features, int epochs, std::uint64_t seed, const std::string& out_dir) {
        PredictOptions o;
        o.input = input_paths(scene, "", activities, "");
        o.dyad = dyad;
        o.features = features;
        o.train.epochs = epochs;
        o.train.seed = seed;
        o.out_dir = out_dir;
        PredictSummary s;
        {
          py::gil_scoped_release release;
          s = run_predict(o);
        }
        return py::module_::import("json").attr("loads")(s.metrics.dump());
      },
      py::arg("scene") = "", py::arg("activities") = "", py::arg("dyad") = py::none(), py::arg("features") = "top3",
      py::arg("epochs") = 15, py::arg("seed") = 0, py::arg("out_dir") = "",
      "Train and evaluate the next-speaker model; returns the metrics document.");
}
