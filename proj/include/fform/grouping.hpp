#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fform/annotation_io.hpp"
#include "fform/attention.hpp"

namespace fform {

struct ClusterParams {
  int k_min = 2;
  int k_max = 15;  // clamped to the number of people present
  int restarts = 8;
  std::uint64_t seed = 0;
  int memory_below = 1;  // search [N - below, N + above] around the previous count
  int memory_above = 2;
  bool use_memory = true;

  void validate() const;
};

struct KMeansResult {
  std::vector<int> assignment;  // point index -> cluster in [0, k)
  std::vector<Point2> centers;
  double wcss = 0.0;  // within-cluster sum of squared distances
};

// Lloyd iterations from `restarts` farthest-point seedings; the first seed
// point of each restart is drawn from an RNG seeded with `seed`. Returns the
// restart with the lowest WCSS.
KMeansResult kmeans(std::span<const Point2> points, int k, int restarts, std::uint64_t seed);

double within_cluster_ss(std::span<const Point2> points, std::span<const int> assignment, int k);

// Mean silhouette coefficient. Points of singleton clusters, and points with
// a == b == 0, contribute 0. Throws ValidationError with fewer than 2 clusters.
double silhouette(std::span<const Point2> points, std::span<const int> assignment);

struct GroupCountSelection {
  int k = 0;
  double score = 0.0;
  KMeansResult clustering;
  int candidates_evaluated = 0;
};

// Best silhouette over k in [lo, hi]; ties go to the smaller k.
GroupCountSelection select_group_count(std::span<const Point2> points, int lo, int hi,
                                       const ClusterParams& params, std::uint64_t seed);

struct FormationGroup {
  int group_id = 0;
  MemberSet members;
  Point2 o_space_center;
};

struct FrameGrouping {
  int frame = 0;
  std::vector<FormationGroup> groups;  // every group has >= 2 members
  std::vector<int> isolated;
};

struct ClusterMemory {
  int group_count = 1;  // clusters selected at the previous frame, singletons included
  FrameGrouping previous;
};

struct FrameClusterStats {
  int frame = 0;
  int present = 0;
  int k_lo = 0;
  int k_hi = 0;
  int k_selected = 0;
  int candidates_evaluated = 0;
  double silhouette = 0.0;
};

struct ClusterFrameResult {
  FrameGrouping grouping;
  ClusterMemory memory;
  FrameClusterStats stats;
};

ClusterFrameResult cluster_frame(std::span<const AttentionPoint> points,
                                 const std::optional<ClusterMemory>& memory,
                                 const ClusterParams& params);

struct DetectionResult {
  std::vector<FrameGrouping> groupings;
  std::vector<FrameClusterStats> stats;

  GroupingTimeline timeline() const;
};

// Frames are clustered in order; memory carries over unless disabled.
DetectionResult detect_formations(const AttentionSeries& attention, const FrameSequence& frames,
                                  const ClusterParams& params);

struct FrameMatch {
  int frame = 0;
  int truth_groups = 0;
  int predicted_groups = 0;
  std::vector<std::pair<int, int>> matches;  // (truth group_id, predicted group_id)
};

struct MatchResult {
  double tp_rate = 1.0;  // 1.0 when the truth holds no groups
  int matched = 0;
  int truth_total = 0;
  std::vector<FrameMatch> per_frame;
};

// Greedy one-to-one matching by descending overlap; a pair qualifies when
// |intersection| >= tolerance * max(|predicted|, |truth|).
MatchResult match_groups(const GroupingTimeline& predicted, const GroupingTimeline& truth,
                         double tolerance = 2.0 / 3.0);

// (frame, number of groups with at least two members).
std::vector<std::pair<int, int>> group_count_series(const GroupingTimeline& timeline);

// Frames whose count differs from the previous frame's by at least min_jump.
int count_jump_events(std::span<const int> counts, int min_jump = 2);

// Jaccard similarity of two sorted member sets.
double jaccard(const MemberSet& a, const MemberSet& b);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fform
