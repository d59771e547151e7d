#include "fform/grouping.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <tuple>

#include "fform/error.hpp"

namespace fform {

namespace {

double sq_dist(Point2 a, Point2 b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

std::vector<Point2> farthest_point_seeds(std::span<const Point2> points, int k, std::size_t first) {
  std::vector<Point2> centers{points[first]};
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(points[i], centers.back()));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    centers.push_back(points[best]);
  }
  return centers;
}

KMeansResult lloyd(std::span<const Point2> points, std::vector<Point2> centers) {
  constexpr int kMaxIterations = 300;
  const int k = static_cast<int>(centers.size());
  std::vector<int> assignment(points.size(), -1);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double best_d = sq_dist(points[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], centers[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<Point2> sums(static_cast<std::size_t>(k));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      sums[c].x += points[i].x;
      sums[c].y += points[i].y;
      ++counts[c];
    }
    for (int c = 0; c < k; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (counts[ci] > 0) {
        centers[ci] = {sums[ci].x / counts[ci], sums[ci].y / counts[ci]};
        continue;
      }
      // Empty cluster: re-seed from the point farthest from its own center
      // among clusters that can spare one.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const auto own = static_cast<std::size_t>(assignment[i]);
        if (counts[own] < 2) continue;
        const Point2 oc{sums[own].x / counts[own], sums[own].y / counts[own]};
        const double d = sq_dist(points[i], oc);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(assignment[far])];
      assignment[far] = c;
      counts[ci] = 1;
      centers[ci] = points[far];
      changed = true;
    }
  }
  KMeansResult out;
  out.assignment = std::move(assignment);
  out.centers = std::move(centers);
  out.wcss = within_cluster_ss(points, out.assignment, k);
  return out;
}

// Single-point transfers (Hartigan's rule) from a Lloyd fixed point: moving
// x from cluster a to b changes WCSS by n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2.
// Only strict decreases are applied, so the result is again a Lloyd fixed point.
void refine_by_transfers(std::span<const Point2> points, KMeansResult& r) {
  const auto k = r.centers.size();
  std::vector<int> counts(k, 0);
  for (int a : r.assignment) ++counts[static_cast<std::size_t>(a)];
  bool moved = true;
  for (int pass = 0; moved && pass < 100; ++pass) {
    moved = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto a = static_cast<std::size_t>(r.assignment[i]);
      if (counts[a] < 2) continue;
      const double na = counts[a];
      const double remove_gain = na / (na - 1.0) * sq_dist(points[i], r.centers[a]);
      std::size_t best = a;
      double best_cost = remove_gain;
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = counts[b];
        const double cost = nb / (nb + 1.0) * sq_dist(points[i], r.centers[b]);
        if (cost < best_cost * (1.0 - 1e-12)) {
          best_cost = cost;
          best = b;
        }
      }
      if (best == a) continue;
      const double nb = counts[best];
      r.centers[a] = {(r.centers[a].x * na - points[i].x) / (na - 1.0),
                      (r.centers[a].y * na - points[i].y) / (na - 1.0)};
      r.centers[best] = {(r.centers[best].x * nb + points[i].x) / (nb + 1.0),
                         (r.centers[best].y * nb + points[i].y) / (nb + 1.0)};
      --counts[a];
      ++counts[best];
      r.assignment[i] = static_cast<int>(best);
      moved = true;
    }
  }
  // recompute centers exactly after the incremental updates
  std::vector<Point2> sums(k);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = static_cast<std::size_t>(r.assignment[i]);
    sums[c].x += points[i].x;
    sums[c].y += points[i].y;
  }
  for (std::size_t c = 0; c < k; ++c) r.centers[c] = {sums[c].x / counts[c], sums[c].y / counts[c]};
  r.wcss = within_cluster_ss(points, r.assignment, static_cast<int>(k));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void ClusterParams::validate() const {
  if (k_min < 2 || k_max < k_min) throw ValidationError("cluster params need 2 <= k_min <= k_max");
  if (restarts < 1) throw ValidationError("restarts must be >= 1");
  if (memory_below < 0 || memory_above < 0) throw ValidationError("memory half-widths must be >= 0");
}

double within_cluster_ss(std::span<const Point2> points, std::span<const int> assignment, int k) {
  std::vector<Point2> sums(static_cast<std::size_t>(k));
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignment[i]);
    sums[c].x += points[i].x;
    sums[c].y += points[i].y;
    ++counts[c];
  }
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignment[i]);
    total += sq_dist(points[i], {sums[c].x / counts[c], sums[c].y / counts[c]});
  }
  return total;
}

KMeansResult kmeans(std::span<const Point2> points, int k, int restarts, std::uint64_t seed) {
  if (points.empty()) throw ValidationError("k-means needs at least one point");
  if (k < 1 || k > static_cast<int>(points.size())) {
    throw ValidationError("k-means with k=" + std::to_string(k) + " on " +
                          std::to_string(points.size()) + " points");
  }
  if (restarts < 1) throw ValidationError("k-means needs at least one restart");
  // Farthest-point seeding is fixed by its first point, so restarts draw
  // distinct first points (a seeded permutation, cycled if restarts > n).
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> firsts(points.size());
  std::iota(firsts.begin(), firsts.end(), std::size_t{0});
  std::shuffle(firsts.begin(), firsts.end(), rng);
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    auto result = lloyd(points, farthest_point_seeds(points, k, firsts[static_cast<std::size_t>(r) % firsts.size()]));
    refine_by_transfers(points, result);
    if (result.wcss < best.wcss) best = std::move(result);
  }
  return best;
}

double silhouette(std::span<const Point2> points, std::span<const int> assignment) {
  if (points.size() != assignment.size()) throw ValidationError("silhouette: size mismatch");
  std::map<int, int> sizes;
  for (int c : assignment) ++sizes[c];
  if (sizes.size() < 2) throw ValidationError("silhouette needs at least two clusters");

  double total = 0.0;
  std::map<int, double> sums;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int own = assignment[i];
    if (sizes[own] == 1) continue;
    for (auto& [c, s] : sums) s = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      sums[assignment[j]] += std::sqrt(sq_dist(points[i], points[j]));
    }
    const double a = sums[own] / (sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [c, n] : sizes) {
      if (c != own) b = std::min(b, sums[c] / n);
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(points.size());
}

GroupCountSelection select_group_count(std::span<const Point2> points, int lo, int hi,
                                       const ClusterParams& params, std::uint64_t seed) {
  if (lo < 2 || hi < lo || hi > static_cast<int>(points.size())) {
    throw ValidationError("group count range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] invalid for " + std::to_string(points.size()) + " points");
  }
  GroupCountSelection best;
  best.score = -std::numeric_limits<double>::infinity();
  for (int k = lo; k <= hi; ++k) {
    auto clustering = kmeans(points, k, params.restarts, derive_seed(seed, static_cast<std::uint64_t>(k)));
    const double score = silhouette(points, clustering.assignment);
    ++best.candidates_evaluated;
    if (score > best.score) {
      best.k = k;
      best.score = score;
      best.clustering = std::move(clustering);
    }
  }
  return best;
}

ClusterFrameResult cluster_frame(std::span<const AttentionPoint> points,
                                 const std::optional<ClusterMemory>& memory,
                                 const ClusterParams& params) {
  params.validate();
  ClusterFrameResult out;
  const int n = static_cast<int>(points.size());
  const int frame = points.empty() ? (memory ? memory->previous.frame + 1 : 0) : points.front().frame;
  out.grouping.frame = frame;
  out.stats.frame = frame;
  out.stats.present = n;

  if (n < 2) {
    for (const auto& p : points) out.grouping.isolated.push_back(p.person_id);
    out.stats.k_selected = n;
    out.memory.group_count = std::max(1, n);
    out.memory.previous = out.grouping;
    return out;
  }

  const int hi_limit = std::min(params.k_max, n);
  const int lo_limit = std::min(params.k_min, hi_limit);
  int lo = lo_limit, hi = hi_limit;
  if (memory && params.use_memory) {
    lo = std::clamp(memory->group_count - params.memory_below, lo_limit, hi_limit);
    hi = std::clamp(memory->group_count + params.memory_above, lo, hi_limit);
  }

  std::vector<Point2> xy;
  xy.reserve(points.size());
  for (const auto& p : points) xy.push_back(p.point);
  const auto sel = select_group_count(xy, lo, hi, params,
                                      derive_seed(params.seed, static_cast<std::uint64_t>(frame)));

  std::vector<MemberSet> clusters(static_cast<std::size_t>(sel.k));
  for (std::size_t i = 0; i < points.size(); ++i) {
    clusters[static_cast<std::size_t>(sel.clustering.assignment[i])].push_back(points[i].person_id);
  }
  std::vector<std::pair<MemberSet, Point2>> groups;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    auto& members = clusters[c];
    std::sort(members.begin(), members.end());
    if (members.size() >= 2) {
      groups.emplace_back(members, sel.clustering.centers[c]);
    } else {
      out.grouping.isolated.insert(out.grouping.isolated.end(), members.begin(), members.end());
    }
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.first.front() < b.first.front(); });
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.grouping.groups.push_back({static_cast<int>(g), groups[g].first, groups[g].second});
  }
  std::sort(out.grouping.isolated.begin(), out.grouping.isolated.end());

  out.stats.k_lo = lo;
  out.stats.k_hi = hi;
  out.stats.k_selected = sel.k;
  out.stats.candidates_evaluated = sel.candidates_evaluated;
  out.stats.silhouette = sel.score;
  out.memory.group_count = sel.k;
  out.memory.previous = out.grouping;
  return out;
}

GroupingTimeline DetectionResult::timeline() const {
  GroupingTimeline t;
  for (const auto& g : groupings) {
    auto& groups = t.frames[g.frame];
    for (const auto& fg : g.groups) groups.push_back({fg.group_id, fg.members});
  }
  return t;
}

DetectionResult detect_formations(const AttentionSeries& attention, const FrameSequence& frames,
                                  const ClusterParams& params) {
  params.validate();
  if (attention.per_frame.size() != frames.size()) {
    throw ValidationError("attention series does not match frame sequence");
  }
  DetectionResult result;
  std::optional<ClusterMemory> memory;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto r = cluster_frame(attention.per_frame[i], params.use_memory ? memory : std::nullopt, params);
    r.grouping.frame = frames.frames[i].index;
    r.stats.frame = frames.frames[i].index;
    result.groupings.push_back(std::move(r.grouping));
    result.stats.push_back(r.stats);
    memory = std::move(r.memory);
  }
  return result;
}

MatchResult match_groups(const GroupingTimeline& predicted, const GroupingTimeline& truth,
                         double tolerance) {
  MatchResult result;
  for (const auto& [frame, truth_groups] : truth.frames) {
    const auto pred = predicted.groups_at(frame);
    FrameMatch fm;
    fm.frame = frame;
    fm.truth_groups = static_cast<int>(truth_groups.size());
    fm.predicted_groups = static_cast<int>(pred.size());

    // (overlap, truth index, predicted index)
    std::vector<std::tuple<int, std::size_t, std::size_t>> candidates;
    for (std::size_t t = 0; t < truth_groups.size(); ++t) {
      const auto& tm = truth_groups[t].members;
      for (std::size_t p = 0; p < pred.size(); ++p) {
        const auto& pm = pred[p].members;
        MemberSet common;
        std::set_intersection(tm.begin(), tm.end(), pm.begin(), pm.end(), std::back_inserter(common));
        const double need = tolerance * static_cast<double>(std::max(tm.size(), pm.size()));
        if (!common.empty() && static_cast<double>(common.size()) >= need - 1e-12) {
          candidates.emplace_back(static_cast<int>(common.size()), t, p);
        }
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
    std::vector<bool> used_t(truth_groups.size()), used_p(pred.size());
    for (const auto& [overlap, t, p] : candidates) {
      if (used_t[t] || used_p[p]) continue;
      used_t[t] = used_p[p] = true;
      fm.matches.emplace_back(truth_groups[t].group_id, pred[p].group_id);
    }
    result.truth_total += fm.truth_groups;
    result.matched += static_cast<int>(fm.matches.size());
    result.per_frame.push_back(std::move(fm));
  }
  if (result.truth_total > 0) {
    result.tp_rate = static_cast<double>(result.matched) / static_cast<double>(result.truth_total);
  }
  return result;
}

std::vector<std::pair<int, int>> group_count_series(const GroupingTimeline& timeline) {
  std::vector<std::pair<int, int>> series;
  for (const auto& [frame, groups] : timeline.frames) {
    const auto count = std::count_if(groups.begin(), groups.end(),
                                     [](const Group& g) { return g.members.size() >= 2; });
    series.emplace_back(frame, static_cast<int>(count));
  }
  return series;
}

int count_jump_events(std::span<const int> counts, int min_jump) {
  int events = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (std::abs(counts[i] - counts[i - 1]) >= min_jump) ++events;
  }
  return events;
}

double jaccard(const MemberSet& a, const MemberSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  MemberSet common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const double uni = static_cast<double>(a.size() + b.size() - common.size());
  return static_cast<double>(common.size()) / uni;
}

}  // namespace fform
