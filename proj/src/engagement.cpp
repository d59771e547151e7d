#include "fform/engagement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "fform/error.hpp"
#include "fform/grouping.hpp"

namespace fform {

double interpersonal_distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double reciprocal_angle(const Pose& a, const Pose& b) {
  const double dx = b.position.x - a.position.x;
  const double dy = b.position.y - a.position.y;
  if (dx == 0.0 && dy == 0.0) throw ValidationError("reciprocal angle of coincident positions");
  const double a_to_b = std::atan2(dy, dx);
  const double b_to_a = std::atan2(-dy, -dx);
  return angular_difference(a.theta, a_to_b) + angular_difference(b.theta, b_to_a);
}

double engagement_for_run(int f) {
  if (f <= 0) return 0.0;
  if (f == 1) return 0.5;
  if (f == 2) return 0.8;
  return 1.0;
}

double engagement_for_break(int b) {
  if (b <= 0) return 1.0;
  if (b == 1) return 0.5;
  if (b == 2) return 0.2;
  return 0.0;
}

bool EngagementTracker::same(const MemberSet& a, const MemberSet& b) const {
  if (threshold_ >= 1.0) return a == b;
  return jaccard(a, b) >= threshold_;
}

double EngagementTracker::step(const std::optional<MemberSet>& formation) {
  if (formation) {
    const bool resumes = run_ > 0 && last_ && break_ <= 2 && same(*last_, *formation);
    run_ = resumes ? run_ + 1 : 1;
    break_ = 0;
    last_ = formation;
    return engagement_for_run(run_);
  }
  if (run_ == 0) return 0.0;
  ++break_;
  return engagement_for_break(break_);
}

std::vector<double> engagement_from_membership(std::span<const bool> in_formation) {
  static const MemberSet kToken{0};
  EngagementTracker tracker;
  std::vector<double> scores;
  scores.reserve(in_formation.size());
  for (bool in : in_formation) {
    scores.push_back(tracker.step(in ? std::optional<MemberSet>(kToken) : std::nullopt));
  }
  return scores;
}

namespace {

const Group* group_of(std::span<const Group> groups, int person) {
  for (const auto& g : groups) {
    if (std::binary_search(g.members.begin(), g.members.end(), person)) return &g;
  }
  return nullptr;
}

std::optional<MemberSet> subject_formation(std::span<const Group> groups,
                                           const EngagementSubject& subject) {
  const Group* g = group_of(groups, subject.first);
  if (!g) return std::nullopt;
  if (!subject.is_dyad()) return g->members;
  if (!std::binary_search(g->members.begin(), g->members.end(), *subject.second)) return std::nullopt;
  return MemberSet{std::min(subject.first, *subject.second), std::max(subject.first, *subject.second)};
}

}  // namespace

EngagementTrace engagement_scores(const GroupingTimeline& timeline, const EngagementSubject& subject,
                                  const EngagementOptions& options, const FrameSequence* presence) {
  EngagementTrace trace;
  trace.subject = subject;
  std::vector<int> frames;
  if (presence) {
    for (const auto& f : presence->frames) {
      if (f.find(subject.first) && (!subject.is_dyad() || f.find(*subject.second))) {
        frames.push_back(f.index);
      }
    }
  } else {
    bool appears = false;
    for (const auto& [frame, groups] : timeline.frames) {
      frames.push_back(frame);
      if (group_of(groups, subject.first) ||
          (subject.is_dyad() && group_of(groups, *subject.second))) {
        appears = true;
      }
    }
    if (!appears) frames.clear();
  }

  // Dyad co-membership is a single formation by construction.
  EngagementTracker tracker(subject.is_dyad() ? 1.0 : options.same_formation_jaccard);
  for (int frame : frames) {
    trace.frames.push_back(frame);
    trace.scores.push_back(tracker.step(subject_formation(timeline.groups_at(frame), subject)));
  }
  return trace;
}

std::vector<DyadRow> dyad_report(const FrameSequence& frames, const GroupingTimeline& timeline,
                                 int person_a, int person_b, const DyadReportOptions& options) {
  options.attention.validate();
  if (person_a == person_b) throw ValidationError("dyad needs two distinct persons");
  const auto tracks = build_tracks(frames);
  for (int p : {person_a, person_b}) {
    if (!tracks.contains(p)) throw ValidationError("unknown person " + std::to_string(p));
  }
  const auto trace =
      engagement_scores(timeline, EngagementSubject{person_a, person_b}, {}, &frames);

  auto theta_of = [&](const ParticipantFrame& p) {
    if (options.use_torso) return p.torso_angle;
    const auto& t = tracks.at(p.person_id);
    try {
      return time_weighted_angle(t.head, t.torso, p.frame, options.attention);
    } catch (const ComputationError&) {
      return smoothed_angle(t.torso, p.frame, options.attention.window);
    }
  };

  std::vector<DyadRow> rows;
  rows.reserve(trace.frames.size());
  for (std::size_t i = 0; i < trace.frames.size(); ++i) {
    const Frame* f = frames.find(trace.frames[i]);
    const ParticipantFrame* a = f->find(person_a);
    const ParticipantFrame* b = f->find(person_b);
    DyadRow row;
    row.frame = f->index;
    row.distance = interpersonal_distance(a->position(), b->position());
    row.reciprocal_angle =
        reciprocal_angle({a->position(), theta_of(*a)}, {b->position(), theta_of(*b)});
    row.engagement = trace.scores[i];
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fform
