#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fform/annotation_io.hpp"
#include "fform/attention.hpp"

namespace fform {

double interpersonal_distance(Point2 a, Point2 b);

struct Pose {
  Point2 position;
  double theta = 0.0;
};

// Sum of the rotations both people need to face each other directly:
// 0 when facing, 2pi when back to back. Throws ValidationError when the
// positions coincide.
double reciprocal_angle(const Pose& a, const Pose& b);

// Score table for in-formation run length f >= 1 and break length b >= 1.
double engagement_for_run(int f);
double engagement_for_break(int b);

// Run-length state machine behind the engagement score. A break of at most
// two frames followed by the same formation resumes the run; anything
// longer, or a different formation, restarts it at 1. Frames before the
// first formation score 0.
class EngagementTracker {
 public:
  explicit EngagementTracker(double same_formation_jaccard = 1.0)
      : threshold_(same_formation_jaccard) {}

  // `formation` is the subject's current formation, or nullopt when out.
  double step(const std::optional<MemberSet>& formation);

  int run_length() const { return run_; }
  int break_length() const { return break_; }

 private:
  bool same(const MemberSet& a, const MemberSet& b) const;

  double threshold_;
  int run_ = 0;
  int break_ = 0;
  std::optional<MemberSet> last_;
};

// Applies the state machine to a plain in/out indicator.
std::vector<double> engagement_from_membership(std::span<const bool> in_formation);

struct EngagementSubject {
  int first = 0;
  std::optional<int> second;  // set for a dyad

  bool is_dyad() const { return second.has_value(); }
};

struct EngagementTrace {
  EngagementSubject subject;
  std::vector<int> frames;
  std::vector<double> scores;
};

struct EngagementOptions {
  double same_formation_jaccard = 1.0;
};

// Person subject: in formation when a member of any group; consecutive
// groups count as the same formation when their Jaccard similarity reaches
// the threshold. Dyad subject: in formation when both share a group.
// With `presence`, the trace covers frames where the subject is present;
// otherwise the timeline's frames, or nothing if the subject never appears.
EngagementTrace engagement_scores(const GroupingTimeline& timeline, const EngagementSubject& subject,
                                  const EngagementOptions& options = {},
                                  const FrameSequence* presence = nullptr);

struct DyadRow {
  int frame = 0;
  double distance = 0.0;
  double reciprocal_angle = 0.0;
  double engagement = 0.0;
};

struct DyadReportOptions {
  AttentionParams attention;
  bool use_torso = false;  // raw torso angle instead of the time-weighted angle
};

// One row per frame where both persons are present.
std::vector<DyadRow> dyad_report(const FrameSequence& frames, const GroupingTimeline& timeline,
                                 int person_a, int person_b, const DyadReportOptions& options = {});

}  // namespace fform
