#pragma once

#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "fform/annotation_io.hpp"

namespace fform {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Maps any finite angle into [0, 2pi).
double normalize_angle(double radians);

// Direction of the mean resultant vector, in [0, 2pi). Throws ComputationError
// when the list is empty or the resultant length is below 1e-9.
double circular_mean(std::span<const double> angles);

// Shortest rotation between two directions, in [0, pi].
double angular_difference(double a, double b);

enum class AngleKind { kHead, kTorso };

// Per-person orientation samples over the frames where the person is present.
class AngleTrack {
 public:
  AngleTrack() = default;
  AngleTrack(int person_id, AngleKind kind) : person_id_(person_id), kind_(kind) {}

  // Frames must be appended in strictly increasing order.
  void append(int frame, double angle);

  int person_id() const { return person_id_; }
  AngleKind kind() const { return kind_; }
  bool contains(int frame) const;
  std::optional<double> at(int frame) const;
  // Samples with frame in [first, last].
  std::vector<double> window(int first, int last) const;
  std::vector<int> frames_in(int first, int last) const;
  std::size_t size() const { return frames_.size(); }

 private:
  int person_id_ = 0;
  AngleKind kind_ = AngleKind::kTorso;
  std::vector<int> frames_;
  std::vector<double> angles_;
};

AngleTrack make_track(int person_id, AngleKind kind, std::span<const double> angles,
                      int first_frame = 0);

struct AttentionParams {
  double d = 100.0;                                     // pixels
  int window = 5;                                       // frames
  double torsion_threshold = std::numbers::pi / 4.0;    // radians

  void validate() const;
};

// Circular mean of the samples in frames [frame - window + 1, frame]. The
// window is truncated where the track has no samples.
double smoothed_angle(const AngleTrack& track, int frame, int window);

struct WeightedAngle {
  double theta = 0.0;
  double head_weight = 0.0;
  double head_smoothed = 0.0;
  double torso_smoothed = 0.0;
};

// Fuses smoothed head and torso directions. The head weight is the fraction
// of window frames whose smoothed head/torso difference exceeds the torsion
// threshold.
WeightedAngle weighted_attention_angle(const AngleTrack& head, const AngleTrack& torso, int frame,
                                       const AttentionParams& params);

double time_weighted_angle(const AngleTrack& head, const AngleTrack& torso, int frame,
                           const AttentionParams& params);

Point2 center_of_attention(Point2 position, double theta, double d);

struct AttentionPoint {
  int person_id = 0;
  int frame = 0;
  Point2 point;
  double theta = 0.0;
};

struct PersonTracks {
  AngleTrack head;
  AngleTrack torso;
};

std::map<int, PersonTracks> build_tracks(const FrameSequence& frames);

struct AttentionSeries {
  std::vector<std::vector<AttentionPoint>> per_frame;  // aligned with FrameSequence::frames
  // Person-frames whose weighted angle was undefined and fell back to the
  // smoothed torso angle.
  int torso_fallbacks = 0;
};

AttentionSeries compute_attention(const FrameSequence& frames, const AttentionParams& params);

}  // namespace fform
