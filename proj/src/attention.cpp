#include "fform/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fform/error.hpp"

namespace fform {

namespace {

constexpr double kMinResultant = 1e-9;

}  // namespace

double normalize_angle(double radians) {
  double a = std::fmod(radians, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  // fmod of a tiny negative value can round up to exactly 2pi.
  if (a >= kTwoPi) a = 0.0;
  return a;
}

double circular_mean(std::span<const double> angles) {
  if (angles.empty()) throw ComputationError("circular mean of an empty list");
  double s = 0.0, c = 0.0;
  for (double a : angles) {
    s += std::sin(a);
    c += std::cos(a);
  }
  const double n = static_cast<double>(angles.size());
  s /= n;
  c /= n;
  if (std::hypot(s, c) < kMinResultant) throw ComputationError("undefined circular mean");
  return normalize_angle(std::atan2(s, c));
}

double angular_difference(double a, double b) {
  const double d = normalize_angle(std::fabs(a - b));
  return std::min(d, kTwoPi - d);
}

void AngleTrack::append(int frame, double angle) {
  if (!frames_.empty() && frame <= frames_.back()) {
    throw ValidationError("angle track frames must increase (person " +
                          std::to_string(person_id_) + ", frame " + std::to_string(frame) + ")");
  }
  frames_.push_back(frame);
  angles_.push_back(angle);
}

bool AngleTrack::contains(int frame) const {
  return std::binary_search(frames_.begin(), frames_.end(), frame);
}

std::optional<double> AngleTrack::at(int frame) const {
  auto it = std::lower_bound(frames_.begin(), frames_.end(), frame);
  if (it == frames_.end() || *it != frame) return std::nullopt;
  return angles_[static_cast<std::size_t>(it - frames_.begin())];
}

std::vector<double> AngleTrack::window(int first, int last) const {
  const auto lo = std::lower_bound(frames_.begin(), frames_.end(), first);
  const auto hi = std::upper_bound(frames_.begin(), frames_.end(), last);
  return {angles_.begin() + (lo - frames_.begin()), angles_.begin() + (hi - frames_.begin())};
}

std::vector<int> AngleTrack::frames_in(int first, int last) const {
  return {std::lower_bound(frames_.begin(), frames_.end(), first),
          std::upper_bound(frames_.begin(), frames_.end(), last)};
}

AngleTrack make_track(int person_id, AngleKind kind, std::span<const double> angles,
                      int first_frame) {
  AngleTrack track(person_id, kind);
  for (std::size_t i = 0; i < angles.size(); ++i) {
    track.append(first_frame + static_cast<int>(i), angles[i]);
  }
  return track;
}

void AttentionParams::validate() const {
  if (!(d > 0.0)) throw ValidationError("attention distance d must be > 0");
  if (window < 1) throw ValidationError("attention window must be >= 1");
  if (!(torsion_threshold > 0.0 && torsion_threshold <= std::numbers::pi)) {
    throw ValidationError("torsion threshold must lie in (0, pi]");
  }
}

double smoothed_angle(const AngleTrack& track, int frame, int window) {
  if (!track.contains(frame)) {
    throw ValidationError("person " + std::to_string(track.person_id()) + " absent at frame " +
                          std::to_string(frame));
  }
  const auto samples = track.window(frame - window + 1, frame);
  return circular_mean(samples);
}

WeightedAngle weighted_attention_angle(const AngleTrack& head, const AngleTrack& torso, int frame,
                                       const AttentionParams& params) {
  WeightedAngle out;
  out.head_smoothed = smoothed_angle(head, frame, params.window);
  out.torso_smoothed = smoothed_angle(torso, frame, params.window);

  int torsion = 0, counted = 0;
  for (int k : head.frames_in(frame - params.window + 1, frame)) {
    if (!torso.contains(k)) continue;
    const double delta = angular_difference(smoothed_angle(head, k, params.window),
                                            smoothed_angle(torso, k, params.window));
    ++counted;
    if (delta > params.torsion_threshold) ++torsion;
  }
  out.head_weight = static_cast<double>(torsion) / static_cast<double>(counted);
  if (torsion == 0 || torsion == counted) {
    out.theta = torsion == 0 ? out.torso_smoothed : out.head_smoothed;
    return out;
  }
  const double w_torso = 1.0 - out.head_weight;
  const double s = out.head_weight * std::sin(out.head_smoothed) + w_torso * std::sin(out.torso_smoothed);
  const double c = out.head_weight * std::cos(out.head_smoothed) + w_torso * std::cos(out.torso_smoothed);
  if (std::hypot(s, c) < kMinResultant) throw ComputationError("undefined weighted angle");
  out.theta = normalize_angle(std::atan2(s, c));
  return out;
}

double time_weighted_angle(const AngleTrack& head, const AngleTrack& torso, int frame,
                           const AttentionParams& params) {
  return weighted_attention_angle(head, torso, frame, params).theta;
}

Point2 center_of_attention(Point2 position, double theta, double d) {
  return {position.x + d * std::cos(theta), position.y + d * std::sin(theta)};
}

std::map<int, PersonTracks> build_tracks(const FrameSequence& frames) {
  std::map<int, PersonTracks> tracks;
  for (const auto& f : frames.frames) {
    for (const auto& p : f.participants) {
      auto [it, inserted] = tracks.try_emplace(p.person_id);
      if (inserted) {
        it->second.head = AngleTrack(p.person_id, AngleKind::kHead);
        it->second.torso = AngleTrack(p.person_id, AngleKind::kTorso);
      }
      it->second.head.append(f.index, p.head_angle);
      it->second.torso.append(f.index, p.torso_angle);
    }
  }
  return tracks;
}

AttentionSeries compute_attention(const FrameSequence& frames, const AttentionParams& params) {
  params.validate();
  const auto tracks = build_tracks(frames);
  AttentionSeries series;
  series.per_frame.reserve(frames.size());
  for (const auto& f : frames.frames) {
    std::vector<AttentionPoint> points;
    points.reserve(f.participants.size());
    for (const auto& p : f.participants) {
      const auto& t = tracks.at(p.person_id);
      double theta;
      try {
        theta = time_weighted_angle(t.head, t.torso, f.index, params);
      } catch (const ComputationError&) {
        // Antipodal head/torso with equal weights, or a cancelling window.
        ++series.torso_fallbacks;
        try {
          theta = smoothed_angle(t.torso, f.index, params.window);
        } catch (const ComputationError&) {
          theta = p.torso_angle;
        }
      }
      points.push_back({p.person_id, f.index, center_of_attention(p.position(), theta, params.d), theta});
    }
    series.per_frame.push_back(std::move(points));
  }
  return series;
}

}  // namespace fform
