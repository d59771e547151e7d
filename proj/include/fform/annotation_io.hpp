#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fform {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// One person's annotated state at one frame. Angles are radians in [0, 2pi).
struct ParticipantFrame {
  int person_id = 0;
  int frame = 0;
  double x = 0.0;
  double y = 0.0;
  double head_angle = 0.0;
  double torso_angle = 0.0;

  Point2 position() const { return {x, y}; }
};

struct Frame {
  int index = 0;
  std::vector<ParticipantFrame> participants;  // sorted by person_id

  const ParticipantFrame* find(int person_id) const;
};

struct FrameSequence {
  std::vector<Frame> frames;  // strictly increasing index
  double frame_rate = 0.0;    // metadata only

  bool empty() const { return frames.empty(); }
  std::size_t size() const { return frames.size(); }
  const Frame* find(int frame) const;
  std::vector<int> person_ids() const;
};

inline constexpr std::size_t kActivityCount = 8;

// Column order of activities.csv. Speaking is index 3.
enum class Activity : int {
  kWalking = 0,
  kStepping = 1,
  kDrinking = 2,
  kSpeaking = 3,
  kHandGesturing = 4,
  kHeadGesturing = 5,
  kLaughing = 6,
  kHairTouching = 7,
};

inline constexpr std::array<std::string_view, kActivityCount> kActivityNames = {
    "walking",        "stepping",       "drinking", "speaking",
    "hand_gesturing", "head_gesturing", "laughing", "hair_touching"};

std::optional<Activity> activity_from_name(std::string_view name);

struct ActivityRecord {
  int person_id = 0;
  int frame = 0;
  std::array<std::uint8_t, kActivityCount> flags{};

  bool has(Activity a) const { return flags[static_cast<int>(a)] != 0; }
  void set(Activity a, bool on) { flags[static_cast<int>(a)] = on ? 1 : 0; }
};

// Sorted ascending person ids.
using MemberSet = std::vector<int>;

struct Group {
  int group_id = 0;
  MemberSet members;
};

// Per-frame F-formations. Persons present at a frame but absent from every
// group are isolated. A frame missing from the map has no groups.
struct GroupingTimeline {
  std::map<int, std::vector<Group>> frames;

  std::span<const Group> groups_at(int frame) const;
};

// Parsers accept an optional header line (which must then match exactly),
// blank lines and '#' comments. `source_name` only feeds error messages.
FrameSequence parse_frames(std::istream& in, std::string_view source_name = "frames.csv");
std::vector<ActivityRecord> parse_activities(std::istream& in,
                                             std::string_view source_name = "activities.csv");
GroupingTimeline parse_groundtruth(std::istream& in, std::string_view source_name = "groups.csv");

void write_frames(std::ostream& out, const FrameSequence& frames);
void write_activities(std::ostream& out, std::span<const ActivityRecord> records);
void write_groups(std::ostream& out, const GroupingTimeline& timeline);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SceneEvent {
  enum class Kind { kJoin, kLeave, kPassThrough };
  Kind kind = Kind::kJoin;
  int frame = 0;
  int person = 0;
  int formation = -1;  // join / pass_through target
  int travel = 0;      // frames spent walking (join / leave)
  int duration = 1;    // pass_through length in frames
};

// Head turned away from the torso by `offset` radians on [first_frame, last_frame].
struct TorsionEvent {
  int person = 0;
  int first_frame = 0;
  int last_frame = 0;
  double offset = 0.0;
};

// Scripted speaking turns for one dyad. Speaking state changes every `period`
// frames; the upcoming speaker hand-gestures during the `lead_in` frames
// before a change; the listener head-gestures with `head_gesture_prob`.
struct TurnScript {
  int person_a = 0;
  int person_b = 1;
  int period = 20;
  int lead_in = 3;
  double head_gesture_prob = 0.3;
  double overlap_prob = 0.15;
  double silence_prob = 0.25;
};

struct SyntheticSceneConfig {
  int participant_count = 0;
  int duration = 0;
  double frame_rate = 20.0;
  // Formation slots with their initial members; singletons and empty slots
  // are allowed and only become ground-truth groups once they hold two people.
  std::vector<std::vector<int>> formations;
  std::vector<Point2> formation_centers;  // optional; grid layout otherwise
  double formation_radius = 80.0;
  double slot_spacing = 450.0;
  double displacement = 250.0;  // outward step of members during a pass-through
  double angle_noise_sd = 0.0;
  double position_noise_sd = 0.0;
  double background_activity_rate = 0.05;
  std::vector<SceneEvent> events;
  std::vector<TorsionEvent> torsion_events;
  std::optional<TurnScript> turn_taking;
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  FrameSequence frames;
  GroupingTimeline groups;
  std::vector<ActivityRecord> activities;
};

// JSON scene description; "seed" is mandatory.
SyntheticSceneConfig parse_scene_config(std::istream& in);
SyntheticSceneConfig parse_scene_config_file(const std::string& path);

SyntheticScene generate_scene(const SyntheticSceneConfig& config);

}  // namespace fform
