#include "fform/annotation_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fform/attention.hpp"
#include "fform/error.hpp"

namespace fform {

namespace {

constexpr std::string_view kFramesHeader = "person_id,frame,x,y,head_angle,torso_angle";
constexpr std::string_view kActivitiesHeader =
    "person_id,frame,walking,stepping,drinking,speaking,hand_gesturing,head_gesturing,laughing,"
    "hair_touching";
constexpr std::string_view kGroupsHeader = "frame,group_id,member_ids";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Field {
  std::string_view text;
  std::size_t column;  // 1-based character column
};

std::vector<Field> split(std::string_view line, char sep) {
  std::vector<Field> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    const auto piece = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
    fields.push_back({trim(piece), start + 1});
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string_view source, std::string_view header)
      : in_(in), source_(source), header_(header) {}

  // Returns false at end of input. Skips blanks, comments and the header.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      if (!seen_data_) {
        seen_data_ = true;
        if (!t.empty() && (std::isalpha(static_cast<unsigned char>(t.front())) != 0)) {
          if (t != header_) {
            fail(1, "unexpected header '" + std::string(t) + "', expected '" + std::string(header_) + "'");
          }
          continue;
        }
      }
      line = std::string(t);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(std::size_t column, const std::string& what) const {
    std::ostringstream os;
    os << source_ << ": line " << line_no_ << ", column " << column << ": " << what;
    throw ValidationError(os.str());
  }

  template <typename T>
  T number(const Field& f, std::string_view name) const {
    T value{};
    const char* begin = f.text.data();
    const char* end = begin + f.text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (f.text.empty() || ec != std::errc() || ptr != end) {
      fail(f.column, "malformed " + std::string(name) + " '" + std::string(f.text) + "'");
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(value)) fail(f.column, "non-finite " + std::string(name));
    }
    return value;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::string_view source_;
  std::string_view header_;
  std::size_t line_no_ = 0;
  bool seen_data_ = false;
};

}  // namespace

const ParticipantFrame* Frame::find(int person_id) const {
  auto it = std::lower_bound(participants.begin(), participants.end(), person_id,
                             [](const ParticipantFrame& p, int id) { return p.person_id < id; });
  return (it != participants.end() && it->person_id == person_id) ? &*it : nullptr;
}

const Frame* FrameSequence::find(int frame) const {
  auto it = std::lower_bound(frames.begin(), frames.end(), frame,
                             [](const Frame& f, int idx) { return f.index < idx; });
  return (it != frames.end() && it->index == frame) ? &*it : nullptr;
}

std::vector<int> FrameSequence::person_ids() const {
  std::set<int> ids;
  for (const auto& f : frames) {
    for (const auto& p : f.participants) ids.insert(p.person_id);
  }
  return {ids.begin(), ids.end()};
}

std::optional<Activity> activity_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kActivityNames.size(); ++i) {
    if (kActivityNames[i] == name) return static_cast<Activity>(i);
  }
  return std::nullopt;
}

std::span<const Group> GroupingTimeline::groups_at(int frame) const {
  auto it = frames.find(frame);
  if (it == frames.end()) return {};
  return it->second;
}

FrameSequence parse_frames(std::istream& in, std::string_view source_name) {
  LineReader reader(in, source_name, kFramesHeader);
  std::map<int, std::vector<ParticipantFrame>> by_frame;
  std::string line;
  while (reader.next(line)) {
    const auto fields = split(line, ',');
    if (fields.size() != 6) {
      reader.fail(1, "expected 6 columns, found " + std::to_string(fields.size()));
    }
    ParticipantFrame p;
    p.person_id = reader.number<int>(fields[0], "person_id");
    p.frame = reader.number<int>(fields[1], "frame");
    if (p.person_id < 0) reader.fail(fields[0].column, "negative person_id");
    if (p.frame < 0) reader.fail(fields[1].column, "negative frame");
    p.x = reader.number<double>(fields[2], "x");
    p.y = reader.number<double>(fields[3], "y");
    p.head_angle = normalize_angle(reader.number<double>(fields[4], "head_angle"));
    p.torso_angle = normalize_angle(reader.number<double>(fields[5], "torso_angle"));
    auto& bucket = by_frame[p.frame];
    if (std::any_of(bucket.begin(), bucket.end(),
                    [&](const ParticipantFrame& q) { return q.person_id == p.person_id; })) {
      reader.fail(fields[0].column, "duplicate row for person " + std::to_string(p.person_id) +
                                        " at frame " + std::to_string(p.frame));
    }
    bucket.push_back(p);
  }
  FrameSequence seq;
  seq.frames.reserve(by_frame.size());
  for (auto& [index, participants] : by_frame) {
    std::sort(participants.begin(), participants.end(),
              [](const auto& a, const auto& b) { return a.person_id < b.person_id; });
    seq.frames.push_back({index, std::move(participants)});
  }
  return seq;
}

std::vector<ActivityRecord> parse_activities(std::istream& in, std::string_view source_name) {
  LineReader reader(in, source_name, kActivitiesHeader);
  std::vector<ActivityRecord> records;
  std::set<std::pair<int, int>> seen;
  std::string line;
  while (reader.next(line)) {
    const auto fields = split(line, ',');
    if (fields.size() != 2 + kActivityCount) {
      reader.fail(1, "expected " + std::to_string(2 + kActivityCount) + " columns, found " +
                         std::to_string(fields.size()));
    }
    ActivityRecord r;
    r.person_id = reader.number<int>(fields[0], "person_id");
    r.frame = reader.number<int>(fields[1], "frame");
    if (r.person_id < 0) reader.fail(fields[0].column, "negative person_id");
    if (r.frame < 0) reader.fail(fields[1].column, "negative frame");
    for (std::size_t i = 0; i < kActivityCount; ++i) {
      const auto& f = fields[2 + i];
      const int v = reader.number<int>(f, kActivityNames[i]);
      if (v != 0 && v != 1) {
        reader.fail(f.column, std::string(kActivityNames[i]) + " flag must be 0 or 1, got '" +
                                  std::string(f.text) + "'");
      }
      r.flags[i] = static_cast<std::uint8_t>(v);
    }
    if (!seen.emplace(r.frame, r.person_id).second) {
      reader.fail(fields[0].column, "duplicate row for person " + std::to_string(r.person_id) +
                                        " at frame " + std::to_string(r.frame));
    }
    records.push_back(r);
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame, a.person_id) < std::tie(b.frame, b.person_id);
  });
  return records;
}

GroupingTimeline parse_groundtruth(std::istream& in, std::string_view source_name) {
  LineReader reader(in, source_name, kGroupsHeader);
  GroupingTimeline timeline;
  std::string line;
  while (reader.next(line)) {
    const auto fields = split(line, ',');
    if (fields.size() != 3) {
      reader.fail(1, "expected 3 columns, found " + std::to_string(fields.size()));
    }
    Group g;
    const int frame = reader.number<int>(fields[0], "frame");
    if (frame < 0) reader.fail(fields[0].column, "negative frame");
    g.group_id = reader.number<int>(fields[1], "group_id");
    for (const auto& m : split(fields[2].text, ';')) {
      const Field member{m.text, fields[2].column + m.column - 1};
      const int id = reader.number<int>(member, "member id");
      if (id < 0) reader.fail(member.column, "negative member id");
      g.members.push_back(id);
    }
    std::sort(g.members.begin(), g.members.end());
    if (std::adjacent_find(g.members.begin(), g.members.end()) != g.members.end()) {
      reader.fail(fields[2].column, "repeated member in group " + std::to_string(g.group_id));
    }
    auto& groups = timeline.frames[frame];
    for (const auto& other : groups) {
      if (other.group_id == g.group_id) {
        reader.fail(fields[1].column, "duplicate group_id " + std::to_string(g.group_id) +
                                          " at frame " + std::to_string(frame));
      }
      for (int id : g.members) {
        if (std::binary_search(other.members.begin(), other.members.end(), id)) {
          reader.fail(fields[2].column, "person " + std::to_string(id) + " in groups " +
                                            std::to_string(other.group_id) + " and " +
                                            std::to_string(g.group_id) + " at frame " +
                                            std::to_string(frame));
        }
      }
    }
    groups.push_back(std::move(g));
  }
  for (auto& [frame, groups] : timeline.frames) {
    std::sort(groups.begin(), groups.end(),
              [](const Group& a, const Group& b) { return a.group_id < b.group_id; });
  }
  return timeline;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void write_frames(std::ostream& out, const FrameSequence& frames) {
  out << kFramesHeader << '\n';
  for (const auto& f : frames.frames) {
    for (const auto& p : f.participants) {
      out << p.person_id << ',' << p.frame << ',' << format_double(p.x) << ','
          << format_double(p.y) << ',' << format_double(p.head_angle) << ','
          << format_double(p.torso_angle) << '\n';
    }
  }
}

void write_activities(std::ostream& out, std::span<const ActivityRecord> records) {
  out << kActivitiesHeader << '\n';
  for (const auto& r : records) {
    out << r.person_id << ',' << r.frame;
    for (auto flag : r.flags) out << ',' << static_cast<int>(flag);
    out << '\n';
  }
}

void write_groups(std::ostream& out, const GroupingTimeline& timeline) {
  out << kGroupsHeader << '\n';
  for (const auto& [frame, groups] : timeline.frames) {
    for (const auto& g : groups) {
      out << frame << ',' << g.group_id << ',';
      for (std::size_t i = 0; i < g.members.size(); ++i) {
        if (i) out << ';';
        out << g.members[i];
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Scene configuration

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scene config: bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    std::string_view where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("scene config: unknown key '" + key + "' in " + std::string(where));
    }
  }
}

}  // namespace

SyntheticSceneConfig parse_scene_config(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scene config: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("scene config: top level must be an object");
  reject_unknown(doc,
                 {"seed", "participant_count", "duration", "frame_rate", "formations",
                  "formation_centers", "formation_radius", "slot_spacing", "displacement",
                  "angle_noise_sd", "position_noise_sd", "background_activity_rate", "events",
                  "torsion_events", "turn_taking"},
                 "scene");
  if (!doc.contains("seed")) throw ValidationError("scene config: 'seed' is mandatory");

  SyntheticSceneConfig c;
  c.seed = get_or<std::uint64_t>(doc, "seed", 0);
  c.participant_count = get_or(doc, "participant_count", 0);
  c.duration = get_or(doc, "duration", 0);
  c.frame_rate = get_or(doc, "frame_rate", c.frame_rate);
  c.formations = get_or(doc, "formations", std::vector<std::vector<int>>{});
  for (const auto& xy : get_or(doc, "formation_centers", std::vector<std::array<double, 2>>{})) {
    c.formation_centers.push_back({xy[0], xy[1]});
  }
  c.formation_radius = get_or(doc, "formation_radius", c.formation_radius);
  c.slot_spacing = get_or(doc, "slot_spacing", c.slot_spacing);
  c.displacement = get_or(doc, "displacement", c.displacement);
  c.angle_noise_sd = get_or(doc, "angle_noise_sd", c.angle_noise_sd);
  c.position_noise_sd = get_or(doc, "position_noise_sd", c.position_noise_sd);
  c.background_activity_rate = get_or(doc, "background_activity_rate", c.background_activity_rate);

  for (const auto& e : get_or(doc, "events", json::array())) {
    reject_unknown(e, {"type", "frame", "person", "formation", "travel", "duration"}, "event");
    SceneEvent ev;
    const auto type = get_or<std::string>(e, "type", "");
    if (type == "join") {
      ev.kind = SceneEvent::Kind::kJoin;
    } else if (type == "leave") {
      ev.kind = SceneEvent::Kind::kLeave;
    } else if (type == "pass_through") {
      ev.kind = SceneEvent::Kind::kPassThrough;
    } else {
      throw ValidationError("scene config: unknown event type '" + type + "'");
    }
    ev.frame = get_or(e, "frame", 0);
    ev.person = get_or(e, "person", -1);
    ev.formation = get_or(e, "formation", -1);
    ev.travel = get_or(e, "travel", 0);
    ev.duration = get_or(e, "duration", 1);
    c.events.push_back(ev);
  }
  for (const auto& t : get_or(doc, "torsion_events", json::array())) {
    reject_unknown(t, {"person", "first_frame", "last_frame", "offset"}, "torsion event");
    c.torsion_events.push_back({get_or(t, "person", -1), get_or(t, "first_frame", 0),
                                get_or(t, "last_frame", -1), get_or(t, "offset", 0.0)});
  }
  if (doc.contains("turn_taking")) {
    const auto& t = doc.at("turn_taking");
    reject_unknown(t,
                   {"dyad", "period", "lead_in", "head_gesture_prob", "overlap_prob",
                    "silence_prob"},
                   "turn_taking");
    TurnScript s;
    const auto dyad = get_or(t, "dyad", std::array<int, 2>{0, 1});
    s.person_a = dyad[0];
    s.person_b = dyad[1];
    s.period = get_or(t, "period", s.period);
    s.lead_in = get_or(t, "lead_in", s.lead_in);
    s.head_gesture_prob = get_or(t, "head_gesture_prob", s.head_gesture_prob);
    s.overlap_prob = get_or(t, "overlap_prob", s.overlap_prob);
    s.silence_prob = get_or(t, "silence_prob", s.silence_prob);
    c.turn_taking = s;
  }
  return c;
}

SyntheticSceneConfig parse_scene_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scene config '" + path + "'");
  try {
    return parse_scene_config(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scene generation

namespace {

void validate(const SyntheticSceneConfig& c) {
  if (c.participant_count < 0) throw ValidationError("scene: participant_count must be >= 0");
  if (c.duration < 0) throw ValidationError("scene: duration must be >= 0");
  if (c.formation_radius <= 0.0 || c.slot_spacing <= 0.0) {
    throw ValidationError("scene: formation_radius and slot_spacing must be > 0");
  }
  if (c.angle_noise_sd < 0.0 || c.position_noise_sd < 0.0) {
    throw ValidationError("scene: noise levels must be >= 0");
  }
  if (c.background_activity_rate < 0.0 || c.background_activity_rate > 1.0) {
    throw ValidationError("scene: background_activity_rate must be in [0, 1]");
  }
  if (!c.formation_centers.empty() && c.formation_centers.size() != c.formations.size()) {
    throw ValidationError("scene: formation_centers must match formations in length");
  }
  auto known = [&](int p) { return p >= 0 && p < c.participant_count; };
  std::set<int> placed;
  for (const auto& f : c.formations) {
    for (int p : f) {
      if (!known(p)) throw ValidationError("scene: formation references unknown person " + std::to_string(p));
      if (!placed.insert(p).second) {
        throw ValidationError("scene: person " + std::to_string(p) + " in two formations");
      }
    }
  }
  const int nform = static_cast<int>(c.formations.size());
  for (const auto& e : c.events) {
    if (!known(e.person)) {
      throw ValidationError("scene: event at frame " + std::to_string(e.frame) +
                            " references unknown person " + std::to_string(e.person));
    }
    if (e.kind != SceneEvent::Kind::kLeave && (e.formation < 0 || e.formation >= nform)) {
      throw ValidationError("scene: event at frame " + std::to_string(e.frame) +
                            " references unknown formation " + std::to_string(e.formation));
    }
    if (e.frame < 0 || e.travel < 0 || e.duration < 1) {
      throw ValidationError("scene: event at frame " + std::to_string(e.frame) +
                            " has negative frame/travel or duration < 1");
    }
  }
  for (const auto& t : c.torsion_events) {
    if (!known(t.person)) {
      throw ValidationError("scene: torsion event references unknown person " + std::to_string(t.person));
    }
  }
  if (c.turn_taking) {
    const auto& s = *c.turn_taking;
    if (!known(s.person_a) || !known(s.person_b) || s.person_a == s.person_b) {
      throw ValidationError("scene: turn_taking dyad must name two distinct known persons");
    }
    if (s.period < 1 || s.lead_in < 0 || s.lead_in >= s.period) {
      throw ValidationError("scene: turn_taking needs period >= 1 and 0 <= lead_in < period");
    }
    if (s.overlap_prob < 0 || s.silence_prob < 0 || s.overlap_prob + s.silence_prob > 1 ||
        s.head_gesture_prob < 0 || s.head_gesture_prob > 1) {
      throw ValidationError("scene: turn_taking probabilities out of range");
    }
  }
}

enum class TurnState { kSpeakerA, kSpeakerB, kOverlap, kSilence };

bool a_speaks(TurnState s) { return s == TurnState::kSpeakerA || s == TurnState::kOverlap; }
bool b_speaks(TurnState s) { return s == TurnState::kSpeakerB || s == TurnState::kOverlap; }

std::vector<TurnState> script_turns(const TurnScript& s, int duration, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<TurnState> states(static_cast<std::size_t>(duration));
  TurnState current = TurnState::kSpeakerA;
  TurnState last_speaker = TurnState::kSpeakerA;
  for (int t = 0; t < duration; ++t) {
    if (t > 0 && t % s.period == 0) {
      const double u = uniform(rng);
      TurnState next;
      if (u < s.overlap_prob) {
        next = TurnState::kOverlap;
      } else if (u < s.overlap_prob + s.silence_prob) {
        next = TurnState::kSilence;
      } else {
        next = last_speaker == TurnState::kSpeakerA ? TurnState::kSpeakerB : TurnState::kSpeakerA;
      }
      if (next == current) {
        next = last_speaker == TurnState::kSpeakerA ? TurnState::kSpeakerB : TurnState::kSpeakerA;
      }
      current = next;
      if (current == TurnState::kSpeakerA || current == TurnState::kSpeakerB) last_speaker = current;
    }
    states[static_cast<std::size_t>(t)] = current;
  }
  return states;
}

class SceneSimulator {
 public:
  explicit SceneSimulator(const SyntheticSceneConfig& c) : c_(c), rng_(c.seed) {
    const int nform = static_cast<int>(c.formations.size());
    const int people = c.participant_count;
    members_ = c.formations;
    for (auto& m : members_) std::sort(m.begin(), m.end());
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    phase_.resize(static_cast<std::size_t>(nform));
    for (auto& p : phase_) p = angle(rng_);
    disturbed_until_.assign(static_cast<std::size_t>(nform), -1);

    // Formation slots first, then one home slot per person.
    const int slots = nform + people;
    const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(slots)))));
    auto grid = [&](int slot, double y0) {
      return Point2{(slot % cols + 0.5) * c.slot_spacing, y0 + (slot / cols + 0.5) * c.slot_spacing};
    };
    double home_y0 = 0.0;
    if (c.formation_centers.empty()) {
      for (int f = 0; f < nform; ++f) centers_.push_back(grid(f, 0.0));
    } else {
      centers_ = c.formation_centers;
      for (const auto& p : centers_) home_y0 = std::max(home_y0, p.y + c.slot_spacing);
    }
    people_.resize(static_cast<std::size_t>(people));
    for (int p = 0; p < people; ++p) {
      auto& s = people_[static_cast<std::size_t>(p)];
      s.home = c.formation_centers.empty() ? grid(nform + p, 0.0) : grid(p, home_y0);
      s.home_facing = angle(rng_);
      s.formation = formation_of(p);
      s.mode = s.formation >= 0 ? Mode::kMember : Mode::kHome;
    }
    positions_.resize(static_cast<std::size_t>(people));
    facing_.resize(static_cast<std::size_t>(people));
    place_all(0);
  }

  SyntheticScene run() {
    SyntheticScene scene;
    scene.frames.frame_rate = c_.frame_rate;
    std::vector<SceneEvent> events = c_.events;
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.frame < b.frame; });
    std::vector<TurnState> turns;
    if (c_.turn_taking) turns = script_turns(*c_.turn_taking, c_.duration, rng_);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution background(c_.background_activity_rate);
    auto ev = events.begin();
    for (int t = 0; t < c_.duration; ++t) {
      finish_transitions(t);
      for (; ev != events.end() && ev->frame == t; ++ev) apply(*ev, t);
      place_all(t);

      Frame frame{t, {}};
      for (int p = 0; p < c_.participant_count; ++p) {
        const auto i = static_cast<std::size_t>(p);
        ParticipantFrame pf;
        pf.person_id = p;
        pf.frame = t;
        pf.x = positions_[i].x;
        pf.y = positions_[i].y;
        if (c_.position_noise_sd > 0.0) {
          pf.x += c_.position_noise_sd * gauss(rng_);
          pf.y += c_.position_noise_sd * gauss(rng_);
        }
        double head = facing_[i];
        double torso = facing_[i];
        for (const auto& te : c_.torsion_events) {
          if (te.person == p && t >= te.first_frame && t <= te.last_frame) head += te.offset;
        }
        if (c_.angle_noise_sd > 0.0) {
          head += c_.angle_noise_sd * gauss(rng_);
          torso += c_.angle_noise_sd * gauss(rng_);
        }
        pf.head_angle = normalize_angle(head);
        pf.torso_angle = normalize_angle(torso);
        frame.participants.push_back(pf);
      }
      scene.frames.frames.push_back(std::move(frame));

      auto& groups = scene.groups.frames[t];
      for (std::size_t f = 0; f < members_.size(); ++f) {
        if (members_[f].size() >= 2 && disturbed_until_[f] <= t) {
          groups.push_back({static_cast<int>(f), members_[f]});
        }
      }

      for (int p = 0; p < c_.participant_count; ++p) {
        ActivityRecord r;
        r.person_id = p;
        r.frame = t;
        const auto& s = people_[static_cast<std::size_t>(p)];
        r.set(Activity::kWalking, s.mode == Mode::kTravel);
        r.set(Activity::kStepping, background(rng_));
        r.set(Activity::kDrinking, background(rng_));
        r.set(Activity::kLaughing, background(rng_));
        r.set(Activity::kHairTouching, background(rng_));
        if (c_.turn_taking && (p == c_.turn_taking->person_a || p == c_.turn_taking->person_b)) {
          script_activity(r, t, turns);
        } else {
          r.set(Activity::kSpeaking, background(rng_));
          r.set(Activity::kHandGesturing, background(rng_));
          r.set(Activity::kHeadGesturing, background(rng_));
        }
        scene.activities.push_back(r);
      }
    }
    return scene;
  }

 private:
  enum class Mode { kHome, kMember, kTravel, kPassing };

  struct PersonState {
    Mode mode = Mode::kHome;
    int formation = -1;  // member of, or travelling to, or passing through
    Point2 home;
    double home_facing = 0.0;
    Point2 from, to;
    int start = 0, end = 0;
    int restore_formation = -1;  // formation to rejoin after a pass-through
  };

  int formation_of(int p) const {
    for (std::size_t f = 0; f < members_.size(); ++f) {
      if (std::binary_search(members_[f].begin(), members_[f].end(), p)) return static_cast<int>(f);
    }
    return -1;
  }

  void insert(int p, int f) {
    auto& m = members_[static_cast<std::size_t>(f)];
    m.insert(std::upper_bound(m.begin(), m.end(), p), p);
    auto& s = people_[static_cast<std::size_t>(p)];
    s.mode = Mode::kMember;
    s.formation = f;
  }

  void remove(int p) {
    auto& s = people_[static_cast<std::size_t>(p)];
    if (s.mode == Mode::kMember && s.formation >= 0) {
      auto& m = members_[static_cast<std::size_t>(s.formation)];
      m.erase(std::remove(m.begin(), m.end(), p), m.end());
    }
    s.formation = -1;
    s.mode = Mode::kHome;
  }

  void travel(int p, Point2 to, int t, int frames, int target_formation) {
    auto& s = people_[static_cast<std::size_t>(p)];
    s.mode = Mode::kTravel;
    s.from = positions_[static_cast<std::size_t>(p)];
    s.to = to;
    s.start = t;
    s.end = t + frames;
    s.formation = target_formation;
  }

  void apply(const SceneEvent& e, int t) {
    auto& s = people_[static_cast<std::size_t>(e.person)];
    switch (e.kind) {
      case SceneEvent::Kind::kJoin: {
        remove(e.person);
        if (e.travel == 0) {
          insert(e.person, e.formation);
          break;
        }
        const Point2 c = centers_[static_cast<std::size_t>(e.formation)];
        const Point2 here = positions_[static_cast<std::size_t>(e.person)];
        double dx = here.x - c.x, dy = here.y - c.y;
        const double len = std::hypot(dx, dy);
        if (len < 1e-9) {
          dx = 1.0;
          dy = 0.0;
        } else {
          dx /= len;
          dy /= len;
        }
        travel(e.person, {c.x + c_.formation_radius * dx, c.y + c_.formation_radius * dy}, t,
               e.travel, e.formation);
        break;
      }
      case SceneEvent::Kind::kLeave:
        remove(e.person);
        if (e.travel > 0) travel(e.person, s.home, t, e.travel, -1);
        break;
      case SceneEvent::Kind::kPassThrough: {
        const int own = s.mode == Mode::kMember ? s.formation : -1;
        remove(e.person);
        s.mode = Mode::kPassing;
        s.formation = e.formation;
        s.restore_formation = own;
        s.end = t + e.duration;
        auto& until = disturbed_until_[static_cast<std::size_t>(e.formation)];
        until = std::max(until, s.end);
        break;
      }
    }
  }

  void finish_transitions(int t) {
    for (int p = 0; p < c_.participant_count; ++p) {
      auto& s = people_[static_cast<std::size_t>(p)];
      if (s.mode == Mode::kTravel && t >= s.end) {
        if (s.formation >= 0) {
          insert(p, s.formation);
        } else {
          s.mode = Mode::kHome;
        }
      } else if (s.mode == Mode::kPassing && t >= s.end) {
        s.mode = Mode::kHome;
        s.formation = -1;
        if (s.restore_formation >= 0) insert(p, s.restore_formation);
        s.restore_formation = -1;
      }
    }
  }

  void place_all(int t) {
    for (std::size_t f = 0; f < members_.size(); ++f) {
      const auto& m = members_[f];
      const double radius =
          c_.formation_radius + (disturbed_until_[f] > t ? c_.displacement : 0.0);
      for (std::size_t k = 0; k < m.size(); ++k) {
        const double a = phase_[f] + 2.0 * std::numbers::pi * static_cast<double>(k) /
                                         static_cast<double>(m.size());
        const auto i = static_cast<std::size_t>(m[k]);
        positions_[i] = {centers_[f].x + radius * std::cos(a), centers_[f].y + radius * std::sin(a)};
        facing_[i] = a + std::numbers::pi;
      }
    }
    for (int p = 0; p < c_.participant_count; ++p) {
      const auto i = static_cast<std::size_t>(p);
      const auto& s = people_[i];
      switch (s.mode) {
        case Mode::kMember:
          break;
        case Mode::kHome:
          positions_[i] = s.home;
          facing_[i] = s.home_facing;
          break;
        case Mode::kTravel: {
          const double u = static_cast<double>(t - s.start) / static_cast<double>(s.end - s.start);
          positions_[i] = {s.from.x + u * (s.to.x - s.from.x), s.from.y + u * (s.to.y - s.from.y)};
          facing_[i] = std::atan2(s.to.y - s.from.y, s.to.x - s.from.x);
          break;
        }
        case Mode::kPassing:
          positions_[i] = centers_[static_cast<std::size_t>(s.formation)];
          facing_[i] = s.home_facing;
          break;
      }
    }
  }

  void script_activity(ActivityRecord& r, int t, const std::vector<TurnState>& turns) {
    const auto& s = *c_.turn_taking;
    const bool is_a = r.person_id == s.person_a;
    auto speaks = [&](int frame) {
      const auto st = turns[static_cast<std::size_t>(frame)];
      return is_a ? a_speaks(st) : b_speaks(st);
    };
    const bool speaking = speaks(t);
    r.set(Activity::kSpeaking, speaking);
    // Lead-in before the next change of speaking state.
    const int next_switch = (t / s.period + 1) * s.period;
    const bool lead_in = next_switch < c_.duration && next_switch - t <= s.lead_in &&
                         speaks(next_switch) && !speaking;
    r.set(Activity::kHandGesturing, lead_in);
    std::bernoulli_distribution nod(s.head_gesture_prob);
    r.set(Activity::kHeadGesturing, !speaking && nod(rng_));
  }

  const SyntheticSceneConfig& c_;
  std::mt19937_64 rng_;
  std::vector<std::vector<int>> members_;
  std::vector<Point2> centers_;
  std::vector<double> phase_;
  std::vector<int> disturbed_until_;
  std::vector<PersonState> people_;
  std::vector<Point2> positions_;
  std::vector<double> facing_;
};

}  // namespace

SyntheticScene generate_scene(const SyntheticSceneConfig& config) {
  validate(config);
  return SceneSimulator(config).run();
}

}  // namespace fform
