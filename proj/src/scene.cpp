#include "waydcm/scene.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "waydcm/errors.hpp"

namespace waydcm {

using nlohmann::json;

bool AgentTrack::fully_invalid() const {
  for (bool b : valid)
    if (b) return false;
  return true;
}

AgentState AgentTrack::state_at(std::size_t t) const {
  if (t < valid.size() && valid[t]) return states[t];
  // carry the last valid state forward
  for (std::size_t i = std::min(t, valid.size() - 1) + 1; i-- > 0;) {
    if (valid[i]) return states[i];
  }
  // leading gap: backfill from the first valid state
  for (std::size_t i = t + 1; i < valid.size(); ++i) {
    if (valid[i]) return states[i];
  }
  throw DataError("track '" + agent_id + "' has no valid states");
}

namespace {

// Heading used for the frame rotation: theta at t_obs when the target is
// moving, otherwise the most recent valid moving state.
double frame_heading(const AgentTrack& target) {
  const std::size_t last = target.states.size() - 1;
  if (target.valid[last] && target.states[last].v > 0.0)
    return target.states[last].theta;
  for (std::size_t i = last + 1; i-- > 0;) {
    if (target.valid[i] && target.states[i].v > 0.0) return target.states[i].theta;
  }
  throw DataError("scene rejected: target has no defined heading at t_obs "
                  "(v = 0 on every valid state)");
}

AgentTrack transform_track(const AgentTrack& in, const FrameTransform& f) {
  AgentTrack out = in;
  for (auto& s : out.states) {
    const Vec2 p = f.to_local({s.x, s.y});
    s.x = p.x;
    s.y = p.y;
    s.theta = wrap_angle(s.theta - f.heading);
  }
  return out;
}

}  // namespace

Scene normalize_scene(const Scene& raw) {
  if (raw.target.states.empty() || raw.target.valid.empty())
    throw DataError("scene rejected: empty target track");
  const std::size_t last = raw.target.states.size() - 1;
  if (!raw.target.valid[last])
    throw DataError("scene rejected: target state at t_obs is invalid");

  FrameTransform frame{raw.target.states[last].pos(), frame_heading(raw.target)};

  Scene out = raw;
  out.target = transform_track(raw.target, frame);
  out.neighbors.clear();
  for (const auto& nb : raw.neighbors) {
    if (nb.fully_invalid()) continue;  // dropped, nothing to carry forward
    out.neighbors.push_back(transform_track(nb, frame));
  }
  out.waypoint = frame.to_local(raw.waypoint);
  if (raw.future) {
    std::vector<Vec2> fut;
    fut.reserve(raw.future->size());
    for (const auto& p : *raw.future) fut.push_back(frame.to_local(p));
    out.future = std::move(fut);
  }
  out.world_from_local = frame;
  return out;
}

Scene filter_neighbors(const Scene& scene, const InteractionSpace& box) {
  Scene out = scene;
  out.neighbors.clear();
  const std::size_t last = scene.t_obs == 0 ? 0 : scene.t_obs - 1;
  for (const auto& nb : scene.neighbors) {
    const AgentState s = nb.state_at(last);
    if (s.x >= -box.behind && s.x <= box.ahead && s.y >= -box.side && s.y <= box.side)
      out.neighbors.push_back(nb);
  }
  return out;
}

namespace {

void check_track_continuity(const AgentTrack& t, double dt, double v_max,
                            const std::string& scene_id) {
  const double bound = v_max * dt + 1e-9;
  for (std::size_t i = 0; i + 1 < t.states.size(); ++i) {
    if (i + 1 >= t.valid.size() || !t.valid[i] || !t.valid[i + 1]) continue;
    const double step = distance(t.states[i].pos(), t.states[i + 1].pos());
    if (step > bound) {
      std::ostringstream os;
      os << "scene '" << scene_id << "': track '" << t.agent_id << "' jumps " << step
         << " m between steps " << i << " and " << i + 1 << " (bound " << v_max * dt
         << " m at v_max " << v_max << ")";
      throw DataError(os.str());
    }
  }
}

}  // namespace

void check_scene_continuity(const Scene& scene, double v_max) {
  check_track_continuity(scene.target, scene.dt, v_max, scene.id);
  for (const auto& nb : scene.neighbors)
    check_track_continuity(nb, scene.dt, v_max, scene.id);
}

namespace {

json track_to_json(const AgentTrack& t) {
  json states = json::array();
  for (const auto& s : t.states) states.push_back({s.x, s.y, s.v, s.theta});
  json valid = json::array();
  for (bool b : t.valid) valid.push_back(b);
  return json{{"states", std::move(states)}, {"valid", std::move(valid)}};
}

AgentTrack track_from_json(const json& j, std::size_t line_no,
                           const std::string& field, std::size_t t_obs,
                           std::string id) {
  auto fail = [&](const std::string& what) -> DataError {
    std::ostringstream os;
    os << "line " << line_no << ": field '" << field << "': " << what;
    return DataError(os.str());
  };
  if (!j.is_object() || !j.contains("states") || !j.contains("valid"))
    throw fail("expected object with 'states' and 'valid'");
  AgentTrack t;
  t.agent_id = std::move(id);
  for (const auto& row : j.at("states")) {
    if (!row.is_array() || row.size() != 4) throw fail("state is not [x,y,v,theta]");
    AgentState s{row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
                 row[3].get<double>()};
    if (s.v < 0.0) throw fail("negative speed v");
    s.theta = wrap_angle(s.theta);
    t.states.push_back(s);
  }
  for (const auto& b : j.at("valid")) t.valid.push_back(b.get<bool>());
  if (t.states.size() != t_obs) throw fail("states length differs from t_obs");
  if (t.valid.size() != t.states.size())
    throw fail("valid mask length differs from states length");
  return t;
}

}  // namespace

std::string scene_to_json_line(const Scene& scene) {
  json j;
  j["id"] = scene.id;
  j["dt"] = scene.dt;
  j["t_obs"] = scene.t_obs;
  j["t_f"] = scene.t_f;
  j["target"] = track_to_json(scene.target);
  json nbs = json::array();
  for (const auto& nb : scene.neighbors) nbs.push_back(track_to_json(nb));
  j["neighbors"] = std::move(nbs);
  j["waypoint"] = {scene.waypoint.x, scene.waypoint.y};
  if (scene.future) {
    json fut = json::array();
    for (const auto& p : *scene.future) fut.push_back({p.x, p.y});
    j["future"] = std::move(fut);
  } else {
    j["future"] = nullptr;
  }
  return j.dump();
}

Scene scene_from_json_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << "line " << line_no << ": malformed JSON: " << e.what();
    throw DataError(os.str());
  }
  auto fail = [&](const std::string& field, const std::string& what) -> DataError {
    std::ostringstream os;
    os << "line " << line_no << ": field '" << field << "': " << what;
    return DataError(os.str());
  };
  Scene s;
  try {
    s.id = j.at("id").get<std::string>();
  } catch (...) {
    throw fail("id", "missing or not a string");
  }
  try {
    s.dt = j.at("dt").get<double>();
    s.t_obs = j.at("t_obs").get<std::size_t>();
    s.t_f = j.at("t_f").get<std::size_t>();
  } catch (...) {
    throw fail("dt/t_obs/t_f", "missing or wrong type");
  }
  if (s.dt <= 0.0) throw fail("dt", "must be positive");
  if (s.t_obs == 0) throw fail("t_obs", "must be positive");
  if (!j.contains("target")) throw fail("target", "missing");
  s.target = track_from_json(j.at("target"), line_no, "target", s.t_obs, "target");
  if (j.contains("neighbors")) {
    std::size_t i = 0;
    for (const auto& nj : j.at("neighbors")) {
      s.neighbors.push_back(track_from_json(nj, line_no, "neighbors[" + std::to_string(i) + "]",
                                            s.t_obs, "n#" + std::to_string(i)));
      ++i;
    }
  }
  try {
    const auto& wp = j.at("waypoint");
    s.waypoint = {wp.at(0).get<double>(), wp.at(1).get<double>()};
  } catch (...) {
    throw fail("waypoint", "expected [x, y]");
  }
  if (j.contains("future") && !j.at("future").is_null()) {
    std::vector<Vec2> fut;
    for (const auto& p : j.at("future")) {
      if (!p.is_array() || p.size() != 2) throw fail("future", "point is not [x,y]");
      fut.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    if (fut.size() != s.t_f) throw fail("future", "length differs from t_f");
    s.future = std::move(fut);
  }
  return s;
}

std::vector<Scene> read_scenes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scenario file: " + path);
  std::vector<Scene> scenes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    scenes.push_back(scene_from_json_line(line, line_no));
  }
  return scenes;
}

void write_scenes(const std::vector<Scene>& scenes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& s : scenes) out << scene_to_json_line(s) << '\n';
}

}  // namespace waydcm
