#include "waydcm/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "waydcm/errors.hpp"
#include "waydcm/parallel.hpp"
#include "waydcm/version.hpp"

namespace waydcm {

using nlohmann::json;

namespace {

// scene-construction knobs that are part of the generator design rather than
// user-facing configuration
constexpr double kHeadingJitter = 0.02;     // rad per past step
constexpr double kNeighborSpeedMin = 0.5;   // m/s
constexpr double kNeighborSpeedMax = 10.0;  // m/s
constexpr double kNearCenterSigma = 2.0;    // m, neighbor spread around centers
constexpr double kWorldRange = 100.0;       // m, world-frame placement box
constexpr double kBoxShrink = 1e-6;         // keeps clipped agents strictly inside
// waypoint targeting: most scenes get a waypoint picked so the top-two score
// gap lands where the logit is most informative
constexpr double kTieFraction = 0.8;
constexpr std::size_t kWaypointCandidates = 32;
constexpr double kGapMin = 0.5;
constexpr double kGapMax = 2.5;
// booster agents sharpening the collision and occupancy signals
constexpr double kColliderBoostProb = 0.75;
constexpr double kOccBoostProb = 0.6;
constexpr double kColliderAngleFrac = 0.8;  // fraction of the half-width used
constexpr double kColliderDistMin = 4.0;    // m
constexpr double kColliderDistScale = 0.3;  // of the grid reach
constexpr double kColliderDistBase = 8.0;   // m
constexpr double kOppositionMargin = 0.1;   // rad inside the (pi/2, pi) window
// stream offsets separating pilot draws from corpus draws
constexpr std::uint64_t kPilotStreamBase = std::uint64_t{1} << 32;

void validate(const GenConfig& c) {
  if (c.noise_sigma < 0.0) throw ConfigError("noise_sigma must be nonnegative");
  if (c.min_neighbors > c.max_neighbors)
    throw ConfigError("neighbor count range is empty");
  if (c.speed_min > c.speed_max || c.speed_min < 0.0)
    throw ConfigError("speed range is empty or negative");
  if (c.wp_rel_min > c.wp_rel_max || c.wp_rel_min <= 0.0)
    throw ConfigError("waypoint distance range is empty or nonpositive");
  if (c.t_obs == 0 || c.t_f == 0 || c.dt <= 0.0)
    throw ConfigError("t_obs, t_f and dt must be positive");
  if (c.pilot_scenes < 2) throw ConfigError("pilot batch needs at least 2 scenes");
}

Vec2 clip_to_box(Vec2 p, const InteractionSpace& box) {
  p.x = std::clamp(p.x, -box.behind + kBoxShrink, box.ahead - kBoxShrink);
  p.y = std::clamp(p.y, -box.side + kBoxShrink, box.side - kBoxShrink);
  return p;
}

bool inside_box(const Vec2& p, const InteractionSpace& box) {
  return p.x >= -box.behind && p.x <= box.ahead && p.y >= -box.side && p.y <= box.side;
}

// constant-velocity history ending at `end` with heading `theta` at the last
// observed step
AgentTrack constant_velocity_track(const std::string& id, Vec2 end, double speed,
                                   double theta, std::size_t t_obs, double dt) {
  AgentTrack t;
  t.agent_id = id;
  t.states.resize(t_obs);
  t.valid.assign(t_obs, true);
  Vec2 pos = end;
  for (std::size_t i = t_obs; i-- > 0;) {
    t.states[i] = {pos.x, pos.y, speed, theta};
    pos = pos - Vec2{std::cos(theta), std::sin(theta)} * (speed * dt);
  }
  return t;
}

AgentTrack target_track(Rng& rng, double speed, std::size_t t_obs, double dt) {
  AgentTrack t;
  t.agent_id = "target";
  t.states.resize(t_obs);
  t.valid.assign(t_obs, true);
  std::vector<double> theta(t_obs);
  theta[t_obs - 1] = 0.0;
  for (std::size_t i = t_obs - 1; i-- > 0;)
    theta[i] = theta[i + 1] + rng.normal(0.0, kHeadingJitter);
  Vec2 pos{0.0, 0.0};
  for (std::size_t i = t_obs; i-- > 0;) {
    t.states[i] = {pos.x, pos.y, speed, theta[i]};
    pos = pos - Vec2{std::cos(theta[i]), std::sin(theta[i])} * (speed * dt);
  }
  return t;
}

AgentTrack random_neighbor(Rng& rng, const RadialGrid& grid, const GenConfig& cfg,
                           std::size_t index) {
  Vec2 pos;
  if (rng.bernoulli(0.5)) {
    const Vec2 center = grid.alts[rng.uniform_int(grid.alts.size())].center;
    pos = clip_to_box(center + Vec2{rng.normal(0.0, kNearCenterSigma),
                                    rng.normal(0.0, kNearCenterSigma)},
                      cfg.box);
  } else {
    pos = {rng.uniform(-cfg.box.behind, cfg.box.ahead),
           rng.uniform(-cfg.box.side, cfg.box.side)};
  }
  const double heading = rng.uniform(-kPi, kPi);
  const double speed = rng.uniform(kNeighborSpeedMin, kNeighborSpeedMax);
  return constant_velocity_track("n" + std::to_string(index), pos, speed, heading,
                                 cfg.t_obs, cfg.dt);
}

// utilities over all alternatives for a given waypoint, holding the
// neighbor-driven columns fixed
std::vector<double> utilities_for(const RadialGrid& grid, const std::vector<double>& dir,
                                  const std::vector<double>& occ,
                                  const std::vector<double>& coll, const Vec2& wp,
                                  const FeatureScaler& scaler, const BetaVector& beta) {
  const auto dangle = feature_dangle(grid, wp);
  const auto ddist = feature_ddist(grid, wp);
  std::vector<double> u(grid.alts.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const FeatureRow row{dir[k], occ[k], coll[k], dangle[k], ddist[k]};
    u[k] = utility(scaler.transform(row), beta);
  }
  return u;
}

double top2_gap(const std::vector<double>& u) {
  double best = -std::numeric_limits<double>::infinity(), second = best;
  for (double v : u) {
    if (v > best) {
      second = best;
      best = v;
    } else if (v > second) {
      second = v;
    }
  }
  return best - second;
}

std::size_t argmax(const std::vector<double>& u) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < u.size(); ++k)
    if (u[k] > u[best]) best = k;
  return best;
}

// highest-utility alternative outside the given sector
std::size_t rival_index(const std::vector<double>& u, const RadialGrid& grid,
                        std::size_t avoid_sector) {
  std::size_t best = static_cast<std::size_t>(-1);
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (grid.alts[k].sector == avoid_sector) continue;
    if (best == static_cast<std::size_t>(-1) || u[k] > u[best]) best = k;
  }
  return best;
}

Vec2 polar(double radius, double angle) {
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

// constant-speed arc from the origin (tangent to the heading) to the goal
std::vector<Vec2> arc_to(const Vec2& goal, std::size_t steps) {
  std::vector<Vec2> pts(steps);
  const double norm = goal.norm();
  if (norm == 0.0 || std::abs(goal.y) < 1e-9 * norm) {
    for (std::size_t t = 0; t < steps; ++t) {
      const double f = static_cast<double>(t + 1) / static_cast<double>(steps);
      pts[t] = goal * f;
    }
    return pts;
  }
  const double phi = 2.0 * std::atan2(goal.y, goal.x);
  const double radius = (goal.x * goal.x + goal.y * goal.y) / (2.0 * goal.y);
  for (std::size_t t = 0; t < steps; ++t) {
    const double f = static_cast<double>(t + 1) / static_cast<double>(steps);
    pts[t] = {radius * std::sin(phi * f), radius * (1.0 - std::cos(phi * f))};
  }
  return pts;
}

struct LocalDraft {
  Scene scene;  // local frame: target at origin, heading 0 at t_obs
  RadialGrid grid;
};

// Everything up to (and excluding) the goal draw. `scaler` is null during the
// pilot phase, which skips waypoint targeting and booster agents.
LocalDraft draw_scene_core(Rng& rng, const GenConfig& cfg, const FeatureScaler* scaler) {
  LocalDraft d;
  d.scene.dt = cfg.dt;
  d.scene.t_obs = cfg.t_obs;
  d.scene.t_f = cfg.t_f;

  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  d.scene.target = target_track(rng, speed, cfg.t_obs, cfg.dt);
  d.grid = build_grid(speed, static_cast<double>(cfg.t_f) * cfg.dt, cfg.grid);

  const std::size_t n_background =
      cfg.min_neighbors + rng.uniform_int(cfg.max_neighbors - cfg.min_neighbors + 1);
  for (std::size_t i = 0; i < n_background; ++i)
    d.scene.neighbors.push_back(random_neighbor(rng, d.grid, cfg, d.scene.neighbors.size()));

  auto sample_waypoint = [&] {
    return polar(d.grid.maxl * rng.uniform(cfg.wp_rel_min, cfg.wp_rel_max),
                 rng.uniform(-kPi, kPi));
  };

  if (!scaler) {
    d.scene.waypoint = sample_waypoint();
    return d;
  }

  const auto dir = feature_dir(d.grid);
  auto occ = feature_occupancy(d.grid, d.scene, cfg.collider);
  auto coll = feature_collision(d.grid, d.scene, cfg.collider);

  // waypoint: mostly targeted so the top-two utility gap falls where choices
  // stay stochastic but informative
  if (rng.bernoulli(kTieFraction)) {
    const double wanted_gap = rng.uniform(kGapMin, kGapMax);
    Vec2 best_wp{};
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t cand = 0; cand < kWaypointCandidates; ++cand) {
      const Vec2 wp = sample_waypoint();
      const double gap =
          top2_gap(utilities_for(d.grid, dir, occ, coll, wp, *scaler, cfg.true_beta));
      const double err = std::abs(gap - wanted_gap);
      if (err < best_err) {
        best_err = err;
        best_wp = wp;
      }
    }
    d.scene.waypoint = best_wp;
  } else {
    d.scene.waypoint = sample_waypoint();
  }

  // collision booster: an oncoming agent in the sector of the leading or
  // rival alternative
  if (rng.bernoulli(kColliderBoostProb)) {
    const auto u = utilities_for(d.grid, dir, occ, coll, d.scene.waypoint, *scaler,
                                 cfg.true_beta);
    const std::size_t top = argmax(u);
    const std::size_t rival = rival_index(u, d.grid, d.grid.alts[top].sector);
    const std::size_t anchor = rng.bernoulli(0.5) && rival != static_cast<std::size_t>(-1)
                                   ? rival
                                   : top;
    const Alternative& alt = d.grid.alts[anchor];
    const double half_width = (alt.d_left - alt.d_right) / 2.0;
    const double angle =
        alt.mid + rng.uniform(-kColliderAngleFrac, kColliderAngleFrac) * half_width;
    const double dist = rng.uniform(
        kColliderDistMin, kColliderDistScale * d.grid.maxl + kColliderDistBase);
    const Vec2 pos = polar(dist, angle);
    if (inside_box(pos, cfg.box)) {
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double heading = wrap_angle(
          alt.mid + sign * rng.uniform(kPi / 2.0 + kOppositionMargin, kPi - kOppositionMargin));
      const double speed_nb = rng.uniform(kNeighborSpeedMin, kNeighborSpeedMax);
      d.scene.neighbors.push_back(constant_velocity_track(
          "n" + std::to_string(d.scene.neighbors.size()), pos, speed_nb, heading,
          cfg.t_obs, cfg.dt));
      occ = feature_occupancy(d.grid, d.scene, cfg.collider);
      coll = feature_collision(d.grid, d.scene, cfg.collider);
    }
  }

  // occupancy booster: crowd mass right on the leading or rival center
  if (rng.bernoulli(kOccBoostProb)) {
    const auto u = utilities_for(d.grid, dir, occ, coll, d.scene.waypoint, *scaler,
                                 cfg.true_beta);
    const std::size_t top = argmax(u);
    const std::size_t rival = rival_index(u, d.grid, d.grid.alts[top].sector);
    const std::size_t anchor = rng.bernoulli(0.5) && rival != static_cast<std::size_t>(-1)
                                   ? rival
                                   : top;
    const Vec2 pos = clip_to_box(d.grid.alts[anchor].center +
                                     Vec2{rng.normal(0.0, kNearCenterSigma),
                                          rng.normal(0.0, kNearCenterSigma)},
                                 cfg.box);
    const double heading = rng.uniform(-kPi, kPi);
    const double speed_nb = rng.uniform(kNeighborSpeedMin, kNeighborSpeedMax);
    d.scene.neighbors.push_back(constant_velocity_track(
        "n" + std::to_string(d.scene.neighbors.size()), pos, speed_nb, heading,
        cfg.t_obs, cfg.dt));
  }
  return d;
}

Scene to_world(const Scene& local, const FrameTransform& pose) {
  Scene w = local;
  auto move_track = [&](AgentTrack& t) {
    for (auto& s : t.states) {
      const Vec2 p = pose.to_world({s.x, s.y});
      s.x = p.x;
      s.y = p.y;
      s.theta = wrap_angle(s.theta + pose.heading);
    }
  };
  move_track(w.target);
  for (auto& nb : w.neighbors) move_track(nb);
  w.waypoint = pose.to_world(local.waypoint);
  if (local.future) {
    std::vector<Vec2> fut;
    fut.reserve(local.future->size());
    for (const auto& p : *local.future) fut.push_back(pose.to_world(p));
    w.future = std::move(fut);
  }
  return w;
}

std::string scene_name(std::size_t i) {
  std::ostringstream os;
  os << 's';
  os.width(6);
  os.fill('0');
  os << i;
  return os.str();
}

}  // namespace

GenResult generate(const GenConfig& cfg) {
  validate(cfg);

  // pilot: untargeted scenes fix the standardization moments
  std::vector<std::vector<FeatureRow>> pilot_rows(cfg.pilot_scenes);
  parallel_for(cfg.pilot_scenes, [&](std::size_t j) {
    Rng rng = Rng::derived(cfg.seed, kPilotStreamBase + j);
    const LocalDraft d = draw_scene_core(rng, cfg, nullptr);
    pilot_rows[j] = feature_matrix(d.scene, d.grid, cfg.collider);
  });

  GenResult result;
  result.config = cfg;
  result.scaler = FeatureScaler::fit(pilot_rows);
  result.scenes.resize(cfg.n_scenes);
  result.labels.resize(cfg.n_scenes);

  parallel_for(cfg.n_scenes, [&](std::size_t i) {
    Rng rng = Rng::derived(cfg.seed, i);
    LocalDraft d = draw_scene_core(rng, cfg, &result.scaler);
    d.scene.id = scene_name(i);

    const auto rows = feature_matrix(d.scene, d.grid, cfg.collider);
    std::vector<double> u(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k)
      u[k] = utility(result.scaler.transform(rows[k]), cfg.true_beta);
    const GoalDistribution dist = goal_probabilities(u);
    const std::size_t k_star = rng.categorical(dist.probs);

    std::vector<Vec2> future = arc_to(d.grid.alts[k_star].center, cfg.t_f);
    if (cfg.noise_sigma > 0.0) {
      for (auto& p : future) {
        p.x += rng.normal(0.0, cfg.noise_sigma);
        p.y += rng.normal(0.0, cfg.noise_sigma);
      }
    }
    d.scene.future = std::move(future);

    const FrameTransform pose{{rng.uniform(-kWorldRange, kWorldRange),
                               rng.uniform(-kWorldRange, kWorldRange)},
                              rng.uniform(-kPi, kPi)};
    result.scenes[i] = to_world(d.scene, pose);
    result.labels[i] = k_star;
  });
  return result;
}

void write_corpus(const GenResult& result, const std::string& path) {
  write_scenes(result.scenes, path);
  json meta;
  meta["format"] = "waydcm-corpus-meta";
  json beta;
  for (std::size_t f = 0; f < BetaVector::kCount; ++f)
    beta["beta_" + FeatureRow::names()[f]] = result.config.true_beta[f];
  meta["true_beta"] = std::move(beta);
  meta["scaler"] = {{"mean", result.scaler.mean}, {"sd", result.scaler.sd}};
  meta["labels"] = result.labels;
  meta["n_scenes"] = result.scenes.size();
  meta["seed"] = result.config.seed;
  meta["noise_sigma"] = result.config.noise_sigma;
  meta["version"] = kVersion;
  std::ofstream out(path + ".meta.json");
  if (!out) throw DataError("cannot open for writing: " + path + ".meta.json");
  out << meta.dump(2) << '\n';
}

CorpusMeta read_corpus_meta(const std::string& corpus_path) {
  const std::string path = corpus_path + ".meta.json";
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus metadata: " + path);
  json meta;
  try {
    in >> meta;
  } catch (const json::parse_error& e) {
    throw DataError("malformed corpus metadata " + path + ": " + e.what());
  }
  if (meta.value("format", "") != "waydcm-corpus-meta")
    throw DataError(path + " is not corpus metadata");
  CorpusMeta out;
  for (std::size_t f = 0; f < BetaVector::kCount; ++f)
    out.true_beta[f] = meta.at("true_beta").at("beta_" + FeatureRow::names()[f]).get<double>();
  for (std::size_t f = 0; f < FeatureRow::kCount; ++f) {
    out.scaler.mean[f] = meta.at("scaler").at("mean").at(f).get<double>();
    out.scaler.sd[f] = meta.at("scaler").at("sd").at(f).get<double>();
  }
  out.labels = meta.at("labels").get<std::vector<std::size_t>>();
  return out;
}

std::optional<CorpusMeta> try_read_corpus_meta(const std::string& corpus_path) {
  std::ifstream probe(corpus_path + ".meta.json");
  if (!probe) return std::nullopt;
  probe.close();
  return read_corpus_meta(corpus_path);
}

LabeledChoiceData choice_data_from_scenes(const std::vector<Scene>& scenes,
                                          const GridSpec& grid_spec,
                                          const ColliderParams& collider,
                                          const InteractionSpace& box,
                                          const CorpusMeta* meta,
                                          FeatureScaler* scaler_out) {
  if (meta && meta->labels.size() != scenes.size())
    throw DataError("corpus metadata lists " + std::to_string(meta->labels.size()) +
                    " labels for " + std::to_string(scenes.size()) + " scenes");

  std::vector<std::vector<FeatureRow>> rows(scenes.size());
  std::vector<std::size_t> labels(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    const Scene local = filter_neighbors(normalize_scene(scenes[i]), box);
    const RadialGrid grid = build_grid(local, grid_spec);
    rows[i] = feature_matrix(local, grid, collider);
    labels[i] = meta ? meta->labels[i] : label_ground_truth(grid, local);
  });

  const FeatureScaler scaler = meta ? meta->scaler : FeatureScaler::fit(rows);
  if (scaler_out) *scaler_out = scaler;

  LabeledChoiceData data;
  data.features.resize(scenes.size());
  data.labels = std::move(labels);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    data.features[i].reserve(rows[i].size());
    for (const auto& row : rows[i]) data.features[i].push_back(scaler.transform(row));
  }
  return data;
}

FrequencyReport empirical_choice_frequencies(
    const std::vector<std::array<double, FeatureRow::kCount>>& features_std,
    const BetaVector& beta, std::size_t draws, Rng& rng) {
  if (draws == 0) throw ConfigError("frequency check needs at least one draw");
  std::vector<double> u(features_std.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = utility(features_std[k], beta);
  const GoalDistribution dist = goal_probabilities(u);

  FrequencyReport report;
  report.expected = dist.probs;
  report.draws = draws;
  std::vector<std::size_t> counts(u.size(), 0);
  for (std::size_t n = 0; n < draws; ++n) ++counts[rng.categorical(dist.probs)];
  report.observed.resize(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    report.observed[k] = static_cast<double>(counts[k]) / static_cast<double>(draws);
    const double expected_count = dist.probs[k] * static_cast<double>(draws);
    if (expected_count > 0.0) {
      const double diff = static_cast<double>(counts[k]) - expected_count;
      report.chi_squared += diff * diff / expected_count;
    }
  }
  return report;
}

}  // namespace waydcm
