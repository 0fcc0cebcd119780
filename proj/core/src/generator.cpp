#include "lanecast/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "lanecast/scene.hpp"

namespace lanecast {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

LanePolyline line_lane(int64_t id, double x0, double y0, double x1, double y1) {
  LanePolyline lane;
  lane.lane_id = id;
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int n = std::max(2, static_cast<int>(std::lround(len / 8.0)) + 1);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    lane.points.push_back({x0 + t * (x1 - x0), y0 + t * (y1 - y0)});
  }
  return lane;
}

// circular arc sampled every ~4 degrees; a1 < a0 walks the arc clockwise
LanePolyline arc_lane(int64_t id, double cx, double cy, double r, double a0, double a1,
                      TurnKind turn) {
  LanePolyline lane;
  lane.lane_id = id;
  lane.turn = turn;
  const int n = std::max(2, static_cast<int>(std::ceil(std::abs(a1 - a0) / (4.0 * kDeg))) + 1);
  for (int i = 0; i < n; ++i) {
    const double a = a0 + (a1 - a0) * static_cast<double>(i) / (n - 1);
    lane.points.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return lane;
}

// ---------------------------------------------------------------------------
// map planning

struct MapPlan {
  std::vector<LanePolyline> lanes;
  std::vector<std::vector<int64_t>> main_routes;  // straight-ish, usable for lead scripts
  std::vector<int64_t> side_route;                // curving alternative (T side approach)
  std::vector<int64_t> cross_route;               // perpendicular road (crossing)
  std::vector<int64_t> turn_route;                // junction turn connector, when present
  int n_parallel = 1;
};

MapPlan plan_straight(Rng& rng) {
  MapPlan plan;
  const int n = 2 + static_cast<int>(rng.randint(2));
  const double length = rng.uniform(180.0, 260.0);
  for (int i = 0; i < n; ++i) {
    LanePolyline lane = line_lane(i + 1, 0.0, 3.5 * i, length, 3.5 * i);
    if (i + 1 < n) lane.left_id = i + 2;
    if (i > 0) lane.right_id = i;
    plan.lanes.push_back(std::move(lane));
    plan.main_routes.push_back({i + 1});
  }
  plan.n_parallel = n;
  return plan;
}

MapPlan plan_curve(Rng& rng) {
  MapPlan plan;
  const double r = rng.uniform(45.0, 75.0);
  const double phi = rng.uniform(50.0, 90.0) * kDeg;
  const bool left = rng.randint(2) == 0;
  const double l_in = rng.uniform(70.0, 90.0);
  const double l_out = rng.uniform(60.0, 90.0);

  LanePolyline approach = line_lane(1, -l_in, 0.0, 0.0, 0.0);
  approach.successor_ids = {2};

  LanePolyline bend;
  double ex, ey, tx, ty;
  if (left) {
    bend = arc_lane(2, 0.0, r, r, -kPi / 2.0, -kPi / 2.0 + phi, TurnKind::kLeft);
    const double a1 = -kPi / 2.0 + phi;
    ex = r * std::cos(a1);
    ey = r + r * std::sin(a1);
    tx = -std::sin(a1);
    ty = std::cos(a1);
  } else {
    bend = arc_lane(2, 0.0, -r, r, kPi / 2.0, kPi / 2.0 - phi, TurnKind::kRight);
    const double a1 = kPi / 2.0 - phi;
    ex = r * std::cos(a1);
    ey = -r + r * std::sin(a1);
    tx = std::sin(a1);
    ty = -std::cos(a1);
  }
  bend.successor_ids = {3};

  LanePolyline exit = line_lane(3, ex, ey, ex + l_out * tx, ey + l_out * ty);

  plan.lanes = {std::move(approach), std::move(bend), std::move(exit)};
  plan.main_routes = {{1, 2, 3}};
  return plan;
}

MapPlan plan_t_junction(Rng& rng) {
  MapPlan plan;
  const double l1 = rng.uniform(70.0, 100.0);
  const double l2 = rng.uniform(80.0, 120.0);
  const double l3 = rng.uniform(50.0, 80.0);
  const double r = 18.0;

  LanePolyline a1 = line_lane(1, -l1, 0.0, 0.0, 0.0);
  a1.traffic_control = true;
  a1.successor_ids = {2};
  LanePolyline box = line_lane(2, 0.0, 0.0, 15.0, 0.0);
  box.intersection = true;
  box.successor_ids = {3};
  LanePolyline a2 = line_lane(3, 15.0, 0.0, 15.0 + l2, 0.0);

  LanePolyline b0 = line_lane(4, -r, -r - l3, -r, -r);
  b0.traffic_control = true;
  b0.successor_ids = {5};
  LanePolyline b1 = arc_lane(5, 0.0, -r, r, kPi, kPi / 2.0, TurnKind::kRight);
  b1.intersection = true;
  b1.successor_ids = {2};

  plan.lanes = {std::move(a1), std::move(box), std::move(a2), std::move(b0), std::move(b1)};
  plan.main_routes = {{1, 2, 3}};
  plan.side_route = {4, 5, 2, 3};
  return plan;
}

MapPlan plan_crossing(Rng& rng) {
  MapPlan plan;
  const double lh = rng.uniform(80.0, 110.0);
  const double w = 5.0;

  LanePolyline west = line_lane(1, -lh - w, 0.0, -w, 0.0);
  west.traffic_control = true;
  west.successor_ids = {2};
  LanePolyline box_ew = line_lane(2, -w, 0.0, w, 0.0);
  box_ew.intersection = true;
  box_ew.successor_ids = {3};
  LanePolyline east = line_lane(3, w, 0.0, lh + w, 0.0);

  LanePolyline south = line_lane(4, 0.0, -lh - w, 0.0, -w);
  south.traffic_control = true;
  south.successor_ids = {5};
  LanePolyline box_ns = line_lane(5, 0.0, -w, 0.0, w);
  box_ns.intersection = true;
  box_ns.successor_ids = {6};
  LanePolyline north = line_lane(6, 0.0, w, 0.0, lh + w);

  plan.lanes = {std::move(west), std::move(box_ew), std::move(east),
                std::move(south), std::move(box_ns), std::move(north)};
  plan.main_routes = {{1, 2, 3}};
  plan.cross_route = {4, 5, 6};
  if (rng.uniform() < 0.5) {
    LanePolyline turn = arc_lane(7, -w, w, w, -kPi / 2.0, 0.0, TurnKind::kLeft);
    turn.intersection = true;
    turn.successor_ids = {6};
    plan.lanes[0].successor_ids.push_back(7);
    plan.lanes.push_back(std::move(turn));
    plan.turn_route = {1, 7, 6};
  }
  return plan;
}

MapPlan plan_map(MapKind kind, Rng& rng) {
  switch (kind) {
    case MapKind::kStraight:
    case MapKind::kLaneChange:
      return plan_straight(rng);
    case MapKind::kCurve:
      return plan_curve(rng);
    case MapKind::kTJunction:
      return plan_t_junction(rng);
    case MapKind::kCrossing:
      return plan_crossing(rng);
  }
  throw std::invalid_argument("plan_map: bad map kind");
}

// ---------------------------------------------------------------------------
// motion scripting

struct Actor {
  std::vector<int64_t> route;
  double s_t0 = 0.0;                // arc position along the route at t = 0
  std::vector<double> speeds;       // per frame, t_hst + t_fut entries
  std::vector<double> lateral;      // per position; empty = stay on the centerline
  AgentClass cls = AgentClass::kCar;
  int perceived_tail = -1;          // >= 0: only the last k history frames perceived
};

std::vector<double> const_profile(int n, double v) { return std::vector<double>(n, v); }

// approach at v0, reach v1 by t = 0, then brake hard to a standstill
std::vector<double> stop_profile(int t_hst, int t_fut, double dt, double v0, double v1,
                                 double brake) {
  std::vector<double> v(t_hst + t_fut);
  for (int i = 0; i < t_hst; ++i)
    v[i] = v0 + (v1 - v0) * static_cast<double>(i) / std::max(1, t_hst - 1);
  for (int k = 0; k < t_fut; ++k) v[t_hst + k] = std::max(0.0, v1 - brake * dt * k);
  return v;
}

// cruise through history, then ease from v0 down to v_end across the future
std::vector<double> decel_profile(int t_hst, int t_fut, double dt, double v0, double v_end) {
  (void)dt;
  std::vector<double> v(t_hst + t_fut);
  for (int i = 0; i < t_hst; ++i) v[i] = v0;
  for (int k = 0; k < t_fut; ++k)
    v[t_hst + k] = v0 + (v_end - v0) * static_cast<double>(k + 1) / t_fut;
  return v;
}

// smoothstep lateral ramp across future frames [start, start+span]
std::vector<double> nudge_lateral(int n_pos, int t_hst, int start, int span, double amp) {
  std::vector<double> lat(n_pos, 0.0);
  for (int i = 0; i < n_pos; ++i) {
    const int k = i - (t_hst + start);
    if (k <= 0) continue;
    const double x = std::min(1.0, static_cast<double>(k) / span);
    lat[i] = amp * x * x * (3.0 - 2.0 * x);
  }
  return lat;
}

std::vector<std::array<double, 2>> route_points(const std::vector<LanePolyline>& lanes,
                                                const std::vector<int64_t>& route) {
  std::vector<std::array<double, 2>> pts;
  for (int64_t id : route) {
    auto it = std::find_if(lanes.begin(), lanes.end(),
                           [&](const LanePolyline& l) { return l.lane_id == id; });
    if (it == lanes.end())
      throw std::invalid_argument("route references unknown lane " + std::to_string(id));
    size_t start = pts.empty() ? 0 : 1;  // consecutive lanes share an endpoint
    for (size_t i = start; i < it->points.size(); ++i) pts.push_back(it->points[i]);
  }
  return pts;
}

std::vector<std::array<double, 2>> roll(const PolylineWalker& walker, const Actor& a, int t_hst,
                                        int n_frames, double dt) {
  std::vector<double> s(static_cast<size_t>(n_frames) + 1);
  s[static_cast<size_t>(t_hst)] = a.s_t0;
  for (int i = t_hst; i > 0; --i) s[i - 1] = s[i] - a.speeds[i - 1] * dt;
  for (int i = t_hst; i < n_frames; ++i) s[i + 1] = s[i] + a.speeds[i] * dt;
  std::vector<std::array<double, 2>> p(static_cast<size_t>(n_frames) + 1);
  for (int i = 0; i <= n_frames; ++i) {
    auto base = walker.point_at(s[i]);
    if (!a.lateral.empty() && a.lateral[i] != 0.0) {
      const auto t = walker.tangent_at(s[i]);
      base[0] += a.lateral[i] * -t[1];  // positive offset = left of travel
      base[1] += a.lateral[i] * t[0];
    }
    p[static_cast<size_t>(i)] = base;
  }
  return p;
}

AgentTrack make_track(int64_t id, AgentClass cls, const std::vector<std::array<double, 2>>& p,
                      int t_hst, int perceived_tail) {
  AgentTrack a;
  a.agent_id = id;
  a.cls = cls;
  a.anchor_x = p[static_cast<size_t>(t_hst)][0];
  a.anchor_y = p[static_cast<size_t>(t_hst)][1];
  for (int j = 0; j < t_hst; ++j) {
    AgentStep step;
    step.dx = p[j + 1][0] - p[j][0];
    step.dy = p[j + 1][1] - p[j][1];
    step.flag = 1;
    if (perceived_tail >= 0 && j < t_hst - perceived_tail) {
      step.dx = 0.0;
      step.dy = 0.0;
      step.flag = 0;
    }
    a.history.push_back(step);
  }
  for (size_t i = static_cast<size_t>(t_hst) + 1; i < p.size(); ++i) a.future.push_back(p[i]);
  return a;
}

double history_travel(const Actor& a, int t_hst, double dt) {
  double s = 0.0;
  for (int i = 0; i < t_hst; ++i) s += a.speeds[i] * dt;
  return s;
}

Behavior pick_behavior(int fixed, Rng& rng, const std::vector<Behavior>& allowed) {
  if (fixed >= 0) {
    const Behavior want = static_cast<Behavior>(fixed);
    if (std::find(allowed.begin(), allowed.end(), want) != allowed.end()) return want;
    return allowed.front();
  }
  return allowed[static_cast<size_t>(rng.randint(static_cast<int64_t>(allowed.size())))];
}

}  // namespace

std::vector<LanePolyline> make_map(MapKind kind, Rng& rng) { return plan_map(kind, rng).lanes; }

// ---------------------------------------------------------------------------
// rule labeler

namespace {

// heading at t = 0: most recent nonzero history displacement, else the first
// nonzero future step
std::optional<double> agent_heading(const AgentTrack& a) {
  for (auto it = a.history.rbegin(); it != a.history.rend(); ++it)
    if (it->dx != 0.0 || it->dy != 0.0) return std::atan2(it->dy, it->dx);
  double px = a.anchor_x, py = a.anchor_y;
  for (const auto& p : a.future) {
    if (p[0] != px || p[1] != py) return std::atan2(p[1] - py, p[0] - px);
    px = p[0];
    py = p[1];
  }
  return std::nullopt;
}

double dist_to_lane(const LanePolyline& lane, double x, double y) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 1; i < lane.points.size(); ++i)
    best = std::min(best, dist_point_segment(x, y, lane.points[i - 1][0], lane.points[i - 1][1],
                                             lane.points[i][0], lane.points[i][1]));
  return best;
}

}  // namespace

Maneuver label_maneuver(const Scenario& s, size_t agent, const ManeuverRules& r) {
  if (agent >= s.agents.size()) throw std::invalid_argument("label_maneuver: agent out of range");
  const AgentTrack& me = s.agents[agent];

  int perceived = 0;
  for (const AgentStep& st : me.history) perceived += st.flag ? 1 : 0;

  // future kinematics
  const size_t n_fut = me.future.size();
  std::vector<double> speed(n_fut);
  double px = me.anchor_x, py = me.anchor_y;
  for (size_t t = 0; t < n_fut; ++t) {
    speed[t] = std::hypot(me.future[t][0] - px, me.future[t][1] - py) / r.dt;
    px = me.future[t][0];
    py = me.future[t][1];
  }
  double mean_speed = 0.0;
  for (double v : speed) mean_speed += v;
  if (n_fut > 0) mean_speed /= static_cast<double>(n_fut);
  const double mean_accel =
      n_fut >= 2 ? (speed.back() - speed.front()) / (static_cast<double>(n_fut - 1) * r.dt) : 0.0;

  // max heading swing across the future, measured against the first step that
  // is fast enough to carry a heading
  double max_turn_deg = 0.0;
  {
    bool have_first = false;
    double h_first = 0.0;
    px = me.anchor_x;
    py = me.anchor_y;
    for (size_t t = 0; t < n_fut; ++t) {
      const double dx = me.future[t][0] - px, dy = me.future[t][1] - py;
      px = me.future[t][0];
      py = me.future[t][1];
      if (speed[t] <= r.heading_speed_min) continue;
      const double h = std::atan2(dy, dx);
      if (!have_first) {
        h_first = h;
        have_first = true;
      } else {
        max_turn_deg = std::max(max_turn_deg, std::abs(wrap_angle(h - h_first)) / kDeg);
      }
    }
  }

  // max offset of the future from the lane nearest the anchor
  double max_offset = 0.0;
  if (!s.map_lanes.empty() && n_fut > 0) {
    size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t li = 0; li < s.map_lanes.size(); ++li) {
      const double d = dist_to_lane(s.map_lanes[li], me.anchor_x, me.anchor_y);
      if (d < best) {
        best = d;
        nearest = li;
      }
    }
    for (const auto& p : me.future)
      max_offset = std::max(max_offset, dist_to_lane(s.map_lanes[nearest], p[0], p[1]));
  }

  // lead geometry at t = 0, in this agent's heading frame
  bool yield_cause = false, follow_ok = false;
  const std::optional<double> myh = agent_heading(me);
  if (myh) {
    const double fx = std::cos(*myh), fy = std::sin(*myh);
    for (size_t j = 0; j < s.agents.size(); ++j) {
      if (j == agent) continue;
      const AgentTrack& other = s.agents[j];
      const double rx = other.anchor_x - me.anchor_x;
      const double ry = other.anchor_y - me.anchor_y;
      const double fwd = rx * fx + ry * fy;
      const double lat = std::abs(fx * ry - fy * rx);
      if (fwd > 0.0 && fwd <= r.yield_range && lat <= r.yield_lateral) yield_cause = true;
      if (fwd > 0.0 && fwd <= r.follow_range && lat <= r.follow_lateral) {
        const std::optional<double> oh = agent_heading(other);
        if (oh && std::abs(wrap_angle(*oh - *myh)) <= r.follow_align_deg * kDeg) follow_ok = true;
      }
    }
  }

  if (n_fut > 0 && mean_speed < r.stop_speed && yield_cause) return Maneuver::kStop;
  if ((max_turn_deg > r.heading_change_deg || max_offset > r.lateral_offset) && yield_cause)
    return Maneuver::kNudge;
  if (mean_accel < r.decel_accel && yield_cause) return Maneuver::kDecelerate;
  if (follow_ok) return Maneuver::kFollow;
  if (perceived < r.min_frames) return Maneuver::kUnknown;
  return Maneuver::kIgnore;
}

std::vector<uint8_t> label_lanes(const Scenario& s, size_t agent, double radius) {
  if (agent >= s.agents.size()) throw std::invalid_argument("label_lanes: agent out of range");
  const AgentTrack& me = s.agents[agent];
  std::vector<uint8_t> row(static_cast<size_t>(s.graph.size()), 0);
  for (size_t v = 0; v < row.size(); ++v) {
    const LaneVector& vec = s.graph.vectors[v];
    for (const auto& p : me.future) {
      if (dist_point_segment(p[0], p[1], vec.start_x, vec.start_y, vec.end_x, vec.end_y) <
          radius) {
        row[v] = 1;
        break;
      }
    }
  }
  return row;
}

// ---------------------------------------------------------------------------
// scenario assembly

Scenario generate_scenario(uint64_t seed, const GenConfig& cfg) {
  if (cfg.t_hst < 2 || cfg.t_fut < 2) throw std::invalid_argument("generate_scenario: tiny horizon");
  Rng rng(seed);
  const MapKind kind = cfg.fixed_map >= 0 ? static_cast<MapKind>(cfg.fixed_map)
                                          : static_cast<MapKind>(rng.randint(kMapKinds));
  MapPlan plan = plan_map(kind, rng);

  const int n_frames = cfg.t_hst + cfg.t_fut;
  std::vector<Actor> actors;

  auto cruise_speed = [&](double lo, double hi) {
    return cfg.fixed_speed >= 0.0 ? cfg.fixed_speed : rng.uniform(lo, hi);
  };

  switch (kind) {
    case MapKind::kStraight:
    case MapKind::kLaneChange: {
      const std::vector<Behavior> allowed =
          kind == MapKind::kLaneChange
              ? std::vector<Behavior>{Behavior::kNudge}
              : std::vector<Behavior>{Behavior::kCruise, Behavior::kFollow, Behavior::kStopYield,
                                      Behavior::kDecelYield, Behavior::kNudge};
      const Behavior b = pick_behavior(cfg.fixed_behavior, rng, allowed);
      const int ego_lane = static_cast<int>(rng.randint(plan.n_parallel));

      Actor ego;
      ego.route = plan.main_routes[static_cast<size_t>(ego_lane)];
      Actor lead;
      lead.route = ego.route;
      bool has_lead = true;
      double gap = 0.0;

      if (b == Behavior::kCruise) {
        ego.speeds = const_profile(n_frames, cruise_speed(6.0, 14.0));
        has_lead = false;
      } else if (b == Behavior::kFollow) {
        const double v = cruise_speed(5.0, 10.0);
        ego.speeds = const_profile(n_frames, v);
        lead.speeds = const_profile(n_frames, v);
        gap = rng.uniform(16.0, 26.0);
      } else if (b == Behavior::kStopYield) {
        const double v1 = rng.uniform(1.2, 2.0);
        ego.speeds = stop_profile(cfg.t_hst, cfg.t_fut, cfg.dt, v1 + rng.uniform(3.0, 4.0), v1,
                                  cfg.max_accel);
        lead.speeds = const_profile(n_frames, 0.3);
        gap = rng.uniform(9.0, 13.0);
      } else if (b == Behavior::kDecelYield) {
        const double v0 = rng.uniform(7.0, 11.0);
        const double v_end = rng.uniform(2.5, 4.5);
        ego.speeds = decel_profile(cfg.t_hst, cfg.t_fut, cfg.dt, v0, v_end);
        lead.speeds = const_profile(n_frames, v_end);
        gap = rng.uniform(12.0, 14.0);
      } else {  // nudge around a stopped vehicle
        ego.speeds = const_profile(n_frames, rng.uniform(4.5, 6.5));
        const double side = ego_lane + 1 < plan.n_parallel ? 3.5 : -3.5;
        ego.lateral = nudge_lateral(n_frames + 1, cfg.t_hst, 2, 12, side);
        lead.speeds = const_profile(n_frames, 0.0);
        gap = rng.uniform(10.0, 14.0);
      }

      ego.s_t0 = history_travel(ego, cfg.t_hst, cfg.dt) + rng.uniform(2.0, 8.0);
      actors.push_back(ego);
      if (has_lead) {
        lead.s_t0 = ego.s_t0 + gap;
        actors.push_back(lead);
      }

      // unscripted extra on another lane
      if (plan.n_parallel > 1 && rng.uniform() < cfg.extra_agent_prob) {
        Actor extra;
        int other = static_cast<int>(rng.randint(plan.n_parallel - 1));
        if (other >= ego_lane) ++other;
        extra.route = plan.main_routes[static_cast<size_t>(other)];
        if (rng.uniform() < cfg.ghost_share) {
          extra.speeds = const_profile(n_frames, rng.uniform(6.0, 10.0));
          extra.perceived_tail = 1 + static_cast<int>(rng.randint(4));
        } else if (rng.uniform() < 0.25) {
          extra.cls = AgentClass::kBicycle;
          extra.speeds = const_profile(n_frames, rng.uniform(3.0, 6.0));
        } else {
          extra.speeds = const_profile(n_frames, rng.uniform(6.0, 12.0));
        }
        extra.s_t0 = history_travel(extra, cfg.t_hst, cfg.dt) + rng.uniform(5.0, 40.0);
        actors.push_back(extra);
      }
      break;
    }

    case MapKind::kCurve: {
      const Behavior b = pick_behavior(cfg.fixed_behavior, rng,
                                       {Behavior::kCruise, Behavior::kFollow});
      Actor ego;
      ego.route = plan.main_routes[0];
      if (b == Behavior::kFollow) {
        const double v = cruise_speed(5.0, 10.0);
        ego.speeds = const_profile(n_frames, v);
        ego.s_t0 = history_travel(ego, cfg.t_hst, cfg.dt) + rng.uniform(2.0, 6.0);
        Actor lead;
        lead.route = ego.route;
        lead.speeds = const_profile(n_frames, v);
        lead.s_t0 = ego.s_t0 + rng.uniform(16.0, 24.0);
        actors.push_back(ego);
        actors.push_back(lead);
      } else {
        ego.speeds = const_profile(n_frames, cruise_speed(6.0, 11.0));
        ego.s_t0 = history_travel(ego, cfg.t_hst, cfg.dt) + rng.uniform(2.0, 8.0);
        actors.push_back(ego);
        if (rng.uniform() < cfg.extra_agent_prob) {
          Actor extra;
          extra.route = ego.route;
          extra.speeds = const_profile(n_frames, rng.uniform(6.0, 10.0));
          extra.s_t0 = actors[0].s_t0 + rng.uniform(45.0, 60.0);
          if (rng.uniform() < cfg.ghost_share)
            extra.perceived_tail = 1 + static_cast<int>(rng.randint(4));
          actors.push_back(extra);
        }
      }
      break;
    }

    case MapKind::kTJunction: {
      const Behavior b = pick_behavior(
          cfg.fixed_behavior, rng,
          {Behavior::kFollow, Behavior::kStopYield, Behavior::kDecelYield, Behavior::kCruise});
      Actor ego;
      if (b == Behavior::kCruise) {
        // take the side approach through the corner
        ego.route = plan.side_route;
        ego.speeds = const_profile(n_frames, cruise_speed(5.0, 7.5));
        ego.s_t0 = history_travel(ego, cfg.t_hst, cfg.dt) + rng.uniform(2.0, 8.0);
        actors.push_back(ego);
        if (rng.uniform() < cfg.extra_agent_prob) {
          Actor extra;
          extra.route = plan.main_routes[0];
          extra.speeds = const_profile(n_frames, rng.uniform(6.0, 10.0));
          extra.s_t0 = history_travel(extra, cfg.t_hst, cfg.dt) + rng.uniform(5.0, 30.0);
          if (rng.uniform() < cfg.ghost_share)
            extra.perceived_tail = 1 + static_cast<int>(rng.randint(4));
          actors.push_back(extra);
        }
      } else {
        ego.route = plan.main_routes[0];
        Actor lead;
        lead.route = ego.route;
        double gap;
        if (b == Behavior::kFollow) {
          const double v = cruise_speed(5.0, 10.0);
          ego.speeds = const_profile(n_frames, v);
          lead.speeds = const_profile(n_frames, v);
          gap = rng.uniform(16.0, 26.0);
        } else if (b == Behavior::kStopYield) {
          const double v1 = rng.uniform(1.2, 2.0);
          ego.speeds = stop_profile(cfg.t_hst, cfg.t_fut, cfg.dt, v1 + rng.uniform(3.0, 4.0), v1,
                                    cfg.max_accel);
          lead.speeds = const_profile(n_frames, 0.3);
          gap = rng.uniform(9.0, 13.0);
        } else {
          const double v0 = rng.uniform(7.0, 11.0);
          const double v_end = rng.uniform(2.5, 4.5);
          ego.speeds = decel_profile(cfg.t_hst, cfg.t_fut, cfg.dt, v0, v_end);
          lead.speeds = const_profile(n_frames, v_end);
          gap = rng.uniform(12.0, 14.0);
        }
        ego.s_t0 = history_travel(ego, cfg.t_hst, cfg.dt) + rng.uniform(2.0, 8.0);
        lead.s_t0 = ego.s_t0 + gap;
        actors.push_back(ego);
        actors.push_back(lead);
      }
      break;
    }

    case MapKind::kCrossing: {
      const Behavior b =
          pick_behavior(cfg.fixed_behavior, rng,
                        {Behavior::kCruise, Behavior::kStopYield, Behavior::kDecelYield});
      const double lh = -plan.lanes[0].points.front()[0] - 5.0;  // recover the arm length

      Actor ego;
      const bool take_turn = b == Behavior::kCruise && !plan.turn_route.empty() &&
                             rng.uniform() < 0.5;
      ego.route = take_turn ? plan.turn_route : plan.main_routes[0];

      Actor crosser;
      crosser.route = plan.cross_route;
      if (rng.uniform() < 0.25) {
        crosser.cls = AgentClass::kPedestrian;
        crosser.speeds = const_profile(n_frames, rng.uniform(1.2, 2.0));
      } else {
        crosser.speeds = const_profile(n_frames, rng.uniform(5.0, 8.0));
      }

      if (b == Behavior::kCruise) {
        if (take_turn) {
          // slow through the tight corner, reaching it just after t = 0
          ego.speeds = const_profile(n_frames, rng.uniform(3.5, 4.5));
          ego.s_t0 = lh - rng.uniform(0.0, 6.0);
        } else {
          ego.speeds = const_profile(n_frames, cruise_speed(7.0, 12.0));
          ego.s_t0 = history_travel(ego, cfg.t_hst, cfg.dt) + rng.uniform(2.0, 10.0);
        }
        // crosser still far from the box at t = 0
        crosser.s_t0 = lh + 5.0 - rng.uniform(25.0, 40.0);
      } else {
        const double d = rng.uniform(2.0, 6.0);
        if (b == Behavior::kStopYield) {
          const double v1 = rng.uniform(1.2, 2.0);
          ego.speeds = stop_profile(cfg.t_hst, cfg.t_fut, cfg.dt, v1 + rng.uniform(3.0, 4.0), v1,
                                    cfg.max_accel);
        } else {
          ego.speeds = decel_profile(cfg.t_hst, cfg.t_fut, cfg.dt, rng.uniform(7.0, 9.0),
                                     rng.uniform(2.5, 4.0));
        }
        ego.s_t0 = lh - d;  // stopped just short of the junction box
        // crosser passes the middle of the box right around t = 0
        crosser.s_t0 = lh + 5.0 + rng.uniform(-1.5, 1.5);
      }
      actors.push_back(ego);
      actors.push_back(crosser);

      if (rng.uniform() < cfg.extra_agent_prob * 0.5) {
        Actor ghost;
        ghost.route = plan.main_routes[0];
        ghost.speeds = const_profile(n_frames, rng.uniform(6.0, 10.0));
        ghost.perceived_tail = 1 + static_cast<int>(rng.randint(4));
        ghost.s_t0 = actors[0].s_t0 - rng.uniform(35.0, 50.0);
        if (ghost.s_t0 > history_travel(ghost, cfg.t_hst, cfg.dt) + 2.0) actors.push_back(ghost);
      }
      break;
    }
  }

  // drop the whole scene into a random pose so nothing is axis-aligned
  const double th = rng.uniform(-kPi, kPi);
  const double tx = rng.uniform(-80.0, 80.0);
  const double ty = rng.uniform(-80.0, 80.0);
  const double c = std::cos(th), sn = std::sin(th);
  for (LanePolyline& lane : plan.lanes)
    for (auto& p : lane.points)
      p = {c * p[0] - sn * p[1] + tx, sn * p[0] + c * p[1] + ty};

  Scenario s;
  s.seed = seed;
  s.map_lanes = plan.lanes;
  s.segment_length = cfg.segment_length;
  s.overlap_threshold = cfg.overlap_threshold;
  s.graph = build_lane_graph(s.map_lanes, cfg.segment_length, cfg.overlap_threshold);

  for (size_t i = 0; i < actors.size(); ++i) {
    const PolylineWalker walker(route_points(s.map_lanes, actors[i].route));
    const auto positions = roll(walker, actors[i], cfg.t_hst, n_frames, cfg.dt);
    s.agents.push_back(make_track(static_cast<int64_t>(i), actors[i].cls, positions, cfg.t_hst,
                                  actors[i].perceived_tail));
  }

  ManeuverRules rules = cfg.rules;
  rules.dt = cfg.dt;
  for (size_t i = 0; i < s.agents.size(); ++i) {
    s.maneuver_labels.push_back(label_maneuver(s, i, rules));
    s.lane_labels.push_back(label_lanes(s, i, cfg.lane_hit_radius));
  }
  return s;
}

std::vector<Scenario> generate_batch(uint64_t seed, int count, const GenConfig& cfg) {
  Rng master(seed);
  std::vector<Scenario> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(generate_scenario(master.bits(), cfg));
  return out;
}

}  // namespace lanecast
