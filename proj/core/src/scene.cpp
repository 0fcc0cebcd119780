#include "lanecast/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "lanecast/scenario.hpp"

namespace lanecast {

double dist_point_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0);
  const double cx = ax + t * vx, cy = ay + t * vy;
  return std::hypot(px - cx, py - cy);
}

PolylineWalker::PolylineWalker(const std::vector<std::array<double, 2>>& points) : pts_(points) {
  if (pts_.size() < 2) throw std::invalid_argument("polyline: need at least 2 points");
  cum_.resize(pts_.size());
  cum_[0] = 0.0;
  for (size_t i = 1; i < pts_.size(); ++i)
    cum_[i] = cum_[i - 1] + std::hypot(pts_[i][0] - pts_[i - 1][0], pts_[i][1] - pts_[i - 1][1]);
}

std::array<double, 2> PolylineWalker::point_at(double s) const {
  s = std::clamp(s, 0.0, cum_.back());
  auto it = std::lower_bound(cum_.begin(), cum_.end(), s);
  size_t i = static_cast<size_t>(std::distance(cum_.begin(), it));
  if (i == 0) i = 1;
  const double seg = cum_[i] - cum_[i - 1];
  const double t = seg > 0.0 ? (s - cum_[i - 1]) / seg : 0.0;
  return {pts_[i - 1][0] + t * (pts_[i][0] - pts_[i - 1][0]),
          pts_[i - 1][1] + t * (pts_[i][1] - pts_[i - 1][1])};
}

std::array<double, 2> PolylineWalker::tangent_at(double s) const {
  s = std::clamp(s, 0.0, cum_.back());
  auto it = std::lower_bound(cum_.begin(), cum_.end(), s);
  size_t i = static_cast<size_t>(std::distance(cum_.begin(), it));
  if (i == 0) i = 1;
  if (i >= pts_.size()) i = pts_.size() - 1;
  const double dx = pts_[i][0] - pts_[i - 1][0];
  const double dy = pts_[i][1] - pts_[i - 1][1];
  const double n = std::hypot(dx, dy);
  return {dx / n, dy / n};
}

namespace {

void sort_unique(std::vector<int32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// exact-(k)-hop = one extra hop from exact-(k-1)-hop
std::vector<std::vector<int32_t>> compose_hop(const std::vector<std::vector<int32_t>>& prev,
                                              const std::vector<std::vector<int32_t>>& one) {
  std::vector<std::vector<int32_t>> out(prev.size());
  for (size_t v = 0; v < prev.size(); ++v) {
    std::vector<int32_t>& dst = out[v];
    for (int32_t w : prev[v])
      for (int32_t u : one[static_cast<size_t>(w)]) dst.push_back(u);
    sort_unique(dst);
  }
  return out;
}

}  // namespace

LaneGraph build_lane_graph(const std::vector<LanePolyline>& lanes, double segment_length,
                           double overlap_threshold) {
  if (segment_length <= 0.0)
    throw std::invalid_argument("lane graph: segment_length must be positive");

  LaneGraph g;
  g.segment_length = segment_length;
  g.overlap_threshold = overlap_threshold;

  // ---- split polylines into vectors ----
  std::map<int64_t, std::pair<int32_t, int32_t>> lane_range;  // lane id -> [first, last] vector
  std::map<int64_t, size_t> lane_index;
  for (size_t li = 0; li < lanes.size(); ++li) {
    const LanePolyline& lane = lanes[li];
    if (lane_index.count(lane.lane_id))
      throw std::invalid_argument("lane graph: duplicate lane id " + std::to_string(lane.lane_id));
    lane_index[lane.lane_id] = li;
    if (lane.points.size() < 2)
      throw std::invalid_argument("lane graph: lane " + std::to_string(lane.lane_id) +
                                  " has fewer than 2 points");
    for (size_t i = 1; i < lane.points.size(); ++i) {
      if (lane.points[i] == lane.points[i - 1])
        throw std::invalid_argument("lane graph: lane " + std::to_string(lane.lane_id) +
                                    " repeats point " + std::to_string(i - 1));
    }
    PolylineWalker walker(lane.points);
    const double total = walker.total_length();
    // The cushion keeps the count stable when a rigid motion of the map
    // perturbs a length that sits exactly on the rounding boundary (a lane
    // of 1.5 segments must split the same way at any orientation).
    const int32_t n_seg = std::max<int32_t>(
        1, static_cast<int32_t>(std::llround(total / segment_length + 1e-9)));
    const int32_t first = static_cast<int32_t>(g.vectors.size());
    for (int32_t s = 0; s < n_seg; ++s) {
      const double s0 = total * static_cast<double>(s) / n_seg;
      const double s1 = total * static_cast<double>(s + 1) / n_seg;
      const auto p0 = walker.point_at(s0);
      const auto p1 = walker.point_at(s1);
      LaneVector v;
      v.lane_id = lane.lane_id;
      v.start_x = p0[0];
      v.start_y = p0[1];
      v.end_x = p1[0];
      v.end_y = p1[1];
      v.dx = p1[0] - p0[0];
      v.dy = p1[1] - p0[1];
      v.heading = std::atan2(v.dy, v.dx);
      v.turn = lane.turn;
      v.traffic_control = lane.traffic_control;
      v.intersection = lane.intersection;
      v.mid_x = 0.5 * (p0[0] + p1[0]);
      v.mid_y = 0.5 * (p0[1] + p1[1]);
      g.vectors.push_back(v);
    }
    lane_range[lane.lane_id] = {first, static_cast<int32_t>(g.vectors.size()) - 1};
  }

  const size_t nv = g.vectors.size();
  for (auto& rel : g.pred) rel.assign(nv, {});
  for (auto& rel : g.succ) rel.assign(nv, {});
  g.right.assign(nv, -1);
  g.left.assign(nv, -1);
  g.merge.assign(nv, {});
  g.overlap.assign(nv, {});

  // ---- 1-hop pred/succ: within lanes, then across declared successors ----
  for (const auto& [lane_id, range] : lane_range) {
    for (int32_t v = range.first + 1; v <= range.second; ++v) {
      g.pred[0][static_cast<size_t>(v)].push_back(v - 1);
      g.succ[0][static_cast<size_t>(v - 1)].push_back(v);
    }
  }
  for (const LanePolyline& lane : lanes) {
    const auto [first, last] = lane_range.at(lane.lane_id);
    for (int64_t succ_lane : lane.successor_ids) {
      auto it = lane_range.find(succ_lane);
      if (it == lane_range.end())
        throw std::invalid_argument("lane graph: lane " + std::to_string(lane.lane_id) +
                                    " declares unknown successor " + std::to_string(succ_lane));
      const int32_t head = it->second.first;
      g.pred[0][static_cast<size_t>(head)].push_back(last);
      g.succ[0][static_cast<size_t>(last)].push_back(head);
    }
  }
  for (size_t v = 0; v < nv; ++v) {
    sort_unique(g.pred[0][v]);
    sort_unique(g.succ[0][v]);
  }

  // ---- dilated hops ----
  for (int k = 1; k < kMaxHops; ++k) {
    g.pred[static_cast<size_t>(k)] = compose_hop(g.pred[static_cast<size_t>(k - 1)], g.pred[0]);
    g.succ[static_cast<size_t>(k)] = compose_hop(g.succ[static_cast<size_t>(k - 1)], g.succ[0]);
  }

  // ---- left/right: nearest vector of the declared neighbor lane ----
  auto nearest_in_lane = [&](const LaneVector& v, int64_t other_lane) -> int32_t {
    auto it = lane_range.find(other_lane);
    if (it == lane_range.end()) return -1;
    int32_t best = -1;
    double best_d = 0.0;
    for (int32_t u = it->second.first; u <= it->second.second; ++u) {
      const LaneVector& o = g.vectors[static_cast<size_t>(u)];
      const double d = std::hypot(o.mid_x - v.mid_x, o.mid_y - v.mid_y);
      if (best < 0 || d < best_d) {
        best = u;
        best_d = d;
      }
    }
    return best;
  };
  for (const LanePolyline& lane : lanes) {
    if (lane.left_id >= 0 && !lane_range.count(lane.left_id))
      throw std::invalid_argument("lane graph: lane " + std::to_string(lane.lane_id) +
                                  " declares unknown left neighbor " + std::to_string(lane.left_id));
    if (lane.right_id >= 0 && !lane_range.count(lane.right_id))
      throw std::invalid_argument("lane graph: lane " + std::to_string(lane.lane_id) +
                                  " declares unknown right neighbor " +
                                  std::to_string(lane.right_id));
    const auto [first, last] = lane_range.at(lane.lane_id);
    for (int32_t v = first; v <= last; ++v) {
      const LaneVector& vec = g.vectors[static_cast<size_t>(v)];
      if (lane.left_id >= 0) g.left[static_cast<size_t>(v)] = nearest_in_lane(vec, lane.left_id);
      if (lane.right_id >= 0) g.right[static_cast<size_t>(v)] = nearest_in_lane(vec, lane.right_id);
    }
  }

  // ---- merge: siblings of a shared predecessor-fan or successor-fan ----
  for (size_t v = 0; v < nv; ++v) {
    for (const auto& fan : {g.pred[0][v], g.succ[0][v]}) {
      if (fan.size() < 2) continue;
      for (size_t i = 0; i < fan.size(); ++i)
        for (size_t j = i + 1; j < fan.size(); ++j) {
          g.merge[static_cast<size_t>(fan[i])].push_back(fan[j]);
          g.merge[static_cast<size_t>(fan[j])].push_back(fan[i]);
        }
    }
  }
  for (auto& nbrs : g.merge) sort_unique(nbrs);

  // ---- overlap: proximity pairs except direct pred/succ, then merge union ----
  for (size_t v = 0; v < nv; ++v) {
    const LaneVector& a = g.vectors[v];
    for (size_t u = v + 1; u < nv; ++u) {
      const LaneVector& b = g.vectors[u];
      const double d = std::hypot(a.mid_x - b.mid_x, a.mid_y - b.mid_y);
      if (d >= overlap_threshold) continue;
      const auto& p = g.pred[0][v];
      const auto& s = g.succ[0][v];
      const int32_t ui = static_cast<int32_t>(u);
      if (std::binary_search(p.begin(), p.end(), ui) || std::binary_search(s.begin(), s.end(), ui))
        continue;  // direct neighbors along the lane direction do not overlap
      g.overlap[v].push_back(ui);
      g.overlap[u].push_back(static_cast<int32_t>(v));
    }
  }
  for (size_t v = 0; v < nv; ++v) {
    for (int32_t u : g.merge[v]) g.overlap[v].push_back(u);
    sort_unique(g.overlap[v]);
  }

  return g;
}

std::vector<std::pair<int32_t, int32_t>> dilated_adjacency(const LaneGraph& graph, int k,
                                                           bool predecessors) {
  if (k < 1 || k > kMaxHops)
    throw std::invalid_argument("dilated_adjacency: hop count " + std::to_string(k) +
                                " outside [1, " + std::to_string(kMaxHops) + "]");
  const auto& rel = predecessors ? graph.pred[static_cast<size_t>(k - 1)]
                                 : graph.succ[static_cast<size_t>(k - 1)];
  std::vector<std::pair<int32_t, int32_t>> pairs;
  for (size_t v = 0; v < rel.size(); ++v)
    for (int32_t u : rel[v]) pairs.emplace_back(static_cast<int32_t>(v), u);
  return pairs;
}

namespace {

struct Frame {
  double ox, oy;       // origin (ego anchor)
  double c, s;         // cos/sin of -heading
  std::array<double, 2> point(double x, double y) const {
    const double tx = x - ox, ty = y - oy;
    return {c * tx - s * ty, s * tx + c * ty};
  }
  std::array<double, 2> direction(double x, double y) const {
    return {c * x - s * y, s * x + c * y};
  }
};

}  // namespace

Scenario to_local_frame(const Scenario& scenario, bool* heading_undefined) {
  if (scenario.agents.empty())
    throw std::invalid_argument("to_local_frame: scenario has no agents");
  const AgentTrack& ego = scenario.agents[0];

  double heading = 0.0;
  bool found = false;
  for (auto it = ego.history.rbegin(); it != ego.history.rend(); ++it) {
    if (it->dx != 0.0 || it->dy != 0.0) {
      heading = std::atan2(it->dy, it->dx);
      found = true;
      break;
    }
  }
  if (heading_undefined) *heading_undefined = !found;

  Frame f;
  f.ox = ego.anchor_x;
  f.oy = ego.anchor_y;
  f.c = std::cos(-heading);
  f.s = std::sin(-heading);

  Scenario out = scenario;
  for (AgentTrack& a : out.agents) {
    const auto anchor = f.point(a.anchor_x, a.anchor_y);
    a.anchor_x = anchor[0];
    a.anchor_y = anchor[1];
    for (AgentStep& step : a.history) {
      const auto d = f.direction(step.dx, step.dy);
      step.dx = d[0];
      step.dy = d[1];
    }
    for (auto& p : a.future) p = f.point(p[0], p[1]);
  }
  for (LanePolyline& lane : out.map_lanes)
    for (auto& p : lane.points) p = f.point(p[0], p[1]);
  for (LaneVector& v : out.graph.vectors) {
    const auto mid = f.point(v.mid_x, v.mid_y);
    v.mid_x = mid[0];
    v.mid_y = mid[1];
    const auto st = f.point(v.start_x, v.start_y);
    v.start_x = st[0];
    v.start_y = st[1];
    const auto en = f.point(v.end_x, v.end_y);
    v.end_x = en[0];
    v.end_y = en[1];
    const auto d = f.direction(v.dx, v.dy);
    v.dx = d[0];
    v.dy = d[1];
    double h = v.heading - heading;
    while (h > std::numbers::pi) h -= 2.0 * std::numbers::pi;
    while (h < -std::numbers::pi) h += 2.0 * std::numbers::pi;
    v.heading = h;
  }
  return out;
}

}  // namespace lanecast
