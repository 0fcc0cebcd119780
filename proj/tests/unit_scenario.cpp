#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "lanecast/generator.hpp"
#include "lanecast/rng.hpp"
#include "lanecast/scenario.hpp"
#include "lanecast/scene.hpp"
#include "support/maneuver_oracle.hpp"

using namespace lanecast;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp_path(const char* name) { return std::string("/tmp/lanecast_test_") + name; }

// hand-built track: positions indexed 0..t_hst+t_fut with the anchor at t_hst
AgentTrack track_from_positions(int64_t id, const std::vector<std::array<double, 2>>& p, int t_hst,
                                int mask_before = -1) {
  AgentTrack a;
  a.agent_id = id;
  a.anchor_x = p[t_hst][0];
  a.anchor_y = p[t_hst][1];
  for (int j = 0; j < t_hst; ++j) {
    AgentStep st;
    st.dx = p[j + 1][0] - p[j][0];
    st.dy = p[j + 1][1] - p[j][1];
    st.flag = 1;
    if (mask_before >= 0 && j < mask_before) {
      st.dx = st.dy = 0.0;
      st.flag = 0;
    }
    a.history.push_back(st);
  }
  for (size_t i = t_hst + 1; i < p.size(); ++i) a.future.push_back(p[i]);
  return a;
}

// straight single-lane scenario shell for the hand-built labeler cases
Scenario shell() {
  Scenario s;
  LanePolyline lane;
  lane.lane_id = 1;
  for (int i = 0; i <= 10; ++i) lane.points.push_back({10.0 * i, 0.0});
  s.map_lanes = {lane};
  s.graph = build_lane_graph(s.map_lanes, 10.0);
  return s;
}

// constant-velocity position chain
std::vector<std::array<double, 2>> const_positions(double x0, double y0, double vx, double vy,
                                                   int count, double dt = 0.1) {
  std::vector<std::array<double, 2>> p;
  for (int i = 0; i < count; ++i) p.push_back({x0 + vx * dt * i, y0 + vy * dt * i});
  return p;
}

}  // namespace

TEST_CASE("maneuver letters round trip") {
  for (Maneuver m : {Maneuver::kStop, Maneuver::kNudge, Maneuver::kDecelerate, Maneuver::kFollow,
                     Maneuver::kIgnore, Maneuver::kUnknown})
    CHECK(maneuver_from_letter(maneuver_letter(m)) == m);
  CHECK_THROWS_AS(maneuver_from_letter('X'), std::invalid_argument);
}

// --------------------------------------------------------------------------
// labeler: hand-built cases with known answers

TEST_CASE("labeler hand cases") {
  const int t_hst = 5, t_fut = 30;
  ManeuverRules rules;

  auto check_both = [&](const Scenario& s, size_t idx, Maneuver want) {
    CHECK(label_maneuver(s, idx, rules) == want);
    CHECK(oracle::classify(s, idx, rules) == want);
  };

  SUBCASE("stopped behind a close lead is S") {
    Scenario s = shell();
    std::vector<std::array<double, 2>> p;
    for (int i = 0; i <= t_hst; ++i) p.push_back({46.0 + 0.8 * i, 0.0});  // approach at 8 m/s
    for (int i = 1; i <= t_fut; ++i) p.push_back({50.0 + 0.001 * i, 0.0});  // standstill
    s.agents.push_back(track_from_positions(0, p, t_hst));
    auto lead = const_positions(60.0, 0.0, 0.0, 0.0, t_hst + t_fut + 1);
    s.agents.push_back(track_from_positions(1, lead, t_hst));
    check_both(s, 0, Maneuver::kStop);
  }

  SUBCASE("swerve past a close lead is N, via the lateral-offset rule") {
    Scenario s = shell();
    std::vector<std::array<double, 2>> p;
    for (int i = 0; i <= t_hst; ++i) p.push_back({44.0 + 0.5 * i, 0.0});
    const double x0 = 44.0 + 0.5 * t_hst;
    for (int i = 1; i <= t_fut; ++i) {
      const double u = static_cast<double>(i) / t_fut;
      p.push_back({x0 + 0.5 * i, 3.0 * u * u * (3.0 - 2.0 * u)});
    }
    s.agents.push_back(track_from_positions(0, p, t_hst));
    auto lead = const_positions(58.0, 0.0, 0.0, 0.0, t_hst + t_fut + 1);
    s.agents.push_back(track_from_positions(1, lead, t_hst));
    check_both(s, 0, Maneuver::kNudge);
  }

  SUBCASE("heading wiggle with small offset is still N") {
    Scenario s = shell();
    std::vector<std::array<double, 2>> p;
    for (int i = 0; i <= t_hst; ++i) p.push_back({44.0 + 0.5 * i, 0.0});
    const double x0 = 44.0 + 0.5 * t_hst;
    for (int i = 1; i <= t_fut; ++i)
      p.push_back({x0 + 0.5 * i, 1.5 * std::sin(2.0 * 3.14159265358979 * i / 15.0)});
    s.agents.push_back(track_from_positions(0, p, t_hst));
    auto lead = const_positions(58.0, 0.0, 0.0, 0.0, t_hst + t_fut + 1);
    s.agents.push_back(track_from_positions(1, lead, t_hst));
    // offset stays below 1.75 but the heading swings far beyond 15 degrees
    check_both(s, 0, Maneuver::kNudge);
  }

  SUBCASE("braking behind a close lead is D") {
    Scenario s = shell();
    std::vector<std::array<double, 2>> p;
    for (int i = 0; i <= t_hst; ++i) p.push_back({46.0 + 0.8 * i, 0.0});
    double x = 46.0 + 0.8 * t_hst, v = 8.0;
    for (int i = 1; i <= t_fut; ++i) {
      v = 8.0 + (3.0 - 8.0) * static_cast<double>(i) / t_fut;
      x += v * 0.1;
      p.push_back({x, 0.0});
    }
    s.agents.push_back(track_from_positions(0, p, t_hst));
    auto lead = const_positions(62.0, 0.0, 3.0, 0.0, t_hst + t_fut + 1);
    s.agents.push_back(track_from_positions(1, lead, t_hst));
    check_both(s, 0, Maneuver::kDecelerate);
  }

  SUBCASE("matched speed behind a mid-range lead is F") {
    Scenario s = shell();
    auto ego = const_positions(30.0, 0.0, 5.0, 0.0, t_hst + t_fut + 1);
    auto lead = const_positions(50.0 + 0.5 * t_hst, 0.0, 5.0, 0.0, t_hst + t_fut + 1);
    s.agents.push_back(track_from_positions(0, ego, t_hst));
    s.agents.push_back(track_from_positions(1, lead, t_hst));
    check_both(s, 0, Maneuver::kFollow);
  }

  SUBCASE("lone cruiser is I") {
    Scenario s = shell();
    s.agents.push_back(track_from_positions(0, const_positions(30, 0, 5, 0, t_hst + t_fut + 1),
                                            t_hst));
    check_both(s, 0, Maneuver::kIgnore);
  }

  SUBCASE("barely perceived cruiser is U") {
    Scenario s = shell();
    s.agents.push_back(track_from_positions(0, const_positions(30, 0, 5, 0, t_hst + t_fut + 1),
                                            t_hst));
    s.agents.push_back(track_from_positions(
        1, const_positions(30.0, 3.5, 5.0, 0.0, t_hst + t_fut + 1), t_hst, /*mask_before=*/2));
    check_both(s, 1, Maneuver::kUnknown);
    // masking must not leak into the neighbor's label
    check_both(s, 0, Maneuver::kIgnore);
  }

  SUBCASE("stop outranks nudge outranks decel") {
    // an agent that stops while laterally offset: S wins over N
    Scenario s = shell();
    std::vector<std::array<double, 2>> p;
    for (int i = 0; i <= t_hst; ++i)
      p.push_back({46.0 + 0.8 * i, std::min(2.0, 0.7 * i)});  // level by t = 0
    const auto last = p.back();
    for (int i = 1; i <= t_fut; ++i) p.push_back({last[0] + 0.001 * i, last[1]});
    s.agents.push_back(track_from_positions(0, p, t_hst));
    auto lead = const_positions(last[0] + 10.0, last[1], 0.0, 0.0, t_hst + t_fut + 1);
    s.agents.push_back(track_from_positions(1, lead, t_hst));
    check_both(s, 0, Maneuver::kStop);
  }
}

// --------------------------------------------------------------------------
// generated corpus

TEST_CASE("stored labels match the labeler and the brute-force oracle") {
  GenConfig cfg;
  auto batch = generate_batch(7, 400, cfg);
  std::map<Maneuver, int> seen;
  ManeuverRules rules = cfg.rules;
  rules.dt = cfg.dt;
  for (const Scenario& s : batch) {
    REQUIRE(s.maneuver_labels.size() == s.agents.size());
    REQUIRE(s.lane_labels.size() == s.agents.size());
    for (size_t i = 0; i < s.agents.size(); ++i) {
      const Maneuver want = oracle::classify(s, i, rules);
      CHECK(s.maneuver_labels[i] == want);
      CHECK(label_maneuver(s, i, rules) == want);
      ++seen[s.maneuver_labels[i]];
    }
  }
  // the corpus exercises every class
  for (Maneuver m : {Maneuver::kStop, Maneuver::kNudge, Maneuver::kDecelerate, Maneuver::kFollow,
                     Maneuver::kIgnore, Maneuver::kUnknown})
    CHECK(seen[m] > 0);
}

TEST_CASE("pinned behaviors land on their intended labels") {
  GenConfig cfg;
  cfg.fixed_map = static_cast<int>(MapKind::kStraight);
  const std::map<Behavior, Maneuver> want = {
      {Behavior::kFollow, Maneuver::kFollow},
      {Behavior::kStopYield, Maneuver::kStop},
      {Behavior::kDecelYield, Maneuver::kDecelerate},
      {Behavior::kNudge, Maneuver::kNudge},
  };
  for (const auto& [b, m] : want) {
    cfg.fixed_behavior = static_cast<int>(b);
    for (uint64_t seed = 100; seed < 120; ++seed) {
      Scenario s = generate_scenario(seed, cfg);
      CHECK(s.maneuver_labels[0] == m);
    }
  }
}

TEST_CASE("scenario structure basics") {
  GenConfig cfg;
  auto batch = generate_batch(11, 60, cfg);
  for (const Scenario& s : batch) {
    REQUIRE(!s.agents.empty());
    CHECK(s.agents.size() <= 3);
    CHECK(s.graph.size() > 0);
    for (const AgentTrack& a : s.agents) {
      CHECK(a.history.size() == static_cast<size_t>(cfg.t_hst));
      CHECK(a.future.size() == static_cast<size_t>(cfg.t_fut));
      for (const AgentStep& st : a.history)
        if (!st.flag) {
          CHECK(st.dx == 0.0);
          CHECK(st.dy == 0.0);
        }
      // speed and per-frame acceleration stay inside the configured envelope
      double prev_v = -1.0;
      double px = a.anchor_x, py = a.anchor_y;
      for (const auto& p : a.future) {
        const double v = std::hypot(p[0] - px, p[1] - py) / cfg.dt;
        CHECK(v <= 20.0 + 1e-9);
        if (prev_v >= 0.0) CHECK(std::abs(v - prev_v) / cfg.dt <= cfg.max_accel + 0.6);
        prev_v = v;
        px = p[0];
        py = p[1];
      }
    }
    // every agent's lane row marks at least one cell (everyone has a future)
    for (const auto& row : s.lane_labels) {
      int hits = 0;
      for (uint8_t c : row) hits += c;
      CHECK(hits > 0);
    }
  }
}

TEST_CASE("map kinds have their structural signatures") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto t_lanes = make_map(MapKind::kTJunction, rng);
    LaneGraph tg = build_lane_graph(t_lanes, 10.0);
    size_t merges = 0;
    for (const auto& m : tg.merge) merges += m.size();
    CHECK(merges > 0);  // two approaches funnel into the box

    auto x_lanes = make_map(MapKind::kCrossing, rng);
    LaneGraph xg = build_lane_graph(x_lanes, 10.0);
    size_t overlaps = 0;
    for (const auto& o : xg.overlap) overlaps += o.size();
    CHECK(overlaps > 0);  // the two junction-box lanes cross

    auto s_lanes = make_map(MapKind::kStraight, rng);
    LaneGraph sg = build_lane_graph(s_lanes, 10.0);
    bool any_left = false;
    for (int32_t v : sg.left) any_left |= v >= 0;
    CHECK(any_left);

    auto c_lanes = make_map(MapKind::kCurve, rng);
    bool has_turn = false;
    for (const auto& l : c_lanes) has_turn |= l.turn != TurnKind::kNone;
    CHECK(has_turn);
  }
}

// --------------------------------------------------------------------------
// noise

TEST_CASE("loss noise zeroes frames at the requested rate") {
  GenConfig cfg;
  Scenario s = generate_scenario(3, cfg);
  NoiseSpec spec;
  spec.mode = NoiseSpec::Mode::kLoss;
  spec.probability = 0.3;

  int dropped = 0, total = 0, was_perceived_dropped = 0;
  for (int seed = 0; seed < 50; ++seed) {
    Scenario noisy = inject_noise(s, spec, static_cast<uint64_t>(seed));
    REQUIRE(noisy.agents.size() == s.agents.size());
    for (size_t a = 0; a < s.agents.size(); ++a) {
      for (size_t t = 0; t < s.agents[a].history.size(); ++t) {
        const AgentStep& orig = s.agents[a].history[t];
        const AgentStep& got = noisy.agents[a].history[t];
        ++total;
        if (!got.flag && orig.flag) {
          ++was_perceived_dropped;
          CHECK(got.dx == 0.0);
          CHECK(got.dy == 0.0);
        } else {
          CHECK(got.dx == orig.dx);
          CHECK(got.dy == orig.dy);
          CHECK(got.flag == orig.flag);
        }
        if (!got.flag) ++dropped;
      }
      // futures and labels untouched
      CHECK(noisy.agents[a].future == s.agents[a].future);
    }
    CHECK(noisy.maneuver_labels == s.maneuver_labels);
  }
  const double rate = static_cast<double>(was_perceived_dropped) / total;
  CHECK(rate > 0.22);
  CHECK(rate < 0.38);
}

TEST_CASE("gaussian noise scales with the frame speed") {
  // agent moving at a constant 10 m/s: v/100 = 0.1 m noise per component
  Scenario s = shell();
  s.agents.push_back(
      track_from_positions(0, const_positions(5.0, 0.0, 10.0, 0.0, 61), 40));
  NoiseSpec spec;
  spec.mode = NoiseSpec::Mode::kGaussian;
  spec.probability = 1.0;

  double sum = 0.0, sum2 = 0.0;
  int n = 0;
  for (int seed = 0; seed < 120; ++seed) {
    Scenario noisy = inject_noise(s, spec, static_cast<uint64_t>(seed));
    for (size_t t = 0; t < noisy.agents[0].history.size(); ++t) {
      const double ex = noisy.agents[0].history[t].dx - s.agents[0].history[t].dx;
      const double ey = noisy.agents[0].history[t].dy - s.agents[0].history[t].dy;
      CHECK(noisy.agents[0].history[t].flag == 1);  // gaussian mode keeps the flag
      sum += ex + ey;
      sum2 += ex * ex + ey * ey;
      n += 2;
    }
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean) < 0.005);
  CHECK(stddev == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("noise injection is deterministic in the seed") {
  GenConfig cfg;
  Scenario s = generate_scenario(17, cfg);
  NoiseSpec spec;
  spec.mode = NoiseSpec::Mode::kGaussian;
  spec.probability = 0.5;
  Scenario a = inject_noise(s, spec, 42);
  Scenario b = inject_noise(s, spec, 42);
  Scenario c = inject_noise(s, spec, 43);
  bool same_ab = true, same_ac = true;
  for (size_t i = 0; i < s.agents.size(); ++i)
    for (size_t t = 0; t < s.agents[i].history.size(); ++t) {
      same_ab &= a.agents[i].history[t].dx == b.agents[i].history[t].dx;
      same_ac &= a.agents[i].history[t].dx == c.agents[i].history[t].dx;
    }
  CHECK(same_ab);
  CHECK(!same_ac);
  CHECK_THROWS_AS(inject_noise(s, NoiseSpec{NoiseSpec::Mode::kLoss, 1.5}, 0),
                  std::invalid_argument);
}

// --------------------------------------------------------------------------
// file round trips

TEST_CASE("scenario files reload exactly and regenerate byte-identically") {
  GenConfig cfg;
  auto batch = generate_batch(23, 6, cfg);
  const std::string path = tmp_path("scenarios.jsonl");
  save_scenarios(path, batch);

  auto loaded = load_scenarios(path);
  REQUIRE(loaded.size() == batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    CHECK(loaded[i].seed == batch[i].seed);
    REQUIRE(loaded[i].agents.size() == batch[i].agents.size());
    for (size_t a = 0; a < batch[i].agents.size(); ++a) {
      CHECK(loaded[i].agents[a].anchor_x == batch[i].agents[a].anchor_x);  // bit-exact
      CHECK(loaded[i].agents[a].cls == batch[i].agents[a].cls);
      REQUIRE(loaded[i].agents[a].history.size() == batch[i].agents[a].history.size());
      for (size_t t = 0; t < batch[i].agents[a].history.size(); ++t) {
        CHECK(loaded[i].agents[a].history[t].dx == batch[i].agents[a].history[t].dx);
        CHECK(loaded[i].agents[a].history[t].flag == batch[i].agents[a].history[t].flag);
      }
      CHECK(loaded[i].agents[a].future == batch[i].agents[a].future);
    }
    CHECK(loaded[i].maneuver_labels == batch[i].maneuver_labels);
    CHECK(loaded[i].lane_labels == batch[i].lane_labels);
    CHECK(loaded[i].graph.size() == batch[i].graph.size());
  }

  // save(load(x)) is byte-identical to save(x)
  const std::string path2 = tmp_path("scenarios2.jsonl");
  save_scenarios(path2, loaded);
  CHECK(slurp(path) == slurp(path2));

  // regenerating from the same seed reproduces the same bytes
  const std::string path3 = tmp_path("scenarios3.jsonl");
  save_scenarios(path3, generate_batch(23, 6, cfg));
  CHECK(slurp(path) == slurp(path3));

  std::remove(path.c_str());
  std::remove(path2.c_str());
  std::remove(path3.c_str());
}

TEST_CASE("map fixture round trip") {
  Rng rng(31);
  auto lanes = make_map(MapKind::kTJunction, rng);
  const std::string path = tmp_path("map.json");
  save_map_fixture(path, lanes, 10.0, 2.5);

  std::vector<LanePolyline> loaded;
  double seg = 0.0, ovl = 0.0;
  load_map_fixture(path, loaded, seg, ovl);
  CHECK(seg == 10.0);
  CHECK(ovl == 2.5);
  REQUIRE(loaded.size() == lanes.size());
  for (size_t i = 0; i < lanes.size(); ++i) {
    CHECK(loaded[i].lane_id == lanes[i].lane_id);
    CHECK(loaded[i].points == lanes[i].points);
    CHECK(loaded[i].turn == lanes[i].turn);
    CHECK(loaded[i].successor_ids == lanes[i].successor_ids);
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_map_fixture("/nonexistent/nope.json", loaded, seg, ovl),
                  std::runtime_error);
}

TEST_CASE("streaming reader is lazy and reports the failing line") {
  GenConfig cfg;
  auto batch = generate_batch(29, 3, cfg);
  const std::string path = tmp_path("stream.jsonl");
  save_scenarios(path, batch);
  {
    std::ofstream app(path, std::ios::app | std::ios::binary);
    app << "{ this is not json\n";
  }

  {
    // stopping early never touches the malformed record at line 5
    ScenarioReader reader(path);
    Scenario s;
    REQUIRE(reader.next(s));
    REQUIRE(reader.next(s));
    CHECK(reader.line() == 3);
  }
  {
    ScenarioReader reader(path);
    Scenario s;
    for (int i = 0; i < 3; ++i) REQUIRE(reader.next(s));
    try {
      reader.next(s);
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    }
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(ScenarioReader("/nonexistent/nope.jsonl"), std::runtime_error);
}
