#include "lanecast/train.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lanecast/ops.hpp"

namespace lanecast {

uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 14695981039346656037ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for hashing: " + path);
  uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (f.read(buf, sizeof buf) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

const char* kKnownKeys[] = {
    "variant",     "lr",          "batch_size",     "steps",          "seed",
    "d_model",     "n_heads",     "select_ratio",   "t_hst",          "t_fut",
    "k_modes",     "nx_blocks",   "ng_blocks",      "na_blocks",      "dilations",
    "eps_agent_lane", "eps_agent_agent", "margin",  "w_margin",       "w_traj",
    "w_smooth",    "w_lane",      "w_agent",
};

}  // namespace

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config " + path + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : kKnownKeys) known = known || item.key() == k;
    if (!known) throw std::runtime_error("config " + path + ": unknown key '" + item.key() + "'");
  }

  TrainConfig c;
  c.variant = j.value("variant", c.variant);
  (void)variant_from_name(c.variant);  // reject bad names early
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.seed = j.value("seed", c.seed);
  ModelConfig& m = c.model;
  m.d_model = j.value("d_model", m.d_model);
  m.n_heads = j.value("n_heads", m.n_heads);
  m.select_ratio = j.value("select_ratio", m.select_ratio);
  m.t_hst = j.value("t_hst", m.t_hst);
  m.t_fut = j.value("t_fut", m.t_fut);
  m.k_modes = j.value("k_modes", m.k_modes);
  m.nx_blocks = j.value("nx_blocks", m.nx_blocks);
  m.ng_blocks = j.value("ng_blocks", m.ng_blocks);
  m.na_blocks = j.value("na_blocks", m.na_blocks);
  if (j.contains("dilations")) m.dilations = j["dilations"].get<std::vector<int>>();
  m.eps_agent_lane = j.value("eps_agent_lane", m.eps_agent_lane);
  m.eps_agent_agent = j.value("eps_agent_agent", m.eps_agent_agent);
  LossConfig& l = c.loss;
  l.margin = j.value("margin", l.margin);
  l.w_margin = j.value("w_margin", l.w_margin);
  l.w_traj = j.value("w_traj", l.w_traj);
  l.w_smooth = j.value("w_smooth", l.w_smooth);
  l.w_lane = j.value("w_lane", l.w_lane);
  l.w_agent = j.value("w_agent", l.w_agent);

  if (c.lr <= 0.0 || c.batch_size < 1 || c.steps < 1)
    throw std::runtime_error("config " + path + ": rates and sizes must be positive");
  if (m.d_model < 1 || m.n_heads < 1 || m.t_hst < 1 || m.t_fut < 1 || m.k_modes < 1 ||
      m.nx_blocks < 1 || m.ng_blocks < 1 || m.na_blocks < 1)
    throw std::runtime_error("config " + path + ": model dimensions must be positive");
  return c;
}

std::string train_config_json(const TrainConfig& c) {
  json j;
  j["variant"] = c.variant;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["d_model"] = c.model.d_model;
  j["n_heads"] = c.model.n_heads;
  j["select_ratio"] = c.model.select_ratio;
  j["t_hst"] = c.model.t_hst;
  j["t_fut"] = c.model.t_fut;
  j["k_modes"] = c.model.k_modes;
  j["nx_blocks"] = c.model.nx_blocks;
  j["ng_blocks"] = c.model.ng_blocks;
  j["na_blocks"] = c.model.na_blocks;
  j["dilations"] = c.model.dilations;
  j["eps_agent_lane"] = c.model.eps_agent_lane;
  j["eps_agent_agent"] = c.model.eps_agent_agent;
  j["margin"] = c.loss.margin;
  j["w_margin"] = c.loss.w_margin;
  j["w_traj"] = c.loss.w_traj;
  j["w_smooth"] = c.loss.w_smooth;
  j["w_lane"] = c.loss.w_lane;
  j["w_agent"] = c.loss.w_agent;
  return j.dump(2);
}

void save_manifest(const RunManifest& m, const std::string& path) {
  json j;
  j["config"] = json::parse(m.config_json);
  j["seed"] = m.seed;
  std::ostringstream hex;
  hex << std::hex << std::setfill('0') << std::setw(16) << m.data_hash;
  j["data_hash"] = hex.str();
  j["outputs"] = m.outputs;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.model = apply_variant(cfg_.model, variant_from_name(cfg_.variant));
  Rng rng(cfg_.seed);
  model_.emplace(reg_, rng, cfg_.model);
}

namespace {

std::vector<std::vector<double>> snapshot_params(const ParamRegistry& reg) {
  std::vector<std::vector<double>> out(reg.size());
  for (size_t i = 0; i < reg.size(); ++i) {
    const Tensor& t = reg.tensor(i);
    out[i].assign(t.data(), t.data() + t.numel());
  }
  return out;
}

void restore_params(ParamRegistry& reg, const std::vector<std::vector<double>>& snap) {
  for (size_t i = 0; i < reg.size(); ++i) {
    Tensor& t = reg.tensor(i);
    std::copy(snap[i].begin(), snap[i].end(), t.data());
  }
}

}  // namespace

TrainResult Trainer::run(const std::vector<Scenario>& data, std::ostream* log) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");

  std::vector<SceneInputs> inputs;
  inputs.reserve(data.size());
  for (const Scenario& s : data) inputs.push_back(featurize(s, cfg_.model.t_hst, cfg_.model.t_fut));

  AdamConfig acfg;
  acfg.lr = cfg_.lr;
  Adam opt(reg_, acfg);

  Rng order(cfg_.seed ^ 0x5851f42d4c957f2dULL);  // decoupled from the init stream
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  size_t cursor = idx.size();  // forces a shuffle before the first batch

  std::vector<std::vector<double>> good = snapshot_params(reg_);
  TrainResult res;
  const int64_t b = std::min<int64_t>(cfg_.batch_size, static_cast<int64_t>(data.size()));

  for (int64_t step = 0; step < cfg_.steps; ++step) {
    reg_.zero_grads();
    Tape tape;
    Tensor total;
    double margin = 0.0, traj = 0.0, smooth = 0.0, lane = 0.0, agent = 0.0;
    for (int64_t k = 0; k < b; ++k) {
      if (cursor >= idx.size()) {
        for (size_t i = idx.size(); i > 1; --i)
          std::swap(idx[i - 1], idx[static_cast<size_t>(order.randint(static_cast<int64_t>(i)))]);
        cursor = 0;
      }
      const size_t i = idx[cursor++];
      const HolisticModel::Output out = model_->forward(tape, inputs[i], data[i].graph);
      const LossBreakdown lb =
          compute_losses(tape, out.dec, out.lane_weights, inputs[i].targets, cfg_.loss);
      margin += lb.margin.value() / static_cast<double>(b);
      traj += lb.traj_ce.value() / static_cast<double>(b);
      smooth += lb.smooth.value() / static_cast<double>(b);
      lane += lb.lane_ce.value() / static_cast<double>(b);
      agent += lb.agent_ce.value() / static_cast<double>(b);
      total = k == 0 ? lb.total : add(tape, total, lb.total);
    }
    total = scalar_mul(tape, total, 1.0 / static_cast<double>(b));

    const double j = total.value();
    if (!std::isfinite(j)) {
      restore_params(reg_, good);
      res.diverged = true;
      if (log) *log << "step " << step << " diverged; parameters reverted\n";
      break;
    }
    if (step == 0) res.initial_loss = j;
    res.final_loss = j;
    res.curve.push_back(j);
    if (log)
      *log << std::setprecision(10) << "step " << step << " margin " << margin << " traj " << traj
           << " smooth " << smooth << " lane " << lane << " agent " << agent << " total " << j
           << "\n";

    good = snapshot_params(reg_);
    tape.backward(total);
    opt.step();
    ++res.steps_done;
  }
  res.steps_skipped = opt.steps_skipped();
  return res;
}

}  // namespace lanecast
