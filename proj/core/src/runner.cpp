#include "gm/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gm/dataset.hpp"
#include "gm/marginal.hpp"
#include "gm/net.hpp"
#include "gm/paths.hpp"
#include "gm/sim.hpp"
#include "gm/verify.hpp"

namespace gm {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(ctx + ": unknown key '" + key + "'");
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

struct PathSpec {
  std::string kind = "geometric";
  std::string schedule = "linear";
  double a1 = -1.0, a2 = 1.0;
  int vocab = 0;
};

PathSpec parse_path_spec(const json& j) {
  PathSpec s;
  check_keys(j, "path", {"kind", "schedule", "a1", "a2", "vocab"});
  s.kind = j.value("kind", "geometric");
  s.schedule = j.value("schedule", "linear");
  s.a1 = j.value("a1", -1.0);
  s.a2 = j.value("a2", 1.0);
  s.vocab = j.value("vocab", 0);
  if (s.kind != "geometric" && s.kind != "mixture-uniform" &&
      s.kind != "mixture-discrete")
    throw ConfigError("path.kind must be geometric | mixture-uniform | mixture-discrete");
  return s;
}

CondPath build_path(const PathSpec& s, const StateSignature& sig) {
  const Schedule sched = Schedule::parse(s.schedule);
  if (s.kind == "mixture-discrete") {
    if (sig.tok_dim() == 0)
      throw ConfigError("mixture-discrete path needs a discrete dataset");
    const int vocab = s.vocab > 0 ? s.vocab : sig.vocabs[0];
    return CondPath::mixture_discrete(vocab, sched, sig.tok_dim());
  }
  if (sig.real_dim == 0)
    throw ConfigError("path.kind '" + s.kind + "' needs a Euclidean dataset");
  if (s.kind == "geometric") return CondPath::geometric(sched, sig.real_dim);
  return CondPath::mixture_uniform(s.a1, s.a2, sched, sig.real_dim);
}

Dataset build_dataset(const json& j) {
  check_keys(j, "dataset", {"name", "grid", "csv", "weighted", "tokens", "vocab", "weights"});
  if (j.contains("csv")) return Dataset::load_csv(j.at("csv").get<std::string>(),
                                                  j.value("weighted", false));
  if (j.contains("tokens")) {
    const int vocab = j.value("vocab", 0);
    if (vocab < 2) throw ConfigError("dataset.tokens needs vocab >= 2");
    std::vector<State> pts;
    for (const auto& row : j.at("tokens"))
      pts.push_back(State{{}, row.get<std::vector<int>>()});
    if (pts.empty()) throw ConfigError("dataset.tokens is empty");
    std::vector<double> w =
        j.contains("weights") ? j.at("weights").get<std::vector<double>>()
                              : std::vector<double>(pts.size(), 1.0);
    return Dataset::from_points(
        std::move(pts), std::move(w),
        StateSignature{0, std::vector<int>(pts.front().tok.size(), vocab)});
  }
  const std::string name = j.value("name", "two-point");
  if (name == "two-point") return Dataset::two_point();
  if (name == "checkerboard-2d") return Dataset::checkerboard2d(j.value("grid", 16));
  throw ConfigError("unknown dataset name: " + name);
}

struct GeneratorSpec {
  std::string model = "flow";
  std::vector<std::pair<GenPart, double>> parts;
  double bins_lo = -2.5, bins_hi = 2.5;
  int bins_count = 128;
  double langevin_beta = 0.0;
  std::optional<std::pair<double, double>> predictor_corrector;
};

GenPart parse_part(const std::string& name) {
  if (name == "flow") return GenPart::Flow;
  if (name == "diffusion") return GenPart::Diffusion;
  if (name == "jump") return GenPart::Jump;
  if (name == "ctmc") return GenPart::Ctmc;
  throw ConfigError("unknown generator part: " + name);
}

GeneratorSpec parse_generator_spec(const json& j) {
  GeneratorSpec s;
  check_keys(j, "generator",
             {"model", "weights", "bins", "langevin_beta", "predictor_corrector"});
  s.model = j.value("model", "flow");
  std::vector<std::string> names;
  if (s.model.rfind("superposition:", 0) == 0) {
    std::stringstream ss(s.model.substr(std::string("superposition:").size()));
    std::string tok;
    while (std::getline(ss, tok, '+')) names.push_back(tok);
    if (names.size() < 2) throw ConfigError("superposition needs >= 2 parts");
  } else {
    names.push_back(s.model);
  }
  json weights = j.value("weights", json::object());
  check_keys(weights, "generator.weights", {"flow", "diffusion", "jump", "ctmc"});
  double total = 0.0;
  for (const auto& n : names) {
    const double w = weights.value(n, 1.0 / names.size());
    s.parts.emplace_back(parse_part(n), w);
    total += w;
  }
  if (total <= 0.0) throw ConfigError("generator weights sum to 0");
  for (auto& [p, w] : s.parts) w /= total;
  if (j.contains("bins")) {
    check_keys(j.at("bins"), "generator.bins", {"lo", "hi", "count"});
    s.bins_lo = j.at("bins").value("lo", -2.5);
    s.bins_hi = j.at("bins").value("hi", 2.5);
    s.bins_count = j.at("bins").value("count", 128);
  }
  s.langevin_beta = j.value("langevin_beta", 0.0);
  if (j.contains("predictor_corrector")) {
    check_keys(j.at("predictor_corrector"), "generator.predictor_corrector",
               {"a1", "a2"});
    s.predictor_corrector = std::make_pair(j.at("predictor_corrector").value("a1", 1.0),
                                           j.at("predictor_corrector").value("a2", 0.0));
  }
  return s;
}

MarginalModel build_model(const CondPath& path, const Dataset& data,
                          const GeneratorSpec& gs) {
  GenPartsSpec parts;
  parts.parts = gs.parts;
  bool needs_jump = false;
  for (const auto& [p, w] : gs.parts) needs_jump = needs_jump || p == GenPart::Jump;
  if (needs_jump) {
    if (path.kind == PathKind::GeometricAverage)
      parts.bins = JumpBins::make(gs.bins_lo, gs.bins_hi, gs.bins_count);
    else
      parts.atom_support = std::make_shared<const std::vector<std::vector<double>>>(
          data.unique_real_values());
  }
  CombinatorSpec comb;
  comb.langevin_beta = gs.langevin_beta;
  comb.predictor_corrector = gs.predictor_corrector;
  return MarginalModel{path, data, std::move(parts), comb};
}

std::string samples_csv(const std::vector<State>& samples) {
  std::string out;
  for (const auto& s : samples) {
    bool first = true;
    for (double v : s.real) {
      if (!first) out += ',';
      out += fmt(v);
      first = false;
    }
    for (int v : s.tok) {
      if (!first) out += ',';
      out += std::to_string(v);
      first = false;
    }
    out += '\n';
  }
  return out;
}

std::string trajectories_csv(const std::vector<TrajPoint>& traj) {
  std::string out = "sample_id,step,t";
  if (!traj.empty()) {
    for (std::size_t i = 0; i < traj.front().x.real.size(); ++i)
      out += ",x" + std::to_string(i);
    for (std::size_t i = 0; i < traj.front().x.tok.size(); ++i)
      out += ",tok" + std::to_string(i);
  }
  out += '\n';
  for (const auto& p : traj) {
    out += std::to_string(p.sample) + ',' + std::to_string(p.step) + ',' + fmt(p.t);
    for (double v : p.x.real) out += ',' + fmt(v);
    for (int v : p.x.tok) out += ',' + std::to_string(v);
    out += '\n';
  }
  return out;
}

// TV between samples and the finite target: 1d uses a 64-bin histogram over
// the padded atom range, higher dimensions bin by the nearest atom coordinate
// per dimension, discrete states count tokens directly.
double target_tv(const Dataset& data, const std::vector<State>& samples) {
  const auto& sig = data.signature;
  if (sig.real_dim == 1 && sig.tok_dim() == 0) {
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (const auto& p : data.points) {
      lo = std::min(lo, p.real[0]);
      hi = std::max(hi, p.real[0]);
    }
    lo -= 0.5;
    hi += 0.5;
    std::vector<double> edges(65);
    for (int i = 0; i <= 64; ++i) edges[i] = lo + (hi - lo) * i / 64.0;
    std::vector<double> xs(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) xs[i] = samples[i].real[0];
    return tv_hist_ref(
        xs,
        [&](double a, double b) {
          double m = 0.0;
          for (std::size_t i = 0; i < data.size(); ++i)
            if (data.points[i].real[0] >= a && data.points[i].real[0] < b)
              m += data.weights[i];
          return m;
        },
        edges);
  }
  if (sig.tok_dim() > 0 && sig.real_dim == 0) {
    std::map<std::vector<int>, double> target, emp;
    for (std::size_t i = 0; i < data.size(); ++i) target[data.points[i].tok] += data.weights[i];
    for (const auto& s : samples) emp[s.tok] += 1.0 / samples.size();
    double tv = 0.0;
    for (const auto& [k, v] : target) tv += std::abs(v - (emp.count(k) ? emp[k] : 0.0));
    for (const auto& [k, v] : emp)
      if (!target.count(k)) tv += v;
    return 0.5 * tv;
  }
  // nearest atom coordinate per dimension
  const auto uniq = data.unique_real_values();
  auto cell_of = [&](const State& s) {
    std::vector<int> cell(sig.real_dim);
    for (std::size_t d = 0; d < sig.real_dim; ++d) {
      const auto& u = uniq[d];
      const auto it = std::lower_bound(u.begin(), u.end(), s.real[d]);
      std::size_t idx = it == u.end() ? u.size() - 1
                                      : static_cast<std::size_t>(it - u.begin());
      if (idx > 0 && (it == u.end() ||
                      std::abs(u[idx - 1] - s.real[d]) <= std::abs(u[idx] - s.real[d])))
        --idx;
      cell[d] = static_cast<int>(idx);
    }
    return cell;
  };
  std::map<std::vector<int>, double> target, emp;
  for (std::size_t i = 0; i < data.size(); ++i)
    target[cell_of(data.points[i])] += data.weights[i];
  for (const auto& s : samples) emp[cell_of(s)] += 1.0 / samples.size();
  double tv = 0.0;
  for (const auto& [k, v] : target) tv += std::abs(v - (emp.count(k) ? emp.at(k) : 0.0));
  for (const auto& [k, v] : emp)
    if (!target.count(k)) tv += v;
  return 0.5 * tv;
}

std::vector<State> reference_sample(const Dataset& data, std::size_t n) {
  std::vector<State> ref;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto k = static_cast<std::size_t>(
        std::llround(data.weights[i] * static_cast<double>(n)));
    for (std::size_t c = 0; c < std::max<std::size_t>(k, 1); ++c)
      ref.push_back(data.points[i]);
  }
  return ref;
}

json simulate_metrics(const Dataset& data, const SimResult& res) {
  json m;
  m["n_samples"] = res.samples.size();
  m["clamp_count"] = res.clamp_count;
  if (!res.samples.empty() && res.samples.front().real.size() == data.signature.real_dim &&
      res.samples.front().tok.size() == data.signature.tok_dim()) {
    m["tv"] = target_tv(data, res.samples);
    if (data.signature.real_dim > 0)
      m["energy_distance"] =
          energy_distance(res.samples, reference_sample(data, res.samples.size()));
  }
  return m;
}

// ---- command implementations ----

int cmd_verify(const json& cfg, const fs::path& out_dir) {
  const json vj = cfg.value("verify", json::object());
  const int bins = vj.value("bins", 1024);
  const int nodes = vj.value("nodes", 4001);
  const auto reports = kfe_table_suite(bins, nodes);
  json out;
  out["bins"] = bins;
  out["nodes"] = nodes;
  bool all_pass = true;
  for (const auto& r : reports) {
    json row;
    row["path"] = r.path_name;
    row["model"] = r.model_name;
    row["max_residual"] = r.max_residual;
    row["threshold"] = r.threshold;
    row["pass"] = r.pass;
    row["control_residual"] = r.control_residual;
    row["control_required"] = r.control_required;
    row["control_ok"] = r.control_ok;
    row["grid"] = {{"nodes", r.nodes},
                   {"bins", r.bins},
                   {"t_count", r.t_count},
                   {"z_count", r.z_count},
                   {"fn_count", r.fn_count}};
    all_pass = all_pass && r.pass && r.control_ok;
    out["pairs"].push_back(row);
  }
  out["all_pass"] = all_pass;
  write_text(out_dir / "kfe_report.json", out.dump(1) + "\n");
  for (const auto& r : reports)
    std::cout << r.path_name << "/" << r.model_name << ": max residual "
              << r.max_residual << (r.pass ? " PASS" : " FAIL")
              << " (control " << r.control_residual
              << (r.control_ok ? " ok" : " WEAK") << ")\n";
  return all_pass ? 0 : 2;
}

int cmd_simulate(const json& cfg, const fs::path& out_dir, std::uint64_t seed,
                 int threads) {
  const Dataset data = build_dataset(cfg.value("dataset", json::object()));
  const PathSpec ps = parse_path_spec(cfg.value("path", json::object()));
  const CondPath path = build_path(ps, data.signature);
  const GeneratorSpec gs = parse_generator_spec(cfg.value("generator", json::object()));
  const MarginalModel model = build_model(path, data, gs);

  const json sj = cfg.value("sim", json::object());
  check_keys(sj, "sim", {"n_steps", "n_samples", "record_trajectories", "reflect"});
  SimConfig sc;
  sc.n_steps = sj.value("n_steps", 500);
  sc.n_samples = sj.value("n_samples", 10000);
  sc.record_trajectories = sj.value("record_trajectories", false);
  sc.seed = seed;
  sc.n_threads = threads;
  if (sj.value("reflect", false)) sc.reflection_bounds = std::make_pair(path.a1, path.a2);

  const SimResult res = simulate(model, sc);
  write_text(out_dir / "samples.csv", samples_csv(res.samples));
  if (sc.record_trajectories)
    write_text(out_dir / "trajectories.csv", trajectories_csv(res.trajectories));
  write_text(out_dir / "metrics.json", simulate_metrics(data, res).dump(1) + "\n");
  return 0;
}

int cmd_train(const json& cfg, const fs::path& out_dir, std::uint64_t seed) {
  const Dataset data = build_dataset(cfg.value("dataset", json::object()));
  const PathSpec ps = parse_path_spec(cfg.value("path", json::object()));
  const CondPath path = build_path(ps, data.signature);

  const json tj = cfg.value("train", json::object());
  check_keys(tj, "train",
             {"steps", "batch", "width", "depth", "time_features", "lr",
              "lr_schedule", "beta1", "beta2", "eps", "loss", "head", "eps_t",
              "bins"});
  TrainConfig tc;
  tc.steps = tj.value("steps", 5000);
  tc.batch_size = tj.value("batch", 256);
  tc.net.width = tj.value("width", 64);
  tc.net.depth = tj.value("depth", 3);
  tc.net.time_features = tj.value("time_features", 16);
  tc.opt.lr = tj.value("lr", 1e-3);
  const std::string sched = tj.value("lr_schedule", "cosine");
  if (sched == "cosine")
    tc.lr_schedule = LrSchedule::Cosine;
  else if (sched == "constant")
    tc.lr_schedule = LrSchedule::Constant;
  else
    throw ConfigError("train.lr_schedule must be cosine | constant");
  tc.opt.beta1 = tj.value("beta1", 0.9);
  tc.opt.beta2 = tj.value("beta2", 0.999);
  tc.opt.eps = tj.value("eps", 1e-8);
  tc.loss = Bregman::parse(tj.value("loss", "mse"));
  tc.eps_t = tj.value("eps_t", 1e-3);
  tc.seed = seed;
  tc.net.init_seed = seed + 1;
  tc.net.real_dim = path.signature().real_dim;
  tc.net.vocabs = path.signature().vocabs;

  const std::string head = tj.value("head", "flow");
  GenPartsSpec cond;
  if (head == "flow") {
    tc.head = HeadKind::Flow;
    cond = GenPartsSpec::single(GenPart::Flow);
  } else if (head == "jump") {
    tc.head = HeadKind::Jump;
    tc.net.head_velocity = false;
    tc.net.head_jump = true;
    tc.net.bins = tj.value("bins", 128);
    cond = GenPartsSpec::single(GenPart::Jump);
    if (path.kind == PathKind::GeometricAverage)
      cond.bins = JumpBins::make(-2.5, 2.5, tc.net.bins);
    else
      throw ConfigError("binned jump training targets need the geometric path");
  } else if (head == "ctmc") {
    tc.head = HeadKind::Ctmc;
    tc.net.head_velocity = false;
    tc.net.head_rates = true;
    cond = GenPartsSpec::single(GenPart::Ctmc);
  } else {
    throw ConfigError("train.head must be flow | jump | ctmc");
  }

  const TrainResult result = train_model(tc, path, data, cond);
  json meta;
  meta["seed"] = seed;
  meta["steps"] = tc.steps;
  meta["loss"] = tc.loss.name();
  meta["head"] = head;
  meta["config_hash"] = fnv1a_hex(cfg.dump());
  save_checkpoint(result.net, (out_dir / "checkpoint.json").string(), meta.dump());
  save_loss_curve(result.curve, (out_dir / "loss_curve.csv").string());

  json ferr;
  if (head == "flow" && path.kind == PathKind::GeometricAverage && path.dim == 1) {
    MarginalModel model{path, data, GenPartsSpec::single(GenPart::Flow), {}};
    const FieldErrorReport rep = velocity_field_error(result.net, model);
    ferr["rel_l2_weighted"] = rep.rel_l2_weighted;
    ferr["rel_l2_uniform"] = rep.rel_l2;
    ferr["grid"] = {{"t_lo", rep.t_lo}, {"t_hi", rep.t_hi}, {"t_points", rep.t_points},
                    {"x_lo", rep.x_lo}, {"x_hi", rep.x_hi}, {"x_points", rep.x_points}};
  } else {
    ferr["rel_l2_weighted"] = nullptr;
    ferr["note"] = "field error report covers 1d flow heads on the geometric path";
  }
  if (!result.curve.empty()) {
    ferr["first_loss"] = result.curve.front().second;
    ferr["final_loss"] = result.curve.back().second;
  }
  write_text(out_dir / "field_error.json", ferr.dump(1) + "\n");
  return 0;
}

int cmd_bench(const json& cfg, const fs::path& out_dir, std::uint64_t seed,
              int threads) {
  const json bj = cfg.value("bench", json::object());
  check_keys(bj, "bench", {"n_steps", "n_samples", "bins"});
  const int n_steps = bj.value("n_steps", 200);
  const int n_samples = bj.value("n_samples", 4000);
  const int bins = bj.value("bins", 128);
  const Dataset data = build_dataset(cfg.value("dataset", json::object()));

  struct Cell {
    const char* path;
    const char* model;
  };
  const std::vector<Cell> cells = {
      {"geometric", "flow"},          {"geometric", "jump"},
      {"geometric", "superposition:flow+jump"},
      {"mixture-uniform", "flow"},    {"mixture-uniform", "diffusion"},
      {"mixture-uniform", "jump"},
      {"mixture-uniform", "superposition:flow+diffusion+jump"},
  };

  json rows = json::array();
  for (const auto& cell : cells) {
    PathSpec ps;
    ps.kind = cell.path;
    ps.a1 = -1.0;
    ps.a2 = 1.0;
    const CondPath path = build_path(ps, data.signature);
    GeneratorSpec gs;
    gs.model = cell.model;
    json gj;
    gj["model"] = cell.model;
    gj["bins"] = {{"lo", -2.5}, {"hi", 2.5}, {"count", bins}};
    gs = parse_generator_spec(gj);
    const MarginalModel model = build_model(path, data, gs);
    SimConfig sc;
    sc.n_steps = n_steps;
    sc.n_samples = n_samples;
    sc.seed = seed;
    sc.n_threads = threads;
    if (path.kind == PathKind::MixtureUniform)
      sc.reflection_bounds = std::make_pair(path.a1, path.a2);
    const SimResult res = simulate(model, sc);
    json row;
    row["path"] = cell.path;
    row["model"] = cell.model;
    row["tv"] = target_tv(data, res.samples);
    row["energy_distance"] =
        energy_distance(res.samples, reference_sample(data, res.samples.size()));
    row["clamp_count"] = res.clamp_count;
    row["n_steps"] = n_steps;
    row["n_samples"] = n_samples;
    rows.push_back(row);
  }
  json out;
  out["cells"] = rows;
  out["dataset"] = cfg.value("dataset", json{{"name", "two-point"}});
  write_text(out_dir / "bench_metrics.json", out.dump(1) + "\n");
  for (const auto& row : rows)
    std::cout << row["path"].get<std::string>() << " x "
              << row["model"].get<std::string>() << ": tv " << row["tv"].get<double>()
              << "\n";
  return 0;
}

json resolve_config(const json& cfg, std::uint64_t seed, int threads) {
  json r = cfg;
  r["seed"] = seed;
  r.erase("out");  // output location is a CLI concern, not an experiment input
  r["threads"] = threads;
  // materialize defaults so a rerun from this file is equivalent
  if (!r.contains("path")) r["path"] = json::object();
  if (!r["path"].contains("kind")) r["path"]["kind"] = "geometric";
  if (!r["path"].contains("schedule")) r["path"]["schedule"] = "linear";
  if (!r.contains("dataset")) r["dataset"] = {{"name", "two-point"}};
  const std::string cmd = r.value("command", "");
  if (cmd == "simulate") {
    if (!r.contains("generator")) r["generator"] = {{"model", "flow"}};
    json& sj = r["sim"];
    if (!r.contains("sim")) sj = json::object();
    if (!sj.contains("n_steps")) sj["n_steps"] = 500;
    if (!sj.contains("n_samples")) sj["n_samples"] = 10000;
    if (!sj.contains("record_trajectories")) sj["record_trajectories"] = false;
    if (!sj.contains("reflect")) sj["reflect"] = false;
  } else if (cmd == "train") {
    json& tj = r["train"];
    if (!r.contains("train")) tj = json::object();
    if (!tj.contains("steps")) tj["steps"] = 5000;
    if (!tj.contains("batch")) tj["batch"] = 256;
    if (!tj.contains("width")) tj["width"] = 64;
    if (!tj.contains("depth")) tj["depth"] = 3;
    if (!tj.contains("time_features")) tj["time_features"] = 16;
    if (!tj.contains("lr")) tj["lr"] = 1e-3;
    if (!tj.contains("lr_schedule")) tj["lr_schedule"] = "cosine";
    if (!tj.contains("beta1")) tj["beta1"] = 0.9;
    if (!tj.contains("beta2")) tj["beta2"] = 0.999;
    if (!tj.contains("eps")) tj["eps"] = 1e-8;
    if (!tj.contains("loss")) tj["loss"] = "mse";
    if (!tj.contains("head")) tj["head"] = "flow";
    if (!tj.contains("eps_t")) tj["eps_t"] = 1e-3;
  } else if (cmd == "verify-kfe") {
    json& vj = r["verify"];
    if (!r.contains("verify")) vj = json::object();
    if (!vj.contains("bins")) vj["bins"] = 1024;
    if (!vj.contains("nodes")) vj["nodes"] = 4001;
  } else if (cmd == "bench-toy") {
    json& bj = r["bench"];
    if (!r.contains("bench")) bj = json::object();
    if (!bj.contains("n_steps")) bj["n_steps"] = 200;
    if (!bj.contains("n_samples")) bj["n_samples"] = 4000;
    if (!bj.contains("bins")) bj["bins"] = 128;
  }
  return r;
}

}  // namespace

int run_experiment_json(const std::string& config_text, const RunOverrides& overrides) {
  try {
    json cfg;
    try {
      cfg = json::parse(config_text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    check_keys(cfg, "config",
               {"command", "seed", "out", "threads", "path", "dataset", "generator",
                "sim", "train", "verify", "bench"});
    const std::string cmd = cfg.value("command", "");
    if (cmd != "verify-kfe" && cmd != "simulate" && cmd != "train" && cmd != "bench-toy")
      throw ConfigError("command must be verify-kfe | simulate | train | bench-toy");

    const std::uint64_t seed =
        overrides.seed ? *overrides.seed : cfg.value("seed", std::uint64_t{0});
    const std::string out_dir =
        overrides.out_dir ? *overrides.out_dir : cfg.value("out", std::string("out"));
    const int threads = overrides.threads ? *overrides.threads : cfg.value("threads", 1);
    if (threads < 1) throw ConfigError("threads must be >= 1");

    fs::create_directories(out_dir);
    const json resolved = resolve_config(cfg, seed, threads);
    write_text(fs::path(out_dir) / "resolved_config.json", resolved.dump(1) + "\n");

    if (cmd == "verify-kfe") return cmd_verify(resolved, out_dir);
    if (cmd == "simulate") return cmd_simulate(resolved, out_dir, seed, threads);
    if (cmd == "train") return cmd_train(resolved, out_dir, seed);
    return cmd_bench(resolved, out_dir, seed, threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

int run_experiment_file(const std::string& config_path, const RunOverrides& overrides) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "config error: cannot open " << config_path << "\n";
    return 1;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return run_experiment_json(ss.str(), overrides);
}

}  // namespace gm
