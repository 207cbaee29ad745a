// netlocal command-line tool: quantum targets, local-model fits, scans,
// sampling calibration and strategy export. Every run writes a manifest.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "manifest.hpp"
#include "netlocal/calibrate.hpp"
#include "netlocal/checkpoint.hpp"
#include "netlocal/runtime.hpp"
#include "netlocal/scan.hpp"
#include "netlocal/targets.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace netlocal;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitPartial = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- parsing --

/// Real number, also accepting multiples and fractions of pi: pi, 2pi, pi/2, 0.5*pi.
double parse_real(std::string text) {
  std::erase(text, ' ');
  const auto p = text.find("pi");
  if (p == std::string::npos) {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw UsageError("not a number: '" + text + "'");
    return v;
  }
  std::string head = text.substr(0, p), tail = text.substr(p + 2);
  if (!head.empty() && head.back() == '*') head.pop_back();
  double v = std::numbers::pi * (head.empty() ? 1.0 : parse_real(head));
  if (!tail.empty()) {
    if (tail.front() != '/') throw UsageError("cannot parse '" + text + "'");
    v /= parse_real(tail.substr(1));
  }
  return v;
}

/// "a,b,c" or "lo:hi:count".
std::vector<double> parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  if (text.find(':') != std::string::npos) {
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw UsageError("range grids are lo:hi:count, got '" + text + "'");
    return scan::linspace(parse_real(parts[0]), parse_real(parts[1]), std::stoi(parts[2]));
  }
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(parse_real(part));
  if (out.empty()) throw UsageError("empty grid");
  return out;
}

std::size_t parse_count(const std::string& text) {
  const double v = parse_real(text);
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) throw UsageError("not a positive integer: '" + text + "'");
  return static_cast<std::size_t>(v);
}

/// "4,16,64" or "1e3..1e6" (every decade in between).
std::vector<std::size_t> parse_counts(const std::string& text) {
  const auto dots = text.find("..");
  std::vector<std::size_t> out;
  if (dots != std::string::npos) {
    std::size_t lo = parse_count(text.substr(0, dots));
    const std::size_t hi = parse_count(text.substr(dots + 2));
    for (; lo <= hi; lo *= 10) out.push_back(lo);
  } else {
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) out.push_back(parse_count(part));
  }
  if (out.empty()) throw UsageError("empty count list '" + text + "'");
  return out;
}

/// Accepts "1e4" style integers for count options.
const CLI::Validator kCount(
    [](std::string& s) {
      try {
        s = std::to_string(parse_count(s));
        return std::string();
      } catch (const std::exception& e) {
        return std::string(e.what());
      }
    },
    "COUNT");

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Named network or a config file; `inputs` collects files for the manifest.
NetworkConfig load_network(const std::string& spec, std::vector<fs::path>& inputs) {
  if (auto named = named_network(spec)) return *named;
  if (!fs::exists(spec)) throw UsageError("'" + spec + "' is neither a named network nor an existing file");
  inputs.emplace_back(spec);
  auto config = parse_config(read_file(spec));
  for (const auto& s : config.dangling_sources())
    std::cerr << "warning: source '" << s << "' feeds a single party and acts as local randomness\n";
  return config;
}

std::string probs_text(const std::vector<double>& p, bool csv) {
  std::ostringstream out;
  out.precision(17);
  if (csv) {
    for (double v : p) out << v << '\n';
  } else {
    out << '[';
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? ", " : "") << p[i];
    out << "]\n";
  }
  return out.str();
}

std::string timestamp() {
  // scan_basename formats the time; strip its prefix for other commands
  return scan::scan_basename("", std::chrono::system_clock::now()).substr(6);
}

fs::path default_out_dir() {
  if (const char* env = std::getenv("NETLOCAL_OUT_DIR"); env && *env) return env;
  return ".";
}

/// Every option of a subcommand with its resolved value.
ordered_json resolved_options(const CLI::App& sub) {
  ordered_json j = ordered_json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
    std::string key = opt->get_name();
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (r.size() == 1)
        j[key] = r.front();
      else
        j[key] = r;
    } else if (!opt->get_default_str().empty()) {
      j[key] = opt->get_default_str();
    } else if (opt->get_type_size() == 0) {
      j[key] = false;
    }
  }
  return j;
}

// --------------------------------------------------------- shared options --

struct TrainFlags {
  int width = 60;
  int depth = 4;
  std::string max_iters = "10000";
  std::string patience = "1000";
  std::string loss = "kl";
  std::string stage2 = "0";
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string eval_samples = "1e6";
  int smoothing = 50;
  int restarts = 1;
  double bias = 4.0;
  double bias_max = 10.0;
  std::string n_min = "1e3";
  std::string n_max = "1e7";
  int stagnation_window = 100;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--width", f.width, "Neurons per hidden layer")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--depth", f.depth, "Hidden layers per party")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--max-iters", f.max_iters, "Stage-1 iteration limit")->capture_default_str()->check(kCount);
  sub->add_option("--patience", f.patience, "Stop after this many iterations without improvement")
      ->capture_default_str()
      ->check(kCount);
  sub->add_option("--loss", f.loss, "kl, or euclid for a KL stage followed by a Euclidean stage")
      ->capture_default_str()
      ->check(CLI::IsMember({"kl", "euclid"}));
  sub->add_option("--stage2", f.stage2, "Euclidean fine-tuning iterations (default 2000 with --loss euclid)")
      ->capture_default_str();
  sub->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Base seed")->capture_default_str();
  sub->add_option("--eval-samples", f.eval_samples, "Samples for the final evaluation")
      ->capture_default_str()
      ->check(kCount);
  sub->add_option("--smoothing", f.smoothing, "Moving-average window for improvement detection")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--restarts", f.restarts, "Independent initializations; the best is kept")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--bias", f.bias, "Initial bias parameter B")->capture_default_str();
  sub->add_option("--bias-max", f.bias_max, "Largest B")->capture_default_str();
  sub->add_option("--n-min", f.n_min, "Smallest sample count")->capture_default_str()->check(kCount);
  sub->add_option("--n-max", f.n_max, "Largest sample count")->capture_default_str()->check(kCount);
  sub->add_option("--stagnation-window", f.stagnation_window, "Iterations without improvement before B grows")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

localmodel::TrainConfig make_train_config(const TrainFlags& f, const CLI::App* sub) {
  localmodel::TrainConfig t;
  t.max_iters = static_cast<int>(parse_count(f.max_iters));
  t.patience = static_cast<int>(parse_count(f.patience));
  const bool stage2_given = sub->count("--stage2") > 0;
  const double stage2 = parse_real(f.stage2);
  if (stage2 < 0 || stage2 != std::floor(stage2)) throw UsageError("--stage2 must be a non-negative integer");
  if (f.loss == "kl" && sub->count("--loss") > 0 && stage2 > 0)
    throw UsageError("--stage2 runs a Euclidean stage; it cannot be combined with --loss kl");
  t.stage2_euclid_iters = static_cast<int>(stage2);
  if (f.loss == "euclid" && !stage2_given) t.stage2_euclid_iters = 2000;
  if (f.loss == "euclid" && t.stage2_euclid_iters == 0) throw UsageError("--loss euclid needs --stage2 > 0");
  t.learning_rate = f.lr;
  t.seed = f.seed;
  t.eval_samples = parse_count(f.eval_samples);
  t.smoothing_window = f.smoothing;
  t.restarts = f.restarts;
  localmodel::validate(t);
  return t;
}

localmodel::SamplingController make_controller(const TrainFlags& f, std::size_t n_outcomes) {
  localmodel::SamplingController c;
  c.bias = f.bias;
  c.bias_max = f.bias_max;
  c.n_outcomes = n_outcomes;
  c.n_min = parse_count(f.n_min);
  c.n_max = parse_count(f.n_max);
  c.stagnation_window = f.stagnation_window;
  // scans fill in the outcome count per point
  auto check = c;
  check.n_outcomes = std::max<std::size_t>(n_outcomes, 1);
  localmodel::validate(check);
  return c;
}

// ----------------------------------------------------------- subcommands --

struct QuantumFlags {
  std::string network;
  std::string states = "psi_plus";
  double theta = 0.0;
  double visibility = 1.0;
  std::string povm = "rgb4";
  std::optional<double> u;
  std::optional<double> u2;
  double mu = 0.0;
  std::string wiring;
  std::string coarse;
  std::string raw;
  std::string out;
};

struct FitFlags {
  std::string network;
  std::string target;
  std::string coarse;
  std::string name = "fit";
  int progress = 0;
  bool history = false;
};

struct ScanFlags {
  std::string preset;
  std::string name;
  int jobs = 1;
  bool warm_start = false;
  bool quiet = false;
  std::string u2;
  std::string visibility = "1";
  std::string v_grid;
  std::string network = "triangle";
  int family = 1;
  std::string coarse;
  std::string theta_grid = "0:pi:9";
  std::string mu_grid = "0:pi/2:9";
  int grid_size = 0;
  std::string theta = "pi/2";
  std::string mu = "0";
};

struct CalibrateFlags {
  std::string outcomes = "4,16,64,256";
  std::string samples = "1e3..1e6";
  int trials = 1000;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string name = "calibrate";
};

struct ExportFlags {
  std::string checkpoint;
  std::string party;
  int resolution = 100;
  std::string out;
};

struct Context {
  std::vector<std::string> argv;
  fs::path out_dir;
};

int cmd_quantum_dist(const QuantumFlags& f, const CLI::App* sub, const Context& ctx) {
  cli::RunManifest m;
  m.subcommand = "quantum-dist";
  m.argv = ctx.argv;
  m.options = resolved_options(*sub);
  auto network = load_network(f.network, m.inputs);
  if (f.wiring.empty() && network.n_sources() > 1)
    throw UsageError("--wiring is required for networks with more than one source (a permutation, 'ring' or 'auto')");
  if (f.u && f.u2) throw UsageError("give --u or --u2, not both");

  std::vector<quantum::SourceState> states;
  std::vector<quantum::Povm> povms;
  if (!f.raw.empty()) {
    m.inputs.emplace_back(f.raw);
    const auto doc = nlohmann::json::parse(read_file(f.raw));
    states = parse_raw_states(doc);
    povms = parse_raw_povms(doc);
  } else {
    const auto pure = family_state(parse_state_family(f.states), f.theta);
    for (std::size_t s = 0; s < network.n_sources(); ++s) {
      if (f.visibility < 1.0)
        states.emplace_back(quantum::werner(pure, f.visibility));
      else
        states.emplace_back(pure);
    }
    const double u = f.u ? *f.u : f.u2 ? std::sqrt(*f.u2) : 1.0;
    povms.assign(network.n_parties(), family_povm(parse_measurement_family(f.povm), u, f.mu));
  }
  std::vector<int> particles;
  for (const auto& s : states) particles.push_back(static_cast<int>(quantum::particle_dims(s).size()));
  std::optional<quantum::HilbertWiring> wiring;
  if (f.wiring == "ring")
    wiring = quantum::ring_wiring(static_cast<int>(network.n_sources()));
  else if (f.wiring == "auto" || f.wiring.empty())
    wiring = quantum::auto_wiring(network, particles);
  else
    wiring = quantum::parse_wiring(f.wiring);

  auto dist = quantum::born_distribution(network, states, povms, *wiring);
  if (!f.coarse.empty()) dist = quantum::coarse_grain(dist, parse_coarse(f.coarse, network));

  const fs::path out = f.out.empty() ? ctx.out_dir / "distribution.json" : fs::path(f.out);
  write_file(out, probs_text(dist.probs(), out.extension() == ".csv"));
  m.outputs.push_back(out);
  m.extra["wiring"] = wiring->order();
  m.extra["n_outcomes"] = dist.size();
  const fs::path manifest = out.string() + ".manifest.json";
  cli::write_manifest(m, manifest);
  std::cout << "wrote " << out.string() << " (" << dist.size() << " outcomes)\n";
  return 0;
}

int cmd_fit(const FitFlags& f, const TrainFlags& tf, const CLI::App* sub, const Context& ctx) {
  cli::RunManifest m;
  m.subcommand = "fit";
  m.argv = ctx.argv;
  m.options = resolved_options(*sub);
  auto network = load_network(f.network, m.inputs);
  if (!f.coarse.empty()) network = coarse_network(network, parse_coarse(f.coarse, network));
  m.inputs.emplace_back(f.target);
  const auto probs = parse_probability_array(read_file(f.target));
  if (probs.size() != network.n_joint_outcomes())
    throw std::invalid_argument("target has " + std::to_string(probs.size()) + " entries but the network has " +
                                std::to_string(network.n_joint_outcomes()) + " joint outcomes");
  const Distribution target(OutcomeIndexer(network.outcome_shape()), probs);

  auto tcfg = make_train_config(tf, sub);
  tcfg.record_history = f.history;
  const auto ctrl = make_controller(tf, target.size());
  m.seed = tcfg.seed;

  localmodel::ProgressFn progress;
  if (f.progress > 0)
    progress = [&](const localmodel::IterationRecord& r) {
      if (r.iteration % f.progress == 0)
        std::cerr << "iter " << r.iteration << " stage " << r.stage << " loss " << r.loss << " samples " << r.samples
                  << " B " << r.bias << '\n';
    };
  auto outcome = localmodel::fit(network, target, tf.width, tf.depth, tcfg, ctrl, progress);

  fs::create_directories(ctx.out_dir);
  const fs::path ckpt_path = ctx.out_dir / (f.name + ".checkpoint.json");
  const fs::path result_path = ctx.out_dir / (f.name + ".result.json");
  auto run_cfg = tcfg;
  run_cfg.seed = outcome.result.seed;
  localmodel::save_checkpoint({outcome.net, outcome.controller, run_cfg, outcome.result}, ckpt_path);
  ordered_json result = ordered_json(localmodel::to_json(outcome.result));
  result["base_seed"] = tcfg.seed;
  write_file(result_path, result.dump(2) + "\n");
  m.outputs = {ckpt_path, result_path};
  if (f.history) {
    std::ostringstream csv;
    csv << "iteration,stage,loss,samples,bias\n";
    csv.precision(10);
    for (const auto& r : outcome.result.history)
      csv << r.iteration << ',' << r.stage << ',' << r.loss << ',' << r.samples << ',' << r.bias << '\n';
    const fs::path hist = ctx.out_dir / (f.name + ".history.csv");
    write_file(hist, csv.str());
    m.outputs.push_back(hist);
  }
  m.extra["result"] = result;
  cli::write_manifest(m, ctx.out_dir / (f.name + ".manifest.json"));
  std::cout << "final_kl " << outcome.result.final_kl << " final_euclid " << outcome.result.final_euclid
            << " best_raw_loss " << outcome.result.best_during_training << " iterations "
            << outcome.result.iterations_run << '\n';
  return 0;
}

int run_calibration(const CalibrateFlags& f, const CLI::App* sub, const Context& ctx, const std::string& subcommand) {
  cli::RunManifest m;
  m.subcommand = subcommand;
  m.argv = ctx.argv;
  m.options = resolved_options(*sub);
  m.seed = f.seed;
  const auto report =
      calibrate::sampling_error_study(parse_counts(f.outcomes), parse_counts(f.samples), f.trials, f.seed, f.jobs);
  const std::string base = f.name + "_" + timestamp();
  const fs::path csv = ctx.out_dir / (base + ".csv");
  const fs::path json = ctx.out_dir / (base + ".json");
  write_file(csv, calibrate::report_csv(report));
  ordered_json summary;
  summary["seed"] = f.seed;
  summary["trials"] = f.trials;
  try {
    summary["fit"] = calibrate::fit_json(calibrate::fit_scalings(report));
  } catch (const std::invalid_argument& e) {
    summary["fit_error"] = e.what();
  }
  write_file(json, summary.dump(2) + "\n");
  m.outputs = {csv, json};
  m.extra["summary"] = summary;
  cli::write_manifest(m, ctx.out_dir / (base + ".manifest.json"));
  std::cout << "wrote " << csv.string() << "\n" << summary.dump(2) << '\n';
  return 0;
}

int cmd_scan(const ScanFlags& f, const TrainFlags& tf, const CalibrateFlags& cf, const CLI::App* sub,
             const Context& ctx) {
  if (f.preset == "calibrate") return run_calibration(cf, sub, ctx, "scan");
  cli::RunManifest m;
  m.subcommand = "scan";
  m.argv = ctx.argv;
  m.options = resolved_options(*sub);

  std::vector<scan::ScanPoint> points;
  if (f.preset == "rgb4-u-scan") {
    points = scan::rgb4_points(parse_grid(f.u2.empty() ? "0.5:1:11" : f.u2), parse_real(f.visibility));
  } else if (f.preset == "rgb4-visibility") {
    const auto u2 = parse_grid(f.u2.empty() ? "0.85" : f.u2);
    if (u2.size() != 1) throw UsageError("rgb4-visibility takes a single --u2");
    TargetSpec base = scan::rgb4_points(u2, 1.0).front().target;
    points = scan::visibility_points(base, parse_grid(f.v_grid.empty() ? "0.8,0.85,0.9,0.95,0.975,1" : f.v_grid));
  } else if (f.preset == "grid2d") {
    auto network = load_network(f.network, m.inputs);
    auto thetas = parse_grid(f.theta_grid), mus = parse_grid(f.mu_grid);
    if (f.grid_size > 0) {
      thetas = scan::linspace(0.0, std::numbers::pi, f.grid_size);
      mus = scan::linspace(0.0, std::numbers::pi / 2, f.grid_size);
    }
    const auto coarse = f.coarse.empty() ? std::vector<std::vector<int>>{} : parse_coarse(f.coarse, network);
    points = scan::grid_2d_points(network, thetas, mus, f.family, coarse);
  } else if (f.preset == "robustness") {
    auto network = load_network(f.network, m.inputs);
    const auto coarse = f.coarse.empty() ? std::vector<std::vector<int>>{} : parse_coarse(f.coarse, network);
    auto base = scan::grid_2d_points(network, {parse_real(f.theta)}, {parse_real(f.mu)}, f.family, coarse).front().target;
    points = scan::visibility_points(base, parse_grid(f.v_grid.empty() ? "0.8:1:9" : f.v_grid));
  } else {
    throw UsageError("unknown preset '" + f.preset + "'");
  }

  scan::ScanOptions opts;
  opts.tcfg = make_train_config(tf, sub);
  opts.ctrl = make_controller(tf, 0);
  opts.width = tf.width;
  opts.depth = tf.depth;
  opts.jobs = f.jobs;
  opts.warm_start = f.warm_start;
  m.seed = opts.tcfg.seed;

  const std::string name = f.name.empty() ? f.preset : f.name;
  std::size_t done = 0;
  const auto results = scan::run_scan(points, opts, [&](const scan::ScanResult& r) {
    ++done;
    if (f.quiet) return;
    std::cerr << '[' << done << '/' << points.size() << ']';
    for (const auto& [k, v] : r.point.params) std::cerr << ' ' << k << '=' << v;
    if (r.ok)
      std::cerr << " final_kl=" << r.final_kl << " final_euclid=" << r.final_euclid << " (" << r.wall_time_seconds
                << " s)\n";
    else
      std::cerr << " FAILED: " << r.error << '\n';
  });

  const std::string base = scan::scan_basename(name, std::chrono::system_clock::now());
  const fs::path csv = ctx.out_dir / (base + ".csv");
  const fs::path json = ctx.out_dir / (base + ".json");
  write_file(csv, scan::results_csv(results));
  write_file(json, scan::results_sidecar(name, results, opts).dump(2) + "\n");
  m.outputs = {csv, json};
  ordered_json failed = ordered_json::array();
  for (const auto& r : results)
    if (!r.ok) {
      ordered_json p;
      for (const auto& [k, v] : r.point.params) p[k] = v;
      p["error"] = r.error;
      failed.push_back(p);
    }
  m.status = failed.empty() ? "ok" : "partial";
  m.extra["failed_points"] = failed;
  cli::write_manifest(m, ctx.out_dir / (base + ".manifest.json"));
  std::cout << "wrote " << csv.string() << '\n';
  if (!failed.empty()) {
    std::cerr << failed.size() << " of " << results.size() << " points failed:\n";
    for (const auto& p : failed) std::cerr << "  " << p.dump() << '\n';
    return kExitPartial;
  }
  return 0;
}

int cmd_export(const ExportFlags& f, const CLI::App* sub, const Context& ctx) {
  cli::RunManifest m;
  m.subcommand = "export-strats";
  m.argv = ctx.argv;
  m.options = resolved_options(*sub);
  m.inputs.emplace_back(f.checkpoint);
  const auto ckpt = localmodel::load_checkpoint(f.checkpoint);
  m.seed = ckpt.train_config.seed;
  std::vector<std::string> parties;
  if (f.party.empty()) {
    for (const auto& p : ckpt.net.config().parties())
      if (p.sources.size() == 2) parties.push_back(p.name);
    if (parties.empty()) throw std::invalid_argument("no party in this network has exactly two sources");
  } else {
    parties.push_back(f.party);
  }
  const fs::path out_path = f.out.empty() ? ctx.out_dir / "strategy.csv" : fs::path(f.out);
  const std::string stem = (out_path.parent_path() / out_path.stem()).string();
  for (const auto& party : parties) {
    const auto grid = localmodel::export_strategies(ckpt.net, party, f.resolution);
    const fs::path out = parties.size() == 1 && !f.out.empty() ? out_path : fs::path(stem + "_" + party + ".csv");
    write_file(out, localmodel::strategy_csv(grid));
    m.outputs.push_back(out);
    std::cout << "wrote " << out.string() << '\n';
  }
  cli::write_manifest(m, m.outputs.front().string() + ".manifest.json");
  return 0;
}

int run(const std::vector<std::string>& args);

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir) {
  const auto j = nlohmann::json::parse(read_file(manifest_path));
  if (j.value("format", std::string()) != "netlocal-manifest") throw std::invalid_argument("not a netlocal manifest");
  auto args = j.at("argv").get<std::vector<std::string>>();
  if (!out_dir.empty()) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--out-dir") {
        ++i;
        continue;
      }
      if (args[i].rfind("--out-dir=", 0) == 0) continue;
      kept.push_back(args[i]);
    }
    args = std::move(kept);
    args.insert(args.begin(), {"--out-dir", out_dir});
  }
  std::cerr << "rerunning:";
  for (const auto& a : args) std::cerr << ' ' << a;
  std::cerr << '\n';
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Quantum network targets and network-local model fitting"};
  app.require_subcommand(1);
  std::string out_dir = default_out_dir().string();
  app.add_option("--out-dir", out_dir, "Output directory (default $NETLOCAL_OUT_DIR or .)");
  app.set_version_flag("--version", NETLOCAL_VERSION);

  QuantumFlags qf;
  auto* q = app.add_subcommand("quantum-dist", "Born-rule distribution of a quantum network");
  q->add_option("--network", qf.network, "Config file or triangle|square|pentagon|ring<n>")->required();
  q->add_option("--states", qf.states, "phi_plus|phi_minus|psi_plus|psi_minus|rotated1|rotated2")->capture_default_str();
  q->add_option("--theta", qf.theta, "Rotation angle of rotated1/rotated2")->capture_default_str();
  q->add_option("--visibility,-V", qf.visibility, "Werner visibility")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  q->add_option("--povm", qf.povm, "rgb4|tetra|computational")->capture_default_str();
  q->add_option("--u", qf.u, "RGB4 parameter u");
  q->add_option("--u2", qf.u2, "RGB4 parameter u^2");
  q->add_option("--mu", qf.mu, "Tetrahedral measurement parameter")->capture_default_str();
  q->add_option("--wiring", qf.wiring, "Particle-to-slot permutation (e.g. 5,0,1,2,3,4), ring, or auto");
  q->add_option("--coarse", qf.coarse, "Outcome groups to merge, e.g. 01 or 01,23");
  q->add_option("--raw", qf.raw, "JSON file with raw states and POVMs");
  q->add_option("--out,-o", qf.out, "Output file (.json array or .csv one value per line)");

  FitFlags ff;
  TrainFlags fit_tf;
  auto* fit = app.add_subcommand("fit", "Fit a network-local model to a target distribution");
  fit->add_option("--network", ff.network, "Config file or named network")->required();
  fit->add_option("--target", ff.target, "Target distribution file")->required();
  fit->add_option("--coarse", ff.coarse, "Outcome groups the target was coarse-grained with");
  fit->add_option("--name", ff.name, "Output file stem")->capture_default_str();
  fit->add_option("--progress", ff.progress, "Print every N iterations");
  fit->add_flag("--history", ff.history, "Write the per-iteration loss history");
  add_train_flags(fit, fit_tf);

  ScanFlags sf;
  TrainFlags scan_tf;
  CalibrateFlags scan_cf;
  auto* sc = app.add_subcommand("scan", "Run a preset parameter scan");
  sc->add_option("--preset", sf.preset, "rgb4-u-scan|rgb4-visibility|grid2d|robustness|calibrate")
      ->required()
      ->check(CLI::IsMember({"rgb4-u-scan", "rgb4-visibility", "grid2d", "robustness", "calibrate"}));
  sc->add_option("--name", sf.name, "Scan name (default: preset)");
  sc->add_option("--jobs,-j", sf.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  sc->add_flag("--warm-start", sf.warm_start, "Start each point from the previous point's model (sequential)");
  sc->add_flag("--quiet", sf.quiet, "No per-point progress");
  sc->add_option("--u2", sf.u2, "u^2 grid (rgb4-u-scan) or value (rgb4-visibility)");
  sc->add_option("--visibility", sf.visibility, "Visibility of the u^2 scan")->capture_default_str();
  sc->add_option("--v-grid", sf.v_grid, "Visibility grid");
  sc->add_option("--network", sf.network, "Ring network for grid2d/robustness")->capture_default_str();
  sc->add_option("--family", sf.family, "Rotated state family")->capture_default_str()->check(CLI::IsMember({1, 2}));
  sc->add_option("--coarse", sf.coarse, "Outcome groups to merge");
  sc->add_option("--theta-grid", sf.theta_grid, "theta grid")->capture_default_str();
  sc->add_option("--mu-grid", sf.mu_grid, "mu grid")->capture_default_str();
  sc->add_option("--grid-size", sf.grid_size, "Square grid over the full theta x mu domain");
  sc->add_option("--theta", sf.theta, "theta of the robustness realization")->capture_default_str();
  sc->add_option("--mu", sf.mu, "mu of the robustness realization")->capture_default_str();
  sc->add_option("--outcomes", scan_cf.outcomes, "Calibration preset: outcome counts")->capture_default_str();
  sc->add_option("--samples", scan_cf.samples, "Calibration preset: sample counts")->capture_default_str();
  sc->add_option("--trials", scan_cf.trials, "Calibration preset: trials per cell")->capture_default_str();
  add_train_flags(sc, scan_tf);

  CalibrateFlags cf;
  auto* cal = app.add_subcommand("calibrate", "Sampling-error study and scaling fits");
  cal->add_option("--outcomes", cf.outcomes, "Outcome counts, e.g. 4,16,64,256")->capture_default_str();
  cal->add_option("--samples", cf.samples, "Sample counts, e.g. 1e3..1e6")->capture_default_str();
  cal->add_option("--trials", cf.trials, "Trials per cell")->capture_default_str()->check(CLI::PositiveNumber);
  cal->add_option("--seed", cf.seed, "Base seed")->capture_default_str();
  cal->add_option("--jobs,-j", cf.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cal->add_option("--name", cf.name, "Output file stem")->capture_default_str();

  ExportFlags ef;
  auto* ex = app.add_subcommand("export-strats", "Export a party's response function on a lattice");
  ex->add_option("--checkpoint", ef.checkpoint, "Checkpoint file")->required();
  ex->add_option("--party", ef.party, "Party name (default: every two-source party)");
  ex->add_option("--resolution", ef.resolution, "Lattice points per axis")->capture_default_str()->check(CLI::PositiveNumber);
  ex->add_option("--out,-o", ef.out, "Output CSV (or stem when exporting several parties)");

  std::string manifest_path, rerun_out;
  auto* rr = app.add_subcommand("rerun", "Replay a run from its manifest");
  rr->add_option("manifest", manifest_path, "Manifest file")->required();
  rr->add_option("--into", rerun_out, "Write outputs to this directory instead");

  std::vector<const char*> argv{"netlocal"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const Context ctx{args, out_dir};
    if (q->parsed()) return cmd_quantum_dist(qf, q, ctx);
    if (fit->parsed()) return cmd_fit(ff, fit_tf, fit, ctx);
    if (sc->parsed()) {
      scan_cf.seed = scan_tf.seed;
      scan_cf.jobs = sf.jobs;
      scan_cf.name = sf.name.empty() ? "calibrate" : sf.name;
      return cmd_scan(sf, scan_tf, scan_cf, sc, ctx);
    }
    if (cal->parsed()) return run_calibration(cf, cal, ctx, "calibrate");
    if (ex->parsed()) return cmd_export(ef, ex, ctx);
    if (rr->parsed()) return cmd_rerun(manifest_path, rerun_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.where() << ": " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "malformed input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  retain_freed_memory();
  return run(std::vector<std::string>(argv + 1, argv + argc));
}
