#include "basic/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "basic/errors.hpp"
#include "basic/io.hpp"
#include "basic/map_estimator.hpp"
#include "basic/model.hpp"
#include "basic/oracle.hpp"
#include "basic/pipeline.hpp"
#include "json.hpp"

namespace basic {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(' ');
    auto e = item.find_last_not_of(' ');
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s, const std::string& flag) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(flag + ": cannot parse '" + s + "' as a number");
}

std::vector<double> parse_numbers(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_number(item, flag));
  return out;
}

// "point:0.1", "beta:2:5" or a bare number (point mass).
Atom parse_atom(const std::string& s) {
  auto parts = std::vector<std::string>{};
  std::stringstream ss(s);
  std::string p;
  while (std::getline(ss, p, ':')) parts.push_back(p);
  if (parts.size() == 1) return Atom::point(parse_number(parts[0], "--dictionary"));
  if (parts.size() == 2 && parts[0] == "point") return Atom::point(parse_number(parts[1], "--dictionary"));
  if (parts.size() == 3 && parts[0] == "beta")
    return Atom::beta(parse_number(parts[1], "--dictionary"), parse_number(parts[2], "--dictionary"));
  throw UsageError("--dictionary: cannot parse atom '" + s + "' (use point:q, beta:a:b or a number)");
}

std::string format_value(double x, bool raw) {
  char buf[64];
  std::snprintf(buf, sizeof buf, raw ? "%.17g" : "%.6g", x);
  return buf;
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

// Flags shared by every command that needs a model.
struct ModelFlags {
  std::string family = "normal-mean";
  std::string eta;
  std::string dictionary;
  std::string weights;

  void attach(CLI::App* app) {
    app->add_option("--model", family, "Likelihood family")
        ->check(CLI::IsMember({"normal-mean", "normal-var", "normal-meanvar", "poisson", "bernoulli", "laplace-scale"}));
    app->add_option("--eta", eta, "Comma-separated hyperparameters (moment-matched from the data when omitted)");
    app->add_option("--dictionary", dictionary, "Changepoint-frequency atoms: point:q, beta:a:b or q, comma-separated");
    app->add_option("--weights", weights, "Atom weights (uniform when omitted)");
  }

  Family parsed_family() const { return parse_family(family); }

  std::optional<std::vector<double>> parsed_eta() const {
    if (eta.empty()) return std::nullopt;
    auto v = parse_numbers(eta, "--eta");
    if (static_cast<int>(v.size()) != LikelihoodSpec::eta_size(parsed_family()))
      throw UsageError("--eta: " + family + " takes " + std::to_string(LikelihoodSpec::eta_size(parsed_family())) +
                       " values");
    return v;
  }

  std::optional<ChangepointPrior> parsed_prior() const {
    if (dictionary.empty()) {
      if (!weights.empty()) throw UsageError("--weights requires --dictionary");
      return std::nullopt;
    }
    std::vector<Atom> atoms;
    for (const auto& item : split_list(dictionary)) atoms.push_back(parse_atom(item));
    std::vector<double> w;
    if (weights.empty()) {
      w.assign(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
    } else {
      w = parse_numbers(weights, "--weights");
      if (w.size() != atoms.size()) throw UsageError("--weights must give one weight per dictionary atom");
    }
    double total = 0.0;
    for (double x : w) total += x;
    if (std::abs(total - 1.0) > 1e-6) throw UsageError("--weights must sum to 1");
    for (double& x : w) x /= total;
    return ChangepointPrior(std::move(atoms), std::move(w));
  }

  ChangepointPrior prior_or_default(int J) const {
    if (auto p = parsed_prior()) return *p;
    if (J < 2) throw UsageError("a single sequence needs an explicit --dictionary");
    return init_weights(J);
  }

  LikelihoodSpec spec_or_init(const DataMatrix& X, std::vector<std::string>& warnings) const {
    if (auto e = parsed_eta()) return LikelihoodSpec::from_eta(parsed_family(), *e);
    const std::vector<double> ones(LikelihoodSpec::eta_size(parsed_family()), 1.0);
    LikelihoodSpec::from_eta(parsed_family(), ones).check_data(X);
    EtaInit init = init_eta(X, parsed_family());
    for (auto& w : init.warnings) warnings.push_back("init_eta: " + w);
    return init.spec;
  }
};

struct InputFlags {
  std::string path;
  bool header = false;
  bool ids = false;
  std::string delimiter;

  void attach(CLI::App* app) {
    app->add_option("--input", path, "Delimited data file (rows = sequences)")->required()->check(CLI::ExistingFile);
    app->add_flag("--header", header, "First line holds position labels");
    app->add_flag("--ids", ids, "First field of each row is a sequence ID");
    app->add_option("--delimiter", delimiter, "Field delimiter: comma, tab or a single character (detected by default)");
  }

  FormatOptions options() const {
    FormatOptions o;
    o.header = header;
    o.row_ids = ids;
    if (delimiter == "comma") o.delimiter = ',';
    else if (delimiter == "tab" || delimiter == "\\t") o.delimiter = '\t';
    else if (delimiter.size() == 1) o.delimiter = delimiter[0];
    else if (!delimiter.empty()) throw UsageError("--delimiter must be comma, tab or one character");
    return o;
  }

  Dataset load() const { return load_dataset(path, options()); }

  json echo() const {
    return json{{"path", path}, {"header", header}, {"ids", ids}, {"delimiter", delimiter},
                {"fnv1a64", hex(file_hash(path))}};
  }
};

json prior_json(const ChangepointPrior& p) {
  json atoms = json::array();
  for (const auto& a : p.atoms) atoms.push_back(a.describe());
  return json{{"atoms", atoms}, {"weights", p.weights}};
}

json spec_json(const LikelihoodSpec& s) {
  json eta = json::object();
  auto names = LikelihoodSpec::eta_names(s.family());
  for (int i = 0; i < s.eta_size(); ++i) eta[names[i]] = s.eta()[i];
  return json{{"family", family_name(s.family())}, {"eta", eta}};
}

void write_matrix_tsv(const fs::path& path, const Dataset& d, const DataMatrix& M, bool raw) {
  auto out = open_output(path);
  out << "sequence";
  for (const auto& l : d.labels) out << '\t' << l;
  out << '\n';
  for (int j = 0; j < M.rows(); ++j) {
    out << d.ids[j];
    for (double v : M.row(j)) out << '\t' << format_value(v, raw);
    out << '\n';
  }
}

void write_changepoints_tsv(const fs::path& path, const Dataset& d, const ChangeMatrix& Z) {
  auto out = open_output(path);
  out << "sequence\tposition\n";
  for (int j = 0; j < Z.J(); ++j)
    for (int t = 1; t < Z.T(); ++t)
      if (Z(j, t)) out << d.ids[j] << '\t' << d.labels[t] << '\n';
}

void write_q_tsv(const fs::path& path, const Dataset& d, const std::vector<double>& q, bool raw) {
  auto out = open_output(path);
  out << "position\tq_mean\n";
  for (std::size_t t = 0; t < q.size(); ++t) out << d.labels[t] << '\t' << format_value(q[t], raw) << '\n';
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

ChangeMatrix load_change_matrix(const std::string& path, int J, int T) {
  Dataset d = load_dataset(path);
  if (d.X.rows() != J || d.X.cols() != T)
    throw DataError("'" + path + "' must be a " + std::to_string(J) + " x " + std::to_string(T) + " 0/1 matrix");
  ChangeMatrix Z(J, T);
  for (int j = 0; j < J; ++j)
    for (int t = 0; t < T; ++t) {
      double v = d.X(j, t);
      if (v != 0.0 && v != 1.0) throw DataError("'" + path + "' must contain only 0 and 1", j + 1, t + 1);
      if (t == 0 && v != 0.0) throw DataError("'" + path + "': position 0 cannot hold a changepoint", j + 1, 1);
      Z(j, t) = static_cast<std::uint8_t>(v);
    }
  return Z;
}

struct RunFlags {
  InputFlags input;
  ModelFlags model;
  int burnin = 100;
  int samples = 100;
  std::string schedule = "default";
  bool fixed_weights = false;
  bool fixed_eta = false;
  int block_size = 50;
  long swaps = -1;
  std::uint64_t seed = 0;
  int chains = 1;
  bool median_center = false;
  bool remove_outliers = false;
  std::string out_dir;
  bool raw = false;
  bool timings = false;
  std::string sampler = "blocked";
  int naive_sweeps = 30;
};

json run_config_echo(const RunFlags& f, const RunConfig& cfg, const MCEMSchedule& schedule) {
  return json{{"model", f.model.family},
              {"eta", f.model.eta.empty() ? json("auto") : json(*f.model.parsed_eta())},
              {"dictionary", f.model.dictionary.empty() ? json("default") : json(f.model.dictionary)},
              {"weights", f.model.weights.empty() ? json("default") : json(f.model.weights)},
              {"burnin", cfg.burnin},
              {"samples", cfg.samples},
              {"mcem_schedule", schedule.iterations},
              {"mcem_weights", cfg.mcem.fit_weights},
              {"mcem_eta", cfg.mcem.fit_eta},
              {"block_size", cfg.sampler.block_size},
              {"swaps", cfg.sampler.swaps},
              {"sampler", f.sampler},
              {"naive_sweeps", cfg.naive_sweeps},
              {"chains", cfg.chains},
              {"median_center", f.median_center},
              {"remove_outliers", f.remove_outliers},
              {"raw", f.raw}};
}

int command_run(const RunFlags& f, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  Dataset d = f.input.load();
  PreprocessOptions pp;
  pp.median_center = f.median_center;
  pp.replace_outliers = f.remove_outliers;
  d.X = preprocess(d.X, pp);
  if (d.X.rows() < 2 && f.model.dictionary.empty())
    throw UsageError("a single sequence needs an explicit --dictionary");

  RunConfig cfg;
  cfg.family = f.model.parsed_family();
  cfg.eta = f.model.parsed_eta();
  cfg.prior = f.model.parsed_prior();
  cfg.burnin = f.burnin;
  cfg.samples = f.samples;
  if (f.schedule == "none") cfg.schedule = MCEMSchedule{};
  else if (f.schedule != "default") {
    MCEMSchedule s;
    for (double v : parse_numbers(f.schedule, "--mcem-schedule")) {
      if (v != std::floor(v)) throw UsageError("--mcem-schedule entries must be integers");
      s.iterations.push_back(static_cast<int>(v));
    }
    try {
      s.validate(f.burnin);
    } catch (const ValidationError& e) {
      throw UsageError(std::string("--mcem-schedule: ") + e.what());
    }
    cfg.schedule = s;
  }
  cfg.mcem.fit_weights = !f.fixed_weights;
  cfg.mcem.fit_eta = !f.fixed_eta;
  cfg.sampler.block_size = f.block_size;
  cfg.sampler.swaps = f.swaps;
  cfg.kind = f.sampler == "naive" ? SamplerKind::Naive : SamplerKind::Blocked;
  cfg.naive_sweeps = f.naive_sweeps;
  cfg.seed = f.seed;
  cfg.chains = f.chains;
  const MCEMSchedule schedule = cfg.schedule ? *cfg.schedule : MCEMSchedule::default_for(cfg.burnin);

  const auto t1 = clock::now();
  PosteriorSummary s = run(d.X, cfg);
  const auto t2 = clock::now();

  fs::path dir(f.out_dir);
  fs::create_directories(dir);
  std::vector<std::string> files;
  if (cfg.samples > 0) {
    write_matrix_tsv(dir / "marginal_probs.tsv", d, s.marginal, f.raw);
    write_q_tsv(dir / "q_posterior.tsv", d, s.q_mean, f.raw);
    write_matrix_tsv(dir / "theta_posterior.tsv", d, s.theta_mean, f.raw);
    files = {"marginal_probs.tsv", "q_posterior.tsv", "theta_posterior.tsv"};
    if (s.map) {
      write_changepoints_tsv(dir / "map_changepoints.tsv", d, s.map->Z);
      files.push_back("map_changepoints.tsv");
    }
  }

  json trajectory = json::array();
  for (const auto& r : s.trajectory)
    trajectory.push_back(json{{"iteration", r.iteration},
                              {"weights", r.weights},
                              {"eta", r.eta},
                              {"divergence", r.divergence},
                              {"eta_objective", r.eta_objective}});
  json manifest{{"software", "basic"},
                {"version", kVersion},
                {"command", "run"},
                {"argv", argv},
                {"input", f.input.echo()},
                {"seed", f.seed},
                {"config", run_config_echo(f, cfg, schedule)},
                {"data", json{{"sequences", d.X.rows()}, {"positions", d.X.cols()}}},
                {"initial_prior", prior_json(s.initial_prior)},
                {"initial_likelihood", spec_json(s.initial_spec)},
                {"final_prior", prior_json(s.prior)},
                {"final_likelihood", spec_json(s.spec)},
                {"mcem_trajectory", trajectory},
                {"chains", json{{"count", s.chains}, {"pooled", s.chains > 1}}},
                {"samples_used", s.samples_used},
                {"swaps_accepted", s.swaps_accepted},
                {"map", s.map ? json{{"iterations", s.map->iterations},
                                     {"converged", s.map->converged},
                                     {"changepoints", s.map->Z.total()}}
                              : json(nullptr)},
                {"outputs", files},
                {"warnings", s.warnings}};
  if (f.timings) {
    using ms = std::chrono::duration<double, std::milli>;
    manifest["timings_ms"] = json{{"load", ms(t1 - t0).count()}, {"inference", ms(t2 - t1).count()}};
  }
  write_json(dir / "manifest.json", manifest);
  for (const auto& w : s.warnings) err << "warning: " << w << '\n';
  out << "wrote " << files.size() + 1 << " files to " << dir.string() << '\n';
  return kExitOk;
}

struct SimulateFlags {
  ModelFlags model;
  int J = 9;
  int T = 100;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string truth_path;
  std::string theta_path;
};

std::vector<double> default_eta(Family f) {
  switch (f) {
    case Family::NormalMean: return {0.0, 1.0, 1.0};
    case Family::NormalVar: return {0.0, 3.0, 2.0};
    case Family::NormalMeanVar: return {0.0, 1.0, 3.0, 2.0};
    case Family::Poisson: return {2.0, 1.0};
    case Family::Bernoulli: return {1.0, 1.0};
    case Family::LaplaceScale: return {3.0, 2.0};
  }
  return {};
}

int command_simulate(const SimulateFlags& f, std::ostream& out) {
  if (f.J < 1 || f.T < 1) throw UsageError("--J and --T must be positive");
  const Family fam = f.model.parsed_family();
  auto eta = f.model.parsed_eta().value_or(default_eta(fam));
  LikelihoodSpec spec = LikelihoodSpec::from_eta(fam, eta);
  ChangepointPrior prior = f.model.prior_or_default(f.J);
  SyntheticData sim = generate_synthetic(f.J, f.T, prior, spec, f.seed);
  save_dataset(f.out_path, make_dataset(sim.X));
  if (!f.truth_path.empty()) {
    DataMatrix z(f.J, f.T);
    for (int j = 0; j < f.J; ++j)
      for (int t = 0; t < f.T; ++t) z(j, t) = sim.Z(j, t);
    save_dataset(f.truth_path, make_dataset(z));
  }
  if (!f.theta_path.empty()) save_dataset(f.theta_path, make_dataset(sim.theta));
  out << "simulated " << f.J << " x " << f.T << " (" << sim.Z.total() << " changepoints) to " << f.out_path << '\n';
  return kExitOk;
}

struct OracleFlags {
  InputFlags input;
  ModelFlags model;
  int burnin = 200;
  int samples = 20000;
  std::uint64_t seed = 0;
  double threshold = 0.02;
  int block_size = 50;
  bool raw = false;
};

int command_oracle(const OracleFlags& f, std::ostream& out) {
  Dataset d = f.input.load();
  std::vector<std::string> warnings;
  LikelihoodSpec spec = f.model.spec_or_init(d.X, warnings);
  ChangepointPrior prior = f.model.prior_or_default(d.X.rows());
  PriorMoments moments = build_moment_tables(prior, d.X.rows());
  EnumerationResult exact = enumerate_posterior(d.X, moments, spec);
  out << "configurations\t" << exact.configurations << '\n';
  out << "log_evidence\t" << format_value(exact.log_evidence, true) << '\n';
  out << "map_changepoints\t" << exact.map.total() << '\n';
  if (f.samples == 0) return kExitOk;

  RunConfig cfg;
  cfg.family = spec.family();
  cfg.eta = std::vector<double>(spec.eta().begin(), spec.eta().end());
  cfg.prior = prior;
  cfg.burnin = f.burnin;
  cfg.samples = f.samples;
  cfg.schedule = MCEMSchedule{};
  cfg.mcem.fit_weights = cfg.mcem.fit_eta = false;
  cfg.sampler.block_size = f.block_size;
  cfg.seed = f.seed;
  cfg.run_map = false;
  PosteriorSummary s = run(d.X, cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < exact.marginal.values().size(); ++i)
    worst = std::max(worst, std::abs(exact.marginal.values()[i] - s.marginal.values()[i]));
  out << "max_abs_marginal_diff\t" << format_value(worst, f.raw) << '\n';
  const bool ok = worst < f.threshold;
  out << (ok ? "PASS" : "FAIL") << "\tthreshold " << format_value(f.threshold, f.raw) << '\n';
  return ok ? kExitOk : kExitRuntime;
}

struct MapFlags {
  InputFlags input;
  ModelFlags model;
  std::string init_path;
  int block_size = 50;
  int max_iterations = 100;
  std::string out_dir;
};

int command_map(const MapFlags& f, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Dataset d = f.input.load();
  std::vector<std::string> warnings;
  LikelihoodSpec spec = f.model.spec_or_init(d.X, warnings);
  ChangepointPrior prior = f.model.prior_or_default(d.X.rows());
  PriorMoments moments = build_moment_tables(prior, d.X.rows());
  ChangeMatrix init = f.init_path.empty() ? ChangeMatrix(d.X.rows(), d.X.cols())
                                          : load_change_matrix(f.init_path, d.X.rows(), d.X.cols());
  SegmentTable table(d.X, spec);
  MapConfig mc;
  mc.block_size = f.block_size;
  mc.max_iterations = f.max_iterations;
  MapResult map = map_estimate(init, table, moments, mc);
  if (!map.converged) warnings.push_back("MAP search stopped at the iteration cap");
  const double lj = log_joint(d.X, map.Z, spec, moments);

  fs::path dir(f.out_dir);
  fs::create_directories(dir);
  write_changepoints_tsv(dir / "map_changepoints.tsv", d, map.Z);
  json manifest{{"software", "basic"},
                {"version", kVersion},
                {"command", "map-only"},
                {"argv", argv},
                {"input", f.input.echo()},
                {"prior", prior_json(prior)},
                {"likelihood", spec_json(spec)},
                {"init", f.init_path.empty() ? json("zero") : json(f.init_path)},
                {"map", json{{"iterations", map.iterations},
                             {"converged", map.converged},
                             {"changepoints", map.Z.total()},
                             {"log_joint", lj}}},
                {"warnings", warnings}};
  write_json(dir / "manifest.json", manifest);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  out << "MAP: " << map.Z.total() << " changepoints, log joint " << format_value(lj, true) << '\n';
  return kExitOk;
}

int command_summarize(const std::string& dir_name, double q_threshold, std::ostream& out) {
  fs::path dir(dir_name);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DataError("no manifest.json in '" + dir_name + "'");
  json m;
  try {
    m = json::parse(mf);
  } catch (const json::exception& e) {
    throw DataError("manifest.json is not valid JSON: " + std::string(e.what()));
  }
  out << "command\t" << m.value("command", "?") << '\n';
  if (m.contains("data"))
    out << "data\t" << m["data"]["sequences"].get<int>() << " sequences x " << m["data"]["positions"].get<int>()
        << " positions\n";
  if (m.contains("final_likelihood")) out << "likelihood\t" << m["final_likelihood"].dump() << '\n';
  if (m.contains("final_prior")) out << "prior\t" << m["final_prior"].dump() << '\n';

  std::ifstream cp(dir / "map_changepoints.tsv");
  if (cp) {
    std::string line;
    std::getline(cp, line);
    std::map<std::string, int> per_position;
    long total = 0;
    while (std::getline(cp, line)) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      ++per_position[line.substr(tab + 1)];
      ++total;
    }
    out << "map_changepoints\t" << total << " at " << per_position.size() << " positions\n";
  }
  std::ifstream qf(dir / "q_posterior.tsv");
  if (qf) {
    std::string line;
    std::getline(qf, line);
    out << "positions with E[q] >= " << format_value(q_threshold, false) << ':';
    while (std::getline(qf, line)) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      if (std::stod(line.substr(tab + 1)) >= q_threshold) out << ' ' << line.substr(0, tab);
    }
    out << '\n';
  }
  if (m.contains("warnings"))
    for (const auto& w : m["warnings"]) out << "warning\t" << w.get<std::string>() << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian multi-sequence changepoint detection", "basic"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::vector<std::string> args(argv + 1, argv + argc);

  RunFlags rf;
  auto* run_cmd = app.add_subcommand("run", "Burn-in with MCEM, posterior sampling, summaries and MAP");
  rf.input.attach(run_cmd);
  rf.model.attach(run_cmd);
  run_cmd->add_option("--burnin", rf.burnin, "Burn-in iterations")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--samples", rf.samples, "Sampling iterations")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--mcem-schedule", rf.schedule,
                      "Burn-in iterations followed by an M-step: comma-separated, 'default' or 'none'");
  run_cmd->add_flag("--fixed-weights", rf.fixed_weights, "Keep the changepoint-frequency weights fixed");
  run_cmd->add_flag("--fixed-eta", rf.fixed_eta, "Keep the likelihood hyperparameters fixed");
  run_cmd->add_option("--block-size", rf.block_size, "Row block size (0 = whole rows)")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--swaps", rf.swaps, "Column swap proposals per iteration (default 10 T)");
  run_cmd->add_option("--seed", rf.seed, "Random seed");
  run_cmd->add_option("--chains", rf.chains, "Independent chains pooled for summaries")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--median-center", rf.median_center, "Median-center every sequence");
  run_cmd->add_flag("--remove-outliers", rf.remove_outliers, "Replace isolated outliers by the local median");
  run_cmd->add_option("--out-dir", rf.out_dir, "Output directory")->required();
  run_cmd->add_flag("--raw", rf.raw, "Print values with full precision");
  run_cmd->add_flag("--timings", rf.timings, "Record wall-clock timings in the manifest");
  run_cmd->add_option("--sampler", rf.sampler, "blocked or naive")->check(CLI::IsMember({"blocked", "naive"}));
  run_cmd->add_option("--naive-sweeps", rf.naive_sweeps, "Naive sweeps per iteration")->check(CLI::PositiveNumber);

  SimulateFlags sf;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw a synthetic data set from the model");
  sf.model.attach(sim_cmd);
  sim_cmd->add_option("--J", sf.J, "Number of sequences")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--T", sf.T, "Positions per sequence")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sf.seed, "Random seed");
  sim_cmd->add_option("--out", sf.out_path, "Data file to write")->required();
  sim_cmd->add_option("--truth", sf.truth_path, "Also write the true changepoint matrix");
  sim_cmd->add_option("--theta", sf.theta_path, "Also write the true parameter matrix");

  OracleFlags of;
  auto* oracle_cmd = app.add_subcommand("oracle", "Exact enumeration on tiny inputs, compared with the sampler");
  of.input.attach(oracle_cmd);
  of.model.attach(oracle_cmd);
  oracle_cmd->add_option("--burnin", of.burnin, "Sampler burn-in")->check(CLI::NonNegativeNumber);
  oracle_cmd->add_option("--samples", of.samples, "Sampler draws (0 skips the comparison)")
      ->check(CLI::NonNegativeNumber);
  oracle_cmd->add_option("--seed", of.seed, "Random seed");
  oracle_cmd->add_option("--threshold", of.threshold, "Maximum allowed marginal discrepancy");
  oracle_cmd->add_option("--block-size", of.block_size, "Row block size")->check(CLI::NonNegativeNumber);
  oracle_cmd->add_flag("--raw", of.raw, "Print values with full precision");

  MapFlags mf;
  auto* map_cmd = app.add_subcommand("map-only", "MAP changepoints under fixed priors");
  mf.input.attach(map_cmd);
  mf.model.attach(map_cmd);
  map_cmd->add_option("--init", mf.init_path, "Starting 0/1 changepoint matrix (all zero by default)");
  map_cmd->add_option("--block-size", mf.block_size, "Row block size")->check(CLI::NonNegativeNumber);
  map_cmd->add_option("--max-iterations", mf.max_iterations, "Iteration cap")->check(CLI::PositiveNumber);
  map_cmd->add_option("--out-dir", mf.out_dir, "Output directory")->required();

  std::string summary_dir;
  double q_threshold = 0.5;
  auto* sum_cmd = app.add_subcommand("summarize", "Summarize the outputs of a previous run");
  sum_cmd->add_option("--run-dir", summary_dir, "Output directory of run or map-only")->required();
  sum_cmd->add_option("--q-threshold", q_threshold, "Report positions whose E[q] reaches this value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return command_run(rf, args, out, err);
    if (*sim_cmd) return command_simulate(sf, out);
    if (*oracle_cmd) return command_oracle(of, out);
    if (*map_cmd) return command_map(mf, args, out, err);
    if (*sum_cmd) return command_summarize(summary_dir, q_threshold, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ValidationError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace basic
