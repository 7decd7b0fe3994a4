#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ngmix/errors.hpp"
#include "ngmix/estimator.hpp"
#include "ngmix/io.hpp"
#include "ngmix/log.hpp"
#include "ngmix/parallel.hpp"
#include "ngmix/predict.hpp"
#include "ngmix/tv.hpp"

namespace ngmix {
namespace {

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;
};

GridSpec parse_grid(const std::string& text) {
  GridSpec g;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d%c", &g.lo, &g.hi, &g.n, &tail) != 3)
    throw Usage("--grid expects lo:hi:n, got '" + text + "'");
  if (!(g.lo > 0.0) || !(g.hi > g.lo) || g.n < 2) throw Usage("--grid needs 0 < lo < hi and n >= 2");
  return g;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Options {
  std::string config, data, out, params, horizon, family = "nig", grid;
  std::optional<int> subjects, threads, iters, draws;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<double> cut, threshold, window;
  double scr = 0.0, age = 0.0;
  bool female = false, black = false, with_noise = false, verbose = false;
};

int cmd_simulate(const Options& o, std::ostream& out) {
  RunConfig cfg = load_config(o.config);
  const int subjects = o.subjects.value_or(cfg.simulate.subjects);
  const std::uint64_t seed = o.seed.value_or(cfg.fit.seed);
  const LongTable table = simulate_table(cfg, subjects, seed);
  write_table(o.out, table);
  out << "wrote " << table.rows() << " rows for " << subjects << " subjects to " << o.out << '\n';
  return 0;
}

int cmd_fit(const Options& o, std::ostream& out) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.fit.seed = *o.seed;
  if (o.iters) {
    cfg.fit.schedule.total_iters = *o.iters;
    if (cfg.fit.schedule.burn_in >= *o.iters) cfg.fit.schedule.burn_in = -1;
  }
  cfg.fit.threads = resolve_threads(o.threads.value_or(cfg.fit.threads));
  const Dataset data = ingest(o.data, cfg.model.formula);
  const ModelParams init = initial_params(model_skeleton(cfg.model), data.subjects);
  const FitResult res = fit(data.subjects, init, cfg.fit, data.fixed_names, data.random_names);
  write_results(res, cfg, o.out);
  for (const auto& w : res.warnings) log_warning(w);
  out << "fitted " << data.subjects.size() << " subjects; results in " << o.out << '\n';
  return 0;
}

int cmd_predict(const Options& o, std::ostream& out) {
  const StoredFit stored = read_params(o.params);
  PredictConfig pc;
  GibbsConfig gibbs{1, true};
  std::uint64_t seed = 1;
  int threads = 0;
  if (!o.config.empty()) {
    const RunConfig cfg = load_config(o.config);
    pc = cfg.predict;
    seed = cfg.fit.seed;
    threads = cfg.fit.threads;
  }
  if (o.mode) pc.mode = parse_predict_mode(*o.mode);
  if (o.cut) pc.cut = *o.cut;
  if (o.draws) pc.draws = *o.draws;
  if (o.with_noise) pc.with_noise = true;
  if (o.threshold || o.window) {
    DeclineCriterion c = pc.criterion.value_or(DeclineCriterion{});
    if (o.threshold) c.threshold = *o.threshold;
    if (o.window) c.window = *o.window;
    pc.criterion = c;
  }
  if (o.seed) seed = *o.seed;
  threads = resolve_threads(o.threads.value_or(threads));

  const Dataset data = ingest(o.data, stored.formula);
  std::map<std::string, SubjectRecord> horizon;
  if (!o.horizon.empty()) {
    const Dataset h = build_dataset(read_table(o.horizon, false), stored.formula, o.horizon, true);
    for (const auto& rec : h.subjects) horizon[rec.id] = rec;
    for (const auto& [id, rec] : horizon)
      if (std::none_of(data.subjects.begin(), data.subjects.end(), [&](const SubjectRecord& s) { return s.id == id; }))
        throw IoError(o.horizon + ": subject '" + id + "' has no observations in " + o.data);
  }
  std::vector<SubjectRecord> subjects;
  for (const auto& s : data.subjects)
    if (horizon.empty() || horizon.count(s.id)) subjects.push_back(s);
  std::vector<PredictRequest> requests;
  for (const auto& s : subjects) {
    PredictRequest r;
    r.mode = pc.mode;
    r.cut = pc.cut;
    r.criterion = pc.criterion;
    r.draws = pc.draws;
    r.burn_in = pc.burn_in;
    r.with_noise = pc.with_noise;
    r.gibbs = gibbs;
    r.grid = stored.grid;
    r.seed = seed;
    if (const auto it = horizon.find(s.id); it != horizon.end()) {
      r.horizon = it->second.times;
      r.x_h = it->second.x;
      r.d_h = it->second.d;
    }
    requests.push_back(std::move(r));
  }
  const auto summaries = predict_all(stored.params, subjects, requests, threads);
  write_predictions(o.out, summaries);
  out << "wrote predictions for " << summaries.size() << " subjects to " << o.out << '\n';
  return 0;
}

int cmd_tv(const Options& o, std::ostream& out) {
  if (o.family != "nig") throw ParameterError("tv: only --family nig is supported");
  const GridSpec g = parse_grid(o.grid);
  std::ostringstream csv;
  csv << "a,tv_cauchy,tv_gaussian\n";
  for (int k = 0; k < g.n; ++k) {
    const double a = std::exp(std::log(g.lo) + (std::log(g.hi) - std::log(g.lo)) * k / (g.n - 1));
    csv << fmt(a) << ',' << fmt(tv_to_nearest_cauchy(a).tv) << ',' << fmt(tv_to_nearest_gaussian(a).tv) << '\n';
  }
  if (o.out.empty()) {
    out << csv.str();
  } else {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw IoError("cannot write '" + o.out + "'");
    f << csv.str();
  }
  return 0;
}

int cmd_egfr(const Options& o, std::ostream& out) {
  out << fmt(egfr_from_scr(o.scr, o.age, o.female, o.black)) << '\n';
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ngmix: mixed-effects models with normal variance-mean mixture components", "ngmix"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("-v,--verbose", o.verbose, "log progress to stderr");

  auto* sim = app.add_subcommand("simulate", "simulate a long-format data set from a config");
  sim->add_option("--config", o.config, "JSON config")->required();
  sim->add_option("--out", o.out, "output CSV")->required();
  sim->add_option("--subjects", o.subjects, "number of subjects");
  sim->add_option("--seed", o.seed, "random seed");

  auto* fit_cmd = app.add_subcommand("fit", "fit a model");
  fit_cmd->add_option("--config", o.config, "JSON config")->required();
  fit_cmd->add_option("--data", o.data, "long-format CSV")->required();
  fit_cmd->add_option("--out", o.out, "output directory")->required();
  fit_cmd->add_option("--seed", o.seed, "random seed");
  fit_cmd->add_option("--iters", o.iters, "number of iterations");
  fit_cmd->add_option("--threads", o.threads, "worker threads (default NGMIX_THREADS or 1)");

  auto* pred = app.add_subcommand("predict", "subject-level predictive summaries");
  pred->add_option("--params", o.params, "params.json written by fit")->required();
  pred->add_option("--data", o.data, "conditioning data CSV")->required();
  pred->add_option("--out", o.out, "output CSV")->required();
  pred->add_option("--config", o.config, "JSON config with a predict section");
  pred->add_option("--horizon", o.horizon, "CSV of prediction times and covariates (no y); only its subjects are predicted");
  pred->add_option("--mode", o.mode, "nowcast | smooth | forecast");
  pred->add_option("--cut", o.cut, "forecast: last usable observation time");
  pred->add_option("--draws", o.draws, "Monte Carlo draws");
  pred->add_option("--threshold", o.threshold, "decline criterion: relative loss per unit time");
  pred->add_option("--window", o.window, "decline criterion: trailing window");
  pred->add_flag("--with-noise", o.with_noise, "add measurement noise to the draws");
  pred->add_option("--seed", o.seed, "random seed");
  pred->add_option("--threads", o.threads, "worker threads (default NGMIX_THREADS or 1)");

  auto* tv = app.add_subcommand("tv", "total-variation distance curves");
  tv->add_option("--family", o.family, "mixture family")->default_val("nig");
  tv->add_option("--grid", o.grid, "lo:hi:n, log-spaced")->required();
  tv->add_option("--out", o.out, "output CSV (default stdout)");

  auto* egfr = app.add_subcommand("egfr", "eGFR from serum creatinine");
  egfr->add_option("--scr", o.scr, "serum creatinine, umol/L")->required();
  egfr->add_option("--age", o.age, "age, years")->required();
  egfr->add_flag("--female", o.female);
  egfr->add_flag("--black", o.black);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    err << "ngmix" << (subs.empty() ? "" : " " + subs.front()->get_name()) << ": error: " << e.what() << '\n';
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  if (o.verbose) set_log_level(LogLevel::Info);
  try {
    if (name == "simulate") return cmd_simulate(o, out);
    if (name == "fit") return cmd_fit(o, out);
    if (name == "predict") return cmd_predict(o, out);
    if (name == "tv") return cmd_tv(o, out);
    return cmd_egfr(o, out);
  } catch (const Usage& e) {
    err << "ngmix " << name << ": error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "ngmix " << name << ": error: " << msg << '\n';
    return 1;
  }
}

}  // namespace ngmix
