#include "ngmix/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ngmix/errors.hpp"
#include "ngmix/log.hpp"
#include "ngmix/random.hpp"

namespace ngmix {
namespace {

using json = nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(trim(cell));
  return out;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

double parse_number(const std::string& s, const std::string& source, int line, const std::string& column) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    std::ostringstream os;
    os << source << ":" << line << ": column '" << column << "': non-numeric value '" << s << "'";
    throw IoError(os.str());
  }
  return v;
}

std::string fmt(double v, int digits = 17) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// JSON helpers: every lookup names the offending key.
class Node {
 public:
  Node(const json& j, std::string path, std::string source) : j_(j), path_(std::move(path)), source_(std::move(source)) {}

  void allow(std::initializer_list<const char*> keys) const {
    if (!j_.is_object()) fail("expected an object");
    for (const auto& [k, v] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
        throw ConfigError(source_ + ": unknown key '" + where(k) + "'");
    }
  }
  bool has(const char* key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }
  Node child(const char* key) const { return Node(j_.at(key), where(key), source_); }

  template <class T>
  T get(const char* key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(source_ + ": key '" + where(key) + "' has the wrong type");
    }
  }
  const json& raw() const { return j_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source_ + ": '" + (path_.empty() ? "<root>" : path_) + "': " + what);
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& source() const { return source_; }

 private:
  const json& j_;
  std::string path_;
  std::string source_;
};

template <class F>
auto with_context(const std::string& context, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(context + ": " + e.what());
  }
}

NvmSpec parse_component(const Node& n, const char* kind) {
  NvmSpec spec;
  spec.family = with_context(n.source(), [&] { return parse_family(n.get<std::string>("family", "normal")); });
  spec.nu = n.get<double>("nu", 1.0);
  if (!(spec.nu > 0.0)) n.fail(std::string(kind) + " nu must be positive");
  return spec;
}

ModelConfig parse_model(const Node& n) {
  n.allow({"fixed", "random", "noise", "random_effects", "process"});
  ModelConfig m;
  m.formula.fixed = n.get<std::vector<std::string>>("fixed", {"1"});
  m.formula.random = n.get<std::vector<std::string>>("random", {});
  if (m.formula.fixed.empty()) n.fail("'fixed' must name at least one column");
  if (n.has("noise")) {
    const Node c = n.child("noise");
    c.allow({"family", "nu", "scope"});
    m.noise = parse_component(c, "noise");
    m.scope = with_context(n.source(), [&] { return parse_noise_scope(c.get<std::string>("scope", "observation")); });
  }
  if (n.has("random_effects")) {
    const Node c = n.child("random_effects");
    c.allow({"family", "nu"});
    m.re = parse_component(c, "random-effect");
  }
  if (n.has("process")) {
    const Node c = n.child("process");
    c.allow({"kind", "family", "nu", "kappa0", "mesh_nodes", "max_nodes"});
    m.process = with_context(n.source(), [&] { return parse_process_kind(c.get<std::string>("kind", "none")); });
    m.proc = parse_component(c, "process");
    m.kappa0 = c.get<double>("kappa0", 1.0);
    m.grid.mesh_nodes = c.get<int>("mesh_nodes", m.grid.mesh_nodes);
    m.grid.max_nodes = c.get<int>("max_nodes", m.grid.max_nodes);
    if (!(m.kappa0 > 0.0)) c.fail("kappa0 must be positive");
    if (m.grid.mesh_nodes < 2 || m.grid.max_nodes < 2) c.fail("mesh_nodes and max_nodes must be at least 2");
  }
  return m;
}

json model_json(const ModelConfig& m) {
  json j;
  j["fixed"] = m.formula.fixed;
  j["random"] = m.formula.random;
  j["noise"] = {{"family", to_string(m.noise.family)}, {"nu", m.noise.nu}, {"scope", to_string(m.scope)}};
  j["random_effects"] = {{"family", to_string(m.re.family)}, {"nu", m.re.nu}};
  j["process"] = {{"kind", to_string(m.process)},  {"family", to_string(m.proc.family)},
                  {"nu", m.proc.nu},               {"kappa0", m.kappa0},
                  {"mesh_nodes", m.grid.mesh_nodes}, {"max_nodes", m.grid.max_nodes}};
  return j;
}

Eigen::VectorXd vector_of(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_of(const json& j, int q) {
  if (j.is_number()) return j.get<double>() * Eigen::MatrixXd::Identity(q, q);
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != static_cast<std::size_t>(out.cols())) throw ShapeError("ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c) out(r, c) = rows[r][c];
  }
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i)))
      out.push_back(v(i));
    else
      out.push_back(nullptr);
  }
  return out;
}

// Fill parameter values from a {"beta": ..., "sigma": ...} object onto `params`.
void apply_parameters(const Node& n, const Formula& formula, ModelParams& params) {
  n.allow({"beta", "sigma", "Sigma", "mu_u", "kappa", "mu_w", "nu_z", "nu_u", "nu_w"});
  try {
    if (n.has("beta")) {
      const json& b = n.raw().at("beta");
      if (b.is_object()) {
        for (const auto& [k, v] : b.items()) {
          const auto it = std::find(formula.fixed.begin(), formula.fixed.end(), k == "(Intercept)" ? "1" : k);
          if (it == formula.fixed.end()) n.fail("beta names unknown column '" + k + "'");
          params.beta(it - formula.fixed.begin()) = v.get<double>();
        }
      } else {
        const Eigen::VectorXd v = vector_of(b);
        if (v.size() != params.p()) n.fail("beta has the wrong length");
        params.beta = v;
      }
    }
    params.sigma = n.get<double>("sigma", params.sigma);
    if (n.has("Sigma")) {
      const Eigen::MatrixXd S = matrix_of(n.raw().at("Sigma"), params.q());
      if (S.rows() != params.q() || S.cols() != params.q()) n.fail("Sigma has the wrong shape");
      params.Sigma = S;
    }
    if (n.has("mu_u")) {
      const json& mu = n.raw().at("mu_u");
      params.mu_u = mu.is_number() ? Eigen::VectorXd::Constant(params.q(), mu.get<double>()) : vector_of(mu);
      if (params.mu_u.size() != params.q()) n.fail("mu_u has the wrong length");
    }
  } catch (const json::exception&) {
    n.fail("malformed parameter value");
  }
  params.kappa = n.get<double>("kappa", params.kappa);
  params.mu_w = n.get<double>("mu_w", params.mu_w);
  params.noise.nu = n.get<double>("nu_z", params.noise.nu);
  params.re.nu = n.get<double>("nu_u", params.re.nu);
  params.proc.nu = n.get<double>("nu_w", params.proc.nu);
}

}  // namespace

int LongTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

LongTable parse_table(const std::string& text, const std::string& source, bool require_y) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
    if (!trim(line).empty()) header = split(line);
  }
  if (header.empty()) throw IoError(source + ": empty file");
  auto find = [&](const std::string& name, bool required) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw IoError(source + ": missing column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };
  const int c_id = find("subject_id", true);
  const int c_time = find("time", true);
  const int c_y = find("y", require_y);

  LongTable t;
  std::vector<int> cov_idx;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c == c_id || c == c_time || c == c_y) continue;
    if (header[c].empty()) throw IoError(source + ":" + std::to_string(lineno) + ": empty column name");
    if (t.column(header[c]) >= 0) throw IoError(source + ": duplicate column '" + header[c] + "'");
    t.columns.push_back(header[c]);
    cov_idx.push_back(c);
  }

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      std::ostringstream os;
      os << source << ":" << lineno << ": expected " << header.size() << " fields, found " << cells.size();
      throw IoError(os.str());
    }
    if (cells[c_id].empty()) throw IoError(source + ":" + std::to_string(lineno) + ": empty subject_id");
    t.subject.push_back(cells[c_id]);
    t.time.push_back(parse_number(cells[c_time], source, lineno, "time"));
    t.y.push_back(c_y < 0 || is_missing(cells[c_y]) ? kNaN : parse_number(cells[c_y], source, lineno, "y"));
    std::vector<double> row;
    row.reserve(cov_idx.size());
    for (std::size_t k = 0; k < cov_idx.size(); ++k) {
      const std::string& cell = cells[cov_idx[k]];
      row.push_back(is_missing(cell) ? kNaN : parse_number(cell, source, lineno, t.columns[k]));
    }
    t.cov.push_back(std::move(row));
    t.line.push_back(lineno);
  }
  return t;
}

LongTable read_table(const std::string& path, bool require_y) { return parse_table(slurp(path), path, require_y); }

void write_table(const std::string& path, const LongTable& table) {
  std::ofstream out = open_out(path);
  out << "subject_id,time,y";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << table.subject[r] << ',' << fmt(table.time[r]) << ',' << fmt(table.y[r]);
    for (double v : table.cov[r]) out << ',' << fmt(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

Dataset build_dataset(const LongTable& table, const Formula& formula, const std::string& source, bool keep_missing) {
  auto resolve = [&](const std::vector<std::string>& cols) {
    std::vector<int> idx;
    for (const auto& c : cols) {
      if (c == "1") {
        idx.push_back(-1);
      } else if (c == "time") {
        idx.push_back(-2);
      } else {
        const int k = table.column(c);
        if (k < 0) throw IoError(source + ": missing column '" + c + "'");
        idx.push_back(k);
      }
    }
    return idx;
  };
  const std::vector<int> fx = resolve(formula.fixed);
  const std::vector<int> rx = resolve(formula.random);

  Dataset out;
  out.fixed_names = formula.fixed;
  out.random_names = formula.random;
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (!keep_missing && std::isnan(table.y[r])) {
      ++out.dropped_missing;
      continue;
    }
    by_subject[table.subject[r]].push_back(r);
  }
  if (out.dropped_missing > 0) {
    std::ostringstream os;
    os << source << ": dropped " << out.dropped_missing << " rows with missing y";
    log_info(os.str());
  }

  std::vector<std::string> dupes;
  for (auto& [id, rows] : by_subject) {
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return table.time[a] < table.time[b]; });
    for (std::size_t k = 1; k < rows.size(); ++k)
      if (table.time[rows[k]] == table.time[rows[k - 1]]) {
        std::ostringstream os;
        os << "(" << id << ", " << fmt(table.time[rows[k]], 10) << ") at lines " << table.line[rows[k - 1]] << " and "
           << table.line[rows[k]];
        dupes.push_back(os.str());
      }
  }
  if (!dupes.empty()) {
    std::ostringstream os;
    os << source << ": duplicate (subject_id, time) pairs: ";
    for (std::size_t k = 0; k < dupes.size() && k < 10; ++k) os << (k ? "; " : "") << dupes[k];
    if (dupes.size() > 10) os << "; and " << dupes.size() - 10 << " more";
    throw IoError(os.str());
  }

  auto fill = [&](const std::vector<int>& idx, const std::vector<std::size_t>& rows, Eigen::MatrixXd& m) {
    m.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      for (std::size_t c = 0; c < idx.size(); ++c) {
        double v = idx[c] == -1 ? 1.0 : idx[c] == -2 ? table.time[rows[k]] : table.cov[rows[k]][idx[c]];
        if (std::isnan(v)) {
          std::ostringstream os;
          os << source << ":" << table.line[rows[k]] << ": missing value in column '" << table.columns[idx[c]] << "'";
          throw IoError(os.str());
        }
        m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = v;
      }
    }
  };
  for (const auto& [id, rows] : by_subject) {
    SubjectRecord rec;
    rec.id = id;
    const auto n = static_cast<Eigen::Index>(rows.size());
    rec.times.resize(n);
    rec.y.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      rec.times(k) = table.time[rows[k]];
      rec.y(k) = table.y[rows[k]];
    }
    fill(fx, rows, rec.x);
    fill(rx, rows, rec.d);
    out.subjects.push_back(std::move(rec));
  }
  std::ostringstream os;
  os << source << ": " << table.rows() - out.dropped_missing << " rows, " << out.subjects.size() << " subjects";
  log_info(os.str());
  return out;
}

Dataset ingest(const std::string& path, const Formula& formula) {
  return build_dataset(read_table(path), formula, path);
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  const Node root(j, "", source);
  root.allow({"schema_version", "model", "iters", "burn_in", "alpha0", "gamma", "n0", "warmup", "init_sweeps",
              "mc_batches", "max_log_step", "louis_draws", "subsample", "gibbs", "switch", "seed", "threads",
              "simulate", "predict"});
  RunConfig cfg;
  cfg.text = text;
  cfg.schema_version = root.get<int>("schema_version", 1);
  if (cfg.schema_version != 1) root.fail("unsupported schema_version " + std::to_string(cfg.schema_version));
  if (root.has("model")) cfg.model = parse_model(root.child("model"));

  FitConfig& f = cfg.fit;
  f.schedule.total_iters = root.get<int>("iters", f.schedule.total_iters);
  f.schedule.burn_in = root.get<int>("burn_in", f.schedule.burn_in);
  f.schedule.alpha0 = root.get<double>("alpha0", f.schedule.alpha0);
  f.schedule.gamma = root.get<double>("gamma", f.schedule.gamma);
  f.schedule.n0 = root.get<double>("n0", f.schedule.n0);
  f.warmup = root.get<int>("warmup", f.warmup);
  f.init_sweeps = root.get<int>("init_sweeps", f.init_sweeps);
  f.mc_batches = root.get<int>("mc_batches", f.mc_batches);
  f.max_log_step = root.get<double>("max_log_step", f.max_log_step);
  f.louis_draws = root.get<int>("louis_draws", f.louis_draws);
  f.seed = root.get<std::uint64_t>("seed", f.seed);
  f.threads = root.get<int>("threads", 0);
  f.grid = cfg.model.grid;
  if (root.has("subsample")) {
    const Node s = root.child("subsample");
    s.allow({"strategy", "M", "r", "s"});
    f.subsample.strategy =
        with_context(source, [&] { return parse_subsample_strategy(s.get<std::string>("strategy", "full")); });
    f.subsample.M = s.get<int>("M", f.subsample.M);
    f.subsample.r = s.get<int>("r", f.subsample.r);
    f.subsample.s = s.get<double>("s", f.subsample.s);
  }
  if (root.has("gibbs")) {
    const Node g = root.child("gibbs");
    g.allow({"sweeps", "warm_start"});
    f.gibbs.sweeps_per_step = g.get<int>("sweeps", f.gibbs.sweeps_per_step);
    f.gibbs.warm_start = g.get<bool>("warm_start", f.gibbs.warm_start);
  }
  if (root.has("switch")) {
    const Node s = root.child("switch");
    s.allow({"to_gaussian_above", "to_cauchy_below"});
    f.rule.to_gaussian_above = s.get<double>("to_gaussian_above", f.rule.to_gaussian_above);
    f.rule.to_cauchy_below = s.get<double>("to_cauchy_below", f.rule.to_cauchy_below);
  }
  with_context(source, [&] {
    f.schedule.validate();
    f.gibbs.validate();
    f.rule.validate();
    return 0;
  });

  if (root.has("simulate")) {
    const Node s = root.child("simulate");
    s.allow({"subjects", "n_per_subject", "t_max", "covariates", "truth"});
    SimulateConfig& sim = cfg.simulate;
    sim.subjects = s.get<int>("subjects", sim.subjects);
    sim.n_per_subject = s.get<int>("n_per_subject", sim.n_per_subject);
    sim.t_max = s.get<double>("t_max", sim.t_max);
    if (sim.subjects < 1 || sim.n_per_subject < 1 || !(sim.t_max > 0.0)) s.fail("subjects, n_per_subject and t_max must be positive");
    if (s.has("covariates")) {
      const Node cov = s.child("covariates");
      if (!cov.raw().is_object()) cov.fail("expected an object");
      for (const auto& [name, spec] : cov.raw().items()) {
        const Node c(spec, cov.where(name), source);
        c.allow({"kind", "mean", "sd", "lo", "hi", "p", "level"});
        CovariateSpec cs;
        cs.name = name;
        cs.kind = c.get<std::string>("kind", "normal");
        if (cs.kind == "normal") {
          cs.a = c.get<double>("mean", 0.0);
          cs.b = c.get<double>("sd", 1.0);
        } else if (cs.kind == "uniform") {
          cs.a = c.get<double>("lo", 0.0);
          cs.b = c.get<double>("hi", 1.0);
        } else if (cs.kind == "bernoulli") {
          cs.a = c.get<double>("p", 0.5);
          if (!(cs.a >= 0.0 && cs.a <= 1.0)) c.fail("p must lie in [0, 1]");
        } else {
          c.fail("unknown covariate kind '" + cs.kind + "'");
        }
        const std::string level = c.get<std::string>("level", "subject");
        if (level != "subject" && level != "observation") c.fail("level must be 'subject' or 'observation'");
        cs.per_subject = level == "subject";
        sim.covariates.push_back(cs);
      }
    }
    sim.truth = model_skeleton(cfg.model);
    if (s.has("truth")) apply_parameters(s.child("truth"), cfg.model.formula, sim.truth);
    with_context(source, [&] {
      sim.truth.validate();
      return 0;
    });
  }

  if (root.has("predict")) {
    const Node p = root.child("predict");
    p.allow({"mode", "cut", "draws", "burn_in", "with_noise", "criterion"});
    PredictConfig& pc = cfg.predict;
    pc.mode = with_context(source, [&] { return parse_predict_mode(p.get<std::string>("mode", "smooth")); });
    if (p.has("cut")) pc.cut = p.get<double>("cut", 0.0);
    pc.draws = p.get<int>("draws", pc.draws);
    pc.burn_in = p.get<int>("burn_in", pc.burn_in);
    pc.with_noise = p.get<bool>("with_noise", pc.with_noise);
    if (p.has("criterion")) {
      const Node c = p.child("criterion");
      c.allow({"threshold", "window"});
      DeclineCriterion dc;
      dc.threshold = c.get<double>("threshold", dc.threshold);
      dc.window = c.get<double>("window", dc.window);
      with_context(source, [&] {
        dc.validate();
        return 0;
      });
      pc.criterion = dc;
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(slurp(path), path); }

ModelParams model_skeleton(const ModelConfig& model) {
  ModelParams p;
  const auto pd = static_cast<Eigen::Index>(model.formula.fixed.size());
  const auto q = static_cast<Eigen::Index>(model.formula.random.size());
  p.beta = Eigen::VectorXd::Zero(pd);
  p.sigma = 1.0;
  p.Sigma = Eigen::MatrixXd::Identity(q, q);
  p.noise = model.noise;
  p.re = model.re;
  p.proc = model.proc;
  p.scope = model.scope;
  p.process = model.process;
  p.kappa = model.kappa0;
  p.mu_w = 0.0;
  p.mu_u = p.has_mu_u() ? Eigen::VectorXd::Zero(q) : Eigen::VectorXd();
  return p;
}

LongTable simulate_table(const RunConfig& cfg, int subjects, std::uint64_t seed) {
  const SimulateConfig& sim = cfg.simulate;
  if (subjects < 1) throw ConfigError("simulate: subjects must be positive");
  LongTable t;
  for (const auto& c : sim.covariates) t.columns.push_back(c.name);
  Rng rng = make_stream(seed, 0x73696dull);
  const int width = static_cast<int>(std::to_string(subjects).size());
  auto draw = [&](const CovariateSpec& c) {
    if (c.kind == "uniform") return std::uniform_real_distribution<double>(c.a, c.b)(rng);
    if (c.kind == "bernoulli") return std::bernoulli_distribution(c.a)(rng) ? 1.0 : 0.0;
    return std::normal_distribution<double>(c.a, c.b)(rng);
  };
  for (int i = 0; i < subjects; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%0*d", width, i + 1);
    std::vector<double> times(sim.n_per_subject);
    std::uniform_real_distribution<double> u(0.0, sim.t_max);
    times[0] = 0.0;
    for (int k = 1; k < sim.n_per_subject; ++k) times[k] = u(rng);
    std::sort(times.begin(), times.end());
    std::vector<double> fixed_cov;
    for (const auto& c : sim.covariates) fixed_cov.push_back(draw(c));
    for (int k = 0; k < sim.n_per_subject; ++k) {
      if (k > 0 && times[k] == times[k - 1]) continue;
      t.subject.push_back(id);
      t.time.push_back(times[k]);
      t.y.push_back(0.0);
      std::vector<double> row;
      for (std::size_t c = 0; c < sim.covariates.size(); ++c)
        row.push_back(sim.covariates[c].per_subject ? fixed_cov[c] : draw(sim.covariates[c]));
      t.cov.push_back(std::move(row));
      t.line.push_back(0);
    }
  }
  const Dataset data = build_dataset(t, cfg.model.formula, "simulate", true);
  const std::vector<SubjectRecord> recs = simulate(sim.truth, data.subjects, seed, cfg.model.grid);
  std::size_t r = 0;
  for (const auto& rec : recs)
    for (Eigen::Index k = 0; k < rec.n(); ++k) t.y[r++] = rec.y(k);
  return t;
}

void write_results(const FitResult& fit, const RunConfig& cfg, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  const std::filesystem::path root(dir);
  const ModelParams& th = fit.theta_hat;

  json j;
  j["schema_version"] = 1;
  j["model"] = model_json(cfg.model);
  j["fitted_families"] = {{"noise", to_string(th.noise.family)},
                          {"random_effects", to_string(th.re.family)},
                          {"process", to_string(th.proc.family)}};
  json params;
  params["beta"] = vector_json(th.beta);
  params["sigma"] = th.sigma;
  params["Sigma"] = matrix_json(th.Sigma);
  if (th.has_mu_u()) params["mu_u"] = vector_json(th.mu_u);
  if (th.has_process()) params["kappa"] = th.kappa;
  if (th.has_mu_w()) params["mu_w"] = th.mu_w;
  if (th.has_nu_z()) params["nu_z"] = th.noise.nu;
  if (th.has_nu_u()) params["nu_u"] = th.re.nu;
  if (th.has_nu_w()) params["nu_w"] = th.proc.nu;
  j["parameters"] = params;
  j["names"] = fit.names;
  j["estimate"] = vector_json(fit.estimate);
  j["std_errors"] = vector_json(fit.std_errors);
  j["mc_se"] = vector_json(fit.mc_se);
  j["se_mc_error"] = vector_json(fit.se_mc_error);
  j["p_lower"] = vector_json(fit.p_lower);
  j["p_upper"] = vector_json(fit.p_upper);
  json fim = json::array();
  for (Eigen::Index r = 0; r < fit.observed_fim.rows(); ++r) fim.push_back(vector_json(fit.observed_fim.row(r).transpose()));
  j["observed_fim"] = fim;
  j["warnings"] = fit.warnings;
  {
    std::ofstream out = open_out((root / "params.json").string());
    out << j.dump(2) << '\n';
  }
  {
    std::ofstream out = open_out((root / "fixed_effects.csv").string());
    out << "term,Estimate,SE,p-lower,p-upper\n";
    for (std::size_t k = 0; k < fit.names.size(); ++k) {
      if (fit.names[k].rfind("beta.", 0) != 0) continue;
      const auto i = static_cast<Eigen::Index>(k);
      out << fit.names[k].substr(5) << ',' << fmt(fit.estimate(i)) << ',' << fmt(fit.std_errors(i)) << ','
          << fmt(fit.p_lower(i)) << ',' << fmt(fit.p_upper(i)) << '\n';
    }
  }
  {
    std::ofstream out = open_out((root / "trace.csv").string());
    out << "iter";
    for (const auto& n : fit.trace_names) out << ',' << n;
    out << '\n';
    for (std::size_t it = 0; it < fit.trace.size(); ++it) {
      out << it + 1;
      for (Eigen::Index k = 0; k < fit.trace[it].size(); ++k) out << ',' << fmt(fit.trace[it](k), 10);
      out << '\n';
    }
  }
}

StoredFit read_params(const std::string& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw IoError(path + ": invalid JSON: " + e.what());
  }
  const Node root(j, "", path);
  if (!root.has("model") || !root.has("parameters")) root.fail("missing 'model' or 'parameters'");
  StoredFit out;
  const ModelConfig model = parse_model(root.child("model"));
  out.formula = model.formula;
  out.grid = model.grid;
  out.params = model_skeleton(model);
  if (root.has("fitted_families")) {
    const Node f = root.child("fitted_families");
    f.allow({"noise", "random_effects", "process"});
    with_context(path, [&] {
      out.params.noise.family = parse_family(f.get<std::string>("noise", to_string(out.params.noise.family)));
      out.params.re.family = parse_family(f.get<std::string>("random_effects", to_string(out.params.re.family)));
      out.params.proc.family = parse_family(f.get<std::string>("process", to_string(out.params.proc.family)));
      return 0;
    });
    out.params.mu_u = out.params.has_mu_u() ? Eigen::VectorXd::Zero(out.params.q()) : Eigen::VectorXd();
  }
  apply_parameters(root.child("parameters"), out.formula, out.params);
  with_context(path, [&] {
    out.params.validate();
    return 0;
  });
  return out;
}

void write_predictions(const std::string& path, const std::vector<PredictiveSummary>& summaries) {
  std::ofstream out = open_out(path);
  out << "subject_id,time,mode,mean,median,q05,q95,excursion_prob\n";
  for (const auto& s : summaries)
    for (Eigen::Index k = 0; k < s.time.size(); ++k)
      out << s.id << ',' << fmt(s.time(k), 10) << ',' << to_string(s.mode) << ',' << fmt(s.mean(k), 10) << ','
          << fmt(s.median(k), 10) << ',' << fmt(s.q05(k), 10) << ',' << fmt(s.q95(k), 10) << ','
          << fmt(s.excursion(k), 10) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace ngmix
