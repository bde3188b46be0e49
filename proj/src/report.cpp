#include "dfindex/report.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <system_error>

#include "dfindex/format.hpp"

namespace dfindex {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) throw SpecError(std::string("unknown key \"") + it.key() + "\" in " + where);
  }
}

const json* field(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return nullptr;
  return &j[key];
}

void read_real(const json& j, const char* key, double& out) {
  if (const json* v = field(j, key)) {
    if (!v->is_number()) throw SpecError(std::string("\"") + key + "\" must be a number");
    out = v->get<double>();
  }
}

template <class Int>
void read_int(const json& j, const char* key, Int& out) {
  if (const json* v = field(j, key)) {
    if (!v->is_number_integer()) throw SpecError(std::string("\"") + key + "\" must be an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v->is_number_unsigned()) {
        out = static_cast<Int>(v->get<std::uint64_t>());
        return;
      }
      if (v->get<std::int64_t>() < 0) {
        throw SpecError(std::string("\"") + key + "\" must be non-negative");
      }
      out = static_cast<Int>(v->get<std::int64_t>());
    } else {
      out = static_cast<Int>(v->get<std::int64_t>());
    }
  }
}

void positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw SpecError(std::string(name) + " must be a positive finite number");
  }
}

SamplePlan plan_of(const RunConfig& cfg) {
  SamplePlan p;
  p.count = cfg.numeric.samples;
  p.min_depth = cfg.numeric.min_depth;
  p.tubular_width = cfg.numeric.tubular_width;
  p.levels = cfg.numeric.levels;
  p.seed = cfg.numeric.seed;
  return p;
}

IndexOptions index_options(const RunConfig& cfg) {
  IndexOptions o;
  o.bisect_tol = cfg.numeric.tols.bisect_tol;
  o.search_budget = cfg.numeric.search_budget;
  o.seed = cfg.numeric.seed;
  o.restarts = cfg.numeric.restarts;
  o.psd_tol = cfg.numeric.tols.psd_tol;
  o.denom_tol = cfg.numeric.tols.denom_tol;
  return o;
}

ConditionOptions condition_options(const RunConfig& cfg) {
  ConditionOptions o;
  o.denom_tol = cfg.numeric.tols.denom_tol;
  o.delta.boundary_offset = cfg.numeric.fd_steps.boundary_offset;
  o.delta.fd_step = cfg.numeric.fd_steps.delta;
  o.delta.third_step = cfg.numeric.fd_steps.third;
  return o;
}

SigmaOptions sigma_options(const RunConfig& cfg) {
  SigmaOptions o;
  o.tol = cfg.numeric.tols.leviflat_tol;
  return o;
}

// Halves every finite-difference step; the per-point default of delta_jet
// is 1e-4 (1 + |sdist|), so its first halving starts from 1e-4.
RunConfig with_smaller_steps(RunConfig cfg) {
  auto& s = cfg.numeric.fd_steps;
  s.delta = s.delta > 0.0 ? 0.5 * s.delta : 5e-5;
  s.third *= 0.5;
  s.boundary_offset *= 0.5;
  return cfg;
}

template <class Fn>
auto with_retries(const RunConfig& cfg, Fn&& fn, int& retries_used) {
  RunConfig c = cfg;
  for (int attempt = 0;; ++attempt) {
    try {
      retries_used = attempt;
      return fn(c);
    } catch (const ConvergenceError&) {
      if (attempt >= cfg.numeric.retries) throw;
    } catch (const TubularError&) {
      if (attempt >= cfg.numeric.retries) throw;
    }
    c = with_smaller_steps(c);
  }
}

json envelope(const RunConfig& cfg) {
  json j;
  j["command"] = command_name(cfg.command);
  j["config"] = cfg.to_json();
  return j;
}

struct ConditionsResult {
  std::vector<LeviFlatSample> sigma;
  std::optional<ConditionReport> first, second, improved;
  double l1 = kNaN;
  std::string vacuous_reason;
  struct Member {
    std::optional<double> c1;
    double l1 = kNaN;
  };
  std::vector<Member> sequence;
};

ConditionsResult compute_conditions(const RunConfig& cfg, const Domain& domain,
                                    const FieldProgram& psi) {
  ConditionsResult r;
  r.sigma = detect_sigma(domain, cfg.numeric.sigma_samples, cfg.numeric.seed, sigma_options(cfg));
  if (r.sigma.empty()) {
    r.vacuous_reason = "no Levi-flat boundary samples were detected";
    return r;
  }
  const ConditionOptions opts = condition_options(cfg);
  const SigmaData data = prepare_sigma(domain, r.sigma, true, opts);
  r.first = first_condition(data, psi, r.sigma, opts);
  r.second = second_condition(data, psi, cfg.eta, r.sigma, opts);
  r.improved = improved_second_bound(data, psi, cfg.n, r.sigma, opts);
  r.l1 = l1_torsion_integral(data, psi, r.sigma);
  for (const auto& spec : cfg.psi_sequence) {
    const FieldProgram p = spec.resolve();
    r.sequence.push_back({first_condition(data, p, r.sigma, opts).torsion_c1_norm,
                          l1_torsion_integral(data, p, r.sigma)});
  }
  for (std::size_t i = 0; i < r.sigma.size(); ++i) r.sigma[i].torsion = r.first->per_point[i].torsion;
  return r;
}

// Growth is the ratio to the previous member; null where undefined.
json sequence_json(const std::vector<ConditionsResult::Member>& seq) {
  json rows = json::array();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    json row = {{"index", i}};
    row["torsion_c1_norm"] = seq[i].c1 ? json_real(*seq[i].c1) : json(nullptr);
    row["l1_torsion_integral"] = json_real(seq[i].l1);
    json c1_growth = nullptr, l1_growth = nullptr;
    if (i > 0) {
      if (seq[i].c1 && seq[i - 1].c1 && *seq[i - 1].c1 > 0.0) {
        c1_growth = json_real(*seq[i].c1 / *seq[i - 1].c1);
      }
      if (seq[i - 1].l1 > 0.0) l1_growth = json_real(seq[i].l1 / seq[i - 1].l1);
    }
    row["c1_growth"] = c1_growth;
    row["l1_growth"] = l1_growth;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::certify: return "certify";
    case Command::estimate_index: return "estimate-index";
    case Command::conditions: return "conditions";
    case Command::worm_sweep: return "worm-sweep";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::certify, Command::estimate_index, Command::conditions,
                    Command::worm_sweep}) {
    if (name == command_name(c)) return c;
  }
  throw SpecError("unknown command \"" + name + "\"");
}

FieldProgram PsiSpec::resolve() const {
  if (!family) return program;
  return family_basis().program(params);
}

PsiFamily PsiSpec::family_basis() const {
  if (family && *family != "default") throw SpecError("unknown psi family \"" + *family + "\"");
  if (!family && !program.is_zero()) {
    throw SpecError("this command needs psi given as a named family");
  }
  return PsiFamily::default_family();
}

json PsiSpec::to_json() const {
  if (family) return {{"family", *family}, {"params", params}};
  return program.to_json();
}

PsiSpec PsiSpec::from_json(const json& j) {
  PsiSpec s;
  if (j.is_null()) return s;
  if (j.is_object() && j.contains("family")) {
    require_keys(j, "psi", {"family", "params"});
    if (!j["family"].is_string()) throw SpecError("psi family must be a string");
    s.family = j["family"].get<std::string>();
    const std::size_t dim = s.family_basis().dim();
    s.params.assign(dim, 0.0);
    if (const json* p = field(j, "params")) {
      if (!p->is_array() || p->size() != dim) {
        throw SpecError("psi params must be an array of " + std::to_string(dim) + " numbers");
      }
      for (std::size_t k = 0; k < dim; ++k) {
        if (!(*p)[k].is_number()) throw SpecError("psi params must be numbers");
        s.params[k] = (*p)[k].get<double>();
      }
    }
    return s;
  }
  s.program = FieldProgram::from_json(j);
  return s;
}

json RunConfig::to_json() const {
  json j;
  j["command"] = command_name(command);
  j["domain"] = domain.to_json();
  j["psi"] = psi.to_json();
  if (!psi_sequence.empty()) {
    j["psi_sequence"] = json::array();
    for (const auto& p : psi_sequence) j["psi_sequence"].push_back(p.to_json());
  }
  j["eta"] = eta;
  j["n"] = n;
  if (command == Command::worm_sweep) j["betas"] = betas;
  const auto& m = numeric;
  j["numeric"] = {
      {"samples", m.samples},
      {"seed", m.seed},
      {"tols",
       {{"psd_tol", m.tols.psd_tol},
        {"denom_tol", m.tols.denom_tol},
        {"leviflat_tol", m.tols.leviflat_tol},
        {"bisect_tol", m.tols.bisect_tol}}},
      {"tubular_width", m.tubular_width},
      {"fd_steps",
       {{"delta", m.fd_steps.delta},
        {"third", m.fd_steps.third},
        {"boundary_offset", m.fd_steps.boundary_offset}}},
      {"min_depth", m.min_depth},
      {"levels", m.levels},
      {"sigma_samples", m.sigma_samples},
      {"search_budget", m.search_budget},
      {"restarts", m.restarts},
      {"retries", m.retries},
      {"sweep_slack", m.sweep_slack},
  };
  json formats = json::array();
  if (output.json) formats.push_back("json");
  if (output.csv) formats.push_back("csv");
  j["output"] = {{"path", output.path}, {"formats", formats}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw SpecError("config must be a JSON object");
  require_keys(j, "config",
               {"command", "domain", "psi", "psi_sequence", "eta", "n", "betas", "numeric",
                "output"});
  RunConfig c;
  if (const json* v = field(j, "command")) {
    if (!v->is_string()) throw SpecError("\"command\" must be a string");
    c.command = parse_command(v->get<std::string>());
  }
  if (!j.contains("domain")) throw SpecError("config needs a \"domain\"");
  c.domain = DomainSpec::from_json(j["domain"]);
  if (j.contains("psi")) c.psi = PsiSpec::from_json(j["psi"]);
  if (const json* seq = field(j, "psi_sequence")) {
    if (!seq->is_array()) throw SpecError("\"psi_sequence\" must be an array");
    for (const auto& p : *seq) c.psi_sequence.push_back(PsiSpec::from_json(p));
  }
  read_real(j, "eta", c.eta);
  read_int(j, "n", c.n);
  if (const json* b = field(j, "betas")) {
    if (!b->is_array()) throw SpecError("\"betas\" must be an array");
    for (const auto& x : *b) {
      if (!x.is_number()) throw SpecError("\"betas\" must hold numbers");
      c.betas.push_back(x.get<double>());
    }
  }
  if (const json* m = field(j, "numeric")) {
    if (!m->is_object()) throw SpecError("\"numeric\" must be an object");
    require_keys(*m, "numeric",
                 {"samples", "seed", "tols", "tubular_width", "fd_steps", "min_depth", "levels",
                  "sigma_samples", "search_budget", "restarts", "retries", "sweep_slack"});
    auto& n = c.numeric;
    read_int(*m, "samples", n.samples);
    read_int(*m, "seed", n.seed);
    if (const json* t = field(*m, "tols")) {
      if (!t->is_object()) throw SpecError("\"tols\" must be an object");
      require_keys(*t, "tols", {"psd_tol", "denom_tol", "leviflat_tol", "bisect_tol"});
      read_real(*t, "psd_tol", n.tols.psd_tol);
      read_real(*t, "denom_tol", n.tols.denom_tol);
      read_real(*t, "leviflat_tol", n.tols.leviflat_tol);
      read_real(*t, "bisect_tol", n.tols.bisect_tol);
    }
    read_real(*m, "tubular_width", n.tubular_width);
    if (const json* f = field(*m, "fd_steps")) {
      if (!f->is_object()) throw SpecError("\"fd_steps\" must be an object");
      require_keys(*f, "fd_steps", {"delta", "third", "boundary_offset"});
      read_real(*f, "delta", n.fd_steps.delta);
      read_real(*f, "third", n.fd_steps.third);
      read_real(*f, "boundary_offset", n.fd_steps.boundary_offset);
    }
    read_real(*m, "min_depth", n.min_depth);
    read_int(*m, "levels", n.levels);
    read_int(*m, "sigma_samples", n.sigma_samples);
    read_int(*m, "search_budget", n.search_budget);
    read_int(*m, "restarts", n.restarts);
    read_int(*m, "retries", n.retries);
    read_real(*m, "sweep_slack", n.sweep_slack);
  }
  if (const json* o = field(j, "output")) {
    if (!o->is_object()) throw SpecError("\"output\" must be an object");
    require_keys(*o, "output", {"path", "formats"});
    if (const json* p = field(*o, "path")) {
      if (!p->is_string()) throw SpecError("output path must be a string");
      c.output.path = p->get<std::string>();
    }
    if (const json* f = field(*o, "formats")) {
      if (!f->is_array()) throw SpecError("output formats must be an array");
      c.output.json = c.output.csv = false;
      for (const auto& x : *f) {
        const std::string s = x.is_string() ? x.get<std::string>() : "";
        if (s == "json") c.output.json = true;
        else if (s == "csv") c.output.csv = true;
        else throw SpecError("output formats are a subset of {json, csv}");
      }
    }
  }
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  validate(c.domain);
  const auto& n = c.numeric;
  positive(n.tols.psd_tol, "psd_tol");
  positive(n.tols.denom_tol, "denom_tol");
  positive(n.tols.leviflat_tol, "leviflat_tol");
  positive(n.tols.bisect_tol, "bisect_tol");
  positive(n.tubular_width, "tubular_width");
  positive(n.min_depth, "min_depth");
  positive(n.fd_steps.third, "fd_steps.third");
  positive(n.fd_steps.boundary_offset, "fd_steps.boundary_offset");
  if (n.fd_steps.delta < 0.0 || !std::isfinite(n.fd_steps.delta)) {
    throw SpecError("fd_steps.delta must be >= 0 (0 selects the default)");
  }
  if (n.min_depth >= n.tubular_width) throw SpecError("min_depth must be below tubular_width");
  if (n.samples < 1) throw SpecError("samples must be at least 1");
  if (n.levels < 1) throw SpecError("levels must be at least 1");
  if (n.restarts < 0 || n.retries < 0) throw SpecError("restarts and retries must be >= 0");
  if (n.sweep_slack < 0.0) throw SpecError("sweep_slack must be >= 0");
  if (!(c.eta > 0.0 && c.eta < 1.0)) throw SpecError("eta must lie in (0, 1)");
  if (c.n < 1) throw SpecError("n must be at least 1");
  if (c.command == Command::conditions && n.sigma_samples < 1) {
    throw SpecError("sigma_samples must be at least 1");
  }
  if (c.command == Command::estimate_index) c.psi.family_basis();
  if (c.command == Command::worm_sweep) {
    if (c.betas.empty()) throw SpecError("worm-sweep needs at least one beta");
    for (double b : c.betas) {
      if (!(b > std::numbers::pi / 2)) {
        throw SpecError("worm domain requires beta > pi/2 (got beta = " + csv_real(b) + ")");
      }
    }
    c.psi.family_basis();
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SpecError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j);
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  const fs::path tmp = dir / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

double worm_upper_bound(double beta) { return 2.0 * std::numbers::pi / (2.0 * beta - std::numbers::pi); }

std::vector<SweepRow> worm_sweep(const std::vector<double>& betas, const RunConfig& cfg) {
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    SweepRow row;
    row.beta = beta;
    row.certified_eta_lower = kNaN;
    row.implied_eta_upper = kNaN;
    row.paper_bound = worm_upper_bound(beta);
    row.vacuous = !(row.paper_bound < 1.0);
    try {
      RunConfig c = cfg;
      c.domain = DomainSpec::worm(beta);
      validate(c.domain);
      const Domain domain(c.domain);
      const PsiFamily family = c.psi.family_basis();
      const IndexResult idx = estimate_index(domain, family, plan_of(c), index_options(c));
      row.certified_eta_lower = idx.eta_star;
      int used = 0;
      const ConditionsResult cr = with_retries(
          c, [&](const RunConfig& rc) { return compute_conditions(rc, domain, c.psi.resolve()); },
          used);
      if (cr.first && cr.first->implied_index_bound) {
        row.implied_eta_upper = *cr.first->implied_index_bound;
      }
      row.consistent = row.certified_eta_lower <= row.paper_bound + cfg.numeric.sweep_slack;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
      row.consistent = false;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "beta,certified_eta_lower,implied_eta_upper_from_first_condition,paper_bound,vacuous,"
        "consistent,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    os << csv_real(r.beta) << ',' << csv_real(r.certified_eta_lower) << ','
       << csv_real(r.implied_eta_upper) << ',' << csv_real(r.paper_bound) << ','
       << (r.vacuous ? "true" : "false") << ',' << (r.consistent ? "true" : "false") << ','
       << status << '\n';
  }
  return os.str();
}

json sweep_json(const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"beta", r.beta},
                   {"certified_eta_lower", json_real(r.certified_eta_lower)},
                   {"implied_eta_upper_from_first_condition", json_real(r.implied_eta_upper)},
                   {"paper_bound", json_real(r.paper_bound)},
                   {"vacuous", r.vacuous},
                   {"consistent", r.consistent},
                   {"status", r.status}});
  }
  return arr;
}

std::string sigma_csv(const std::vector<LeviFlatSample>& sigma) {
  std::ostringstream os;
  os << "re_z,im_z,re_w,im_w,levi,re_torsion,im_torsion,weight\n";
  for (const auto& s : sigma) {
    const Vec4 x = s.bp.p.real();
    const bool inf = is_infinite(s.torsion);
    os << csv_real(x[0]) << ',' << csv_real(x[1]) << ',' << csv_real(x[2]) << ','
       << csv_real(x[3]) << ',' << csv_real(s.levi) << ','
       << (inf ? "inf" : csv_real(s.torsion.real())) << ','
       << (inf ? "inf" : csv_real(s.torsion.imag())) << ',' << csv_real(s.weight) << '\n';
  }
  return os.str();
}

RunOutput run_certify(const RunConfig& cfg) {
  const Domain domain(cfg.domain);
  EtaTrial trial;
  trial.eta = cfg.eta;
  trial.psi = cfg.psi.resolve();
  trial.samples = plan_of(cfg);
  const CertReport rep =
      certify_eta(trial, domain, cfg.numeric.tols.psd_tol, cfg.numeric.tols.denom_tol);
  RunOutput out;
  out.report = envelope(cfg);
  out.report["result"] = rep.to_json();
  return out;
}

RunOutput run_estimate_index(const RunConfig& cfg) {
  const Domain domain(cfg.domain);
  const PsiFamily family = cfg.psi.family_basis();
  const IndexResult res = estimate_index(domain, family, plan_of(cfg), index_options(cfg));
  RunOutput out;
  out.report = envelope(cfg);
  out.report["result"] = res.to_json(family);
  return out;
}

RunOutput run_conditions(const RunConfig& cfg) {
  const Domain domain(cfg.domain);
  int retries = 0;
  const ConditionsResult r = with_retries(
      cfg, [&](const RunConfig& c) { return compute_conditions(c, domain, c.psi.resolve()); },
      retries);
  RunOutput out;
  out.report = envelope(cfg);
  json& res = out.report["result"];
  res["retries"] = retries;
  res["sigma_samples"] = r.sigma.size();
  if (!r.first) {
    res["vacuous"] = true;
    res["reason"] = r.vacuous_reason;
    for (const char* name : {"first_condition", "second_condition", "improved_second_bound"}) {
      res[name] = vacuous_report(name, r.vacuous_reason);
    }
    res["l1_torsion_integral"] = nullptr;
  } else {
    res["vacuous"] = false;
    res["first_condition"] = r.first->to_json();
    res["second_condition"] = r.second->to_json();
    res["improved_second_bound"] = r.improved->to_json();
    res["l1_torsion_integral"] = json_real(r.l1);
    if (!cfg.psi_sequence.empty()) res["psi_sequence"] = sequence_json(r.sequence);
    out.csv.emplace_back("first_condition.csv", r.first->to_csv());
    out.csv.emplace_back("second_condition.csv", r.second->to_csv());
  }
  out.csv.emplace_back("sigma.csv", sigma_csv(r.sigma));
  return out;
}

RunOutput run_worm_sweep(const RunConfig& cfg) {
  const std::vector<SweepRow> rows = worm_sweep(cfg.betas, cfg);
  RunOutput out;
  out.report = envelope(cfg);
  bool consistent = true;
  for (const auto& r : rows) consistent = consistent && r.consistent;
  out.report["result"] = {{"rows", sweep_json(rows)}, {"consistent", consistent}};
  out.csv.emplace_back("sweep.csv", sweep_csv(rows));
  return out;
}

int run(const RunConfig& cfg, std::ostream& err) {
  RunOutput out;
  try {
    validate(cfg);
    switch (cfg.command) {
      case Command::certify: out = run_certify(cfg); break;
      case Command::estimate_index: out = run_estimate_index(cfg); break;
      case Command::conditions: out = run_conditions(cfg); break;
      case Command::worm_sweep: out = run_worm_sweep(cfg); break;
    }
  } catch (const SpecError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config_error;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_code::numerical_failure;
  }
  try {
    const std::filesystem::path dir(cfg.output.path);
    if (cfg.output.json) write_atomic(dir / "report.json", out.report.dump(2) + "\n");
    if (cfg.output.csv) {
      for (const auto& [name, text] : out.csv) write_atomic(dir / name, text);
    }
  } catch (const std::exception& e) {
    err << "cannot write reports: " << e.what() << '\n';
    return exit_code::config_error;
  }
  return exit_code::ok;
}

}  // namespace dfindex
