#include "hierdetect/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

namespace hierdetect::cli {

namespace {

std::string stop_rule_name(StopRule r) {
  switch (r) {
    case StopRule::SupportFixedPoint: return "support_fixed_point";
    case StopRule::ResidualTolerance: return "residual_tolerance";
    case StopRule::MaxIters: return "max_iters";
  }
  return "unknown";
}

StopRule stop_rule_from(const std::string& s) {
  if (s == "support_fixed_point") return StopRule::SupportFixedPoint;
  if (s == "residual_tolerance") return StopRule::ResidualTolerance;
  if (s == "max_iters") return StopRule::MaxIters;
  throw config_error("unknown stop_rule '" + s + "'");
}

std::string noise_name(NoiseModel m) { return m == NoiseModel::MeasurementDomain ? "measurement" : "signal"; }

NoiseModel noise_from(const std::string& s) {
  if (s == "measurement") return NoiseModel::MeasurementDomain;
  if (s == "signal") return NoiseModel::SignalDomain;
  throw config_error("unknown noise model '" + s + "' (expected measurement or signal)");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void check_overlays(const std::vector<std::string>& names) {
  for (const auto& n : names)
    if (n != "thm2" && n != "thm4" && n != "correlator") throw config_error("unknown bound overlay '" + n + "'");
}

/// Reads typed keys from one section and rejects anything unrecognized.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    node_ = &doc.at(name_);
    if (!node_->is_object()) throw config_error("section '" + name_ + "' must be an object");
  }

  ~Section() noexcept(false) {
    if (!node_ || std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : node_->items())
      if (!seen_.count(key)) throw config_error("unknown key '" + name_ + "." + key + "'");
  }

  template <class T>
  void get(const std::string& key, T& target) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      target = node_->at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw config_error("wrong type for '" + name_ + "." + key + "'");
    }
  }

  void get_optional(const std::string& key, std::optional<double>& target) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    const auto& v = node_->at(key);
    if (v.is_null()) {
      target.reset();
    } else if (v.is_number()) {
      target = v.get<double>();
    } else {
      throw config_error("wrong type for '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

void validate(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw config_error("run.trials must be >= 1");
  if (cfg.workers < 1) throw config_error("run.workers must be >= 1");
  check_overlays(cfg.bounds.overlays);
  if (cfg.bounds.tau && !(*cfg.bounds.tau > 0.0)) throw config_error("bounds.tau must be positive");
  if (cfg.grid.zipped && cfg.grid.empty()) throw config_error("sweep.zipped set on an empty grid");
  try {
    sim::TrialConfig probe = cfg.base;
    if (probe.prior.dims.s == 0 && probe.prior.dims.u > 0) probe.prior.dims.s = probe.prior.dims.n / probe.prior.dims.u;
    probe.detector_cfg.validate();
    if (!(probe.prior.sigma_h2 > 0.0)) throw std::invalid_argument("channel.sigma_h2 must be positive");
    if (cfg.grid.empty()) probe.validate();
  } catch (const std::exception& e) {
    throw config_error(e.what());
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

sim::TrialConfig resolved(const sim::TrialConfig& c) {
  sim::TrialConfig r = c;
  auto& d = r.prior.dims;
  if (d.s == 0 && d.u > 0) d.s = d.n / d.u;
  return r;
}

json nan_safe(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.base.prior.dims = ProblemDims{1024, 4, 0, 1, 3, 300};
  c.base.detector = sim::DetectorKind::HiIHT;
  c.base.snr_db = 10.0;
  return c;
}

std::vector<std::string> preset_names() {
  return {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c = default_config();
  std::vector<double> snr;
  for (int db = -20; db <= 10; db += 2) snr.push_back(db);
  const std::vector<std::size_t> m_grid{8, 16, 24, 32, 48, 64, 96, 128, 160, 200, 250, 300};

  if (name == "fig1") {
    c.base.snr_db = -10.0;
    c.base.prior.dims.k_s = 3;
    c.base.prior.dims.k_u = 2;
    c.grid.u = {16, 8, 4};
    c.grid.m = m_grid;
    c.trials = 200;
    return c;
  }
  if (name == "fig8") {
    c.base.prior.dims.k_s = 3;
    c.base.prior.dims.k_u = 2;
    c.base.prior.dims.u = 8;
    c.grid.m = m_grid;
    c.grid.snr_db = {-10.0, 0.0, 10.0};
    c.trials = 200;
    return c;
  }
  struct Fig {
    const char* name;
    std::size_t k_s, u;
    std::vector<std::size_t> k_u;
  };
  const std::vector<Fig> figs{
      {"fig2", 3, 4, {1, 2, 3}},      {"fig3", 3, 8, {1, 2, 4, 6}},  {"fig4", 3, 16, {1, 4, 8, 12}},
      {"fig5", 6, 4, {1, 2, 3}},      {"fig6", 6, 8, {1, 2, 4, 6}},  {"fig7", 6, 16, {1, 4, 8, 12}},
  };
  for (const auto& f : figs) {
    if (name != f.name) continue;
    c.base.prior.dims.k_s = f.k_s;
    c.base.prior.dims.u = f.u;
    c.grid.k_u = f.k_u;
    c.grid.snr_db = snr;
    c.bounds.overlays = {"thm2", "thm4"};
    return c;
  }
  throw config_error("unknown preset '" + name + "'");
}

ExperimentConfig parse_config(const json& doc, ExperimentConfig cfg) {
  if (!doc.is_object()) throw config_error("config root must be an object");
  static const std::set<std::string> sections{"dims",   "detector", "noise", "channel", "threshold",
                                              "bounds", "sweep",    "run",   "output"};
  for (const auto& [key, _] : doc.items())
    if (!sections.count(key)) throw config_error("unknown section '" + key + "'");

  auto& d = cfg.base.prior.dims;
  {
    Section s(doc, "dims");
    s.get("n", d.n);
    s.get("u", d.u);
    s.get("s", d.s);
    s.get("k_u", d.k_u);
    s.get("k_s", d.k_s);
    s.get("m", d.m);
  }
  {
    Section s(doc, "detector");
    std::string kind = sim::to_string(cfg.base.detector);
    std::string rule = stop_rule_name(cfg.base.detector_cfg.stop_rule);
    s.get("kind", kind);
    s.get("stop_rule", rule);
    auto& dc = cfg.base.detector_cfg;
    s.get("max_iters", dc.max_iters);
    s.get("residual_tolerance", dc.residual_tolerance);
    s.get("ls_tolerance", dc.ls_tolerance);
    s.get("ls_max_iters", dc.ls_max_iters);
    s.get("step_tolerance", dc.step_tolerance);
    try {
      cfg.base.detector = sim::detector_from_string(kind);
    } catch (const std::invalid_argument& e) {
      throw config_error(e.what());
    }
    dc.stop_rule = stop_rule_from(rule);
  }
  {
    Section s(doc, "noise");
    std::string model = noise_name(cfg.base.noise_model);
    s.get("model", model);
    s.get("snr_db", cfg.base.snr_db);
    cfg.base.noise_model = noise_from(model);
  }
  {
    Section s(doc, "channel");
    s.get("sigma_h2", cfg.base.prior.sigma_h2);
    s.get("exact_sparsity", cfg.base.prior.exact_sparsity);
    s.get("random_phases", cfg.base.random_phases);
  }
  {
    Section s(doc, "threshold");
    s.get_optional("xi", cfg.base.xi);
  }
  {
    Section s(doc, "bounds");
    auto& b = cfg.bounds;
    s.get("overlays", b.overlays);
    s.get_optional("tau", b.tau);
    s.get("tau_trials", b.tau_calibration_trials);
    s.get("epsilon", b.epsilon);
    s.get("rip_C", b.rip_C);
    s.get("rip_c", b.rip_c);
    s.get("srip_c", b.srip_c);
  }
  {
    Section s(doc, "sweep");
    auto& g = cfg.grid;
    s.get("snr_db", g.snr_db);
    s.get("m", g.m);
    s.get("u", g.u);
    s.get("s", g.s);
    s.get("k_u", g.k_u);
    s.get("k_s", g.k_s);
    s.get("zipped", g.zipped);
  }
  {
    Section s(doc, "run");
    s.get("trials", cfg.trials);
    s.get("seed", cfg.seed);
    s.get("workers", cfg.workers);
  }
  {
    Section s(doc, "output");
    std::string format = cfg.format == OutputFormat::Csv ? "csv" : "json";
    s.get("path", cfg.out_path);
    s.get("format", format);
    s.get("timing", cfg.timing);
    if (format == "csv") {
      cfg.format = OutputFormat::Csv;
    } else if (format == "json") {
      cfg.format = OutputFormat::Json;
    } else {
      throw config_error("output.format must be csv or json");
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("cannot parse config file '" + path + "': " + e.what());
  }
  return parse_config(doc, std::move(base));
}

json to_json(const ExperimentConfig& cfg) {
  const auto& d = cfg.base.prior.dims;
  const auto& dc = cfg.base.detector_cfg;
  const auto& g = cfg.grid;
  const auto& b = cfg.bounds;
  json j;
  j["dims"] = {{"n", d.n}, {"u", d.u}, {"s", d.s}, {"k_u", d.k_u}, {"k_s", d.k_s}, {"m", d.m}};
  j["detector"] = {{"kind", sim::to_string(cfg.base.detector)},
                   {"stop_rule", stop_rule_name(dc.stop_rule)},
                   {"max_iters", dc.max_iters},
                   {"residual_tolerance", dc.residual_tolerance},
                   {"ls_tolerance", dc.ls_tolerance},
                   {"ls_max_iters", dc.ls_max_iters},
                   {"step_tolerance", dc.step_tolerance}};
  j["noise"] = {{"model", noise_name(cfg.base.noise_model)}, {"snr_db", cfg.base.snr_db}};
  j["channel"] = {{"sigma_h2", cfg.base.prior.sigma_h2},
                  {"exact_sparsity", cfg.base.prior.exact_sparsity},
                  {"random_phases", cfg.base.random_phases}};
  j["threshold"] = {{"xi", cfg.base.xi ? json(*cfg.base.xi) : json(nullptr)}};
  j["bounds"] = {{"overlays", b.overlays},      {"tau", b.tau ? json(*b.tau) : json(nullptr)},
                 {"tau_trials", b.tau_calibration_trials}, {"epsilon", b.epsilon},
                 {"rip_C", b.rip_C},            {"rip_c", b.rip_c},
                 {"srip_c", b.srip_c}};
  j["sweep"] = {{"snr_db", g.snr_db}, {"m", g.m},     {"u", g.u},          {"s", g.s},
                {"k_u", g.k_u},       {"k_s", g.k_s}, {"zipped", g.zipped}};
  j["run"] = {{"trials", cfg.trials}, {"seed", cfg.seed}, {"workers", cfg.workers}};
  j["output"] = {{"path", cfg.out_path},
                 {"format", cfg.format == OutputFormat::Csv ? "csv" : "json"},
                 {"timing", cfg.timing}};
  return j;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output");
  j["run"].erase("workers");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string version_string() { return std::string("v") + HIERDETECT_VERSION; }

std::string format_csv(const std::vector<sim::SweepCell>& cells, const ExperimentConfig& cfg) {
  std::ostringstream os;
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  os << "# seed=" << cfg.seed << "\n# version=" << version_string() << "\n# config_hash=" << hash << "\n";

  std::vector<std::string> header{"n",   "u",     "s",      "k_u",    "k_s", "m",   "snr_db",  "xi",
                                  "detector", "trials", "pmd", "pmd_lo", "pmd_hi", "pfa", "pbe", "mse_mean"};
  if (!cells.empty())
    for (const auto& [name, _] : cells.front().bounds) header.push_back(name);
  header.push_back("runtime_s");
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << csv_field(header[i]);
  os << "\n";

  for (const auto& c : cells) {
    const auto& d = c.config.dims();
    const auto& s = c.summary;
    std::vector<std::string> row{std::to_string(d.n),
                                 std::to_string(d.u),
                                 std::to_string(d.s),
                                 std::to_string(d.k_u),
                                 std::to_string(d.k_s),
                                 std::to_string(d.m),
                                 fmt(c.config.snr_db),
                                 fmt(c.config.effective_xi()),
                                 sim::to_string(c.config.detector),
                                 std::to_string(s.trials),
                                 fmt(s.pmd.value),
                                 fmt(s.pmd.lo),
                                 fmt(s.pmd.hi),
                                 fmt(s.pfa.value),
                                 fmt(s.pbe.value),
                                 fmt(s.mse_mean)};
    for (const auto& [_, v] : c.bounds) row.push_back(fmt(v));
    row.push_back(cfg.timing ? fmt(c.runtime_s) : "");
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(row[i]);
    os << "\n";
  }
  return os.str();
}

std::string format_json(const std::vector<sim::SweepCell>& cells, const ExperimentConfig& cfg) {
  json doc;
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  doc["meta"] = {{"seed", cfg.seed}, {"version", version_string()}, {"config_hash", hash}};
  doc["rows"] = json::array();
  for (const auto& c : cells) {
    const auto& d = c.config.dims();
    const auto& s = c.summary;
    json row = {{"n", d.n},
                {"u", d.u},
                {"s", d.s},
                {"k_u", d.k_u},
                {"k_s", d.k_s},
                {"m", d.m},
                {"snr_db", c.config.snr_db},
                {"xi", c.config.effective_xi()},
                {"detector", sim::to_string(c.config.detector)},
                {"trials", s.trials},
                {"pmd", s.pmd.value},
                {"pmd_lo", s.pmd.lo},
                {"pmd_hi", s.pmd.hi},
                {"pfa", s.pfa.value},
                {"pfa_lo", s.pfa.lo},
                {"pfa_hi", s.pfa.hi},
                {"pfa_per_user", s.pfa_per_user},
                {"pbe", s.pbe.value},
                {"mse_mean", nan_safe(s.mse_mean)},
                {"mse_all_mean", nan_safe(s.mse_all_mean)},
                {"mean_iterations", s.mean_iterations}};
    for (const auto& [name, v] : c.bounds) row[name] = nan_safe(v);
    if (!c.bounds.empty()) row["tau"] = c.tau;
    row["runtime_s"] = cfg.timing ? json(c.runtime_s) : json(nullptr);
    doc["rows"].push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> bound_names() {
  return {"b1", "b0", "rip", "pfa", "thm2", "srip", "thm4", "correlator", "prop_max", "rate", "pbe", "sufficient_m"};
}

json bounds_report(const bounds::BoundParams& p, const std::vector<std::string>& which) {
  p.validate();
  const auto& d = p.dims;
  const double sigma2 = 1.0 / p.snr;
  auto report_json = [](const bounds::BoundReport& r) {
    json terms = json::object();
    for (const auto& [name, v] : r.terms) terms[name] = v;
    return json{{"terms", terms},
                {"total", r.total},
                {"clipped", r.clipped},
                {"applicable", r.applicable},
                {"note", r.note}};
  };

  json out;
  out["params"] = {{"n", d.n},          {"u", d.u},           {"s", d.s},         {"k_u", d.k_u},
                   {"k_s", d.k_s},      {"m", d.m},           {"snr", p.snr},     {"tau", p.tau},
                   {"xi", p.xi},        {"epsilon", p.epsilon}, {"rip_C", p.rip_C}, {"rip_c", p.rip_c},
                   {"srip_c", p.srip_c}, {"sigma_h2", p.sigma_h2}};
  json& res = out["bounds"];
  res = json::object();
  for (const auto& name : which) {
    try {
      if (name == "b1") {
        res[name] = {{"value", bounds::b1(d.m, d.k_s)}};
      } else if (name == "b0") {
        res[name] = {{"value", bounds::b0(d.s, d.u, d.k_s)}};
      } else if (name == "rip") {
        res[name] = {{"value", bounds::rip_failure_bound(p)}};
      } else if (name == "pfa") {
        const auto f = bounds::pfa_bound(p);
        res[name] = {{"value", f.value}, {"applicable", f.applicable}};
        if (!f.applicable) res[name]["note"] = "snr n xi / (tau^2 m) <= 1";
      } else if (name == "thm2") {
        res[name] = report_json(bounds::pmd_bound_thm2(p));
      } else if (name == "srip") {
        res[name] = report_json(bounds::srip_failure_bound(p));
      } else if (name == "thm4") {
        res[name] = report_json(bounds::pmd_bound_thm4(p));
      } else if (name == "correlator") {
        const double lg = bounds::correlator_pmd_bound(d.s, d.u, d.k_s, d.n, p.snr);
        res[name] = {{"log_value", lg}, {"value", std::exp(lg)}};
      } else if (name == "prop_max") {
        res[name] = {{"value",
                      bounds::prop_max_approx(d.u, d.m, d.k_s, sigma2, std::vector<double>(d.k_s, p.sigma_h2))}};
      } else if (name == "rate") {
        res[name] = {{"nats", bounds::rate_lower_bound(d.k_s, p.snr, p.tau, d.m, d.n, sigma2, bounds::RateUnit::Nats)},
                     {"bits", bounds::rate_lower_bound(d.k_s, p.snr, p.tau, d.m, d.n, sigma2, bounds::RateUnit::Bits)}};
      } else if (name == "pbe") {
        const double pmd = bounds::pmd_bound_thm2(p).clipped;
        const auto pfa = bounds::pfa_bound(p);
        res[name] = {{"value", bounds::pbe_bound(pmd, pfa.value, d.k_u)}, {"applicable", pfa.applicable}};
      } else if (name == "sufficient_m") {
        res[name] = {{"thm1_scaling", bounds::sufficient_measurements(d, bounds::ScalingMode::Thm1Scaling)},
                     {"lemma1_scaling", bounds::sufficient_measurements(d, bounds::ScalingMode::Lemma1Scaling)}};
      } else {
        throw config_error("unknown bound '" + name + "'");
      }
    } catch (const config_error&) {
      throw;
    } catch (const std::exception& e) {
      res[name] = {{"error", e.what()}};
    }
  }
  return out;
}

std::string format_bounds_text(const json& report) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (const auto& [name, entry] : report.at("bounds").items()) {
    os << name << "\n";
    if (entry.contains("error")) {
      os << "  error: " << entry.at("error").get<std::string>() << "\n";
      continue;
    }
    for (const auto& [key, v] : entry.items()) {
      if (key == "terms") {
        for (const auto& [t, tv] : v.items()) os << "  term " << std::left << std::setw(14) << t << tv.get<double>() << "\n";
        continue;
      }
      if (key == "note" && v.get<std::string>().empty()) continue;
      os << "  " << std::left << std::setw(19) << key;
      if (v.is_boolean()) {
        os << (v.get<bool>() ? "yes" : "NO (out of regime)");
      } else if (v.is_string()) {
        os << v.get<std::string>();
      } else {
        os << v.get<double>();
      }
      os << "\n";
    }
  }
  return os.str();
}

namespace {

struct Common {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::string> bounds_list;
  bool timing = false;
};

void add_common(CLI::App* app, Common& c, bool with_bounds_overlay) {
  app->add_option("--config", c.config_path, "JSON experiment config");
  app->add_option("--preset", c.preset_name, "named preset (fig1..fig8)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--trials", c.trials, "trials per cell");
  app->add_option("--workers", c.workers, "worker threads");
  app->add_option("--out", c.out, "output file (default: stdout)");
  app->add_option("--format", c.format, "csv or json");
  if (with_bounds_overlay) {
    app->add_option("--bounds", c.bounds_list, "comma-separated overlays: thm2,thm4,correlator");
    app->add_flag("--timing", c.timing, "fill the runtime_s column");
  }
}

ExperimentConfig build_config(const Common& c) {
  ExperimentConfig cfg = c.preset_name.empty() ? default_config() : preset(c.preset_name);
  if (!c.config_path.empty()) cfg = load_config(c.config_path, cfg);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.trials = *c.trials;
  if (c.workers) cfg.workers = *c.workers;
  if (c.out) cfg.out_path = *c.out;
  if (c.format) {
    if (*c.format == "csv") {
      cfg.format = OutputFormat::Csv;
    } else if (*c.format == "json") {
      cfg.format = OutputFormat::Json;
    } else {
      throw config_error("--format must be csv or json");
    }
  }
  if (c.bounds_list) cfg.bounds.overlays = split_list(*c.bounds_list);
  if (c.timing) cfg.timing = true;
  validate(cfg);
  return cfg;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write output file '" + path + "'");
  f << text;
}

std::string render(const std::vector<sim::SweepCell>& cells, const ExperimentConfig& cfg) {
  return cfg.format == OutputFormat::Csv ? format_csv(cells, cfg) : format_json(cells, cfg);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical sparse user detection simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  Common sim_opts, sweep_opts, bound_opts;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run of one configuration");
  add_common(simulate, sim_opts, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo over a parameter grid");
  add_common(sweep_cmd, sweep_opts, true);

  auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate analytic bounds");
  add_common(bounds_cmd, bound_opts, false);
  std::string which = "thm2,thm4,pfa";
  std::optional<std::size_t> bn, bu, bs, bku, bks, bm;
  std::optional<double> snr_db, tau, xi, epsilon, rip_C, rip_c, srip_c;
  bounds_cmd->add_option("--which", which, "comma-separated: b1,b0,rip,pfa,thm2,srip,thm4,correlator,prop_max,rate,pbe,sufficient_m");
  bounds_cmd->add_option("--n", bn);
  bounds_cmd->add_option("--u", bu);
  bounds_cmd->add_option("--s", bs);
  bounds_cmd->add_option("--k_u", bku);
  bounds_cmd->add_option("--k_s", bks);
  bounds_cmd->add_option("--m", bm);
  bounds_cmd->add_option("--snr-db", snr_db);
  bounds_cmd->add_option("--tau", tau);
  bounds_cmd->add_option("--xi", xi);
  bounds_cmd->add_option("--epsilon", epsilon);
  bounds_cmd->add_option("--rip-C", rip_C);
  bounds_cmd->add_option("--rip-c", rip_c);
  bounds_cmd->add_option("--srip-c", srip_c);
  std::string text_format = "text";
  bounds_cmd->add_option("--output", text_format, "text or json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version_string() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) {
      auto cfg = build_config(sim_opts);
      sim::SweepCell cell;
      cell.config = resolved(cfg.base);
      cell.config.validate();
      sim::SweepGrid single;
      single.snr_db = {cfg.base.snr_db};
      auto cells = sim::sweep(single, cell.config, cfg.trials, cfg.seed, cfg.workers, cfg.bounds);
      emit(render(cells, cfg), cfg.out_path, out);
      return 0;
    }
    if (sweep_cmd->parsed()) {
      auto cfg = build_config(sweep_opts);
      if (cfg.grid.empty()) {
        err << "error: sweep grid is empty\n";
        return 2;
      }
      try {
        (void)sim::expand_grid(cfg.grid, cfg.base);
      } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
      }
      auto cells = sim::sweep(cfg.grid, cfg.base, cfg.trials, cfg.seed, cfg.workers, cfg.bounds);
      emit(render(cells, cfg), cfg.out_path, out);
      return 0;
    }
    auto cfg = build_config(bound_opts);
    auto& d = cfg.base.prior.dims;
    if (bn) d.n = *bn;
    if (bu) d.u = *bu;
    if (bs) d.s = *bs;
    if (bku) d.k_u = *bku;
    if (bks) d.k_s = *bks;
    if (bm) d.m = *bm;
    if (snr_db) cfg.base.snr_db = *snr_db;
    if (xi) cfg.base.xi = *xi;
    auto& bset = cfg.bounds;
    if (tau) bset.tau = *tau;
    if (epsilon) bset.epsilon = *epsilon;
    if (rip_C) bset.rip_C = *rip_C;
    if (rip_c) bset.rip_c = *rip_c;
    if (srip_c) bset.srip_c = *srip_c;
    const auto tc = resolved(cfg.base);
    try {
      tc.dims().validate();
    } catch (const std::exception& e) {
      throw config_error(e.what());
    }
    bounds::BoundParams p;
    p.dims = tc.dims();
    p.snr = 1.0 / tc.sigma2();
    p.tau = bset.tau.value_or(1.0);
    p.xi = tc.effective_xi();
    p.epsilon = bset.epsilon;
    p.rip_C = bset.rip_C;
    p.rip_c = bset.rip_c;
    p.srip_c = bset.srip_c;
    p.sigma_h2 = tc.prior.sigma_h2;
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw config_error(e.what());
    }
    const auto report = bounds_report(p, split_list(which));
    const bool as_json = text_format == "json" || (bound_opts.format && *bound_opts.format == "json");
    emit(as_json ? report.dump(2) + "\n" : format_bounds_text(report), cfg.out_path, out);
    return 0;
  } catch (const config_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hierdetect::cli
