#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "expprod/errors.hpp"
#include "expprod/lie.hpp"
#include "expprod/nc_series.hpp"
#include "expprod/orders.hpp"
#include "expprod/propagate.hpp"
#include "expprod/qmc.hpp"
#include "expprod/series_json.hpp"

namespace expprod::cli {

using nlohmann::json;

namespace {

/// Numerical failure that maps to exit code 3 with diagnostics on stdout.
struct NonConvergence : std::runtime_error {
  json diagnostics;
  NonConvergence(const std::string& what, json diag) : std::runtime_error(what), diagnostics(std::move(diag)) {}
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string g17(double v) { return fmt::format("{:.17g}", v); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { row(header); }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) text_ += (i ? "," : "") + csv_field(fields[i]);
    text_ += '\n';
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

long as_count(double v, const std::string& name, long min = 0) {
  if (!std::isfinite(v) || v != std::floor(v) || v < static_cast<double>(min) || v > 9e15)
    throw ConfigError(fmt::format("--{} must be an integer >= {}", name, min));
  return static_cast<long>(v);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::map<std::string, double> parse_assignments(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& group : items)
    for (const auto& item : split(group, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("expected name=value, got '" + item + "'");
      out[item.substr(0, eq)] = parse_rational(item.substr(eq + 1)).get_d();
    }
  return out;
}

std::string coeff_string(const StageCoeff& c) { return c.exact ? to_string(*c.exact) : std::string(); }

std::string stage_label(const Scheme& s, const Stage& st) {
  if (!st.is_commutator()) return s.slots[static_cast<std::size_t>(st.slot)];
  return fmt::format("{} x^{}", bracket_string(st.commutator->bracket, s.slots), st.commutator->x_power);
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage grammar
// ---------------------------------------------------------------------------

Rational parse_coefficient(std::string text) {
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '*') t += c;
  const auto x = t.find('x');
  if (x != std::string::npos) {
    if (t.find('x', x + 1) != std::string::npos) throw std::invalid_argument("coefficient has more than one x: " + text);
    const bool bare = x == 0 || t[x - 1] == '-' || t[x - 1] == '+';
    t = t.substr(0, x) + (bare ? "1" : "") + t.substr(x + 1);
    if (!t.empty() && t.front() == '+') t.erase(0, 1);
  }
  if (t.empty()) throw std::invalid_argument("empty coefficient");
  return parse_rational(t);
}

std::vector<StageToken> parse_stages(const std::string& text) {
  std::vector<StageToken> out;
  for (const auto& item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0)
      throw std::invalid_argument("stage must look like SLOT:coeff, got '" + item + "'");
    std::string slot = item.substr(0, colon);
    while (!slot.empty() && std::isspace(static_cast<unsigned char>(slot.front()))) slot.erase(0, 1);
    out.push_back({slot, parse_coefficient(item.substr(colon + 1))});
  }
  if (out.empty()) throw std::invalid_argument("no stages given");
  return out;
}

Scheme scheme_from_stages(const std::string& text, int claimed_order) {
  Scheme s;
  s.name = "custom";
  s.claimed_order = claimed_order;
  for (const auto& tok : parse_stages(text)) {
    int idx = s.slot_index(tok.slot);
    if (idx < 0) {
      s.slots.push_back(tok.slot);
      idx = static_cast<int>(s.slots.size()) - 1;
    }
    s.stages.push_back(Stage{idx, std::nullopt, StageCoeff::rational(tok.coeff)});
  }
  s.unmerged = s.stages;
  s.symmetric = is_palindrome(s.stages);
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace {

struct Options {
  std::string out_dir = "expprod-out";
  std::uint64_t seed = 42;
  std::string format = "auto";
  std::string config;

  std::string stages;
  int order = 3;
  std::string scheme_name;
  bool unmerged = false;
  int max_order = 0;
  bool exact = false;
  std::string pattern;
  std::vector<std::string> fix;
  std::vector<std::string> guess;
  int starts = 64;
  std::string p6_range = "0.2:1.4:0.05";
  std::string system;
  double gamma = 0.75;
  double n_max = 8192;
  int dim = 3;
  double dt = 0.0;
  double periods = 10;
  double steps = 0;
  double sample_every = 0;
  std::string mapping = "kp";
  double t0 = 0.0;
  std::string model;
  int trotter = 16;
  double sweeps = 1e5;
  double therm = -1;
  int bins = kMinBins;
  bool traces = false;
  std::string schedule = "3:0.01:50";
  double sweeps_per_stage = 10;
  std::string n_list = "4,8,16";
  std::string observable;
};

/// Run context: where results go and what the manifest records.
struct Context {
  const Options& opt;
  CLI::App* command;
  std::string command_path;
  json config;
  json inline_model;
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> written;

  std::string format(const std::string& natural) const { return opt.format == "auto" ? natural : opt.format; }

  /// --out naming a .csv or .json file receives the main result; the
  /// manifest and any side files go to its directory.
  bool out_is_file() const {
    const auto ext = std::filesystem::path(opt.out_dir).extension();
    return ext == ".csv" || ext == ".json";
  }
  std::filesystem::path out_dir() const {
    if (!out_is_file()) return opt.out_dir;
    const auto parent = std::filesystem::path(opt.out_dir).parent_path();
    return parent.empty() ? std::filesystem::path(".") : parent;
  }

  void emit(const std::string& stem, const std::string& text, const std::string& ext) {
    out << text;
    if (out_is_file())
      write_file(std::filesystem::path(opt.out_dir).filename().string(), text);
    else
      write_file(stem + "." + ext, text);
  }
  void write_file(const std::string& name, const std::string& text) {
    std::filesystem::create_directories(out_dir());
    std::ofstream f(out_dir() / name, std::ios::binary);
    f << text;
    written.push_back(name);
  }
};

std::string or_default(const std::string& v, const std::string& fallback) { return v.empty() ? fallback : v; }

// The first pass only locates the command and the config file.
void relax_required(CLI::App* app) {
  for (CLI::Option* o : app->get_options()) o->required(false);
  for (CLI::App* sub : app->get_subcommands([](CLI::App*) { return true; })) relax_required(sub);
}

std::unique_ptr<CLI::App> make_app(Options& o) {
  auto app = std::make_unique<CLI::App>("Exponential product formulas: construction, verification and use.", "expprod");
  app->option_defaults()->always_capture_default();
  app->require_subcommand(1);
  app->fallthrough();
  app->add_option("--out", o.out_dir, "Output directory, or a .csv/.json file for the main result");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"auto", "csv", "json"}));
  app->add_option("--config", o.config, "JSON file with option values");

  auto* bch = app->add_subcommand("bch", "Lie-projected correction terms of a stage product");
  bch->add_option("--stages", o.stages, "SLOT:coeff[,...], e.g. A:x/2,B:x,A:x/2")->required();
  bch->add_option("--order", o.order, "Truncation degree")->check(CLI::Range(1, 64));

  auto* scheme = app->add_subcommand("scheme", "Scheme catalog queries");
  scheme->require_subcommand(1);
  scheme->fallthrough();
  scheme->add_subcommand("list", "List the catalog");
  auto* show = scheme->add_subcommand("show", "Scheme as JSON");
  show->add_option("name", o.scheme_name)->required();
  auto* flatten = scheme->add_subcommand("flatten", "Flattened stage list");
  flatten->add_option("name", o.scheme_name)->required();
  flatten->add_flag("--unmerged", o.unmerged, "Show stages before merging neighbours");
  auto* check = scheme->add_subcommand("check", "Verify the order of a scheme");
  check->add_option("name", o.scheme_name);
  check->add_option("--stages", o.stages, "Custom stage string instead of a catalog name");
  check->add_option("--order", o.order, "Claimed order for a custom stage string");
  check->add_option("--max-order", o.max_order, "Highest degree checked (default: claimed order)");
  check->add_flag("--exact", o.exact, "Exact arithmetic over the scheme's algebraic constants");

  auto* solve = app->add_subcommand("solve", "Solve order conditions for a stage pattern");
  solve->add_option("--pattern", o.pattern, "Slot pattern, e.g. ABABAB")->required();
  solve->add_option("--order", o.order, "Target order");
  solve->add_option("--fix", o.fix, "Fixed parameters name=value[,...]");
  solve->add_option("--guess", o.guess, "Initial guesses name=value[,...]; disables multistart");
  solve->add_option("--starts", o.starts, "Random restarts when no guess is given")->check(CLI::Range(0, 100000));

  auto* family = app->add_subcommand("family", "Third-order ABABAB solutions along p6");
  family->add_option("--p6", o.p6_range, "start:stop:step");

  auto* converge = app->add_subcommand("converge", "Global-error convergence sweep");
  converge->add_option("--scheme", o.scheme_name)->required();
  converge->add_option("--system", o.system, "spin, random or driven")->check(CLI::IsMember({"", "spin", "random", "driven"}));
  converge->add_option("--gamma", o.gamma, "Field ratio of the spin system");
  converge->add_option("--n-max", o.n_max, "Largest step count");
  converge->add_option("--dim", o.dim, "Dimension of the random pair")->check(CLI::Range(1, 64));

  auto* precession = app->add_subcommand("precession", "Spin precession energy trace");
  precession->add_option("--scheme", o.scheme_name, "Scheme name or 'perturbative' (default trotter)");
  precession->add_option("--gamma", o.gamma);
  precession->add_option("--dt", o.dt, "Step size (default 0.01)");
  precession->add_option("--periods", o.periods, "Run length in precession periods");
  precession->add_option("--steps", o.steps, "Number of steps (overrides --periods)");
  precession->add_option("--sample-every", o.sample_every, "Steps between samples (default 1)");

  auto* umeno = app->add_subcommand("umeno", "Classical q1^2 q2^2 system energy trace");
  umeno->add_option("--scheme", o.scheme_name, "Scheme name or 'euler' (default trotter)");
  umeno->add_option("--dt", o.dt, "Step size (default 1e-4)");
  umeno->add_option("--steps", o.steps, "Number of steps (default 1e6)");
  umeno->add_option("--sample-every", o.sample_every, "Steps between samples (default 1000)");
  umeno->add_option("--mapping", o.mapping, "kp: A drives q, pk: A drives p")->check(CLI::IsMember({"kp", "pk"}));

  auto* timedep = app->add_subcommand("timedep", "Evaluation times of a time-ordered scheme");
  timedep->add_option("--scheme", o.scheme_name, "Time-ordered scheme (default g4)");
  timedep->add_option("--t", o.t0, "Step start time");
  timedep->add_option("--dt", o.dt, "Step size (default 1)");

  auto add_model = [&](CLI::App* c) {
    c->add_option("--model", o.model, "Model JSON file");
    c->add_option("--n", o.trotter, "Trotter number")->check(CLI::Range(1, 1 << 20));
  };
  auto* qmc = app->add_subcommand("qmc", "World-line Monte Carlo run");
  add_model(qmc);
  qmc->add_option("--sweeps", o.sweeps, "Total sweeps including thermalization");
  qmc->add_option("--therm", o.therm, "Thermalization sweeps (default sweeps/10)");
  qmc->add_option("--bins", o.bins, "Number of bins")->check(CLI::Range(kMinBins, 1 << 20));
  qmc->add_flag("--traces", o.traces, "Write per-sweep observable traces");

  auto* anneal_cmd = app->add_subcommand("anneal", "Simulated quantum annealing");
  add_model(anneal_cmd);
  anneal_cmd->add_option("--schedule", o.schedule, "start:end:stages (geometric) or a comma list");
  anneal_cmd->add_option("--sweeps-per-stage", o.sweeps_per_stage);

  auto* extrap = app->add_subcommand("extrapolate", "Trotter extrapolation");
  add_model(extrap);
  extrap->add_option("--n-list", o.n_list, "Comma-separated Trotter numbers");
  extrap->add_option("--sweeps", o.sweeps);
  extrap->add_option("--therm", o.therm);
  extrap->add_option("--observable", o.observable, "Observable name (default: first bond)");
  extrap->add_flag("--exact", o.exact, "Use exact finite-n values instead of sampling");
  return app;
}

CLI::App* selected_leaf(CLI::App* app) {
  CLI::App* cur = app;
  for (;;) {
    auto subs = cur->get_subcommands();
    if (subs.empty()) return cur;
    cur = subs.front();
  }
}

std::string command_path(CLI::App* app) {
  std::string path;
  CLI::App* cur = app;
  for (;;) {
    auto subs = cur->get_subcommands();
    if (subs.empty()) return path;
    cur = subs.front();
    path += (path.empty() ? "" : " ") + cur->get_name();
  }
}

CLI::Option* find_option(CLI::App* app, CLI::App* leaf, const std::string& key) {
  std::string name = key;
  for (auto& c : name)
    if (c == '_') c = '-';
  for (CLI::App* cur = leaf; cur != nullptr; cur = cur->get_parent()) {
    if (auto* opt = cur->get_option_no_throw("--" + name)) return opt;
    if (auto* opt = cur->get_option_no_throw(name); opt != nullptr && opt->get_lnames().empty()) return opt;
    if (cur == app) break;
  }
  return nullptr;
}

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::vector<std::string> parts;
    for (const auto& x : v) parts.push_back(json_scalar(x));
    return fmt::format("{}", fmt::join(parts, ","));
  }
  return v.dump();
}

const std::set<std::string> kModelKeys{"sites", "bonds", "gamma", "beta"};

bool uses_model(const std::string& path) { return path == "qmc" || path == "anneal" || path == "extrapolate"; }

/// Resolved option values of the selected command and the global flags.
json resolved_config(CLI::App* app, CLI::App* leaf) {
  json cfg = json::object();
  for (CLI::App* cur = leaf; cur != nullptr; cur = cur->get_parent()) {
    for (const CLI::Option* opt : cur->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name() == "-h") continue;
      const std::string key = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
      if (cfg.contains(key)) continue;
      if (opt->count() > 0 && opt->get_expected_max() == 0) {
        cfg[key] = true;
      } else if (opt->count() > 0) {
        auto r = opt->results();
        cfg[key] = r.size() == 1 ? json(r.front()) : json(r);
      } else if (opt->get_expected_max() == 0) {
        cfg[key] = false;
      } else {
        cfg[key] = opt->get_default_str();
      }
    }
    if (cur == app) break;
  }
  return cfg;
}

IsingModel load_model(const Context& ctx) {
  if (!ctx.opt.model.empty()) {
    std::ifstream f(ctx.opt.model);
    if (!f) throw ConfigError("cannot open model file " + ctx.opt.model);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
    }
    return model_from_json(j);
  }
  if (!ctx.inline_model.empty()) return model_from_json(ctx.inline_model);
  throw ConfigError("a model is required (--model FILE or model keys in --config)");
}

// ---------------------------------------------------------------------------

void cmd_bch(Context& ctx) {
  const auto tokens = parse_stages(ctx.opt.stages);
  if (ctx.opt.order > kDefaultTruncationCap)
    throw ResourceError(fmt::format("order {} exceeds the truncation cap {}", ctx.opt.order, kDefaultTruncationCap));
  Alphabet alphabet;
  for (const auto& t : tokens) alphabet.push_back(t.slot);
  std::sort(alphabet.begin(), alphabet.end());
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
  std::vector<std::pair<int, Rational>> stages;
  for (const auto& t : tokens) {
    const auto id = std::find(alphabet.begin(), alphabet.end(), t.slot) - alphabet.begin();
    stages.emplace_back(static_cast<int>(id), t.coeff);
  }
  const auto log = product_log<Rational>(alphabet, stages, ctx.opt.order);
  const auto lie = lie_project(log);
  if (ctx.format("csv") == "json") {
    json degrees = json::array();
    for (int d = 1; d <= ctx.opt.order; ++d) {
      json terms = json::array();
      for (const auto& [w, c] : lie.degree_terms(d))
        terms.push_back({{"bracket", lyndon_bracket_string(w, alphabet)}, {"coeff", to_string(c)}});
      degrees.push_back({{"degree", d}, {"text", format_degree(lie, d)}, {"terms", terms}});
    }
    ctx.emit("bch", json{{"stages", ctx.opt.stages}, {"order", ctx.opt.order}, {"degrees", degrees}}.dump(2) + "\n",
             "json");
    return;
  }
  Csv csv({"degree", "terms"});
  for (int d = 1; d <= ctx.opt.order; ++d) csv.row({std::to_string(d), format_degree(lie, d)});
  ctx.emit("bch", csv.str(), "csv");
}

json scheme_summary(const Scheme& s) {
  return {{"name", s.name},
          {"slots", s.slots},
          {"order", s.claimed_order},
          {"symmetric", s.symmetric},
          {"stages", s.stages.size()},
          {"negative_coefficients", has_negative_coefficient(s)}};
}

void cmd_scheme(Context& ctx, const std::string& sub) {
  if (sub == "list") {
    const auto catalog = scheme_catalog();
    if (ctx.format("csv") == "json") {
      json arr = json::array();
      for (const auto& s : catalog) arr.push_back(scheme_summary(s));
      ctx.emit("scheme_list", arr.dump(2) + "\n", "json");
      return;
    }
    Csv csv({"name", "slots", "order", "symmetric", "stages", "negative_coefficients"});
    for (const auto& s : catalog)
      csv.row({s.name, fmt::format("{}", fmt::join(s.slots, " ")), std::to_string(s.claimed_order),
               s.symmetric ? "1" : "0", std::to_string(s.stages.size()), has_negative_coefficient(s) ? "1" : "0"});
    ctx.emit("scheme_list", csv.str(), "csv");
    return;
  }
  if (sub == "show") {
    ctx.emit("scheme_show", to_json(find_scheme(ctx.opt.scheme_name)).dump(2) + "\n", "json");
    return;
  }
  if (sub == "flatten") {
    const Scheme s = find_scheme(ctx.opt.scheme_name);
    const auto& stages = ctx.opt.unmerged ? s.unmerged : s.stages;
    if (ctx.format("csv") == "json") {
      json arr = json::array();
      for (const auto& st : stages)
        arr.push_back({{"stage", stage_label(s, st)}, {"coeff", coeff_string(st.coeff)}, {"value", st.coeff.value}});
      ctx.emit("scheme_flatten", json{{"name", s.name}, {"stages", arr}}.dump(2) + "\n", "json");
      return;
    }
    Csv csv({"index", "stage", "coeff", "value"});
    for (std::size_t i = 0; i < stages.size(); ++i)
      csv.row({std::to_string(i), stage_label(s, stages[i]), coeff_string(stages[i].coeff), g17(stages[i].coeff.value)});
    ctx.emit("scheme_flatten", csv.str(), "csv");
    return;
  }
  // check
  Scheme s;
  if (!ctx.opt.stages.empty()) {
    if (!ctx.opt.scheme_name.empty()) throw ConfigError("give either a scheme name or --stages, not both");
    s = scheme_from_stages(ctx.opt.stages, ctx.opt.order);
  } else if (!ctx.opt.scheme_name.empty()) {
    s = find_scheme(ctx.opt.scheme_name);
  } else {
    throw ConfigError("scheme check needs a name or --stages");
  }
  const int m = ctx.opt.max_order > 0 ? ctx.opt.max_order : s.claimed_order;
  const int verified = ctx.opt.exact ? verify_order_exact(s, m) : verify_order(s, m);
  json res = scheme_summary(s);
  res["checked_through"] = m;
  res["verified_order"] = verified;
  res["exact"] = ctx.opt.exact || all_exact(s);
  res["ok"] = verified >= std::min(m, s.claimed_order);
  if (ctx.format("json") == "csv") {
    Csv csv({"name", "claimed_order", "verified_order", "ok"});
    csv.row({s.name, std::to_string(s.claimed_order), std::to_string(verified), res["ok"].get<bool>() ? "1" : "0"});
    ctx.emit("scheme_check", csv.str(), "csv");
  } else {
    ctx.emit("scheme_check", res.dump(2) + "\n", "json");
  }
  if (!res["ok"].get<bool>()) throw std::runtime_error(fmt::format("{} verifies only to order {}", s.name, verified));
}

std::string exact_or_decimal(double v) {
  const Rational q = rationalize(v, 100000);
  if (std::abs(q.get_d() - v) <= 1e-12 * std::max(1.0, std::abs(v))) return to_string(q);
  return g17(v);
}

void cmd_solve(Context& ctx) {
  const auto conds = order_conditions(ctx.opt.pattern, ctx.opt.order);
  const auto fixed = parse_assignments(ctx.opt.fix);
  const auto guess = parse_assignments(ctx.opt.guess);
  for (const auto& [k, _] : fixed)
    if (std::find(conds.parameters.begin(), conds.parameters.end(), k) == conds.parameters.end())
      throw ConfigError("unknown parameter " + k);
  SolveReport rep;
  if (guess.empty()) {
    rep = solve_multistart(conds, fixed, ctx.opt.starts, ctx.opt.seed);
  } else {
    auto start = guess;
    for (const auto& p : conds.parameters)
      if (!fixed.count(p) && !start.count(p)) start[p] = 1.0 / static_cast<double>(conds.parameters.size());
    rep = solve(conds, fixed, start);
  }
  json sol = json::object();
  for (const auto& [k, v] : rep.solution) sol[k] = {{"value", v}, {"exact", exact_or_decimal(v)}};
  json res{{"pattern", ctx.opt.pattern}, {"order", ctx.opt.order},      {"converged", rep.converged},
           {"iterations", rep.iterations}, {"max_residual", rep.max_residual}, {"solution", sol}};
  if (!rep.converged) throw NonConvergence("order-condition solve did not converge", res);
  if (ctx.format("csv") == "json") {
    ctx.emit("solve", res.dump(2) + "\n", "json");
    return;
  }
  Csv csv({"parameter", "value", "exact"});
  for (const auto& p : conds.parameters) {
    const double v = rep.solution.at(p);
    csv.row({p, g17(v), exact_or_decimal(v)});
  }
  ctx.emit("solve", csv.str(), "csv");
}

std::vector<double> parse_range(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw ConfigError("range must be start:stop:step");
  const double a = std::stod(parts[0]), b = std::stod(parts[1]), h = std::stod(parts[2]);
  if (!(h > 0.0) || b < a) throw ConfigError("range needs start <= stop and step > 0");
  std::vector<double> out;
  const long n = std::lround(std::floor((b - a) / h + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * h);
  return out;
}

void cmd_family(Context& ctx) {
  const auto curve = ruth_family(parse_range(ctx.opt.p6_range));
  if (ctx.format("csv") == "json") {
    json arr = json::array();
    for (const auto& pt : curve)
      arr.push_back({{"p6", pt.p6}, {"p", pt.p}, {"max_residual", pt.max_residual}, {"converged", pt.converged}});
    ctx.emit("family", arr.dump(2) + "\n", "json");
    return;
  }
  ctx.emit("family", family_csv(curve), "csv");
}

void cmd_converge(Context& ctx) {
  const Scheme s = find_scheme(ctx.opt.scheme_name);
  const long n_max = as_count(ctx.opt.n_max, "n-max", 2);
  std::string system = ctx.opt.system;
  if (system.empty()) system = s.slot_index("T") >= 0 ? "driven" : "spin";
  ConvergenceReport rep;
  if (system == "spin") {
    rep = converge_spin(s, ctx.opt.gamma, n_max);
  } else if (system == "driven") {
    if (s.slot_index("T") < 0) throw ConfigError("driven system needs a scheme with a T slot");
    rep = converge_driven(s, n_max);
  } else {
    std::mt19937_64 rng(ctx.opt.seed);
    const HermitianPart a(random_hermitian(ctx.opt.dim, rng));
    const HermitianPart b(random_hermitian(ctx.opt.dim, rng));
    CVector psi = CVector::Zero(ctx.opt.dim);
    psi[0] = 1.0;
    rep = converge_unitary(s, a, b, psi, 1.0, geometric_step_counts(4, n_max));
  }
  ctx.config["resolved_system"] = system;
  ctx.err << fmt::format("slope {:.6f} from {} points\n", rep.slope, rep.used);
  if (ctx.format("csv") == "json") {
    json pts = json::array();
    for (const auto& p : rep.points) pts.push_back({{"dt", p.dt}, {"error", p.error}, {"floor", p.floor}, {"used", p.used}});
    ctx.emit("converge",
             json{{"scheme", s.name}, {"system", system}, {"slope", rep.slope}, {"intercept", rep.intercept},
                  {"used", rep.used}, {"points", pts}}
                     .dump(2) + "\n",
             "json");
  } else {
    Csv csv({"dt", "error", "floor", "used"});
    for (const auto& p : rep.points) csv.row({g17(p.dt), g17(p.error), g17(p.floor), p.used ? "1" : "0"});
    ctx.emit("converge", csv.str(), "csv");
  }
  if (rep.used < 2) throw NonConvergence("fewer than two points above the roundoff floor", json{{"used", rep.used}});
}

double linear_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void cmd_precession(Context& ctx) {
  const double dt = ctx.opt.dt > 0 ? ctx.opt.dt : 0.01;
  const long every = ctx.opt.sample_every > 0 ? as_count(ctx.opt.sample_every, "sample-every", 1) : 1;
  std::optional<Scheme> scheme;
  const std::string name = or_default(ctx.opt.scheme_name, "trotter");
  ctx.config["scheme"] = name;
  if (name != "perturbative") scheme = find_scheme(name);
  const SpinSystem sys = spin_system(ctx.opt.gamma);
  const long steps =
      ctx.opt.steps > 0 ? as_count(ctx.opt.steps, "steps", 1) : std::lround(ctx.opt.periods * sys.period / dt);
  const auto samples = run_precession(scheme, ctx.opt.gamma, dt, steps, every);
  std::vector<double> t, e;
  double dev = 0.0;
  for (const auto& s : samples) {
    t.push_back(s.t);
    e.push_back(s.energy);
    dev = std::max(dev, std::abs(s.energy - samples.front().energy));
  }
  if (ctx.format("csv") == "json") {
    json arr = json::array();
    for (const auto& s : samples) arr.push_back({s.t, s.energy, s.norm});
    ctx.emit("precession",
             json{{"scheme", scheme ? scheme->name : "perturbative"},
                  {"max_deviation", dev},
                  {"dominant_period", dominant_period(t, e, 0.1 * sys.period, 2.0 * sys.period)},
                  {"samples", arr}}
                     .dump(2) + "\n",
             "json");
    return;
  }
  Csv csv({"t", "energy", "norm"});
  for (const auto& s : samples) csv.row({g17(s.t), g17(s.energy), g17(s.norm)});
  ctx.emit("precession", csv.str(), "csv");
}

void cmd_umeno(Context& ctx) {
  const double dt = ctx.opt.dt > 0 ? ctx.opt.dt : 1e-4;
  const long steps = ctx.opt.steps > 0 ? as_count(ctx.opt.steps, "steps", 1) : 1000000;
  const long every = ctx.opt.sample_every > 0 ? as_count(ctx.opt.sample_every, "sample-every", 1) : 1000;
  std::optional<Scheme> scheme;
  const std::string name = or_default(ctx.opt.scheme_name, "trotter");
  ctx.config["scheme"] = name;
  if (name != "euler") scheme = find_scheme(name);
  const auto mapping = ctx.opt.mapping == "pk" ? SlotMapping::PotentialKinetic : SlotMapping::KineticPotential;
  const auto samples = run_umeno(scheme, dt, steps, every, mapping);
  std::vector<double> t, e;
  double dev = 0.0;
  for (const auto& s : samples) {
    t.push_back(s.t);
    e.push_back(s.energy);
    dev = std::max(dev, std::abs(s.energy - 2.0));
  }
  if (ctx.format("csv") == "json") {
    json arr = json::array();
    for (const auto& s : samples) arr.push_back({s.t, s.energy, s.q1, s.q2});
    ctx.emit("umeno",
             json{{"scheme", scheme ? scheme->name : "euler"},
                  {"max_energy_deviation", dev},
                  {"energy_slope", linear_slope(t, e)},
                  {"samples", arr}}
                     .dump(2) + "\n",
             "json");
    return;
  }
  Csv csv({"t", "energy", "q1", "q2"});
  for (const auto& s : samples) csv.row({g17(s.t), g17(s.energy), g17(s.q1), g17(s.q2)});
  ctx.emit("umeno", csv.str(), "csv");
}

void cmd_timedep(Context& ctx) {
  const Scheme s = find_scheme(or_default(ctx.opt.scheme_name, "g4"));
  ctx.config["scheme"] = s.name;
  const double dt = ctx.opt.dt > 0 ? ctx.opt.dt : 1.0;
  const auto times = evaluation_times(s, ctx.opt.t0, dt);
  if (ctx.format("csv") == "json") {
    json arr = json::array();
    for (const auto& ts : times)
      arr.push_back({{"slot", s.slots[static_cast<std::size_t>(ts.slot)]},
                     {"coeff", coeff_string(ts.coeff)},
                     {"tau", coeff_string(ts.tau)},
                     {"tau_value", ts.tau.value},
                     {"time", ts.time}});
    ctx.emit("timedep", json{{"scheme", s.name}, {"stages", arr}}.dump(2) + "\n", "json");
    return;
  }
  Csv csv({"index", "slot", "coeff", "tau", "tau_value", "time"});
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto& ts = times[i];
    csv.row({std::to_string(i), s.slots[static_cast<std::size_t>(ts.slot)], coeff_string(ts.coeff),
             coeff_string(ts.tau), g17(ts.tau.value), g17(ts.time)});
  }
  ctx.emit("timedep", csv.str(), "csv");
}

long therm_for(const Options& o, long sweeps) {
  return o.therm >= 0 ? as_count(o.therm, "therm") : sweeps / 10;
}

void cmd_qmc(Context& ctx) {
  const IsingModel m = load_model(ctx);
  const long sweeps = as_count(ctx.opt.sweeps, "sweeps", 1);
  const long therm = therm_for(ctx.opt, sweeps);
  const RunStats r = metropolis_run(m, ctx.opt.trotter, sweeps, therm, ctx.opt.seed, ctx.opt.bins, ctx.opt.traces);
  if (ctx.opt.traces) {
    std::vector<std::string> header{"sweep"};
    for (const auto& o : r.observables) header.push_back(o.name);
    Csv csv(header);
    for (std::size_t k = 0; k < r.traces.front().size(); ++k) {
      std::vector<std::string> row{std::to_string(therm + static_cast<long>(k) + 1)};
      for (const auto& tr : r.traces) row.push_back(g17(tr[k]));
      csv.row(row);
    }
    ctx.write_file("qmc_traces.csv", csv.str());
  }
  if (ctx.format("json") == "csv") {
    Csv csv({"observable", "mean", "stderr"});
    for (const auto& o : r.observables) csv.row({o.name, g17(o.mean), g17(o.stderr_)});
    ctx.emit("qmc", csv.str(), "csv");
    return;
  }
  json j = to_json(r);
  j["model"] = to_json(m);
  ctx.emit("qmc", j.dump(2) + "\n", "json");
}

std::vector<double> parse_schedule(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError("schedule must be start:end:stages or a comma list");
    return geometric_schedule(std::stod(parts[0]), std::stod(parts[1]), std::stoi(parts[2]));
  }
  std::vector<double> out;
  for (const auto& p : split(text, ',')) out.push_back(std::stod(p));
  return out;
}

void cmd_anneal(Context& ctx) {
  const IsingModel m = load_model(ctx);
  const auto schedule = parse_schedule(ctx.opt.schedule);
  const auto r = anneal(m, ctx.opt.trotter, schedule, as_count(ctx.opt.sweeps_per_stage, "sweeps-per-stage", 1),
                        ctx.opt.seed);
  for (const auto& w : r.warnings) ctx.err << "warning: " << w << "\n";
  if (ctx.format("json") == "csv") {
    Csv csv({"site", "spin"});
    for (std::size_t i = 0; i < r.configuration.size(); ++i) csv.row({std::to_string(i), std::to_string(r.configuration[i])});
    ctx.emit("anneal", csv.str(), "csv");
    return;
  }
  ctx.emit("anneal",
           json{{"energy", r.energy}, {"configuration", r.configuration}, {"best_layer", r.best_layer},
                {"warnings", r.warnings}, {"schedule", schedule}}
                   .dump(2) + "\n",
           "json");
}

void cmd_extrapolate(Context& ctx) {
  const IsingModel m = load_model(ctx);
  std::vector<int> ns;
  for (const auto& p : split(ctx.opt.n_list, ',')) ns.push_back(std::stoi(p));
  if (ns.size() < 3) throw ConfigError("--n-list needs at least three values");
  std::string observable = ctx.opt.observable;
  if (observable.empty()) {
    if (m.bonds.empty()) throw ConfigError("model has no bonds; choose --observable");
    observable = fmt::format("zz[{},{}]", m.bonds.front().i, m.bonds.front().j);
  }
  ExtrapolationReport rep;
  if (ctx.opt.exact) {
    std::vector<double> values;
    std::size_t bond = m.bonds.size();
    for (std::size_t b = 0; b < m.bonds.size(); ++b)
      if (observable == fmt::format("zz[{},{}]", m.bonds[b].i, m.bonds[b].j)) bond = b;
    for (int n : ns) {
      const auto e = exact_reference(m, n);
      if (bond < m.bonds.size()) values.push_back(e.zz[bond]);
      else if (observable == "magnetization") values.push_back(e.magnetization);
      else if (observable == "trotter_corr") values.push_back(e.trotter_corr);
      else if (observable == "energy_diag") values.push_back(e.energy_diag);
      else if (observable == "sigma_x") values.push_back(e.sigma_x);
      else throw ConfigError("unknown observable " + observable);
    }
    rep = extrapolate(ns, values, {});
  } else {
    const long sweeps = as_count(ctx.opt.sweeps, "sweeps", 1);
    rep = trotter_extrapolate(m, ns, sweeps, therm_for(ctx.opt, sweeps), ctx.opt.seed, observable);
  }
  json res{{"observable", observable}, {"n", rep.n_values}, {"values", rep.values}, {"errors", rep.errors},
           {"c0", rep.c0},             {"c1", rep.c1},       {"c2", rep.c2},           {"c0_stderr", rep.c0_stderr},
           {"residuals", rep.residuals}, {"dominant_power", rep.dominant_power}, {"ok", rep.ok},
           {"diagnostics", rep.diagnostics}};
  if (ctx.format("json") == "csv") {
    Csv csv({"n", "value", "error", "residual"});
    for (std::size_t i = 0; i < ns.size(); ++i)
      csv.row({std::to_string(ns[i]), g17(rep.values[i]), rep.errors.empty() ? "" : g17(rep.errors[i]),
               rep.residuals.empty() ? "" : g17(rep.residuals[i])});
    ctx.emit("extrapolate", csv.str(), "csv");
  } else {
    ctx.emit("extrapolate", res.dump(2) + "\n", "json");
  }
  if (!rep.ok) throw NonConvergence("extrapolation fit failed: " + rep.diagnostics, res);
}

void dispatch(Context& ctx) {
  const std::string& p = ctx.command_path;
  if (p == "bch") return cmd_bch(ctx);
  if (p.rfind("scheme ", 0) == 0) return cmd_scheme(ctx, p.substr(7));
  if (p == "solve") return cmd_solve(ctx);
  if (p == "family") return cmd_family(ctx);
  if (p == "converge") return cmd_converge(ctx);
  if (p == "precession") return cmd_precession(ctx);
  if (p == "umeno") return cmd_umeno(ctx);
  if (p == "timedep") return cmd_timedep(ctx);
  if (p == "qmc") return cmd_qmc(ctx);
  if (p == "anneal") return cmd_anneal(ctx);
  if (p == "extrapolate") return cmd_extrapolate(ctx);
  throw ConfigError("unknown command " + p);
}

int parse(CLI::App& app, std::vector<std::string> args, std::ostream& out, std::ostream& err, bool& done) {
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    done = true;
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  return kOk;
}

void write_manifest(Context& ctx, const std::vector<std::string>& args, int code) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  json m{{"command", ctx.command_path}, {"args", args},     {"config", ctx.config},
         {"outputs", ctx.written},      {"exit_code", code}, {"created", stamp}};
  if (!ctx.inline_model.empty()) m["inline_model"] = ctx.inline_model;
  std::filesystem::create_directories(ctx.out_dir());
  std::ofstream(ctx.out_dir() / "manifest.json", std::ios::binary) << m.dump(2) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  // First pass: find the command and the config file.
  Options first;
  auto app1 = make_app(first);
  relax_required(app1.get());
  bool done = false;
  int code = parse(*app1, args, out, err, done);
  if (done) return code;

  std::vector<std::string> full = args;
  json inline_model = json::object();
  if (!first.config.empty()) {
    json cfg;
    try {
      std::ifstream f(first.config);
      if (!f) throw ConfigError("cannot open config file " + first.config);
      cfg = json::parse(f);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kConfigError;
    }
    if (!cfg.is_object()) {
      err << "error: config file must hold a JSON object\n";
      return kConfigError;
    }
    CLI::App* leaf = selected_leaf(app1.get());
    const bool model_cmd = uses_model(command_path(app1.get()));
    const std::string path = command_path(app1.get());
    for (const auto& [key, value] : cfg.items()) {
      if (key == "experiment") {
        if (!value.is_string() || (value.get<std::string>() != path && value.get<std::string>() != path.substr(0, path.find(' ')))) {
          err << fmt::format("error: config is for experiment {} but the command is '{}'\n", value.dump(), path);
          return kConfigError;
        }
        continue;
      }
      if (value.is_null()) continue;  // keep the default
      if (model_cmd && kModelKeys.count(key)) {
        inline_model[key] = value;
        continue;
      }
      CLI::Option* opt = key == "config" ? nullptr : find_option(app1.get(), leaf, key);
      if (opt == nullptr) {
        err << fmt::format("error: unknown config key '{}' for '{}'\n", key, command_path(app1.get()));
        return kConfigError;
      }
      if (opt->count() > 0) continue;  // command line wins
      if (opt->get_expected_max() == 0) {
        if (value.is_boolean() && value.get<bool>()) full.push_back(opt->get_lnames().empty() ? opt->get_name() : "--" + opt->get_lnames().front());
        continue;
      }
      if (!opt->get_lnames().empty()) full.push_back("--" + opt->get_lnames().front());
      full.push_back(json_scalar(value));
    }
  }

  Options opt;
  auto app = make_app(opt);
  code = parse(*app, full, out, err, done);
  if (done) return code;

  CLI::App* leaf = selected_leaf(app.get());
  Context ctx{opt, leaf, command_path(app.get()), resolved_config(app.get(), leaf), inline_model, out, err, {}};
  try {
    dispatch(ctx);
    code = kOk;
  } catch (const NonConvergence& e) {
    err << "error: " << e.what() << "\n";
    out << json{{"error", e.what()}, {"diagnostics", e.diagnostics}}.dump(2) << "\n";
    code = kNonConvergence;
  } catch (const FrozenTrotterError& e) {
    err << "error: " << e.what() << "\n";
    code = kConfigError;
  } catch (const ResourceError& e) {
    err << "error: " << e.what() << "\n";
    code = kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    code = kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kFailure;
  }
  try {
    write_manifest(ctx, args, code);
  } catch (const std::exception& e) {
    err << "error: cannot write manifest: " << e.what() << "\n";
    if (code == kOk) code = kFailure;
  }
  return code;
}

}  // namespace expprod::cli
