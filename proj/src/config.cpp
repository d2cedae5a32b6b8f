#include "ftkoop/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ftkoop {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& v) { return static_cast<int>(to_integer(v)); }

std::uint64_t to_seed(const std::string& v) {
  const long long s = to_integer(v);
  if (s < 0) throw std::invalid_argument("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

std::vector<Monomial> to_terms(const std::string& v) {
  std::vector<Monomial> out;
  for (const auto& term : split(v, ';')) {
    if (term.empty()) continue;
    Monomial m;
    std::stringstream ss(term);
    std::string tok;
    while (ss >> tok) m.exponents.push_back(to_int(tok));
    out.push_back(std::move(m));
  }
  if (out.empty()) throw std::invalid_argument("catalog needs at least one term");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

struct Pending {
  std::optional<std::string> theta;
  std::optional<std::string> mask;
  std::optional<std::string> whitelist;
  std::optional<std::vector<Monomial>> terms;
  int theta_line = 0;
  int mask_line = 0;
  int whitelist_line = 0;
};

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["plant.mu"] = [](auto& c, const auto& v) { c.run.plant.mu = to_double(v); };
    t["plant.lambda"] = [](auto& c, const auto& v) { c.run.plant.lambda = to_double(v); };
    t["plant.probe_on"] = [](auto& c, const auto& v) { c.run.plant.probe_on = to_double(v); };
    t["plant.probe_off"] = [](auto& c, const auto& v) { c.run.plant.probe_off = to_double(v); };
    t["plant.post_probe_input"] = [](auto&, const auto& v) {
      if (v != "zero") throw std::invalid_argument("only 'zero' is supported");
    };
    t["plant.x0"] = [](auto& c, const auto& v) {
      const auto parts = split(v, ',');
      if (parts.size() != 2) throw std::invalid_argument("x0 needs two comma-separated values");
      c.run.x0 = Eigen::Vector2d(to_double(parts[0]), to_double(parts[1]));
    };
    t["run.dt"] = [](auto& c, const auto& v) { c.run.dt = to_double(v); };
    t["run.t_final"] = [](auto& c, const auto& v) { c.run.t_final = to_double(v); };
    t["run.log_every"] = [](auto& c, const auto& v) { c.run.log_every = to_int(v); };
    t["filters.a_theta"] = [](auto& c, const auto& v) { c.run.filter_gain = to_double(v); };
    t["flow.alpha"] = [](auto& c, const auto& v) { c.run.flow.alpha = to_double(v); };
    t["flow.r"] = [](auto& c, const auto& v) { c.run.flow.r = to_int(v); };
    t["flow.delta"] = [](auto& c, const auto& v) { c.run.flow.delta = to_double(v); };
    t["flow.dt_flow"] = [](auto& c, const auto& v) { c.run.flow.dt_flow = to_double(v); };
    t["flow.stop_tol"] = [](auto& c, const auto& v) { c.run.flow.stop_tol = to_double(v); };
    t["flow.max_halvings"] = [](auto& c, const auto& v) { c.run.flow.max_halvings = to_int(v); };
    t["flow.integrator"] = [](auto& c, const auto& v) {
      if (v == "rk4") c.run.flow.integrator = FlowIntegrator::kRk4;
      else if (v == "exact") c.run.flow.integrator = FlowIntegrator::kExact;
      else throw std::invalid_argument("integrator must be 'rk4' or 'exact'");
    };
    t["stack.p"] = [](auto& c, const auto& v) { c.run.stack.capacity = to_int(v); };
    t["stack.record_dt"] = [](auto& c, const auto& v) { c.run.stack.record_dt = to_double(v); };
    t["stack.rank_tol"] = [](auto& c, const auto& v) { c.run.stack.rank_tol = to_double(v); };
    t["stack.policy"] = [](auto& c, const auto& v) {
      if (v == "uniform") c.run.stack.policy = ReplacementPolicy::kNone;
      else if (v == "greedy") c.run.stack.policy = ReplacementPolicy::kGreedy;
      else throw std::invalid_argument("policy must be 'uniform' or 'greedy'");
    };
    t["meta.lambda_sparsity"] = [](auto& c, const auto& v) { c.meta.lambda_sparsity = to_double(v); };
    t["meta.t_outer"] = [](auto& c, const auto& v) { c.meta.t_outer = to_int(v); };
    t["meta.n_init"] = [](auto& c, const auto& v) { c.meta.n_init = to_int(v); };
    t["meta.patience"] = [](auto& c, const auto& v) { c.meta.patience = to_int(v); };
    t["meta.tie_tol"] = [](auto& c, const auto& v) { c.meta.tie_tol = to_double(v); };
    t["meta.ascent_starts"] = [](auto& c, const auto& v) { c.meta.ascent_starts = to_int(v); };
    auto gp = [](ExperimentConfig& c) -> GpHyper& {
      if (!c.meta.gp) c.meta.gp = GpHyper::defaults_for(c.catalog.size());
      return *c.meta.gp;
    };
    t["gp.sigma0_sq"] = [gp](auto& c, const auto& v) { gp(c).sigma0_sq = to_double(v); };
    t["gp.length_scale"] = [gp](auto& c, const auto& v) { gp(c).length_scale = to_double(v); };
    t["gp.noise_sq"] = [gp](auto& c, const auto& v) { gp(c).noise_sq = to_double(v); };
    t["rng.seed"] = [](auto& c, const auto& v) {
      c.seed = to_seed(v);
      c.meta.seed = c.seed;
    };
    t["output.dir"] = [](auto& c, const auto& v) { c.output_dir = v; };
    return t;
  }();
  return table;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  Pending pending;
  std::map<std::string, int> key_lines;
  std::string section;
  std::stringstream in(text);
  std::string raw_line;
  int line_no = 0;

  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string line = raw_line;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(origin, line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, line_no, "missing key");
    if (value.empty()) fail(origin, line_no, "missing value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!key_lines.emplace(full, line_no).second) fail(origin, line_no, "duplicate key '" + full + "'");
    cfg.raw.emplace_back(full, value);

    try {
      if (full == "library.theta") {
        pending.theta = value;
        pending.theta_line = line_no;
      } else if (full == "library.mask") {
        pending.mask = value;
        pending.mask_line = line_no;
      } else if (full == "meta.whitelist") {
        pending.whitelist = value;
        pending.whitelist_line = line_no;
      } else if (full == "catalog.terms") {
        pending.terms = to_terms(value);
      } else {
        const auto it = setters().find(full);
        if (it == setters().end()) fail(origin, line_no, "unknown key '" + full + "'");
        it->second(cfg, value);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(origin, line_no, "bad value for '" + full + "': " + e.what());
    }
  }

  if (pending.terms) {
    try {
      const int dim = static_cast<int>(pending.terms->front().exponents.size());
      cfg.catalog = ObservableCatalog(dim, *pending.terms);
    } catch (const std::exception& e) {
      fail(origin, line_no, std::string("bad catalog: ") + e.what());
    }
    // The default length scale depends on the catalog size.
    if (cfg.meta.gp && !key_lines.count("gp.length_scale")) {
      cfg.meta.gp->length_scale = GpHyper::defaults_for(cfg.catalog.size()).length_scale;
    }
  }
  if (pending.theta && pending.mask) fail(origin, pending.mask_line, "give either library.theta or library.mask");
  try {
    if (pending.theta) {
      std::vector<int> theta;
      for (const auto& s : split(*pending.theta, ',')) theta.push_back(to_int(s));
      cfg.library = encode_mask(ObservableLibrary(cfg.catalog, theta));
    }
  } catch (const std::exception& e) {
    fail(origin, pending.theta_line, std::string("bad library.theta: ") + e.what());
  }
  try {
    if (pending.mask) {
      const LibraryMask m = LibraryMask::parse(*pending.mask);
      decode_mask(cfg.catalog, m);
      cfg.library = m;
    }
  } catch (const std::exception& e) {
    fail(origin, pending.mask_line, std::string("bad library.mask: ") + e.what());
  }
  try {
    if (pending.whitelist) {
      for (const auto& s : split(*pending.whitelist, ',')) {
        const LibraryMask m = LibraryMask::parse(s);
        decode_mask(cfg.catalog, m);
        cfg.meta.whitelist.push_back(m);
      }
    }
  } catch (const std::exception& e) {
    fail(origin, pending.whitelist_line, std::string("bad meta.whitelist: ") + e.what());
  }

  auto line_of = [&](const std::string& prefix) {
    for (const auto& [key, line] : key_lines) {
      if (key.rfind(prefix, 0) == 0) return line;
    }
    return 0;
  };
  auto check = [&](const std::string& section_name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      fail(origin, line_of(section_name), e.what());
    }
  };
  check("plant.", [&] { cfg.run.plant.validate(); });
  check("flow.", [&] { cfg.run.flow.validate(); });
  check("meta.", [&] { cfg.meta.validate(); });
  check("gp.", [&] {
    if (cfg.meta.gp) cfg.meta.gp->validate();
  });
  check("run.", [&] {
    if (!(cfg.run.dt > 0)) throw InputError("run.dt must be positive");
    if (!(cfg.run.t_final > 0)) throw InputError("run.t_final must be positive");
    if (cfg.run.log_every < 1) throw InputError("run.log_every must be at least 1");
  });
  check("filters.", [&] {
    if (!(cfg.run.filter_gain > 0)) throw InputError("filters.a_theta must be positive");
  });
  check("stack.", [&] {
    if (cfg.run.stack.capacity < 1) throw InputError("stack.p must be at least 1");
    if (!(cfg.run.stack.record_dt > 0)) throw InputError("stack.record_dt must be positive");
    if (!(cfg.run.stack.rank_tol >= 0)) throw InputError("stack.rank_tol must be non-negative");
  });
  check("catalog.", [&] {
    if (cfg.catalog.state_dim() != 2) throw InputError("catalog terms must have two exponents (plant state)");
  });
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str(), path);
}

ObservableLibrary ExperimentConfig::require_library() const {
  if (!library) throw ConfigError("config: library.theta or library.mask is required");
  return decode_mask(catalog, *library);
}

std::vector<std::string> config_warnings(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.library) {
    const int need = cfg.library->popcount() + 1;
    if (cfg.run.stack.capacity < need) {
      out.push_back("stack.p = " + std::to_string(cfg.run.stack.capacity) + " is below n_xi + m = " +
                    std::to_string(need) + "; the rank condition cannot hold");
    }
  }
  if (cfg.run.stack.record_dt * cfg.run.stack.capacity > cfg.run.t_final) {
    out.push_back("recording window p * record_dt exceeds run.t_final; the stack will not fill");
  }
  return out;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& m : catalog.entries()) terms.push_back(m.exponents);
  nlohmann::json whitelist = nlohmann::json::array();
  for (const auto& m : meta.whitelist) whitelist.push_back(m.to_string());
  const GpHyper gp = meta.gp.value_or(GpHyper::defaults_for(catalog.size()));
  nlohmann::json raw_json = nlohmann::json::object();
  for (const auto& [k, v] : raw) raw_json[k] = v;
  return {
      {"plant",
       {{"mu", run.plant.mu},
        {"lambda", run.plant.lambda},
        {"probe_on", run.plant.probe_on},
        {"probe_off", run.plant.probe_off},
        {"post_probe_input", "zero"},
        {"x0", {run.x0(0), run.x0(1)}}}},
      {"run", {{"dt", run.dt}, {"t_final", run.t_final}, {"log_every", run.log_every}}},
      {"filters", {{"a_theta", run.filter_gain}}},
      {"flow",
       {{"alpha", run.flow.alpha},
        {"r", run.flow.r},
        {"delta", run.flow.delta},
        {"dt_flow", run.flow.dt_flow},
        {"stop_tol", run.flow.stop_tol},
        {"max_halvings", run.flow.max_halvings},
        {"integrator", run.flow.integrator == FlowIntegrator::kExact ? "exact" : "rk4"}}},
      {"stack",
       {{"p", run.stack.capacity},
        {"record_dt", run.stack.record_dt},
        {"rank_tol", run.stack.rank_tol},
        {"policy", run.stack.policy == ReplacementPolicy::kGreedy ? "greedy" : "uniform"}}},
      {"catalog", {{"terms", terms}}},
      {"library", library ? nlohmann::json(library->to_string()) : nlohmann::json(nullptr)},
      {"meta",
       {{"lambda_sparsity", meta.lambda_sparsity},
        {"t_outer", meta.t_outer},
        {"n_init", meta.n_init},
        {"patience", meta.patience},
        {"tie_tol", meta.tie_tol},
        {"ascent_starts", meta.ascent_starts},
        {"whitelist", whitelist}}},
      {"gp", {{"sigma0_sq", gp.sigma0_sq}, {"length_scale", gp.length_scale}, {"noise_sq", gp.noise_sq}}},
      {"rng", {{"seed", seed}}},
      {"output", {{"dir", output_dir}}},
      {"raw", raw_json},
  };
}

}  // namespace ftkoop
