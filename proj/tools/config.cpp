#include "config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "dualdiv/errors.hpp"

namespace dualdiv::cli {

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"model", {"c", "c0", "sigma"}},
    {"jumps",
     {"kind", "rate", "mu", "weights", "mus", "shape", "scale", "x", "density", "kappa", "index",
      "beta", "upper", "truncation"}},
    {"policy", {"q", "alpha", "b"}},
    {"simulation", {"paths", "seed", "dt", "tail_tolerance", "step_sigmas"}},
    {"grid", {"x", "b"}},
};

const std::map<std::string, std::set<std::string>> kJumpKeys = {
    {"none", {}},
    {"exponential", {"rate", "mu"}},
    {"hyperexponential", {"rate", "weights", "mus"}},
    {"gamma", {"rate", "shape", "scale"}},
    {"tabulated", {"rate", "x", "density"}},
    {"tempered_stable", {"kappa", "index", "beta", "upper", "truncation"}},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> to_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

struct Entry {
  std::string value;
  int line = 0;
};

class Reader {
public:
  explicit Reader(std::string_view text) { read(text); }

  std::vector<std::string>& errors() { return errors_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  int line(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  void error(int line, const std::string& msg) {
    errors_.push_back(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg);
  }

  std::optional<double> number(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    const auto v = to_number(it->second.value);
    if (!v || !std::isfinite(*v)) {
      error(it->second.line, key + ": '" + it->second.value + "' is not a finite number");
      return std::nullopt;
    }
    return v;
  }

  double required(const std::string& key, int fallback_line) {
    if (!has(key)) {
      error(fallback_line, "missing required key " + key);
      return 0.0;
    }
    return number(key).value_or(0.0);
  }

  std::vector<double> list(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return {};
    try {
      return parse_grid(it->second.value);
    } catch (const std::exception& e) {
      error(it->second.line, key + ": " + e.what());
      return {};
    }
  }

  int section_line(const std::string& s) const {
    const auto it = sections_.find(s);
    return it == sections_.end() ? 0 : it->second;
  }

private:
  void read(std::string_view text) {
    std::string section;
    int n = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
      ++n;
      const auto hash = raw.find('#');
      const std::string s = trim(std::string_view(raw).substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') {
          error(n, "malformed section header '" + s + "'");
          continue;
        }
        section = trim(std::string_view(s).substr(1, s.size() - 2));
        if (!kSchema.count(section)) {
          error(n, "unknown section [" + section + "]");
        } else if (sections_.count(section)) {
          error(n, "section [" + section + "] appears twice");
        } else {
          sections_[section] = n;
        }
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        error(n, "expected 'key = value', got '" + s + "'");
        continue;
      }
      const std::string key = trim(std::string_view(s).substr(0, eq));
      const std::string value = trim(std::string_view(s).substr(eq + 1));
      if (section.empty()) {
        error(n, "key '" + key + "' outside any section");
        continue;
      }
      const auto schema = kSchema.find(section);
      if (schema == kSchema.end()) continue;  // already reported
      if (!schema->second.count(key)) {
        error(n, "unknown key '" + key + "' in [" + section + "]");
        continue;
      }
      const std::string full = section + "." + key;
      if (entries_.count(full)) {
        error(n, "duplicate key '" + key + "' in [" + section + "] (first on line " +
                     std::to_string(entries_[full].line) + ")");
        continue;
      }
      if (value.empty()) {
        error(n, "key '" + key + "' has no value");
        continue;
      }
      entries_[full] = Entry{value, n};
    }
  }

  std::map<std::string, Entry> entries_;
  std::map<std::string, int> sections_;
  std::vector<std::string> errors_;
};

std::optional<JumpSpec> read_jumps(Reader& r) {
  const int sec = r.section_line("jumps");
  if (sec == 0) return JumpSpec{NoJumps{}};
  if (!r.has("jumps.kind")) {
    r.error(sec, "[jumps] needs a kind");
    return std::nullopt;
  }
  const std::string kind = r.entries().at("jumps.kind").value;
  const int kline = r.line("jumps.kind");
  const auto allowed = kJumpKeys.find(kind);
  if (allowed == kJumpKeys.end()) {
    r.error(kline, "unknown jump kind '" + kind +
                       "' (none, exponential, hyperexponential, gamma, tabulated, "
                       "tempered_stable)");
    return std::nullopt;
  }
  bool ok = true;
  for (const auto& [full, e] : r.entries()) {
    if (full.rfind("jumps.", 0) != 0 || full == "jumps.kind") continue;
    const std::string key = full.substr(6);
    if (!allowed->second.count(key)) {
      r.error(e.line, "key '" + key + "' does not apply to jump kind " + kind);
      ok = false;
    }
  }
  const std::size_t before = r.errors().size();
  JumpSpec spec = NoJumps{};
  if (kind == "exponential") {
    spec = ExponentialJumps{r.required("jumps.rate", kline), r.required("jumps.mu", kline)};
  } else if (kind == "hyperexponential") {
    HyperExponentialJumps h;
    h.rate = r.required("jumps.rate", kline);
    h.weights = r.list("jumps.weights");
    h.mus = r.list("jumps.mus");
    if (h.weights.empty() || h.weights.size() != h.mus.size()) {
      r.error(kline, "hyperexponential needs weights and mus of equal, nonzero length");
    }
    spec = h;
  } else if (kind == "gamma") {
    spec = GammaJumps{r.required("jumps.rate", kline), r.required("jumps.shape", kline),
                      r.required("jumps.scale", kline)};
  } else if (kind == "tabulated") {
    TabulatedJumps t;
    t.rate = r.required("jumps.rate", kline);
    t.x = r.list("jumps.x");
    t.density = r.list("jumps.density");
    spec = t;
  } else if (kind == "tempered_stable") {
    const double kappa = r.required("jumps.kappa", kline);
    const double index = r.required("jumps.index", kline);
    const double beta = r.required("jumps.beta", kline);
    const double upper = r.number("jumps.upper").value_or(0.0);
    if (r.errors().size() == before) {
      try {
        spec = tempered_stable(kappa, index, beta, upper);
      } catch (const std::exception& e) {
        r.error(kline, e.what());
      }
    }
  }
  if (!ok || r.errors().size() != before) return std::nullopt;
  return spec;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error([&] {
        std::string s = "invalid configuration:";
        for (const auto& e : errors) s += "\n  " + e;
        return s;
      }()),
      errors_(std::move(errors)) {}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> parse_grid(std::string_view text) {
  const std::string s = trim(text);
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::istringstream in(s);
    for (std::string p; std::getline(in, p, ':');) {
      const auto v = to_number(trim(p));
      if (!v) throw DomainError("'" + p + "' is not a number in range '" + s + "'");
      parts.push_back(*v);
    }
    if (parts.size() != 3) throw DomainError("range must be lo:step:hi, got '" + s + "'");
    const double lo = parts[0], step = parts[1], hi = parts[2];
    if (!(step > 0.0) || !(hi >= lo)) throw DomainError("range needs step > 0 and hi >= lo");
    const double count = std::floor((hi - lo) / step + 1e-9);
    if (count > 1e7) throw DomainError("range has too many points");
    for (long i = 0; i <= static_cast<long>(count); ++i) out.push_back(lo + step * i);
    return out;
  }
  std::istringstream in(s);
  for (std::string p; std::getline(in, p, ',');) {
    const auto v = to_number(trim(p));
    if (!v) throw DomainError("'" + trim(p) + "' is not a number");
    out.push_back(*v);
  }
  if (out.empty()) throw DomainError("empty list");
  return out;
}

RunConfig parse_config(std::string_view text) {
  Reader r(text);
  const int model_line = r.section_line("model");
  const int policy_line = r.section_line("policy");
  if (model_line == 0) r.error(0, "missing [model] section");
  if (policy_line == 0) r.error(0, "missing [policy] section");

  const bool has_c = r.has("model.c"), has_c0 = r.has("model.c0");
  if (model_line != 0 && has_c == has_c0) {
    r.error(model_line, "[model] needs exactly one of c and c0");
  }
  const double drift = r.number(has_c ? "model.c" : "model.c0").value_or(0.0);
  const double sigma = r.number("model.sigma").value_or(0.0);
  if (sigma < 0.0) r.error(r.line("model.sigma"), "sigma must be >= 0");

  PolicyParams policy;
  policy.q = r.required("policy.q", policy_line);
  policy.alpha = r.required("policy.alpha", policy_line);
  if (r.has("policy.b")) {
    const auto b = r.number("policy.b");
    if (b) policy.b = *b;
  }

  SimConfig sim;
  if (const auto p = r.number("simulation.paths")) {
    if (!(*p >= 1.0) || *p != std::floor(*p)) {
      r.error(r.line("simulation.paths"), "paths must be a positive integer");
    } else {
      sim.n_paths = static_cast<std::uint64_t>(*p);
    }
  }
  if (r.has("simulation.seed")) {
    const auto& e = r.entries().at("simulation.seed");
    char* end = nullptr;
    errno = 0;
    const auto v = std::strtoull(e.value.c_str(), &end, 0);
    if (end != e.value.c_str() + e.value.size() || errno == ERANGE || e.value[0] == '-') {
      r.error(e.line, "seed must be an unsigned 64-bit integer");
    } else {
      sim.seed = v;
    }
  }
  if (const auto v = r.number("simulation.dt")) {
    if (!(*v > 0.0)) r.error(r.line("simulation.dt"), "dt must be > 0");
    sim.dt = *v;
  }
  if (const auto v = r.number("simulation.tail_tolerance")) {
    if (!(*v > 0.0)) r.error(r.line("simulation.tail_tolerance"), "tail_tolerance must be > 0");
    sim.tail_tolerance = *v;
  }
  if (const auto v = r.number("simulation.step_sigmas")) {
    if (!(*v > 0.0)) r.error(r.line("simulation.step_sigmas"), "step_sigmas must be > 0");
    sim.step_sigmas = *v;
  }
  int truncation = 0;
  if (const auto v = r.number("jumps.truncation")) {
    if (!(*v >= 1.0) || *v != std::floor(*v)) {
      r.error(r.line("jumps.truncation"), "truncation must be a positive integer");
    } else {
      truncation = static_cast<int>(*v);
    }
  }
  const auto xs = r.list("grid.x");
  const auto bs = r.list("grid.b");
  const auto jumps = read_jumps(r);
  if (!r.errors().empty() || !jumps) throw ConfigError(r.errors());

  std::optional<ModelSpec> model;
  try {
    model = has_c ? ModelSpec::from_c(drift, sigma, *jumps)
                  : ModelSpec::from_c0(drift, sigma, *jumps);
    if (truncation > 0) model = truncate_measure(*model, truncation);
  } catch (const std::exception& e) {
    const int line = r.has("jumps.kind") ? r.line("jumps.kind") : model_line;
    throw ConfigError({"line " + std::to_string(line) + ": " + e.what()});
  }

  const std::map<std::string, std::string> where = {
      {"c > 0", has_c ? "model.c" : "model.c0"}, {"E(X1) > 0", "model.c0"},
      {"q > 0", "policy.q"},  {"alpha > 0", "policy.alpha"},
      {"alpha < c0", "policy.alpha"}, {"b >= 0", "policy.b"},
  };
  for (const auto& v : validate(*model, policy)) {
    const auto it = where.find(v.condition);
    int line = it == where.end() ? model_line : r.line(it->second);
    if (line == 0) line = model_line;
    const std::string what = v.condition == "alpha < c0" ? "admissibility constraint " : "";
    r.error(line, what + v.condition + " violated: " + v.detail);
  }
  if (!r.errors().empty()) throw ConfigError(r.errors());

  RunConfig cfg{*model, policy, sim, xs, bs, {}, fnv1a(text)};
  for (const auto& [k, e] : r.entries()) cfg.lines[k] = e.line;
  return cfg;
}

}  // namespace dualdiv::cli
