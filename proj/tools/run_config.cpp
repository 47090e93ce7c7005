#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scarlab/discretize.hpp"

namespace scarlab::cli {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out = "invalid configuration:";
  for (const auto& s : items) out += "\n  - " + s;
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double parse_factor(const std::string& tok) {
  const std::string t = trim(tok);
  if (t == "pi") return kPi;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + tok + "'");
  }
  if (used != t.size()) throw std::invalid_argument("not a number: '" + tok + "'");
  return v;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{"domain",  "t",       "t_start", "t_stop",    "t_step", "dx",
                                             "bc",      "robin_b", "chi",     "phi",       "n_min",  "n_max",
                                             "halfwidth", "center", "m",      "out",       "workers",
                                             "export_operator"};
  return keys;
}

KeyValues parse_config_text(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) {
      problems.push_back(where + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      problems.push_back(where + ": empty key");
    } else if (out.count(key)) {
      problems.push_back(where + ": duplicate key '" + key + "'");
    } else {
      out[key] = value;
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  return out;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

double parse_number(const std::string& text) {
  // Products and quotients of numbers and "pi", evaluated left to right.
  const std::string s = lower(trim(text));
  if (s.empty()) throw std::invalid_argument("empty number");
  double value = 1.0;
  char op = '*';
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '*' || s[i] == '/') {
      const double f = parse_factor(s.substr(start, i - start));
      if (op == '*') {
        value *= f;
      } else {
        if (f == 0.0) throw std::invalid_argument("division by zero in '" + text + "'");
        value /= f;
      }
      if (i < s.size()) op = s[i];
      start = i + 1;
    }
  }
  if (!std::isfinite(value)) throw std::invalid_argument("not finite: '" + text + "'");
  return value;
}

std::uint64_t config_hash(const std::string& command, const KeyValues& values) {
  std::string canon = "command=" + command + "\n";
  for (const auto& [k, v] : values) {
    if (k == "out" || k == "workers") continue;
    canon += k + "=" + v + "\n";
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

DomainSpec RunConfig::spec(double t) const {
  return domain == DomainKind::Rectangle ? DomainSpec::rectangle(t, bc) : DomainSpec::stadium(t, bc);
}

std::vector<int> RunConfig::n_range() const {
  std::vector<int> out;
  for (int n = n_min; n <= n_max; ++n) out.push_back(n);
  return out;
}

RunConfig validate(const std::string& command, const KeyValues& values) {
  std::vector<std::string> problems;
  RunConfig c;
  c.command = command;

  const auto& keys = known_keys();
  for (const auto& [k, v] : values) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) problems.push_back("unknown key '" + k + "'");
    if (v.empty()) problems.push_back("key '" + k + "' has an empty value");
  }
  auto has = [&](const std::string& k) { return values.count(k) && !values.at(k).empty(); };
  auto number = [&](const std::string& k, double& out) {
    if (!has(k)) return false;
    try {
      out = parse_number(values.at(k));
      return true;
    } catch (const std::exception& e) {
      problems.push_back(k + ": " + e.what());
      return false;
    }
  };
  auto integer = [&](const std::string& k, long& out) {
    double v = 0.0;
    if (!number(k, v)) return false;
    if (v != std::floor(v) || std::abs(v) > 1e9) {
      problems.push_back(k + " must be an integer, got '" + values.at(k) + "'");
      return false;
    }
    out = static_cast<long>(v);
    return true;
  };
  auto require = [&](const std::string& k) {
    if (!has(k)) problems.push_back("missing required key '" + k + "'");
  };

  static const std::vector<std::string> commands{"spectrum", "flow", "scan", "quasimode", "report"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    problems.push_back("unknown command '" + command + "'");

  require("domain");
  if (has("domain")) {
    const auto d = lower(values.at("domain"));
    if (d == "stadium") {
      c.domain = DomainKind::Stadium;
    } else if (d == "rectangle") {
      c.domain = DomainKind::Rectangle;
    } else {
      problems.push_back("domain must be stadium or rectangle, got '" + values.at("domain") + "'");
    }
  }

  require("dx");
  if (number("dx", c.dx)) {
    if (!(c.dx > 0.0)) problems.push_back("dx must be positive");
    else if (c.dx > kPi / 16 * (1 + 1e-12)) problems.push_back("dx must be <= pi/16");
  }

  const bool single = has("t");
  const bool grid = has("t_start") || has("t_stop") || has("t_step");
  if (single && grid) {
    problems.push_back("give either t or t_start/t_stop/t_step, not both");
  } else if (!single && !grid) {
    problems.push_back("missing required key 't' (or t_start/t_stop/t_step)");
  } else if (single) {
    double t = 0.0;
    if (number("t", t)) {
      if (!(t > 0.0)) problems.push_back("t must be positive");
      else c.ts.push_back(t);
    }
  } else {
    c.t_grid = true;
    double a = 0.0, b = 0.0, h = 0.0;
    bool ok = true;
    for (const char* k : {"t_start", "t_stop", "t_step"})
      if (!has(k)) {
        problems.push_back(std::string("missing required key '") + k + "'");
        ok = false;
      }
    ok = number("t_start", a) && ok;
    ok = number("t_stop", b) && ok;
    ok = number("t_step", h) && ok;
    if (ok) {
      if (!(a > 0.0)) {
        problems.push_back("t_start must be positive");
      } else if (!(h > 0.0)) {
        problems.push_back("t_step must be positive");
      } else if (b < a) {
        problems.push_back("t_stop must be >= t_start");
      } else {
        const long n = std::lround((b - a) / h);
        if (std::abs(a + n * h - b) > 1e-9 * std::max(1.0, b)) {
          problems.push_back("t_stop - t_start must be a whole number of t_step");
        } else {
          for (long i = 0; i <= n; ++i) c.ts.push_back(i == n ? b : a + static_cast<double>(i) * h);
        }
      }
    }
  }

  const std::string bc = has("bc") ? lower(values.at("bc")) : "dirichlet";
  double robin_b = 0.0;
  const bool has_b = number("robin_b", robin_b);
  if (bc == "dirichlet") {
    c.bc = BoundaryCondition::dirichlet();
  } else if (bc == "neumann") {
    c.bc = BoundaryCondition::neumann();
  } else if (bc == "robin") {
    if (!has("robin_b")) problems.push_back("bc = robin needs robin_b");
    c.bc = BoundaryCondition::robin(robin_b);
  } else {
    problems.push_back("bc must be dirichlet, neumann or robin, got '" + values.at("bc") + "'");
  }
  if (has_b && bc != "robin") problems.push_back("robin_b is only meaningful with bc = robin");

  if (has("chi")) {
    try {
      c.chi = chi_kind_from_string(lower(values.at("chi")));
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  if (has("phi") && lower(values.at("phi")) != "poly4")
    problems.push_back("phi must be poly4 (the (1 - (x/r)^2)^4 bump), got '" + values.at("phi") + "'");

  long v = 0;
  if (integer("workers", v)) {
    if (v < 1) problems.push_back("workers must be >= 1");
    else c.workers = static_cast<int>(v);
  }
  require("out");
  if (has("out")) c.out = values.at("out");
  if (has("export_operator")) {
    const auto e = lower(values.at("export_operator"));
    if (e == "true" || e == "1" || e == "yes") c.export_operator = true;
    else if (e == "false" || e == "0" || e == "no") c.export_operator = false;
    else problems.push_back("export_operator must be true or false");
  }
  if (number("halfwidth", c.halfwidth) && !(c.halfwidth > 0.0)) problems.push_back("halfwidth must be positive");

  if (command == "spectrum") {
    const bool window = has("center");
    if (window && has("m")) {
      problems.push_back("spectrum takes either m or center/halfwidth, not both");
    } else if (window) {
      if (number("center", c.center) && !(c.center > 0.0)) problems.push_back("center must be positive");
      if (!has("halfwidth")) problems.push_back("center needs halfwidth");
    } else {
      require("m");
    }
  }
  if (command == "flow" || command == "report") require("m");
  if (command == "spectrum" || command == "flow" || command == "report") {
    if (integer("m", v)) {
      if (v < 1) problems.push_back("m must be >= 1");
      else c.m = static_cast<std::size_t>(v);
    }
  }
  if (command == "flow") {
    if (!c.t_grid) problems.push_back("flow needs a t grid (t_start/t_stop/t_step)");
    double h = 0.0;
    if (c.t_grid && number("t_step", h) && h > 0.02 + 1e-12) problems.push_back("flow needs t_step <= 0.02");
  }
  if (command == "scan" || command == "quasimode") {
    require("n_min");
    require("n_max");
    long a = 0, b = 0;
    const bool ok = integer("n_min", a) & integer("n_max", b);
    if (ok) {
      c.n_min = static_cast<int>(a);
      c.n_max = static_cast<int>(b);
      if (b >= a) {
        if (a < 2) problems.push_back("n_min must be >= 2");
        if (c.dx > 0.0 && b * c.dx > kPi / 8 * (1 + 1e-12))
          problems.push_back("n_max = " + std::to_string(b) + " is under-resolved: need n_max*dx <= pi/8");
      }
    }
  }

  // Grid construction is cheap; failures here are configuration errors.
  if (problems.empty()) {
    for (double t : c.ts) {
      try {
        (void)build_grid(c.spec(t), c.dx);
      } catch (const std::exception& e) {
        std::ostringstream os;
        os << "t = " << t << ": " << e.what();
        problems.push_back(os.str());
      }
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  c.values = values;
  c.hash = config_hash(command, values);
  return c;
}

}  // namespace scarlab::cli
