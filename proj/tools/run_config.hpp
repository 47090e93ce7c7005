#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "scarlab/geometry.hpp"
#include "scarlab/quasimode.hpp"

namespace scarlab::cli {

/// Every violation found while validating, reported together.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

using KeyValues = std::map<std::string, std::string>;

/// Keys accepted in config files and as --key flags.
const std::vector<std::string>& known_keys();

/// Flat "key = value" text; '#' starts a comment.
KeyValues parse_config_text(const std::string& text, const std::string& origin = "config");
KeyValues read_config_file(const std::string& path);

/// Numbers such as "0.5", "pi", "pi/64", "3*pi/4".
double parse_number(const std::string& text);

struct RunConfig {
  std::string command;
  DomainKind domain = DomainKind::Stadium;
  std::vector<double> ts;
  bool t_grid = false;
  double dx = 0.0;
  BoundaryCondition bc = BoundaryCondition::dirichlet();
  ChiKind chi = ChiKind::Cos2;
  int n_min = 0;
  int n_max = -1;  ///< empty range when n_max < n_min
  double halfwidth = -1.0;  ///< <= 0: 2 K_discrete
  double center = -1.0;     ///< spectrum window centre; < 0 means lowest m
  std::size_t m = 0;
  std::string out;
  int workers = 1;
  bool export_operator = false;
  KeyValues values;  ///< effective key/values, for the hash
  std::uint64_t hash = 0;

  DomainSpec spec(double t) const;
  std::vector<int> n_range() const;
};

/// Validates everything that can be checked before solving, including grid
/// construction at every t; throws ConfigError listing every problem.
RunConfig validate(const std::string& command, const KeyValues& values);

/// FNV-1a over the command and the sorted key/values (out and workers excluded).
std::uint64_t config_hash(const std::string& command, const KeyValues& values);

}  // namespace scarlab::cli
