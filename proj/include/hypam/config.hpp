#pragma once

// Experiment files: flat "key = value" lines, '#' comments, and optional
// [name] sections. Keys before the first section are defaults for every
// section; a file without sections describes a single experiment.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hypam/brownian.hpp"
#include "hypam/covariance.hpp"
#include "hypam/errors.hpp"
#include "hypam/moments.hpp"

namespace hypam {

struct ExperimentConfig {
  std::string name = "run";
  int dim = 3;
  CovarianceModel model;
  std::vector<double> betas;
  std::vector<double> ts;
  std::size_t n_paths = 1000;
  double step = 1e-3;
  Scheme scheme = Scheme::embedded_sde;
  std::optional<std::uint64_t> seed;
  std::vector<EstimatorKind> estimators{EstimatorKind::fk, EstimatorKind::jensen};
  int dyson_terms = 4;
  std::string out = "out";
  unsigned workers = 1;
  // lambda runs
  std::vector<double> separations{0.0, 5.0, 10.0};
  double t_max = 50.0;

  SamplerConfig sampler() const {
    SamplerConfig c;
    c.dim = dim;
    c.step = step;
    c.scheme = scheme;
    c.seed = seed.value_or(0);
    return c;
  }
};

/// 64-bit FNV-1a, used to tag outputs with the exact config text.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline double parse_double(const std::string& v, std::size_t line, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw config_error(line, "key '" + key + "': not a number: '" + v + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& v, std::size_t line, const std::string& key) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw config_error(line, "key '" + key + "': not a non-negative integer: '" + v + "'");
  }
  return out;
}

struct Entry {
  std::string value;
  std::size_t line;
};

using Section = std::map<std::string, Entry>;

inline void apply(ExperimentConfig& c, const std::string& key, const Entry& e) {
  const auto& v = e.value;
  const auto line = e.line;
  auto number = [&] { return parse_double(v, line, key); };
  auto list = [&] {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_double(item, line, key));
    if (out.empty()) throw config_error(line, "key '" + key + "': empty list");
    return out;
  };
  try {
    if (key == "dim") {
      c.dim = static_cast<int>(parse_u64(v, line, key));
    } else if (key == "kind" || key == "model") {
      c.model.kind = parse_covariance_kind(v);
    } else if (key == "alpha") {
      c.model.alpha = number();
    } else if (key == "C") {
      c.model.C = number();
    } else if (key == "c") {
      c.model.c = number();
    } else if (key == "beta") {
      c.betas = list();
    } else if (key == "t") {
      c.ts = list();
    } else if (key == "n_paths") {
      c.n_paths = parse_u64(v, line, key);
    } else if (key == "step") {
      c.step = number();
    } else if (key == "scheme") {
      c.scheme = parse_scheme(v);
    } else if (key == "seed") {
      c.seed = parse_u64(v, line, key);
    } else if (key == "estimators") {
      c.estimators.clear();
      for (const auto& s : split_list(v)) c.estimators.push_back(parse_estimator_kind(s));
    } else if (key == "dyson_terms") {
      c.dyson_terms = static_cast<int>(parse_u64(v, line, key));
    } else if (key == "out") {
      c.out = v;
    } else if (key == "workers") {
      c.workers = static_cast<unsigned>(parse_u64(v, line, key));
    } else if (key == "separations") {
      c.separations = list();
    } else if (key == "t_max") {
      c.t_max = number();
    } else {
      throw config_error(line, "unknown key '" + key + "'");
    }
  } catch (const config_error&) {
    throw;
  } catch (const std::invalid_argument& ex) {
    throw config_error(line, ex.what());
  }
}

inline std::size_t line_of(const Section& s, const std::string& key) {
  auto it = s.find(key);
  return it == s.end() ? 0 : it->second.line;
}

inline void validate(const ExperimentConfig& c, const Section& s) {
  if (!c.seed) throw config_error(0, "[" + c.name + "] seed is required");
  if (c.dim < 2) throw config_error(line_of(s, "dim"), "dim must be >= 2");
  if (!(c.step > 0.0) || c.step > kMaxStep) throw config_error(line_of(s, "step"), "step must be in (0, 0.1]");
  if (c.n_paths == 0) throw config_error(line_of(s, "n_paths"), "n_paths must be >= 1");
  for (double b : c.betas) {
    if (!(b >= 0.0)) throw config_error(line_of(s, "beta"), "beta values must be >= 0");
  }
  for (double t : c.ts) {
    if (!(t > 0.0)) throw config_error(line_of(s, "t"), "t values must be > 0");
  }
  for (double r : c.separations) {
    if (!(r >= 0.0) || r > kMaxRadius) throw config_error(line_of(s, "separations"), "separations must be in [0, 700]");
  }
  if (c.dyson_terms > kMaxDysonTerms) throw config_error(line_of(s, "dyson_terms"), "dyson_terms must be <= 8");
  try {
    c.model.validate();
  } catch (const std::invalid_argument& ex) {
    throw config_error(line_of(s, "alpha"), ex.what());
  }
}

}  // namespace detail

/// One ExperimentConfig per section (or a single one for a section-less file).
/// A seed override (from the command line) replaces every section's seed.
inline std::vector<ExperimentConfig> parse_config(std::string_view text,
                                                  std::optional<std::uint64_t> seed_override = std::nullopt) {
  detail::Section globals;
  std::vector<std::pair<std::string, detail::Section>> sections;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const auto body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3) throw config_error(line, "malformed section header");
      const auto name = detail::trim(std::string_view(body).substr(1, body.size() - 2));
      for (const auto& [n, s] : sections) {
        if (n == name) throw config_error(line, "duplicate section [" + name + "]");
      }
      sections.emplace_back(name, detail::Section{});
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw config_error(line, "expected 'key = value'");
    const auto key = detail::trim(std::string_view(body).substr(0, eq));
    const auto value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw config_error(line, "empty key");
    if (value.empty()) throw config_error(line, "key '" + key + "' has no value");
    auto& target = sections.empty() ? globals : sections.back().second;
    if (target.count(key)) throw config_error(line, "duplicate key '" + key + "'");
    target[key] = {value, line};
  }
  if (sections.empty()) sections.emplace_back("run", detail::Section{});

  std::vector<ExperimentConfig> out;
  for (const auto& [name, own] : sections) {
    detail::Section merged = globals;
    for (const auto& [k, e] : own) merged[k] = e;
    ExperimentConfig c;
    c.name = name;
    for (const auto& [k, e] : merged) detail::apply(c, k, e);
    if (seed_override) c.seed = seed_override;
    detail::validate(c, merged);
    out.push_back(std::move(c));
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config_error(0, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace hypam
