#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "hypam/errors.hpp"
#include "hypam/moments.hpp"

namespace hypam {

/// Shortest text that round-trips the double ("nan", "inf" for non-finite).
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Provenance line written at the top of every output file.
inline void write_header_comment(std::ostream& os, std::uint64_t config_hash, std::uint64_t seed) {
  os << "# config_hash=" << hex64(config_hash) << " seed=" << seed << '\n';
}

inline const char* kRowColumns = "alpha,beta,t,log_m2,stderr_log,n_paths,estimator_kind,seed";

inline void write_row_csv(std::ostream& os, const PhaseRow& r) {
  os << fmt_double(r.alpha) << ',' << fmt_double(r.beta) << ',' << fmt_double(r.t) << ',' << fmt_double(r.log_m2)
     << ',' << fmt_double(r.stderr_log) << ',' << r.n_paths << ',' << to_string(r.kind) << ',' << r.seed << '\n';
}

inline void write_rows_csv(std::ostream& os, std::span<const PhaseRow> rows, std::uint64_t config_hash,
                           std::uint64_t seed) {
  write_header_comment(os, config_hash, seed);
  os << kRowColumns << '\n';
  for (const auto& r : rows) write_row_csv(os, r);
}

/// JSON has no NaN; non-finite values become null.
inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json to_json(const PhaseRow& r) {
  return {{"alpha", json_number(r.alpha)},   {"beta", json_number(r.beta)},
          {"t", json_number(r.t)},           {"log_m2", json_number(r.log_m2)},
          {"stderr_log", json_number(r.stderr_log)}, {"n_paths", r.n_paths},
          {"estimator_kind", to_string(r.kind)},     {"seed", r.seed}};
}

inline nlohmann::json to_json(const MomentEstimate& m) {
  nlohmann::json j = to_json(to_row(m));
  j["n_excluded"] = m.n_excluded;
  j["max_z"] = json_number(m.max_z);
  j["model"] = m.model.describe();
  if (m.kind == EstimatorKind::dyson) {
    nlohmann::json terms = nlohmann::json::array();
    for (double v : m.terms) terms.push_back(json_number(v));
    j["terms"] = terms;
    j["truncated"] = m.truncated;
    j["truncation_bound"] = json_number(m.truncation_bound);
  }
  return j;
}

/// JSON document with the provenance fields in the object itself.
inline void write_json(std::ostream& os, nlohmann::json body, std::uint64_t config_hash, std::uint64_t seed) {
  body["config_hash"] = hex64(config_hash);
  body["seed"] = seed;
  os << body.dump(2) << '\n';
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

}  // namespace hypam
