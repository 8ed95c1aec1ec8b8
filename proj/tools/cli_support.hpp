#pragma once

// Argument helpers for the rateabs command-line tool.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rateabs/rateabs.hpp"

namespace rateabs::cli {

/// Exit codes: 0 success / proven, 1 not proven / guarantee or alarm failure,
/// 2 usage or parse error.
enum ExitCode : int { kOk = 0, kNotProven = 1, kUsage = 2 };

class UsageError : public Error {
 public:
  using Error::Error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SystemDocument load_document(const std::string& path) {
  return parse_system_document(read_file(path));
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& token, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": '" + token + "' is not a number");
  }
}

inline std::vector<std::string> split(std::string_view s, std::string_view seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string_view::npos) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline Vector parse_vector(std::string_view s, const std::string& what) {
  Vector v;
  for (const auto& tok : split(s, ",")) {
    if (tok.empty()) throw UsageError(what + ": empty entry in '" + std::string(s) + "'");
    v.push_back(parse_double(tok, what));
  }
  return v;
}

/// "identity" or rows separated by ';', entries by ',' ("2,0;0,1").
inline Matrix parse_matrix(std::string_view s, std::size_t n, const std::string& what) {
  if (trim(s) == "identity" || trim(s) == "I") return Matrix::identity(n);
  std::vector<std::vector<double>> rows;
  for (const auto& r : split(s, ";")) rows.push_back(parse_vector(r, what));
  try {
    Matrix m = Matrix::from_rows(rows);
    if (!m.is_square() || m.rows() != n) {
      throw UsageError(what + ": expected a " + std::to_string(n) + "x" + std::to_string(n) +
                       " matrix, got " + m.shape());
    }
    return m;
  } catch (const DimensionError& e) {
    throw UsageError(what + ": " + e.what());
  }
}

/// Mode list separated by commas or whitespace.
inline ModeSequence parse_modes(std::string_view s, const std::string& what) {
  ModeSequence seq;
  for (const auto& tok : split(s, ", \t\r\n")) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v < 0) {
      throw ParseError(what + ": '" + tok + "' is not a mode id");
    }
    seq.push_back(static_cast<ModeId>(v));
  }
  if (seq.empty()) throw ParseError(what + ": no modes given");
  return seq;
}

/// Options shared by every command that derives abstraction parameters.
struct ParamOptions {
  std::string method = "robust";
  std::optional<double> rho;
  std::optional<double> beta;
  std::string q = "identity";
};

inline AbstractionParams build_params(const SystemModel& system, const ParamOptions& o) {
  if (o.method == "robust" || o.method == "robustness") {
    if (!o.rho) throw UsageError("--rho is required for --method robust");
    const auto check = validate_rho(system.nominal(), *o.rho);
    if (!check) throw UsageError("rho bound violation: " + check.message());
    return build_robustness_abstraction(system, *o.rho, o.beta);
  }
  if (o.method == "lyapunov") {
    LyapunovOptions lo;
    lo.beta = o.beta;
    return lyapunov_abstraction(system, parse_matrix(o.q, system.dimension(), "--Q"), lo);
  }
  throw UsageError("unknown --method '" + o.method + "' (expected robust or lyapunov)");
}

inline std::string fmt(double v, int digits = 10) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace rateabs::cli
