#pragma once

// JSON system documents:
//
//   {
//     "name": "scalar",
//     "modes": [ {"id": 0, "label": "nominal", "A": [[0.5]]},
//                {"id": 1, "label": "skip",    "A": [[1.2]]} ],
//     "disturbance_bound": 0.1,        (optional)
//     "cost_weight_Q": [[1.0]],        (optional)
//     "lipschitz": 1.0                 (optional)
//   }

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rateabs/error.hpp"
#include "rateabs/matrix.hpp"
#include "rateabs/model.hpp"

namespace rateabs {

struct ModeEntry {
  ModeId id = 0;
  std::string label;
  Matrix A;
};

struct SystemDocument {
  std::string name;
  std::vector<ModeEntry> modes;
  std::optional<double> disturbance_bound;
  std::optional<Matrix> cost_weight_Q;
  std::optional<double> lipschitz;

  SystemModel to_model() const {
    std::map<ModeId, Matrix> m;
    for (const auto& e : modes) m.emplace(e.id, e.A);
    return SystemModel(std::move(m), disturbance_bound, cost_weight_Q, lipschitz);
  }

  static SystemDocument from_model(const SystemModel& model, std::string name = "system") {
    SystemDocument d;
    d.name = std::move(name);
    for (const auto& [id, a] : model.modes()) {
      d.modes.push_back({id, id == kNominalMode ? "nominal" : "mode" + std::to_string(id), a});
    }
    d.disturbance_bound = model.disturbance_bound();
    d.cost_weight_Q = model.cost_weight();
    d.lipschitz = model.lipschitz();
    return d;
  }
};

namespace detail {

using nlohmann::json;

inline std::string line_context(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline double number_field(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path + ": expected a number");
  return j.get<double>();
}

inline Matrix matrix_field(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ParseError(path + ": expected a non-empty array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j[i];
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!row.is_array()) throw ParseError(rp + ": expected an array of numbers");
    std::vector<double> r;
    for (std::size_t c = 0; c < row.size(); ++c) {
      r.push_back(number_field(row[c], rp + "[" + std::to_string(c) + "]"));
    }
    if (!rows.empty() && r.size() != rows.front().size()) {
      throw ParseError(rp + ": row has " + std::to_string(r.size()) + " entries, expected " +
                       std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(r));
  }
  Matrix m = Matrix::from_rows(rows);
  if (!m.is_square()) throw ParseError(path + ": matrix must be square, got " + m.shape());
  return m;
}

inline json matrix_json(const Matrix& m) { return json(m.to_rows()); }

}  // namespace detail

inline SystemDocument parse_system_document(std::string_view text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("system document: syntax error at " +
                     detail::line_context(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("system document: top level must be an object");

  SystemDocument d;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ParseError("name: expected a string");
    d.name = j["name"].get<std::string>();
  }
  if (!j.contains("modes") || !j["modes"].is_array() || j["modes"].empty()) {
    throw ParseError("modes: expected a non-empty array");
  }
  std::set<ModeId> seen;
  std::size_t n = 0;
  for (std::size_t i = 0; i < j["modes"].size(); ++i) {
    const auto& m = j["modes"][i];
    const std::string path = "modes[" + std::to_string(i) + "]";
    if (!m.is_object()) throw ParseError(path + ": expected an object");
    if (!m.contains("id") || !m["id"].is_number_integer() || m["id"].get<long long>() < 0) {
      throw ParseError(path + ".id: expected a nonnegative integer");
    }
    ModeEntry e;
    e.id = static_cast<ModeId>(m["id"].get<long long>());
    if (!seen.insert(e.id).second) {
      throw ParseError(path + ".id: duplicate mode id " + std::to_string(e.id));
    }
    if (m.contains("label")) {
      if (!m["label"].is_string()) throw ParseError(path + ".label: expected a string");
      e.label = m["label"].get<std::string>();
    }
    if (!m.contains("A")) throw ParseError(path + ".A: missing");
    e.A = detail::matrix_field(m["A"], path + ".A");
    if (i == 0) n = e.A.rows();
    if (e.A.rows() != n) {
      throw ParseError(path + ".A: dimension " + std::to_string(e.A.rows()) +
                       " differs from the first mode (" + std::to_string(n) + ")");
    }
    d.modes.push_back(std::move(e));
  }
  if (!seen.contains(kNominalMode)) throw ParseError("modes: nominal mode id 0 is missing");
  if (j.contains("disturbance_bound") && !j["disturbance_bound"].is_null()) {
    d.disturbance_bound = detail::number_field(j["disturbance_bound"], "disturbance_bound");
  }
  if (j.contains("cost_weight_Q") && !j["cost_weight_Q"].is_null()) {
    d.cost_weight_Q = detail::matrix_field(j["cost_weight_Q"], "cost_weight_Q");
  }
  if (j.contains("lipschitz") && !j["lipschitz"].is_null()) {
    d.lipschitz = detail::number_field(j["lipschitz"], "lipschitz");
  }
  try {
    (void)d.to_model();
  } catch (const Error& e) {
    throw ParseError(std::string("system document: ") + e.what());
  }
  return d;
}

inline std::string write_system_document(const SystemDocument& d) {
  using detail::json;
  json j;
  j["name"] = d.name;
  j["modes"] = json::array();
  for (const auto& e : d.modes) {
    j["modes"].push_back({{"id", e.id}, {"label", e.label}, {"A", detail::matrix_json(e.A)}});
  }
  if (d.disturbance_bound) j["disturbance_bound"] = *d.disturbance_bound;
  if (d.cost_weight_Q) j["cost_weight_Q"] = detail::matrix_json(*d.cost_weight_Q);
  if (d.lipschitz) j["lipschitz"] = *d.lipschitz;
  return j.dump(2) + "\n";
}

/// Machine-readable record of abstraction parameters.
inline nlohmann::json params_to_json(const AbstractionParams& p) {
  using detail::json;
  json j;
  j["method"] = std::string(to_string(p.method));
  j["alpha"] = p.alpha;
  j["beta"] = p.beta;
  json rho = json::object();
  for (const auto& [id, r] : p.rho) rho[std::to_string(id)] = r;
  j["rho"] = rho;
  if (p.lyapunov_P) j["P"] = detail::matrix_json(*p.lyapunov_P);
  json diag = json::object();
  if (p.diagnostics.k_tilde) diag["k_tilde"] = *p.diagnostics.k_tilde;
  if (p.diagnostics.alpha_min) diag["alpha_min"] = *p.diagnostics.alpha_min;
  if (p.diagnostics.p_condition) diag["P_condition"] = *p.diagnostics.p_condition;
  if (!p.diagnostics.warnings.empty()) diag["warnings"] = p.diagnostics.warnings;
  j["diagnostics"] = diag;
  return j;
}

}  // namespace rateabs
