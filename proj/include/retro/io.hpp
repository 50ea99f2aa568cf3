#pragma once

// JSON interchange. Complex scalars are [re, im]; matrices are row-major
// nested arrays; kets are flat arrays of complex scalars. Readers also accept
// a plain number for a real scalar. All readers throw ParseError naming the
// offending field.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "retro/channels.hpp"
#include "retro/errors.hpp"
#include "retro/linalg.hpp"
#include "retro/probability_table.hpp"
#include "retro/purify.hpp"
#include "retro/sampler.hpp"

namespace retro::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(Complex z) { return ordered_json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const json& j, const std::string& field) {
  if (j.is_number())
    return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw ParseError(field, "expected a number or [re, im]");
}

inline ordered_json to_json(const Operator& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Operator matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ParseError(field, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty())
    throw ParseError(field, "expected a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Operator m = zeros(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rf = field + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols)
      throw ParseError(rf, "row length differs from row 0 (" + std::to_string(cols) + ")");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          complex_from_json(j[r][c], rf + "[" + std::to_string(c) + "]");
  }
  return m;
}

inline ordered_json ket_to_json(const Operator& ket) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < ket.rows(); ++i)
    out.push_back(to_json(ket(i, 0)));
  return out;
}

inline Operator ket_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ParseError(field, "expected a non-empty array of amplitudes");
  Operator k = zeros(j.size(), 1);
  for (std::size_t i = 0; i < j.size(); ++i)
    k(static_cast<Eigen::Index>(i), 0) =
        complex_from_json(j[i], field + "[" + std::to_string(i) + "]");
  return k;
}

inline std::vector<std::size_t> dims_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ParseError(field, "expected a non-empty array of positive integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_unsigned() || j[i].get<std::uint64_t>() == 0)
      throw ParseError(field + "[" + std::to_string(i) + "]", "expected a positive integer");
    out.push_back(j[i].get<std::size_t>());
  }
  return out;
}

inline ordered_json to_json(const DimsPartition& d) {
  ordered_json out = ordered_json::array();
  for (std::size_t k = 0; k < d.size(); ++k)
    out.push_back(d[k]);
  return out;
}

inline ordered_json kraus_to_json(const QuantumMap& map) {
  ordered_json out = ordered_json::array();
  for (const auto& k : map.kraus())
    out.push_back(to_json(k));
  return out;
}

inline std::vector<Operator> kraus_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ParseError(field, "expected a non-empty array of Kraus matrices");
  std::vector<Operator> out;
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(matrix_from_json(j[k], field + "[" + std::to_string(k) + "]"));
  return out;
}

inline ordered_json to_json(const Instrument& inst) {
  ordered_json outcomes = ordered_json::array();
  for (const auto& o : inst.outcomes()) {
    ordered_json oj;
    oj["label"] = o.label;
    oj["kraus"] = kraus_to_json(o.map);
    outcomes.push_back(std::move(oj));
  }
  ordered_json out;
  out["dim_in"] = inst.dim_in();
  out["dim_out"] = inst.dim_out();
  out["outcomes"] = std::move(outcomes);
  return out;
}

/// Raw outcome list; the caller builds (and thereby validates) the Instrument.
inline std::vector<std::pair<std::string, std::vector<Operator>>>
outcomes_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ParseError(field, "expected a non-empty array of outcomes");
  std::vector<std::pair<std::string, std::vector<Operator>>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    if (!j[i].is_object())
      throw ParseError(f, "expected an object with \"label\" and \"kraus\"");
    std::string label;
    if (j[i].contains("label") && j[i]["label"].is_string())
      label = j[i]["label"].get<std::string>();
    else if (j[i].contains("label") && j[i]["label"].is_number_unsigned())
      label = std::to_string(j[i]["label"].get<std::uint64_t>());
    else
      throw ParseError(f + ".label", "expected a string");
    if (!j[i].contains("kraus"))
      throw ParseError(f + ".kraus", "missing");
    out.emplace_back(label, kraus_from_json(j[i]["kraus"], f + ".kraus"));
  }
  return out;
}

inline ordered_json to_json(const Purification& p) {
  ordered_json out;
  out["unitary"] = to_json(p.unitary);
  out["ancilla_state"] = to_json(p.ancilla_state);
  out["dims_in"] = to_json(p.dims_in);
  out["dims_out"] = to_json(p.dims_out);
  out["pointer_dims"] = p.pointer_dims ? to_json(*p.pointer_dims) : ordered_json(nullptr);
  return out;
}

inline Purification purification_from_json(const json& j) {
  if (!j.is_object())
    throw ParseError("purification", "expected an object");
  for (const char* key : {"unitary", "ancilla_state", "dims_in", "dims_out"})
    if (!j.contains(key))
      throw ParseError(key, "missing");
  Purification p;
  p.unitary = matrix_from_json(j["unitary"], "unitary");
  p.ancilla_state = matrix_from_json(j["ancilla_state"], "ancilla_state");
  p.dims_in = DimsPartition(dims_from_json(j["dims_in"], "dims_in"));
  p.dims_out = DimsPartition(dims_from_json(j["dims_out"], "dims_out"));
  if (j.contains("pointer_dims") && !j["pointer_dims"].is_null())
    p.pointer_dims = DimsPartition(dims_from_json(j["pointer_dims"], "pointer_dims"));
  return p;
}

inline ordered_json to_json(const ProbabilityTable& t) {
  ordered_json entries = ordered_json::object();
  for (std::size_t i = 0; i < t.size(); ++i)
    entries[t.labels[i]] = t[i];
  ordered_json out;
  out["given"] = t.given;
  out["direction"] = std::string(to_string(t.direction));
  out["entries"] = std::move(entries);
  out["factor"] = t.factor ? ordered_json(*t.factor) : ordered_json(nullptr);
  out["normalization_defect"] = t.normalization_defect;
  return out;
}

inline ordered_json to_json(const EnsembleResult& r) {
  ordered_json counts = ordered_json::object();
  for (std::size_t i = 0; i < r.input_labels.size(); ++i)
    for (std::size_t j = 0; j < r.output_labels.size(); ++j)
      counts[r.input_labels[i] + "|" + r.output_labels[j]] = r.counts[i][j];
  ordered_json out;
  out["shots"] = r.shots;
  out["seed"] = r.seed;
  out["counts"] = std::move(counts);
  return out;
}

inline ordered_json to_json(const ChannelClassification& c) {
  ordered_json out;
  out["completely_positive"] = c.is_cp;
  out["trace_preserving"] = c.is_tp;
  out["unital"] = c.is_unital;
  out["choi_min_eigenvalue"] = c.choi_min_eigenvalue;
  out["tp_defect"] = c.tp_defect;
  out["unital_defect"] = std::isfinite(c.unital_defect) ? ordered_json(c.unital_defect)
                                                        : ordered_json(nullptr);
  return out;
}

} // namespace retro::io
