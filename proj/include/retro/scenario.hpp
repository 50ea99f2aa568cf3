#pragma once

// Scenario files (JSON) and the report documents produced from them.
//
// Schema:
//   task          "predict" | "postdict" | "classify" | "purify" | "verify" | "sample"
//   dims_in       [d, ...]   input factor dimensions
//   dims_out      [d, ...]   output factor dimensions
//   transformation
//                 {"type": "unitary", "matrix": M}
//                 {"type": "kraus", "kraus": [M, ...]}
//                 {"type": "instrument", "outcomes": [{"label": s, "kraus": [M, ...]}, ...]}
//   preparation   {"type": "basis"} | {"type": "states", "states": [ket, ...]}   (optional)
//   test          {"type": "basis"}                                            (optional)
//   given         [label, ...]   one per known factor on the data side
//   masks         {"input": [bool, ...], "output": [bool, ...]}                 (optional)
//   shots, seed   unsigned integers                                          (optional)

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "retro/channels.hpp"
#include "retro/errors.hpp"
#include "retro/identities.hpp"
#include "retro/inference.hpp"
#include "retro/io.hpp"
#include "retro/linalg.hpp"
#include "retro/probability_table.hpp"
#include "retro/purify.hpp"
#include "retro/sampler.hpp"
#include "retro/task.hpp"

namespace retro::scenario {

inline constexpr std::string_view kToolName = "retro";
inline constexpr std::string_view kToolVersion = "1.0.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitUndefined = 4;
inline constexpr int kExitVerification = 5;

enum class Command { Predict, Postdict, Classify, Purify, Verify, Sample };

inline std::string_view to_string(Command c) {
  switch (c) {
  case Command::Predict: return "predict";
  case Command::Postdict: return "postdict";
  case Command::Classify: return "classify";
  case Command::Purify: return "purify";
  case Command::Verify: return "verify";
  case Command::Sample: return "sample";
  }
  return "?";
}

inline std::optional<Command> command_from_string(std::string_view s) {
  for (auto c : {Command::Predict, Command::Postdict, Command::Classify,
                 Command::Purify, Command::Verify, Command::Sample})
    if (to_string(c) == s)
      return c;
  return std::nullopt;
}

enum class ErrorKind {
  Malformed,         // not JSON, wrong types, missing fields
  UnknownTask,       // unrecognised task tag
  DimensionMismatch, // matrix shapes vs declared dims
  NotUnitary,
  NotCptp,           // channel not trace preserving, instrument incomplete
  InvalidValue,      // given/masks/states out of range or inconsistent
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
  case ErrorKind::Malformed: return "malformed";
  case ErrorKind::UnknownTask: return "unknown-task";
  case ErrorKind::DimensionMismatch: return "dimension-mismatch";
  case ErrorKind::NotUnitary: return "not-unitary";
  case ErrorKind::NotCptp: return "not-cptp";
  case ErrorKind::InvalidValue: return "invalid-value";
  }
  return "?";
}

inline int exit_code(ErrorKind k) {
  return k == ErrorKind::Malformed || k == ErrorKind::UnknownTask ? kExitParse
                                                                  : kExitValidation;
}

class ScenarioError : public std::runtime_error {
public:
  ScenarioError(ErrorKind kind, std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), kind_(kind), field_(std::move(field)) {}
  ErrorKind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

private:
  ErrorKind kind_;
  std::string field_;
};

struct ScenarioFile {
  Command task = Command::Predict;
  std::vector<std::size_t> dims_in{1};
  std::vector<std::size_t> dims_out{1};
  Transformation transformation = identity(1);
  Preparation preparation = ComputationalBasis{};
  std::vector<std::string> given;
  std::optional<std::vector<bool>> input_mask;
  std::optional<std::vector<bool>> output_mask;
  std::optional<std::uint64_t> shots;
  std::optional<std::uint64_t> seed;
};

namespace detail {

inline bool same_map(const QuantumMap& a, const QuantumMap& b) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out() ||
      a.kraus().size() != b.kraus().size())
    return false;
  for (std::size_t k = 0; k < a.kraus().size(); ++k)
    if (a.kraus()[k] != b.kraus()[k])
      return false;
  return true;
}

inline bool same_transformation(const Transformation& a, const Transformation& b) {
  if (a.index() != b.index())
    return false;
  if (const auto* u = std::get_if<Operator>(&a))
    return u->rows() == std::get<Operator>(b).rows() &&
           u->cols() == std::get<Operator>(b).cols() && *u == std::get<Operator>(b);
  if (const auto* m = std::get_if<QuantumMap>(&a))
    return same_map(*m, std::get<QuantumMap>(b));
  const auto& ia = std::get<Instrument>(a);
  const auto& ib = std::get<Instrument>(b);
  if (ia.size() != ib.size())
    return false;
  for (std::size_t i = 0; i < ia.size(); ++i)
    if (ia.outcomes()[i].label != ib.outcomes()[i].label ||
        !same_map(ia.outcomes()[i].map, ib.outcomes()[i].map))
      return false;
  return true;
}

inline bool same_preparation(const Preparation& a, const Preparation& b) {
  if (a.index() != b.index())
    return false;
  if (std::holds_alternative<ComputationalBasis>(a))
    return true;
  const auto& sa = std::get<StateSet>(a).states;
  const auto& sb = std::get<StateSet>(b).states;
  if (sa.size() != sb.size())
    return false;
  for (std::size_t i = 0; i < sa.size(); ++i)
    if (sa[i].rows() != sb[i].rows() || sa[i] != sb[i])
      return false;
  return true;
}

} // namespace detail

inline bool operator==(const ScenarioFile& a, const ScenarioFile& b) {
  return a.task == b.task && a.dims_in == b.dims_in && a.dims_out == b.dims_out &&
         detail::same_transformation(a.transformation, b.transformation) &&
         detail::same_preparation(a.preparation, b.preparation) &&
         a.given == b.given && a.input_mask == b.input_mask &&
         a.output_mask == b.output_mask && a.shots == b.shots && a.seed == b.seed;
}

inline std::size_t product(const std::vector<std::size_t>& dims) {
  std::size_t p = 1;
  for (auto d : dims)
    p *= d;
  return p;
}

// ---------------------------------------------------------------- parsing

namespace detail {

using io::json;

inline const json& require(const json& obj, const char* key, const std::string& field) {
  if (!obj.contains(key))
    throw ScenarioError(ErrorKind::Malformed, field, "required field is missing");
  return obj[key];
}

inline std::string type_tag(const json& obj, const std::string& field) {
  if (!obj.is_object())
    throw ScenarioError(ErrorKind::Malformed, field, "expected an object");
  const auto& t = require(obj, "type", field + ".type");
  if (!t.is_string())
    throw ScenarioError(ErrorKind::Malformed, field + ".type", "expected a string");
  return t.get<std::string>();
}

inline std::string shape(const Operator& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_shape(const Operator& m, std::size_t rows, std::size_t cols,
                          const std::string& field) {
  if (static_cast<std::size_t>(m.rows()) != rows ||
      static_cast<std::size_t>(m.cols()) != cols)
    throw ScenarioError(ErrorKind::DimensionMismatch, field,
                        "shape " + shape(m) + " does not match declared dims (expected " +
                            std::to_string(rows) + "x" + std::to_string(cols) + ")");
}

inline std::vector<Operator> parse_kraus(const json& j, std::size_t din, std::size_t dout,
                                         const std::string& field) {
  auto kraus = io::kraus_from_json(j, field);
  for (std::size_t k = 0; k < kraus.size(); ++k)
    require_shape(kraus[k], dout, din, field + "[" + std::to_string(k) + "]");
  return kraus;
}

inline Transformation parse_transformation(const json& j, std::size_t din,
                                           std::size_t dout) {
  const std::string type = type_tag(j, "transformation");
  if (type == "unitary") {
    const Operator u = io::matrix_from_json(require(j, "matrix", "transformation.matrix"),
                                            "transformation.matrix");
    require_shape(u, dout, din, "transformation.matrix");
    if (!is_unitary(u))
      throw ScenarioError(ErrorKind::NotUnitary, "transformation.matrix",
                          "matrix is not unitary (max |U^dagger U - I| = " +
                              std::to_string(max_abs_diff(
                                  Operator(u.adjoint() * u),
                                  identity(static_cast<std::size_t>(u.cols())))) +
                              ")");
    return u;
  }
  if (type == "kraus") {
    QuantumMap map(parse_kraus(require(j, "kraus", "transformation.kraus"), din, dout,
                               "transformation.kraus"),
                   din, dout);
    const auto c = classify(map);
    if (!c.is_cptp())
      throw ScenarioError(ErrorKind::NotCptp, "transformation.kraus",
                          "Kraus operators are not trace preserving (defect " +
                              std::to_string(c.tp_defect) + ")");
    return map;
  }
  if (type == "instrument") {
    const auto raw =
        io::outcomes_from_json(require(j, "outcomes", "transformation.outcomes"),
                               "transformation.outcomes");
    std::vector<Outcome> outcomes;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const std::string f = "transformation.outcomes[" + std::to_string(i) + "]";
      for (std::size_t k = 0; k < i; ++k)
        if (raw[k].first == raw[i].first)
          throw ScenarioError(ErrorKind::Malformed, f + ".label",
                              "duplicate outcome label '" + raw[i].first + "'");
      for (std::size_t k = 0; k < raw[i].second.size(); ++k)
        require_shape(raw[i].second[k], dout, din, f + ".kraus[" + std::to_string(k) + "]");
      outcomes.push_back({raw[i].first, QuantumMap(raw[i].second, din, dout)});
    }
    try {
      return Instrument(std::move(outcomes));
    } catch (const InvalidInput& e) {
      throw ScenarioError(ErrorKind::NotCptp, "transformation.outcomes", e.what());
    }
  }
  throw ScenarioError(ErrorKind::Malformed, "transformation.type",
                      "unknown transformation type '" + type + "'");
}

inline Preparation parse_preparation(const json& j, std::size_t din) {
  const std::string type = type_tag(j, "preparation");
  if (type == "basis")
    return ComputationalBasis{};
  if (type != "states")
    throw ScenarioError(ErrorKind::Malformed, "preparation.type",
                        "unknown preparation type '" + type + "'");
  const auto& arr = require(j, "states", "preparation.states");
  if (!arr.is_array() || arr.empty())
    throw ScenarioError(ErrorKind::Malformed, "preparation.states",
                        "expected a non-empty array of kets");
  StateSet s;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string f = "preparation.states[" + std::to_string(i) + "]";
    Operator ket = io::ket_from_json(arr[i], f);
    if (static_cast<std::size_t>(ket.rows()) != din)
      throw ScenarioError(ErrorKind::DimensionMismatch, f,
                          "ket has " + std::to_string(ket.rows()) +
                              " amplitudes, input dimension is " + std::to_string(din));
    if (std::abs(ket.norm() - 1.0) > kStructuralTol)
      throw ScenarioError(ErrorKind::InvalidValue, f, "ket is not normalized");
    s.states.push_back(std::move(ket));
  }
  return s;
}

inline std::vector<bool> parse_mask(const json& j, std::size_t factors,
                                    const std::string& field) {
  if (!j.is_array())
    throw ScenarioError(ErrorKind::Malformed, field, "expected an array of booleans");
  std::vector<bool> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_boolean())
      throw ScenarioError(ErrorKind::Malformed, field + "[" + std::to_string(i) + "]",
                          "expected a boolean");
    out.push_back(j[i].get<bool>());
  }
  if (out.size() != factors)
    throw ScenarioError(ErrorKind::DimensionMismatch, field,
                        "has " + std::to_string(out.size()) + " entries for " +
                            std::to_string(factors) + " factors");
  return out;
}

inline std::optional<std::uint64_t> parse_uint(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null())
    return std::nullopt;
  if (!obj[key].is_number_unsigned())
    throw ScenarioError(ErrorKind::Malformed, key, "expected an unsigned integer");
  return obj[key].get<std::uint64_t>();
}

} // namespace detail

/// Mask of the factors taking part on each side; all true unless given.
inline std::vector<bool> input_mask(const ScenarioFile& s) {
  return s.input_mask.value_or(std::vector<bool>(s.dims_in.size(), true));
}
inline std::vector<bool> output_mask(const ScenarioFile& s) {
  return s.output_mask.value_or(std::vector<bool>(s.dims_out.size(), true));
}

inline InferenceTask to_task(const ScenarioFile& s, Direction direction) {
  InferenceTask t;
  t.transformation = s.transformation;
  t.dims_in = DimsPartition(s.dims_in);
  t.dims_out = DimsPartition(s.dims_out);
  t.preparation = s.preparation;
  t.direction = direction;
  t.known_input_mask = input_mask(s);
  t.known_output_mask = output_mask(s);
  return t;
}

namespace detail {

inline std::size_t parse_digit(const std::string& label, std::size_t bound,
                               const std::string& field) {
  std::size_t value = 0;
  if (label.empty())
    throw ScenarioError(ErrorKind::InvalidValue, field, "empty outcome label");
  for (char c : label) {
    if (c < '0' || c > '9')
      throw ScenarioError(ErrorKind::InvalidValue, field,
                          "outcome label '" + label + "' is not a basis index");
    value = value * 10 + static_cast<std::size_t>(c - '0');
    if (value >= bound)
      break;
  }
  if (value >= bound)
    throw ScenarioError(ErrorKind::InvalidValue, field,
                        "outcome '" + label + "' out of range (dimension " +
                            std::to_string(bound) + ")");
  return value;
}

inline std::vector<std::string> split_labels(const std::vector<std::string>& given) {
  std::vector<std::string> out;
  for (const auto& g : given) {
    std::size_t start = 0;
    while (true) {
      const auto pos = g.find(kLabelSeparator, start);
      out.push_back(g.substr(start, pos - start));
      if (pos == std::string::npos)
        break;
      start = pos + kLabelSeparator.size();
    }
  }
  return out;
}

} // namespace detail

/// Indices for `solve` from the scenario's "given" labels.
inline std::vector<std::size_t> resolve_given(const ScenarioFile& s, Direction direction) {
  const auto labels = detail::split_labels(s.given);
  const bool predict = direction == Direction::Predict;
  auto field = [](std::size_t k) { return "given[" + std::to_string(k) + "]"; };
  auto expect = [&](std::size_t n) {
    if (labels.size() != n)
      throw ScenarioError(ErrorKind::InvalidValue, "given",
                          "expected " + std::to_string(n) + " outcome label(s), got " +
                              std::to_string(labels.size()));
  };

  if (const auto* states = std::get_if<StateSet>(&s.preparation)) {
    expect(1);
    if (predict) {
      std::string l = labels[0];
      if (l.rfind("psi", 0) == 0)
        l = l.substr(3);
      return {detail::parse_digit(l, states->states.size(), field(0))};
    }
    return {detail::parse_digit(labels[0], product(s.dims_out), field(0))};
  }
  if (const auto* inst = std::get_if<Instrument>(&s.transformation)) {
    if (predict) {
      expect(1);
      return {detail::parse_digit(labels[0], inst->dim_in(), field(0))};
    }
    expect(2);
    std::size_t i = 0;
    try {
      i = inst->index_of(labels[0]);
    } catch (const InvalidInput&) {
      throw ScenarioError(ErrorKind::InvalidValue, field(0),
                          "no instrument outcome labelled '" + labels[0] + "'");
    }
    return {i, detail::parse_digit(labels[1], inst->dim_out(), field(1))};
  }
  const auto& dims = predict ? s.dims_in : s.dims_out;
  const auto mask = predict ? input_mask(s) : output_mask(s);
  std::vector<std::size_t> out;
  std::size_t known = 0;
  for (bool b : mask)
    known += b ? 1 : 0;
  expect(known);
  std::size_t next = 0;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (mask[k]) {
      out.push_back(detail::parse_digit(labels[next], dims[k], field(next)));
      ++next;
    }
  return out;
}

inline ScenarioFile parse_scenario_json(const io::json& doc) {
  using detail::require;
  if (!doc.is_object())
    throw ScenarioError(ErrorKind::Malformed, "scenario", "expected a JSON object");
  ScenarioFile s;
  try {
    const auto& task = require(doc, "task", "task");
    if (!task.is_string())
      throw ScenarioError(ErrorKind::Malformed, "task", "expected a string");
    const auto cmd = command_from_string(task.get<std::string>());
    if (!cmd)
      throw ScenarioError(ErrorKind::UnknownTask, "task",
                          "unknown task '" + task.get<std::string>() + "'");
    s.task = *cmd;
    s.dims_in = io::dims_from_json(require(doc, "dims_in", "dims_in"), "dims_in");
    s.dims_out = io::dims_from_json(require(doc, "dims_out", "dims_out"), "dims_out");
    const std::size_t din = product(s.dims_in), dout = product(s.dims_out);
    s.transformation = detail::parse_transformation(
        require(doc, "transformation", "transformation"), din, dout);

    if (doc.contains("preparation"))
      s.preparation = detail::parse_preparation(doc["preparation"], din);
    if (doc.contains("test")) {
      const std::string type = detail::type_tag(doc["test"], "test");
      if (type != "basis")
        throw ScenarioError(ErrorKind::Malformed, "test.type",
                            "unknown test type '" + type + "'");
    }
    if (doc.contains("given")) {
      const auto& g = doc["given"];
      if (!g.is_array())
        throw ScenarioError(ErrorKind::Malformed, "given", "expected an array of labels");
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (g[k].is_string())
          s.given.push_back(g[k].get<std::string>());
        else if (g[k].is_number_unsigned())
          s.given.push_back(std::to_string(g[k].get<std::uint64_t>()));
        else
          throw ScenarioError(ErrorKind::Malformed, "given[" + std::to_string(k) + "]",
                              "expected a string or unsigned integer");
      }
    }
    if (doc.contains("masks")) {
      const auto& m = doc["masks"];
      if (!m.is_object())
        throw ScenarioError(ErrorKind::Malformed, "masks", "expected an object");
      if (m.contains("input"))
        s.input_mask = detail::parse_mask(m["input"], s.dims_in.size(), "masks.input");
      if (m.contains("output"))
        s.output_mask = detail::parse_mask(m["output"], s.dims_out.size(), "masks.output");
    }
    s.shots = detail::parse_uint(doc, "shots");
    s.seed = detail::parse_uint(doc, "seed");
  } catch (const ParseError& e) {
    throw ScenarioError(ErrorKind::Malformed, e.field(), e.what());
  }

  if (s.shots && *s.shots == 0)
    throw ScenarioError(ErrorKind::InvalidValue, "shots", "must be at least 1");
  try {
    validate(to_task(s, Direction::Predict));
  } catch (const InvalidInput& e) {
    const std::string what = e.what();
    const std::string field = what.find("mask") != std::string::npos    ? "masks"
                              : what.find("state") != std::string::npos ? "preparation"
                                                                        : "dims_in";
    throw ScenarioError(ErrorKind::InvalidValue, field, what);
  }
  if (s.task == Command::Predict || s.task == Command::Postdict) {
    if (!doc.contains("given"))
      throw ScenarioError(ErrorKind::InvalidValue, "given",
                          "required for task '" + std::string(to_string(s.task)) + "'");
    resolve_given(s, s.task == Command::Predict ? Direction::Predict : Direction::Postdict);
  }
  return s;
}

inline ScenarioFile parse_scenario_text(const std::string& text) {
  io::json doc;
  try {
    doc = io::json::parse(text);
  } catch (const io::json::parse_error& e) {
    throw ScenarioError(ErrorKind::Malformed, "scenario",
                        std::string("invalid JSON: ") + e.what());
  }
  return parse_scenario_json(doc);
}

inline ScenarioFile parse_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ScenarioError(ErrorKind::Malformed, "scenario", "cannot read '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_scenario_text(text);
}

inline io::ordered_json serialize(const ScenarioFile& s) {
  using io::ordered_json;
  ordered_json out;
  out["task"] = std::string(to_string(s.task));
  out["dims_in"] = s.dims_in;
  out["dims_out"] = s.dims_out;
  ordered_json t;
  if (const auto* u = std::get_if<Operator>(&s.transformation)) {
    t["type"] = "unitary";
    t["matrix"] = io::to_json(*u);
  } else if (const auto* m = std::get_if<QuantumMap>(&s.transformation)) {
    t["type"] = "kraus";
    t["kraus"] = io::kraus_to_json(*m);
  } else {
    t["type"] = "instrument";
    ordered_json outcomes = ordered_json::array();
    for (const auto& o : std::get<Instrument>(s.transformation).outcomes()) {
      ordered_json oj;
      oj["label"] = o.label;
      oj["kraus"] = io::kraus_to_json(o.map);
      outcomes.push_back(std::move(oj));
    }
    t["outcomes"] = std::move(outcomes);
  }
  out["transformation"] = std::move(t);
  ordered_json prep;
  if (const auto* st = std::get_if<StateSet>(&s.preparation)) {
    prep["type"] = "states";
    ordered_json states = ordered_json::array();
    for (const auto& k : st->states)
      states.push_back(io::ket_to_json(k));
    prep["states"] = std::move(states);
  } else {
    prep["type"] = "basis";
  }
  out["preparation"] = std::move(prep);
  out["test"] = {{"type", "basis"}};
  if (!s.given.empty() || s.task == Command::Predict || s.task == Command::Postdict)
    out["given"] = s.given;
  if (s.input_mask || s.output_mask) {
    ordered_json masks = ordered_json::object();
    if (s.input_mask)
      masks["input"] = *s.input_mask;
    if (s.output_mask)
      masks["output"] = *s.output_mask;
    out["masks"] = std::move(masks);
  }
  if (s.shots)
    out["shots"] = *s.shots;
  if (s.seed)
    out["seed"] = *s.seed;
  return out;
}

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
inline std::string digest(const ScenarioFile& s) {
  const std::string text = serialize(s).dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- reports

struct Check {
  std::string name;
  /// NaN for yes/no checks.
  double defect = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
  std::string note;
};

inline Check defect_check(std::string name, double defect, double threshold,
                          std::string note = {}) {
  return {std::move(name), defect, threshold, std::isfinite(defect) && defect < threshold,
          std::move(note)};
}

inline Check flag_check(std::string name, bool pass, std::string note = {}) {
  Check c;
  c.name = std::move(name);
  c.pass = pass;
  c.note = std::move(note);
  return c;
}

struct NamedTable {
  std::string name;
  ProbabilityTable table;
};

struct ReportDocument {
  std::string command;
  std::string scenario_digest;
  std::vector<NamedTable> tables;
  std::vector<Check> checks;
  std::vector<std::string> summary;
  io::ordered_json details = io::ordered_json::object();

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass)
        return false;
    return true;
  }
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> shots;
  /// Replaces comparison thresholds; structural validation stays at 1e-10.
  std::optional<double> tolerance;
  unsigned threads = 1;
};

namespace detail {

struct Thresholds {
  double exact = 1e-12;  // identities between probability tables
  double derived = 1e-10; // identities going through a dilation
  std::optional<double> sampling;

  explicit Thresholds(const RunOptions& o) {
    if (o.tolerance) {
      exact = derived = *o.tolerance;
      sampling = *o.tolerance;
    }
  }
};

inline std::string fmt(double v, const char* spec = "%.3e") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline QuantumMap as_channel(const Transformation& t) {
  if (const auto* u = std::get_if<Operator>(&t))
    return make_unitary_channel(*u);
  if (const auto* m = std::get_if<QuantumMap>(&t))
    return *m;
  return coarse_grain(std::get<Instrument>(t));
}

inline void unitary_checks(ReportDocument& doc, const Operator& u,
                           const DimsPartition& din, const DimsPartition& dout,
                           const Thresholds& th) {
  doc.checks.push_back(defect_check("closed-symmetry", closed_symmetry_defect(u), th.exact));
  double four = 0.0;
  const auto d = static_cast<std::size_t>(u.rows());
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t x = 0; x < d; ++x)
      four = std::max(four, four_task_check(u, a, x).max_defect());
  doc.checks.push_back(defect_check("four-task", four, th.exact));
  if (din.size() == 2 && dout.size() == 2) {
    doc.checks.push_back(
        defect_check("open-ratio", open_ratio_check(u, din, dout).max_defect(), th.exact));
    doc.checks.push_back(defect_check(
        "open-reversal", open_reversal_check(u, din, dout).max_defect(), th.exact));
  }
}

inline void channel_checks(ReportDocument& doc, const QuantumMap& channel,
                           std::uint64_t seed, const Thresholds& th,
                           const std::string& prefix = "") {
  const auto p = stinespring(channel);
  doc.checks.push_back(defect_check(prefix + "purification-round-trip",
                                    verify_purification(channel, p, 8, seed).max_defect,
                                    th.derived));
  doc.checks.push_back(
      defect_check(prefix + "post-channel-ratio", post_channel_ratio_defect(channel, p),
                   th.derived));
  const auto q = rotate_ancilla(p, haar_random_unitary(p.d_b(), mix64(seed) + 1),
                                haar_random_unitary(p.d_y(), mix64(seed) + 2));
  doc.checks.push_back(defect_check(prefix + "post-channel-ratio-rotated",
                                    post_channel_ratio_defect(channel, q), th.derived));
  doc.checks.push_back(defect_check(prefix + "toward-the-past",
                                    channel_toward_past_defect(channel), th.derived));

  const auto sym = inference_symmetry_report(channel);
  doc.checks.push_back(flag_check(
      prefix + "unital-iff-symmetric", sym.consistent(),
      std::string("unital ") + (sym.unital ? "true" : "false") + ", adjoint-cptp " +
          (sym.adjoint_cptp ? "true" : "false") + ", table-symmetric " +
          (sym.table_symmetric ? "true" : "false")));

  if (sym.unital) {
    double four = 0.0;
    for (std::size_t a = 0; a < channel.dim_in(); ++a)
      for (std::size_t x = 0; x < channel.dim_out(); ++x)
        four = std::max(four, four_task_check(channel, a, x).max_defect());
    doc.checks.push_back(defect_check(prefix + "four-task-channel", four, th.exact));
  } else {
    doc.checks.push_back(flag_check(prefix + "four-task-channel", true,
                                    "skipped: not unital, no active reverse"));
  }

  const auto det = deterministic_effect_check(channel);
  doc.checks.push_back(flag_check(prefix + "unique-deterministic-effect",
                                  det.unique_discard(),
                                  "rank " + std::to_string(det.rank) + "/" +
                                      std::to_string(det.unknowns) + ", sigma_min " +
                                      fmt(det.smallest_singular)));
}

inline void no_signalling_checks(ReportDocument& doc, const Instrument& e,
                                 std::uint64_t seed, const Thresholds& th) {
  const Instrument f = random_instrument(e.dim_out(), e.dim_out(), 2, 1, mix64(seed) + 11);
  const auto r = no_signalling_check(e, f, random_density(e.dim_in(), mix64(seed) + 12));
  doc.checks.push_back(defect_check("no-signalling", r.channel_defect, th.exact));
  doc.checks.push_back(defect_check("no-signalling-conditional", r.conditional_defect,
                                    th.exact));
  doc.checks.push_back(defect_check(
      "no-signalling-purified", std::max(r.purified_defect, r.purified_joint_defect),
      th.derived));
}

inline void general_prep_checks(ReportDocument& doc, const std::vector<Operator>& states,
                                const Operator& u, const Thresholds& th) {
  double worst = 0.0;
  std::size_t skipped = 0;
  for (std::size_t x = 0; x < static_cast<std::size_t>(u.rows()); ++x) {
    try {
      const auto r = general_prep_purified_check(states, u, x);
      worst = std::max({worst, r.max_defect, r.prediction_defect});
    } catch (const UndefinedConditional&) {
      ++skipped;
    }
  }
  doc.checks.push_back(defect_check(
      "general-prep-purified", worst, th.derived,
      skipped ? std::to_string(skipped) + " impossible outcome(s) skipped" : ""));
}

inline void probability_range_check(ReportDocument& doc) {
  double worst = 0.0;
  for (const auto& t : doc.tables)
    for (double p : t.table.probabilities)
      worst = std::max({worst, -p, p - 1.0});
  doc.checks.push_back(defect_check("probability-range", worst, 1e-9));
}

/// Conditioning values for `solve`, aligned with the sampler's labels on the
/// conditioning side.
inline std::vector<std::vector<std::size_t>> conditioning_values(const InferenceTask& t) {
  std::vector<std::vector<std::size_t>> out;
  const bool predict = t.direction == Direction::Predict;
  if (const auto* s = std::get_if<StateSet>(&t.preparation)) {
    const std::size_t n = predict ? s->states.size() : t.dims_out.total();
    for (std::size_t i = 0; i < n; ++i)
      out.push_back({i});
    return out;
  }
  if (const auto* inst = std::get_if<Instrument>(&t.transformation)) {
    if (predict)
      for (std::size_t a = 0; a < inst->dim_in(); ++a)
        out.push_back({a});
    else
      for (std::size_t i = 0; i < inst->size(); ++i)
        for (std::size_t x = 0; x < inst->dim_out(); ++x)
          out.push_back({i, x});
    return out;
  }
  const auto& dims = predict ? t.dims_in : t.dims_out;
  const auto& mask = predict ? t.known_input_mask : t.known_output_mask;
  std::vector<std::size_t> sub;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (mask[k])
      sub.push_back(dims[k]);
  if (sub.empty())
    return {{}};
  const DimsPartition part(sub);
  for (std::size_t i = 0; i < part.total(); ++i)
    out.push_back(part.decode(i));
  return out;
}

} // namespace detail

inline ReportDocument run_predict_postdict(const ScenarioFile& s, Direction dir) {
  ReportDocument doc;
  const auto table = solve(to_task(s, dir), resolve_given(s, dir));
  doc.tables.push_back({dir == Direction::Predict ? "prediction" : "postdiction", table});
  doc.checks.push_back(defect_check("normalization", table.normalization_defect, 1e-9));
  return doc;
}

inline ReportDocument run_classify(const ScenarioFile& s) {
  ReportDocument doc;
  const QuantumMap channel = detail::as_channel(s.transformation);
  const auto c = classify(channel);
  const auto sym = inference_symmetry_report(channel);
  const bool reverse = classify(adjoint_map(channel)).is_cptp();
  doc.summary.push_back(std::string("unital: ") + (c.is_unital ? "true" : "false") +
                        ", inference-symmetric: " +
                        (sym.table_symmetric ? "true" : "false") +
                        ", active-reverse: " + (reverse ? "exists" : "none"));
  doc.details["classification"] = io::to_json(c);
  doc.details["inference_symmetric"] = sym.table_symmetric;
  doc.details["max_table_defect"] = sym.max_table_defect;
  doc.details["active_reverse"] = reverse;
  doc.checks.push_back(flag_check("cptp", c.is_cptp()));
  doc.checks.push_back(flag_check("unital-iff-symmetric", sym.consistent()));
  return doc;
}

inline ReportDocument run_purify(const ScenarioFile& s, const RunOptions& opts) {
  ReportDocument doc;
  const detail::Thresholds th(opts);
  const std::uint64_t seed = opts.seed.value_or(s.seed.value_or(0));
  if (const auto* inst = std::get_if<Instrument>(&s.transformation)) {
    const auto p = purify_instrument(*inst);
    doc.details["purification"] = io::to_json(p);
    doc.checks.push_back(defect_check(
        "purification-round-trip", verify_purification(*inst, p, 8, seed).max_defect,
        th.derived));
    return doc;
  }
  const QuantumMap channel = detail::as_channel(s.transformation);
  const auto p = stinespring(channel);
  doc.details["purification"] = io::to_json(p);
  doc.checks.push_back(defect_check("purification-round-trip",
                                    verify_purification(channel, p, 8, seed).max_defect,
                                    th.derived));
  doc.checks.push_back(
      defect_check("post-channel-ratio", post_channel_ratio_defect(channel, p), th.derived));
  return doc;
}

inline ReportDocument run_verify(const ScenarioFile& s, const RunOptions& opts) {
  ReportDocument doc;
  const detail::Thresholds th(opts);
  const std::uint64_t seed = opts.seed.value_or(s.seed.value_or(1));
  const auto task = to_task(s, Direction::Predict);
  if (const auto* u = std::get_if<Operator>(&s.transformation)) {
    detail::unitary_checks(doc, *u, task.dims_in, task.dims_out, th);
    if (const auto* st = std::get_if<StateSet>(&s.preparation))
      detail::general_prep_checks(doc, st->states, *u, th);
  }
  const QuantumMap channel = detail::as_channel(s.transformation);
  detail::channel_checks(doc, channel, seed, th);
  if (const auto* inst = std::get_if<Instrument>(&s.transformation)) {
    doc.checks.push_back(defect_check(
        "instrument-purification-round-trip",
        verify_purification(*inst, purify_instrument(*inst), 8, seed).max_defect,
        th.derived));
    detail::no_signalling_checks(doc, *inst, seed, th);
  } else {
    // measure-after instrument built from the channel
    detail::no_signalling_checks(
        doc, compose_sequential(as_instrument(channel),
                                computational_measurement(channel.dim_out())),
        seed, th);
  }
  return doc;
}

/// Identity suite on seeded random instances. `dims` is {d_A, d_B} (output
/// split the same way) or {d_A, d_B, d_X, d_Y}.
inline ReportDocument run_verify_random(const std::vector<std::size_t>& dims,
                                        const RunOptions& opts) {
  if (dims.size() != 2 && dims.size() != 4)
    throw ScenarioError(ErrorKind::InvalidValue, "--dims",
                        "expected two or four dimensions");
  for (auto d : dims)
    if (d == 0)
      throw ScenarioError(ErrorKind::InvalidValue, "--dims", "dimensions must be positive");
  const DimsPartition din{dims[0], dims[1]};
  const DimsPartition dout =
      dims.size() == 4 ? DimsPartition{dims[2], dims[3]} : DimsPartition{dims[0], dims[1]};
  if (din.total() != dout.total())
    throw ScenarioError(ErrorKind::DimensionMismatch, "--dims",
                        "d_A d_B must equal d_X d_Y");
  const std::uint64_t seed = opts.seed.value_or(1);
  const detail::Thresholds th(opts);
  ReportDocument doc;

  const Operator u = haar_random_unitary(din.total(), mix64(seed));
  detail::unitary_checks(doc, u, din, dout, th);

  const std::size_t d = dims[0];
  const QuantumMap noisy = din == dout ? make_noisy_operation(u, din)
                                       : random_channel(d, d, 2, mix64(seed) + 3);
  detail::channel_checks(doc, noisy, seed, th, "noisy-operation/");
  detail::channel_checks(doc, random_channel(d, d, 2, mix64(seed) + 4), seed, th,
                         "random-channel/");

  detail::no_signalling_checks(doc, random_instrument(d, d, 2, 1, mix64(seed) + 5), seed,
                               th);
  const std::vector<Operator> states{basis_ket(d, 0), random_ket(d, mix64(seed) + 6)};
  detail::general_prep_checks(doc, states, haar_random_unitary(d, mix64(seed) + 7), th);
  doc.command = "verify";
  detail::probability_range_check(doc);
  return doc;
}

inline ReportDocument run_sample(const ScenarioFile& s, const RunOptions& opts) {
  ReportDocument doc;
  const detail::Thresholds th(opts);
  const std::uint64_t shots = opts.shots.value_or(s.shots.value_or(100000));
  const std::uint64_t seed = opts.seed.value_or(s.seed.value_or(0));
  const auto base = to_task(s, Direction::Predict);
  const auto result = run_ensemble(base, shots, seed, std::max(1u, opts.threads));
  doc.details["ensemble"] = io::to_json(result);

  const auto again = run_ensemble(base, shots, seed, opts.threads > 1 ? 1 : 4);
  doc.checks.push_back(flag_check("determinism", again == result,
                                  "sequential and threaded runs compared"));

  // uniform preparation marginal
  double marginal = 0.0, marginal_tol = 0.0;
  const double p = 1.0 / static_cast<double>(result.input_labels.size());
  for (const auto& row : result.counts) {
    std::uint64_t n = 0;
    for (auto c : row)
      n += c;
    marginal = std::max(marginal, std::abs(static_cast<double>(n) / shots - p));
  }
  marginal_tol = th.sampling.value_or(std::max(
      1e-12, 4.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(shots))));
  doc.checks.push_back(defect_check("uniform-preparation", marginal, marginal_tol));

  io::ordered_json comparisons = io::ordered_json::array();
  for (auto dir : {Direction::Predict, Direction::Postdict}) {
    auto task = base;
    task.direction = dir;
    const auto values = detail::conditioning_values(task);
    const auto& cond_labels =
        dir == Direction::Predict ? result.input_labels : result.output_labels;
    const auto emp = empirical_conditionals(result, dir);
    for (const auto& table : emp.tables) {
      const auto it = std::find(cond_labels.begin(), cond_labels.end(), table.given);
      const auto idx = static_cast<std::size_t>(it - cond_labels.begin());
      const auto analytic = solve(task, values.at(idx));
      const auto cmp = compare(table, analytic, shots, th.sampling);
      double tol = 0.0;
      for (const auto& c : cmp.cells)
        tol = std::max(tol, c.tolerance);
      const std::string name =
          std::string(dir == Direction::Predict ? "empirical prediction"
                                                : "empirical postdiction");
      doc.tables.push_back({name, table});
      Check check = defect_check("sample-" + std::string(to_string(dir)) + "[" +
                                     table.given + "]",
                                 cmp.max_deviation, tol);
      check.pass = cmp.pass;
      doc.checks.push_back(std::move(check));
      io::ordered_json cj;
      cj["direction"] = std::string(to_string(dir));
      cj["given"] = table.given;
      cj["analytic"] = io::to_json(analytic);
      cj["max_deviation"] = cmp.max_deviation;
      cj["pass"] = cmp.pass;
      comparisons.push_back(std::move(cj));
    }
    for (const auto& label : emp.skipped)
      doc.summary.push_back(std::string("skipped empty conditioning cell (") +
                            std::string(to_string(dir)) + "): " + label);
  }
  doc.details["comparisons"] = std::move(comparisons);
  return doc;
}

/// Dispatches on `command`. Module errors propagate as exceptions.
inline ReportDocument run(const ScenarioFile& s, Command command,
                          const RunOptions& opts = {}) {
  ReportDocument doc;
  switch (command) {
  case Command::Predict: doc = run_predict_postdict(s, Direction::Predict); break;
  case Command::Postdict: doc = run_predict_postdict(s, Direction::Postdict); break;
  case Command::Classify: doc = run_classify(s); break;
  case Command::Purify: doc = run_purify(s, opts); break;
  case Command::Verify: doc = run_verify(s, opts); break;
  case Command::Sample: doc = run_sample(s, opts); break;
  }
  doc.command = std::string(to_string(command));
  doc.scenario_digest = digest(s);
  detail::probability_range_check(doc);
  return doc;
}

inline ReportDocument run(const ScenarioFile& s, const RunOptions& opts = {}) {
  return run(s, s.task, opts);
}

// ---------------------------------------------------------------- rendering

inline io::ordered_json to_json(const ReportDocument& doc) {
  io::ordered_json out;
  out["tool"] = std::string(kToolName);
  out["version"] = std::string(kToolVersion);
  out["command"] = doc.command;
  out["scenario_digest"] =
      doc.scenario_digest.empty() ? io::ordered_json(nullptr) : io::ordered_json(doc.scenario_digest);
  io::ordered_json tables = io::ordered_json::array();
  for (const auto& t : doc.tables) {
    auto tj = io::to_json(t.table);
    tj["name"] = t.name;
    tables.push_back(std::move(tj));
  }
  out["tables"] = std::move(tables);
  io::ordered_json checks = io::ordered_json::array();
  for (const auto& c : doc.checks) {
    io::ordered_json cj;
    cj["name"] = c.name;
    cj["defect"] = std::isfinite(c.defect) ? io::ordered_json(c.defect) : io::ordered_json(nullptr);
    cj["threshold"] =
        std::isfinite(c.threshold) ? io::ordered_json(c.threshold) : io::ordered_json(nullptr);
    cj["pass"] = c.pass;
    if (!c.note.empty())
      cj["note"] = c.note;
    checks.push_back(std::move(cj));
  }
  out["checks"] = std::move(checks);
  out["summary"] = doc.summary;
  out["details"] = doc.details;
  out["pass"] = doc.pass();
  return out;
}

inline std::string render_text(const ReportDocument& doc) {
  std::ostringstream os;
  os << kToolName << ' ' << kToolVersion << "  " << doc.command;
  if (!doc.scenario_digest.empty())
    os << "  scenario " << doc.scenario_digest;
  os << '\n';
  for (const auto& line : doc.summary)
    os << line << '\n';
  for (const auto& nt : doc.tables) {
    const auto& t = nt.table;
    const char* p = t.direction == Direction::Predict ? "P_pre" : "P_post";
    os << '\n' << nt.name << ": " << p << "(. | " << t.given << ")";
    if (t.factor)
      os << "  factor " << detail::fmt(*t.factor, "%.12g");
    os << '\n';
    std::size_t width = 0;
    for (const auto& l : t.labels)
      width = std::max(width, l.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      os << "  " << t.labels[i] << std::string(width - t.labels[i].size(), ' ') << "  "
         << detail::fmt(t[i], "%.12f") << '\n';
  }
  if (!doc.checks.empty()) {
    os << "\nchecks:\n";
    std::size_t width = 0;
    for (const auto& c : doc.checks)
      width = std::max(width, c.name.size());
    for (const auto& c : doc.checks) {
      os << "  " << c.name << std::string(width - c.name.size(), ' ') << "  "
         << (c.pass ? "pass" : "FAIL");
      if (std::isfinite(c.defect))
        os << "  defect " << detail::fmt(c.defect) << " < " << detail::fmt(c.threshold);
      if (!c.note.empty())
        os << "  (" << c.note << ")";
      os << '\n';
    }
  }
  if (doc.details.contains("purification"))
    os << "\npurification:\n" << doc.details["purification"].dump(2) << '\n';
  os << "\nresult: " << (doc.pass() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

/// Tables as "given,outcome,probability"; reports without tables list their
/// checks as "check,defect,threshold,pass".
inline std::string render_csv(const ReportDocument& doc) {
  std::ostringstream os;
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
      return s;
    std::string q = "\"";
    for (char c : s)
      q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  if (!doc.tables.empty()) {
    os << "given,outcome,probability\n";
    for (const auto& nt : doc.tables)
      for (std::size_t i = 0; i < nt.table.size(); ++i)
        os << quote(nt.table.given) << ',' << quote(nt.table.labels[i]) << ','
           << detail::fmt(nt.table[i], "%.17g") << '\n';
    return os.str();
  }
  os << "check,defect,threshold,pass\n";
  for (const auto& c : doc.checks)
    os << quote(c.name) << ','
       << (std::isfinite(c.defect) ? detail::fmt(c.defect, "%.17g") : "") << ','
       << (std::isfinite(c.threshold) ? detail::fmt(c.threshold, "%.17g") : "") << ','
       << (c.pass ? "true" : "false") << '\n';
  return os.str();
}

} // namespace retro::scenario
