#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "retro/cli.hpp"
#include "retro/scenario.hpp"

using namespace retro;
using namespace retro::scenario;

namespace {

const std::string kRoot = RETRO_SOURCE_DIR;

std::string scenario_path(const std::string& name) { return kRoot + "/scenarios/" + name; }
std::string fixture_path(const std::string& name) { return kRoot + "/tests/fixtures/" + name; }

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "retro");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = retro::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kIdentityPredict = R"({
  "task": "predict", "dims_in": [2], "dims_out": [2],
  "transformation": {"type": "unitary", "matrix": [[1, 0], [0, 1]]},
  "given": ["0"]
})";

ErrorKind kind_of(const std::string& text, std::string* field = nullptr) {
  try {
    parse_scenario_text(text);
  } catch (const ScenarioError& e) {
    if (field)
      *field = e.field();
    return e.kind();
  }
  ADD_FAILURE() << "no error for: " << text;
  return ErrorKind::Malformed;
}

} // namespace

// --- parsing -----------------------------------------------------------

TEST(ParseScenario, MinimalIdentityPredictRuns) {
  const auto s = parse_scenario_text(kIdentityPredict);
  EXPECT_EQ(s.task, Command::Predict);
  const auto doc = run(s);
  ASSERT_EQ(doc.tables.size(), 1u);
  EXPECT_EQ(doc.tables[0].table.at("0"), 1.0);
  EXPECT_EQ(doc.tables[0].table.at("1"), 0.0);
  EXPECT_TRUE(doc.pass());
}

TEST(ParseScenario, NonUnitaryNamesMatrixField) {
  std::string field;
  const auto kind = kind_of(R"({"task": "predict", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "unitary", "matrix": [[1, 1], [0, 1]]}, "given": ["0"]})",
                            &field);
  EXPECT_EQ(kind, ErrorKind::NotUnitary);
  EXPECT_EQ(field, "transformation.matrix");
  EXPECT_EQ(exit_code(kind), kExitValidation);
}

TEST(ParseScenario, AmplitudeDampingPostdictFixture) {
  const auto s = parse_scenario(scenario_path("amplitude_damping_postdict.json"));
  const auto doc = run(s);
  ASSERT_EQ(doc.tables.size(), 1u);
  EXPECT_NEAR(doc.tables[0].table.at("0"), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(doc.tables[0].table.at("1"), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(*doc.tables[0].table.factor, 2.0 / 3.0, 1e-12);
}

TEST(ParseScenario, ErrorKindsAreDistinct) {
  std::string field;
  EXPECT_EQ(kind_of("{not json", &field), ErrorKind::Malformed);
  EXPECT_EQ(kind_of(R"({"task": "dance", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "unitary", "matrix": [[1, 0], [0, 1]]}})", &field),
            ErrorKind::UnknownTask);
  EXPECT_EQ(field, "task");
  EXPECT_EQ(kind_of(R"({"task": "classify", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "unitary", "matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}})", &field),
            ErrorKind::DimensionMismatch);
  EXPECT_EQ(field, "transformation.matrix");
  EXPECT_EQ(kind_of(R"({"task": "classify", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "kraus", "kraus": [[[1, 0], [0, 1]], [[0, 1], [0, 0]]]}})", &field),
            ErrorKind::NotCptp);
  EXPECT_EQ(field, "transformation.kraus");
  EXPECT_EQ(kind_of(R"({"task": "predict", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "unitary", "matrix": [[1, 0], [0, 1]]}})", &field),
            ErrorKind::InvalidValue);
  EXPECT_EQ(field, "given");
  EXPECT_EQ(kind_of(R"({"task": "classify", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "unitary", "matrix": [[1, 0], ["x", 1]]}})", &field),
            ErrorKind::Malformed);
  EXPECT_EQ(field.rfind("transformation.matrix", 0), 0u);
  EXPECT_EQ(kind_of(R"({"task": "sample", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "unitary", "matrix": [[1, 0], [0, 1]]},
    "preparation": {"type": "states", "states": [[1, 1]]}})", &field),
            ErrorKind::InvalidValue);
  EXPECT_EQ(kind_of(R"({"task": "classify", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "instrument", "outcomes": [
      {"label": "0", "kraus": [[[1, 0], [0, 0]]]}]}})", &field),
            ErrorKind::NotCptp);
  EXPECT_EQ(field, "transformation.outcomes");
}

TEST(ParseScenario, RoundTripIsIdentical) {
  for (const auto& entry : std::filesystem::directory_iterator(kRoot + "/scenarios")) {
    const auto s = parse_scenario(entry.path().string());
    const auto again = parse_scenario_text(serialize(s).dump());
    EXPECT_TRUE(s == again) << entry.path();
    EXPECT_EQ(digest(s), digest(again));
  }
}

TEST(ParseScenario, ComplexEntriesAccepted) {
  const auto s = parse_scenario_text(R"({"task": "predict", "dims_in": [2], "dims_out": [2],
    "transformation": {"type": "unitary", "matrix": [[[0, 1], 0], [0, [0, -1]]]}, "given": ["1"]})");
  const auto& u = std::get<Operator>(s.transformation);
  EXPECT_EQ(u(0, 0), Complex(0, 1));
  EXPECT_EQ(u(1, 1), Complex(0, -1));
}

// --- running -----------------------------------------------------------

TEST(Run, ClassifyDephasingSummary) {
  const auto doc = run(parse_scenario(scenario_path("dephasing_classify.json")));
  ASSERT_FALSE(doc.summary.empty());
  bool found = false;
  for (const auto& line : doc.summary)
    found |= line == "unital: true, inference-symmetric: true, active-reverse: exists";
  EXPECT_TRUE(found);
  EXPECT_TRUE(doc.pass());
}

TEST(Run, VerifyIsDeterministicForFixedSeed) {
  const auto s = parse_scenario(scenario_path("amplitude_damping_instrument.json"));
  RunOptions opts;
  opts.seed = 5;
  const auto a = run(s, Command::Verify, opts);
  const auto b = run(s, Command::Verify, opts);
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    EXPECT_EQ(a.checks[i].name, b.checks[i].name);
    EXPECT_EQ(a.checks[i].pass, b.checks[i].pass);
  }
  EXPECT_TRUE(a.pass());
}

TEST(Run, EveryBundledScenarioVerifies) {
  for (const auto& entry : std::filesystem::directory_iterator(kRoot + "/scenarios")) {
    const auto doc = run(parse_scenario(entry.path().string()), Command::Verify);
    for (const auto& c : doc.checks)
      EXPECT_TRUE(c.pass) << entry.path() << " " << c.name << " " << c.note;
  }
}

TEST(Run, ImpossibleOutcomeIsUndefined) {
  EXPECT_THROW(run(parse_scenario(fixture_path("impossible_outcome.json"))), UndefinedConditional);
}

TEST(Run, TablesAreNormalizedAndInRange) {
  for (const auto& entry : std::filesystem::directory_iterator(kRoot + "/scenarios")) {
    const auto s = parse_scenario(entry.path().string());
    if (s.task != Command::Predict && s.task != Command::Postdict)
      continue;
    for (const auto& nt : run(s).tables) {
      EXPECT_NEAR(nt.table.sum(), 1.0, 1e-9) << entry.path();
      for (double p : nt.table.probabilities) {
        EXPECT_GE(p, -1e-9);
        EXPECT_LE(p, 1.0 + 1e-9);
      }
    }
  }
}

TEST(Run, RandomVerifySuitePasses) {
  RunOptions opts;
  opts.seed = 1;
  const auto doc = run_verify_random({2, 2}, opts);
  EXPECT_TRUE(doc.pass());
  EXPECT_GE(doc.checks.size(), 8u);
}

// --- rendering ---------------------------------------------------------

TEST(Render, CsvHeaderAndRows) {
  const auto doc = run(parse_scenario_text(kIdentityPredict));
  const auto csv = render_csv(doc);
  EXPECT_EQ(csv.rfind("given,outcome,probability\n", 0), 0u);
  EXPECT_NE(csv.find("0,0,1\n"), std::string::npos);
  EXPECT_NE(csv.find("0,1,0\n"), std::string::npos);
}

TEST(Render, JsonCarriesToolVersionAndTables) {
  const auto j = to_json(run(parse_scenario(scenario_path("amplitude_damping_postdict.json"))));
  const auto text = j.dump();
  EXPECT_NE(text.find(std::string(kToolVersion)), std::string::npos);
  ASSERT_TRUE(j.contains("tables"));
  const auto& t = j["tables"][0];
  const auto& entries = t.contains("entries") ? t["entries"] : t["table"]["entries"];
  EXPECT_NEAR(entries["0"].get<double>(), 2.0 / 3.0, 1e-12);
}

// --- command line ------------------------------------------------------

TEST(Cli, VerifyRandomDims) {
  const auto r = invoke({"verify", "--seed", "1", "--dims", "2", "2"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(invoke({"verify", "--scenario", fixture_path("non_unitary.json")}).code, kExitValidation);
  EXPECT_EQ(invoke({"postdict", "--scenario", fixture_path("impossible_outcome.json")}).code,
            kExitUndefined);
  EXPECT_EQ(invoke({"verify", "--scenario", kRoot + "/does/not/exist.json"}).code, kExitParse);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitParse);
  EXPECT_EQ(invoke({"predict"}).code, kExitParse);
}

TEST(Cli, ClassifyPrintsVerdict) {
  const auto r = invoke({"classify", "--scenario", scenario_path("dephasing_classify.json")});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("unital: true, inference-symmetric: true, active-reverse: exists"),
            std::string::npos);
}

TEST(Cli, SampleHadamardPasses) {
  const auto r = invoke({"sample", "--scenario", scenario_path("hadamard_sample.json"), "--shots",
                      "100000", "--seed", "7", "--format", "json"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.is_object());
}

TEST(Cli, TightToleranceTurnsSamplingIntoFailure) {
  const auto r = invoke({"sample", "--scenario", scenario_path("hadamard_sample.json"), "--shots",
                      "1000", "--tolerance", "1e-9"});
  EXPECT_EQ(r.code, kExitVerification);
}
