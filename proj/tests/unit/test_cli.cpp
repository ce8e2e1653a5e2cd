#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "shotnoise/cli/artifacts.hpp"
#include "shotnoise/cli/compare.hpp"
#include "shotnoise/cli/schema.hpp"
#include "shotnoise/sim/records.hpp"

using namespace shotnoise;
using namespace shotnoise::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
    int rc = -1;
    std::string out, err;
};

std::string bin() {
    const char* b = std::getenv("SHOTNOISE_BIN");
    return b ? b : "shotnoise";
}

fs::path scenarios_dir() {
    const char* s = std::getenv("SHOTNOISE_SCENARIOS");
    return s ? s : "scenarios";
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("shotnoise_cli_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Runs the binary through the shell; env is a prefix such as "SHOTNOISE_OUT=/x".
Result run_cli(const std::string& args, const std::string& env = "env -u SHOTNOISE_OUT") {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path();
    const std::string tag = std::to_string(::getpid()) + "_" + std::to_string(counter++);
    const fs::path o = dir / ("cli_out_" + tag), e = dir / ("cli_err_" + tag);
    const std::string cmd = env + " '" + bin() + "' " + args + " >'" + o.string() + "' 2>'" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text(o);
    r.err = read_text(e);
    fs::remove(o);
    fs::remove(e);
    return r;
}

fs::path write_json(const fs::path& dir, const std::string& name, const json& j) {
    const fs::path p = dir / name;
    write_text(p, j.dump(2));
    return p;
}

json exp_model() {
    return {{"lambda", 1.0},
            {"shape", "multiplicative"},
            {"mark", {{"kind", "exponential"}, {"a", 1.0}}},
            {"F", {{"kind", "uniform"}, {"b", 1.0}}}};
}

json tail_scenario() {
    return {{"experiment", "tail"},
            {"model", exp_model()},
            {"params", {{"x", 1.9}, {"t", {10, 20}}}},
            {"n_paths", 20000},
            {"seeds", {7}}};
}

void expect_all_finite(const Table& t) {
    for (const auto& row : t.rows)
        for (double v : row) EXPECT_TRUE(std::isfinite(v));
}

} // namespace

TEST(CliSchema, PointerTokensAreEscaped) {
    EXPECT_EQ(pointer_token("a/b"), "a~1b");
    EXPECT_EQ(pointer_token("m~n"), "m~0n");
}

TEST(CliSchema, ModelJsonRoundTrip) {
    const std::vector<json> models{
        exp_model(),
        {{"lambda", 2.0}, {"shape", "capped"}, {"mark", {{"kind", "table"}, {"values", {0.5, 2.0}}, {"probs", {0.25, 0.75}}}}},
        {{"lambda", 1.0}, {"shape", "constant"}, {"mark", {{"kind", "deterministic"}, {"value", 1.0}}}},
        {{"lambda", 0.5},
         {"shape", "cluster"},
         {"offspring", {{"kind", "binomial"}, {"m", 2}, {"p", 0.3}}},
         {"lag", {{"kind", "exponential"}, {"a", 2.0}}}},
    };
    for (const auto& j : models) {
        const ShotModel m = parse_model(Node(j, "/model"));
        const json back = to_json(m);
        const ShotModel m2 = parse_model(Node(back, "/model"));
        EXPECT_EQ(to_json(m2), back);
        EXPECT_EQ(back["lambda"], j["lambda"]);
        EXPECT_EQ(back["shape"], j["shape"]);
        EXPECT_DOUBLE_EQ(m2.z().mean(), m.z().mean());
    }
}

TEST(CliSchema, FailuresNameThePointer) {
    auto pointer_of = [](json doc) {
        try {
            parse_scenario(doc);
        } catch (const SchemaError& e) {
            return e.pointer();
        }
        return std::string("<none>");
    };
    json s = tail_scenario();
    EXPECT_EQ(pointer_of(s), "<none>");
    s["params"]["t"][1] = "twenty";
    EXPECT_EQ(pointer_of(s), "/params/t/1");
    s = tail_scenario();
    s["model"].erase("lambda");
    EXPECT_EQ(pointer_of(s), "/model/lambda");
    s = tail_scenario();
    s["model"]["mark"]["kind"] = "gamma";
    EXPECT_EQ(pointer_of(s), "/model/mark/kind");
    s = tail_scenario();
    s["experiment"] = "plot";
    EXPECT_EQ(pointer_of(s), "/experiment");
    s = tail_scenario();
    s["colour"] = "red";
    EXPECT_EQ(pointer_of(s), "/colour");
    s = tail_scenario();
    s["seeds"] = {1, -2};
    EXPECT_EQ(pointer_of(s), "/seeds/1");
    s = tail_scenario();
    s["params"].erase("x");
    EXPECT_EQ(pointer_of(s), "/params/x");
}

TEST(CliSchema, RangeErrorsAreDomainErrors) {
    json s = tail_scenario();
    s["model"]["lambda"] = -1.0;
    EXPECT_THROW(parse_scenario(s), DomainError);
}

TEST(CliSchema, SampleScenariosParse) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(scenarios_dir())) {
        if (e.path().extension() != ".json") continue;
        EXPECT_NO_THROW(parse_scenario(json::parse(read_text(e.path())))) << e.path();
        ++n;
    }
    EXPECT_GE(n, 6);
}

TEST(CliCsv, WriteParseRoundTrip) {
    Table t{{"t", "v"}, {{1, 0.1}, {2.5, -3e-300}, {1e6, 0}}};
    const std::string text = csv_text(t);
    EXPECT_EQ(text.substr(0, 26), "# manifest: manifest.json\n");
    EXPECT_EQ(text.find('\r'), std::string::npos);
    const Table back = parse_csv(text, "mem");
    EXPECT_EQ(back.columns, t.columns);
    EXPECT_EQ(back.rows, t.rows);
    t.rows.push_back({3, std::nan("")});
    EXPECT_THROW(check_finite(t, "x"), NumericError);
}

TEST(CliRun, TailArtifactsAndManifest) {
    const fs::path dir = scratch("tail");
    const auto file = write_json(dir, "s.json", tail_scenario());
    const Result r = run_cli("run '" + file.string() + "' --out '" + (dir / "o").string() + "'");
    ASSERT_EQ(r.rc, 0) << r.err;
    const std::string text = read_text(dir / "o" / "tail.csv");
    EXPECT_EQ(text.rfind("# manifest: manifest.json\n", 0), 0u);
    const Table t = read_csv(dir / "o" / "tail.csv");
    EXPECT_EQ(t.columns, (std::vector<std::string>{"t", "analytic", "mc", "mc_stderr", "ratio"}));
    ASSERT_EQ(t.rows.size(), 2u);
    expect_all_finite(t);
    for (const auto& row : t.rows) {
        EXPECT_GT(row[1], 0);
        EXPECT_NEAR(row[4], row[2] / row[1], 1e-12);
    }
    const json m = json::parse(read_text(dir / "o" / "manifest.json"));
    EXPECT_EQ(m["tool"], "shotnoise");
    EXPECT_EQ(m["version"], SHOTNOISE_VERSION);
    EXPECT_EQ(m["seed"], 7);
    EXPECT_TRUE(m["wall_time_s"].is_number());
    EXPECT_GE(m["wall_time_s"].get<double>(), 0.0);
    const json resolved = json::parse(read_text(dir / "o" / "scenario.json"));
    EXPECT_EQ(resolved, m["scenario"]);
    EXPECT_EQ(resolved["params"]["sigma"], 1);
    // The resolved scenario runs again as is.
    EXPECT_NO_THROW(parse_scenario(resolved));
}

TEST(CliRun, RerunIsByteIdenticalAcrossThreads) {
    const fs::path dir = scratch("rerun");
    json s = tail_scenario();
    s["n_paths"] = 9000;
    const auto file = write_json(dir, "s.json", s);
    ASSERT_EQ(run_cli("run '" + file.string() + "' --out '" + (dir / "a").string() + "' --threads 1").rc, 0);
    ASSERT_EQ(run_cli("run '" + file.string() + "' --out '" + (dir / "b").string() + "' --threads 3").rc, 0);
    EXPECT_EQ(csv_body(read_text(dir / "a" / "tail.csv")), csv_body(read_text(dir / "b" / "tail.csv")));
    // The resolved scenario from the manifest reproduces the run.
    ASSERT_EQ(run_cli("run '" + (dir / "a" / "scenario.json").string() + "' --out '" + (dir / "c").string() + "'").rc, 0);
    EXPECT_EQ(read_text(dir / "a" / "tail.csv"), read_text(dir / "c" / "tail.csv"));
}

TEST(CliRun, SeedFlagReplacesSeeds) {
    const fs::path dir = scratch("seed");
    const auto file = write_json(dir, "s.json", tail_scenario());
    ASSERT_EQ(run_cli("run '" + file.string() + "' --out '" + (dir / "a").string() + "' --seed 99").rc, 0);
    ASSERT_EQ(run_cli("run '" + file.string() + "' --out '" + (dir / "b").string() + "'").rc, 0);
    const json m = json::parse(read_text(dir / "a" / "manifest.json"));
    EXPECT_EQ(m["seed"], 99);
    EXPECT_EQ(m["seeds"], json::array({99}));
    EXPECT_NE(read_text(dir / "a" / "tail.csv"), read_text(dir / "b" / "tail.csv"));
}

TEST(CliRun, OutputDirectoryPrecedence) {
    const fs::path dir = scratch("outdir");
    json s = tail_scenario();
    s["n_paths"] = 2000;
    s["output"] = (dir / "from_scenario").string();
    const auto file = write_json(dir, "s.json", s);
    ASSERT_EQ(run_cli("run '" + file.string() + "'").rc, 0);
    EXPECT_TRUE(fs::exists(dir / "from_scenario" / "tail.csv"));
    ASSERT_EQ(run_cli("run '" + file.string() + "'", "SHOTNOISE_OUT='" + (dir / "from_env").string() + "'").rc, 0);
    EXPECT_TRUE(fs::exists(dir / "from_env" / "tail.csv"));
    ASSERT_EQ(run_cli("run '" + file.string() + "' --out '" + (dir / "from_flag").string() + "'",
                  "SHOTNOISE_OUT='" + (dir / "unused").string() + "'")
                  .rc,
              0);
    EXPECT_TRUE(fs::exists(dir / "from_flag" / "tail.csv"));
    EXPECT_FALSE(fs::exists(dir / "unused"));
}

TEST(CliRun, SchemaViolationExitsTwoWithPointerAndNoArtifacts) {
    const fs::path dir = scratch("schema");
    json s = tail_scenario();
    s["params"]["t"] = {10, "x"};
    const auto file = write_json(dir, "s.json", s);
    const Result r = run_cli("run '" + file.string() + "' --out '" + (dir / "o").string() + "'");
    EXPECT_EQ(r.rc, 2);
    EXPECT_NE(r.err.find("/params/t/1"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "o"));

    write_text(dir / "broken.json", "{\"experiment\": ");
    const Result p = run_cli("run '" + (dir / "broken.json").string() + "' --out '" + (dir / "o").string() + "'");
    EXPECT_EQ(p.rc, 2);
    EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(CliRun, DomainErrorExitsThree) {
    const fs::path dir = scratch("domain");
    json s = tail_scenario();
    s["model"]["lambda"] = 0.0;
    auto file = write_json(dir, "s.json", s);
    Result r = run_cli("run '" + file.string() + "' --out '" + (dir / "o").string() + "'");
    EXPECT_EQ(r.rc, 3);
    EXPECT_NE(r.err.find("lambda"), std::string::npos) << r.err;
    // x below the mean lambda E[Z] = 1 is outside the tail regime.
    s = tail_scenario();
    s["params"]["x"] = 0.5;
    file = write_json(dir, "s2.json", s);
    r = run_cli("run '" + file.string() + "' --out '" + (dir / "o").string() + "'");
    EXPECT_EQ(r.rc, 3);
    // Net-profit condition fails.
    json ruin{{"experiment", "ruin"}, {"model", exp_model()}, {"params", {{"c", 0.9}, {"u", {5}}}}, {"n_paths", 100}};
    file = write_json(dir, "s3.json", ruin);
    r = run_cli("run '" + file.string() + "' --out '" + (dir / "o").string() + "'");
    EXPECT_EQ(r.rc, 3);
    EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(CliRun, RuinCsvColumns) {
    const fs::path dir = scratch("ruin");
    const Result r = run_cli("run '" + (scenarios_dir() / "ruin_exp_claims.json").string() + "' --out '" +
                         (dir / "o").string() + "'");
    ASSERT_EQ(r.rc, 0) << r.err;
    const Table t = read_csv(dir / "o" / "ruin.csv");
    EXPECT_EQ(t.columns, (std::vector<std::string>{"u", "psi_hat", "stderr", "lower_bound", "upper_bound", "w"}));
    expect_all_finite(t);
    for (const auto& row : t.rows) {
        EXPECT_DOUBLE_EQ(row[5], 0.5);
        EXPECT_LE(row[3], row[1] + 3 * row[2]);
        EXPECT_LE(row[1] - 3 * row[2], 1.2 * row[4]);
    }
}

TEST(CliRun, StableRateReportPredictsInverseAlpha) {
    const fs::path dir = scratch("rate");
    json s = json::parse(read_text(scenarios_dir() / "stable_rate_pareto.json"));
    s["n_paths"] = 4000;
    s["params"]["t"] = {10, 30, 100};
    s["params"]["check_preconditions"] = false;
    const auto file = write_json(dir, "s.json", s);
    const Result r = run_cli("run '" + file.string() + "' --out '" + (dir / "o").string() + "'");
    ASSERT_EQ(r.rc, 0) << r.err;
    const json rep = json::parse(read_text(dir / "o" / "rate_report.json"));
    EXPECT_NEAR(rep["predicted_exponent"].get<double>(), 1.0 / 1.5, 1e-12);
    EXPECT_EQ(rep["stable"]["alpha"], 1.5);
    const Table t = read_csv(dir / "o" / "rate.csv");
    EXPECT_EQ(t.rows.size(), 3u);
    expect_all_finite(t);
    // The unrelaxed sample scenario enforces the grid and path-count preconditions.
    s["params"]["check_preconditions"] = true;
    write_json(dir, "s.json", s);
    EXPECT_EQ(run_cli("run '" + file.string() + "' --out '" + (dir / "p").string() + "'").rc, 3);
}

TEST(CliRun, SimulateWritesLittleEndianRecords) {
    const fs::path dir = scratch("sim");
    json s = json::parse(read_text(scenarios_dir() / "simulate_cluster.json"));
    s["n_paths"] = 500;
    const auto file = write_json(dir, "s.json", s);
    const Result r = run_cli("run '" + file.string() + "' --out '" + (dir / "o").string() + "'");
    ASSERT_EQ(r.rc, 0) << r.err;
    const auto raw = read_text(dir / "o" / "paths.bin");
    ASSERT_EQ(raw.size(), 2 * 500 * record_size);
    const auto recs = read_records((dir / "o" / "paths.bin").string());
    const Table t = read_csv(dir / "o" / "simulate.csv");
    for (std::size_t j = 0; j < 2; ++j) {
        double mean = 0;
        for (std::size_t p = 0; p < 500; ++p) {
            const auto& rec = recs[j * 500 + p];
            EXPECT_EQ(rec.t, t.rows[j][0]);
            mean += rec.value;
        }
        EXPECT_NEAR(mean / 500, t.rows[j][1], 1e-9);
    }
    // First field is t = 5 as a little-endian double.
    const double t0 = 5.0;
    std::uint64_t bits;
    std::memcpy(&bits, &t0, 8);
    for (int i = 0; i < 8; ++i)
        EXPECT_EQ(static_cast<unsigned char>(raw[i]), static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
}

TEST(CliCompare, SelfComparisonRatiosAreOne) {
    const fs::path dir = scratch("cmp_self");
    const auto file = write_json(dir, "s.json", tail_scenario());
    ASSERT_EQ(run_cli("run '" + file.string() + "' --out '" + (dir / "o").string() + "'").rc, 0);
    const std::string csv = (dir / "o" / "tail.csv").string();
    for (const std::string col : {"", "--a-col mc", "--a-col ratio"}) {
        const Result r = run_cli("compare '" + csv + "' '" + csv + "' " + col);
        ASSERT_EQ(r.rc, 0) << r.err;
        const Table t = parse_csv(r.out, "stdout");
        ASSERT_EQ(t.rows.size(), 2u);
        // z only where the compared column has a standard error (mc_stderr for mc).
        ASSERT_EQ(t.columns.size(), col == "--a-col mc" ? 5u : 4u);
        for (const auto& row : t.rows) {
            EXPECT_EQ(row[3], 1.0);
            if (row.size() > 4) {
                EXPECT_EQ(row[4], 0.0);
            }
        }
    }
    const Result r = run_cli("compare '" + csv + "' '" + csv + "' --a-col analytic --b-col mc");
    ASSERT_EQ(r.rc, 0) << r.err;
    const Table t = parse_csv(r.out, "stdout");
    const Table src = read_csv(csv);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        EXPECT_DOUBLE_EQ(t.rows[i][3], src.rows[i][4]);
        EXPECT_NEAR(t.rows[i][4], (src.rows[i][2] - src.rows[i][1]) / src.rows[i][3], 1e-12);
    }
}

TEST(CliCompare, MismatchAndEmptyExitThree) {
    const fs::path dir = scratch("cmp_bad");
    write_text(dir / "a.csv", csv_text(Table{{"t", "v"}, {{1, 1.0}, {2, 2.0}}}));
    write_text(dir / "b.csv", csv_text(Table{{"t", "v"}, {{1, 1.0}, {3, 2.0}}}));
    write_text(dir / "c.csv", csv_text(Table{{"t", "v"}, {{1, 1.0}}}));
    write_text(dir / "d.csv", csv_text(Table{{"u", "v"}, {{1, 1.0}, {2, 2.0}}}));
    write_text(dir / "header_only.csv", csv_text(Table{{"t", "v"}, {}}));
    write_text(dir / "empty.csv", "");
    auto rc = [&](const std::string& x, const std::string& y) {
        return run_cli("compare '" + (dir / x).string() + "' '" + (dir / y).string() + "'").rc;
    };
    EXPECT_EQ(rc("a.csv", "a.csv"), 0);
    EXPECT_EQ(rc("a.csv", "b.csv"), 3);
    EXPECT_EQ(rc("a.csv", "c.csv"), 3);
    EXPECT_EQ(rc("a.csv", "d.csv"), 3);
    EXPECT_EQ(rc("a.csv", "empty.csv"), 3);
    EXPECT_EQ(rc("empty.csv", "a.csv"), 3);
    EXPECT_EQ(rc("a.csv", "header_only.csv"), 3);
    EXPECT_EQ(rc("a.csv", "missing.csv"), 3);
}

TEST(CliCompare, NonFiniteRatioOrZIsANumericFailure) {
    const fs::path dir = scratch("cmp_zero");
    write_text(dir / "a.csv", csv_text(Table{{"t", "v"}, {{1, 0.0}}}));
    write_text(dir / "b.csv", csv_text(Table{{"t", "v"}, {{1, 2.0}}}));
    write_text(dir / "c.csv", csv_text(Table{{"t", "v", "v_stderr"}, {{1, 1.0, 0.0}}}));
    auto rc = [&](const std::string& x, const std::string& y) {
        return run_cli("compare '" + (dir / x).string() + "' '" + (dir / y).string() + "'").rc;
    };
    EXPECT_EQ(rc("a.csv", "b.csv"), 4);
    EXPECT_EQ(rc("c.csv", "b.csv"), 4);
    EXPECT_EQ(rc("c.csv", "c.csv"), 0);
}

TEST(CliCompare, WritesArtifactWithManifest) {
    const fs::path dir = scratch("cmp_out");
    write_text(dir / "a.csv", csv_text(Table{{"t", "v"}, {{1, 1.0}, {2, 4.0}}}));
    write_text(dir / "b.csv", csv_text(Table{{"t", "v"}, {{1, 2.0}, {2, 2.0}}}));
    ASSERT_EQ(run_cli("compare '" + (dir / "a.csv").string() + "' '" + (dir / "b.csv").string() + "' --out '" +
                  (dir / "o").string() + "'")
                  .rc,
              0);
    const Table t = read_csv(dir / "o" / "compare.csv");
    // No standard errors in either input: no z column.
    EXPECT_EQ(t.columns, (std::vector<std::string>{"t", "a", "b", "ratio"}));
    EXPECT_EQ(t.rows[0][3], 2.0);
    EXPECT_EQ(t.rows[1][3], 0.5);
    EXPECT_TRUE(fs::exists(dir / "o" / "manifest.json"));
}
