#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "shotnoise/cli/artifacts.hpp"
#include "shotnoise/cli/compare.hpp"
#include "shotnoise/cli/run.hpp"
#include "shotnoise/cli/schema.hpp"

namespace {

using namespace shotnoise;
using namespace shotnoise::cli;

constexpr int exit_ok = 0;
constexpr int exit_schema = 2;
constexpr int exit_domain = 3;
constexpr int exit_numeric = 4;

// --out, then SHOTNOISE_OUT, then the scenario's "output", then ./out.
std::filesystem::path output_dir(const std::string& flag, const Scenario& s) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("SHOTNOISE_OUT"); env && *env) return env;
    if (!s.output.empty()) return s.output;
    return "out";
}

int cmd_run(const std::string& file, std::optional<unsigned> threads, const std::string& out,
            std::optional<std::uint64_t> seed) {
    json doc;
    try {
        doc = json::parse(read_text(file));
    } catch (const json::parse_error& e) {
        std::cerr << "shotnoise: schema error at '' (" << file << "): " << e.what() << "\n";
        return exit_schema;
    }
    Scenario s = parse_scenario(doc);
    if (threads) s.threads = *threads;
    if (seed) s.seeds = {*seed};
    const auto dir = output_dir(out, s);
    const json manifest = run_and_write(s, dir, file);
    std::cout << "wrote " << manifest["artifacts"].size() + 1 << " files to " << dir.string() << " in "
              << manifest["wall_time_s"].get<double>() << " s\n";
    return exit_ok;
}

int cmd_compare(const std::string& a, const std::string& b, const CompareOptions& opt, const std::string& out) {
    const Table ta = read_csv(a), tb = read_csv(b);
    const Table t = compare_tables(ta, tb, opt);
    const std::string text = csv_text(t);
    if (out.empty()) {
        std::cout << text;
        return exit_ok;
    }
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw DomainError("cannot create output directory " + out + ": " + ec.message());
    const std::filesystem::path dir(out);
    write_text(dir / "compare.csv", text);
    json manifest{{"tool", "shotnoise"}, {"version", tool_version}, {"command", "compare"},
                  {"inputs", {a, b}},    {"a_column", opt.a_column}, {"b_column", opt.b_column},
                  {"artifacts", {"compare.csv"}}};
    write_text(dir / manifest_name, manifest.dump(2) + "\n");
    std::cout << "wrote " << (dir / "compare.csv").string() << "\n";
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"shot noise deviations, fluctuations, stable rates and ruin"};
    app.set_version_flag("--version", std::string("shotnoise ") + tool_version);
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a scenario file");
    std::string scenario, out;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    run->add_option("scenario", scenario, "scenario JSON file")->required();
    run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "output directory");
    run->add_option("--seed", seed, "replace the scenario seeds by this one");

    auto* cmp = app.add_subcommand("compare", "compare two CSV artifacts on their grid column");
    std::string a, b, cmp_out;
    CompareOptions copt;
    cmp->add_option("A", a, "reference artifact")->required();
    cmp->add_option("B", b, "artifact compared against A")->required();
    cmp->add_option("--a-col", copt.a_column, "value column of A (default: first after the key)");
    cmp->add_option("--b-col", copt.b_column, "value column of B (default: the A column name)");
    cmp->add_option("--out", cmp_out, "write compare.csv here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_schema;
    }

    try {
        if (*run) return cmd_run(scenario, threads, out, seed);
        return cmd_compare(a, b, copt, cmp_out);
    } catch (const SchemaError& e) {
        std::cerr << "shotnoise: schema error at '" << e.pointer() << "': " << e.what() << "\n";
        return exit_schema;
    } catch (const DomainError& e) {
        std::cerr << "shotnoise: domain error: " << e.what() << "\n";
        return exit_domain;
    } catch (const NumericError& e) {
        std::cerr << "shotnoise: numeric error: " << e.what() << "\n";
        return exit_numeric;
    } catch (const ArityError& e) {
        std::cerr << "shotnoise: domain error: " << e.what() << "\n";
        return exit_domain;
    } catch (const std::exception& e) {
        std::cerr << "shotnoise: numeric error: " << e.what() << "\n";
        return exit_numeric;
    }
}
