// roster — scenario-driven multi-agent lifecycle runner.
//
// roster run --scenario <file> [--seed N] [--report <path>] [--format text|structured]
//            [--no-monitor] [--no-gap-narrow] [--no-memory] [--no-self-reflection]
//            [--backend scripted|remote --endpoint URL]
// roster run --suite <dir> [...]

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "roster/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CliOptions {
    std::string scenario_path;
    std::string suite_dir;
    std::uint64_t seed = 0;
    std::string report_path;
    std::string format = "text";
    bool no_monitor = false;
    bool no_gap_narrow = false;
    bool no_memory = false;
    bool no_self_reflection = false;
    std::string backend = "scripted";
    std::string endpoint;
};

int run_one(const CliOptions& opts, const std::string& path, std::ostream& out) {
    roster::LoadedScenario scenario = roster::load_scenario(path);

    roster::RunOptions run_opts;
    run_opts.seed = opts.seed;
    run_opts.toggle_override.monitor = !opts.no_monitor;
    run_opts.toggle_override.gap_narrow = !opts.no_gap_narrow;
    run_opts.toggle_override.memory = !opts.no_memory;
    run_opts.toggle_override.self_reflection = !opts.no_self_reflection;
    if (opts.backend == "remote") {
        const char* token = std::getenv("ROSTER_API_TOKEN");
        run_opts.reasoner = std::make_shared<roster::RemoteReasoner>(
            opts.endpoint, token ? token : "");
    }

    roster::RunResult result = roster::run_scenario(scenario, run_opts);
    out << roster::emit_report(result.report, opts.format == "structured"
                                                  ? roster::ReportFormat::structured
                                                  : roster::ReportFormat::text);
    return result.report.success ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"role-based multi-agent lifecycle runner"};
    app.require_subcommand(1);

    CliOptions opts;
    CLI::App* run = app.add_subcommand("run", "run a scenario (or a directory of scenarios)");
    auto* scenario_opt =
        run->add_option("--scenario", opts.scenario_path, "scenario file to run");
    auto* suite_opt = run->add_option("--suite", opts.suite_dir,
                                      "directory of scenario files (*.json), run in name order");
    scenario_opt->excludes(suite_opt);
    run->add_option("--seed", opts.seed, "seed recorded in the report");
    run->add_option("--report", opts.report_path, "write the report here instead of stdout");
    run->add_option("--format", opts.format, "report format")
        ->check(CLI::IsMember({"text", "structured"}));
    run->add_flag("--no-monitor", opts.no_monitor, "disable the monitor (escalations fail the run)");
    run->add_flag("--no-gap-narrow", opts.no_gap_narrow, "skip gap-narrow rule checks on replans");
    run->add_flag("--no-memory", opts.no_memory, "disable the memory store");
    run->add_flag("--no-self-reflection", opts.no_self_reflection,
                  "disable worker self-correction");
    run->add_option("--backend", opts.backend, "reasoner backend")
        ->check(CLI::IsMember({"scripted", "remote"}));
    run->add_option("--endpoint", opts.endpoint, "remote backend URL (http://host:port/path)");

    CLI11_PARSE(app, argc, argv);

    if (opts.backend == "remote" && opts.endpoint.empty()) {
        std::cerr << "error: --backend remote requires --endpoint\n";
        return 1;
    }
    if (opts.scenario_path.empty() && opts.suite_dir.empty()) {
        std::cerr << "error: run needs --scenario or --suite\n";
        return 1;
    }

    try {
        std::ofstream file_out;
        std::ostream* out = &std::cout;
        if (!opts.report_path.empty()) {
            file_out.open(opts.report_path);
            if (!file_out) {
                std::cerr << "error: cannot write " << opts.report_path << "\n";
                return 1;
            }
            out = &file_out;
        }

        if (!opts.suite_dir.empty()) {
            std::vector<std::string> files;
            for (const auto& entry : fs::directory_iterator(opts.suite_dir))
                if (entry.path().extension() == ".json") files.push_back(entry.path().string());
            std::sort(files.begin(), files.end());
            if (files.empty()) {
                std::cerr << "error: no scenario files in " << opts.suite_dir << "\n";
                return 1;
            }
            int failures = 0;
            for (const auto& f : files) {
                *out << "=== " << f << "\n";
                if (run_one(opts, f, *out) != 0) ++failures;
            }
            *out << "=== suite: " << files.size() - failures << "/" << files.size()
                 << " succeeded\n";
            return failures == 0 ? 0 : 2;
        }
        return run_one(opts, opts.scenario_path, *out);
    } catch (const roster::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
