// dyadlab: configuration-driven experiment runner.
// Exit codes: 0 pass, 1 assertion failure, 2 config error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dyad/grid.hpp"
#include "dyad/harness.hpp"
#include "dyad/lower_bounds.hpp"

using namespace dyad;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> level, samples;
    std::string out, format, golden;
    std::vector<std::string> parts;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file");
    sub->add_option("--seed", c.seed, "first seed");
    sub->add_option("--grid-level", c.level, "grid level L (N = 2^L cells per axis)");
    sub->add_option("--samples", c.samples, "seeds per cell");
    sub->add_option("--out", c.out, "output directory (report goes to stdout when empty)");
    sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--golden", c.golden, "golden file to compare against");
    sub->add_option("--parts", c.parts, "restrict to these parts of the suite");
}

ExperimentConfig resolve(const std::string& suite, const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? default_config(suite) : load_config(c.config);
    if (!c.config.empty() && cfg.suite != suite)
        throw ConfigError("config suite '" + cfg.suite + "' does not match subcommand suite '" + suite + "'");
    if (c.seed) cfg.seed = *c.seed;
    if (c.level) cfg.grid_level = *c.level;
    if (c.samples) cfg.samples = *c.samples;
    if (!c.out.empty()) cfg.out = c.out;
    if (!c.format.empty()) cfg.format = c.format;
    if (!c.golden.empty()) cfg.golden = c.golden;
    if (!c.parts.empty()) cfg.parts = c.parts;
    return cfg;
}

int run(const ExperimentConfig& cfg) {
    Report r = run_suite(cfg);
    if (cfg.out.empty()) {
        if (cfg.format == "json") r.write_json(std::cout);
        else r.write_csv(std::cout);
    } else {
        std::cerr << "wrote " << r.write(cfg.out, cfg.format) << "\n";
    }
    std::size_t failed = 0;
    for (const auto& row : r.rows) failed += !row.pass;
    std::cerr << (cfg.suite.empty() ? "empty" : cfg.suite) << ": " << r.rows.size() << " rows, " << failed
              << " failed" << (cfg.golden.empty() ? " (no golden comparison)" : "") << "\n";
    return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dyadic model operator experiments"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* suite;
        const char* help;
    };
    const Sub subs[] = {{"verify-identities", "identity", "exact identity suite"},
                        {"decompose", "representation", "representation reconstruction, round trips, coefficient profile"},
                        {"sweep-weighted", "weighted-sweep", "weighted operator sweeps (--mixed: mixed-norm sweeps)"},
                        {"commutators", "commutator", "commutator growth and duality"},
                        {"lower-bound", "lower-bound", "median-method lower bound"}};
    std::vector<Common> common(std::size(subs));
    std::vector<CLI::App*> apps;
    bool mixed = false;
    for (std::size_t i = 0; i < std::size(subs); ++i) {
        auto* s = app.add_subcommand(subs[i].name, subs[i].help);
        add_common(s, common[i]);
        apps.push_back(s);
    }
    apps[2]->add_flag("--mixed", mixed, "run the mixed-norm suite instead");

    std::string report_path, x_key, y_key, plot_out;
    auto* plot = app.add_subcommand("emit-plotdata", "tidy long table from a report");
    plot->add_option("--report", report_path, "report file (csv or json)")->required();
    plot->add_option("--x", x_key, "x-axis column")->required();
    plot->add_option("--y", y_key, "y-axis column")->required();
    plot->add_option("--out", plot_out, "output file (stdout when empty)");

    Common cal;
    std::string cal_suite;
    double safety = 5.0;
    auto* calib = app.add_subcommand("calibrate", "write a golden file from a calibration run");
    add_common(calib, cal);
    calib->add_option("--suite", cal_suite, "suite name")->required();
    calib->add_option("--safety", safety, "safety factor");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        for (std::size_t i = 0; i < std::size(subs); ++i)
            if (apps[i]->parsed()) return run(resolve(i == 2 && mixed ? "mixed-norm" : subs[i].suite, common[i]));

        if (plot->parsed()) {
            Report r = Report::read_file(report_path);
            if (plot_out.empty()) {
                emit_plotdata(r, x_key, y_key, std::cout);
            } else {
                std::ofstream os(plot_out);
                if (!os) throw ConfigError("cannot write '" + plot_out + "'");
                emit_plotdata(r, x_key, y_key, os);
            }
            return 0;
        }

        if (calib->parsed()) {
            if (cal.out.empty()) throw ConfigError("calibrate needs --out FILE");
            std::string target = cal.out;
            cal.out.clear();
            ExperimentConfig cfg = resolve(cal_suite, cal);
            cfg.golden.clear();
            // the calibration level is the grid level unless the config lists levels
            if (cal.config.empty() && !cfg.levels.empty()) cfg.levels = {cfg.grid_level};
            if (cal.parts.empty() && cal.config.empty()) {
                if (cal_suite == "representation") cfg.parts = {"coefficients"};
                if (cal_suite == "mixed-norm") cfg.parts = {"sweep"};
            }
            Report r = run_suite(cfg);
            auto [band, floor] = golden_policy(cal_suite);
            std::string seeds = std::to_string(cfg.seed) + ".." + std::to_string(cfg.seed + cfg.samples - 1) +
                                " level " + std::to_string(cfg.grid_level);
            Golden g = calibrate_golden(r, safety, band, floor, seeds);
            g.write(target);
            std::cerr << "wrote " << target << " with " << g.cells.size() << " cells\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownKernel& e) {
        std::cerr << "missing kernel plug-in: " << e.what() << "\n";
        return 2;
    } catch (const ResolutionError& e) {
        std::cerr << "resolution overflow: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
