#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace dyad {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// 1/p + 1/q = 1/r; p or q may be infinite
struct ExponentTriple {
    double p = 2, q = 2, r = 1;
    std::string label() const;
};
// axis-1 (outer) and axis-2 (inner) triples of a mixed-norm cell
struct MixedExponents {
    ExponentTriple outer, inner;
    std::string label() const;
};

struct ExperimentConfig {
    std::string suite;                         // "" runs nothing
    int grid_level = 3;
    std::uint64_t seed = 0;
    int samples = 1000;
    std::vector<ExponentTriple> exponents;     // bilinear cells
    std::vector<double> linear_exponents;      // single-function cells
    std::vector<MixedExponents> mixed;
    std::vector<std::string> weights;          // "unit", "power:a1:a2", "lacunary:t1:t2"
    std::vector<std::string> families;
    std::vector<std::string> kernels;
    std::vector<std::string> symbols;
    std::vector<std::array<int, 3>> gamma;     // (k, gamma1, gamma2)
    std::vector<int> levels;
    std::vector<std::string> parts;            // empty: every part of the suite
    std::map<std::string, double> tolerances;
    std::string golden;                        // golden file; empty: no comparison
    std::string out;
    std::string format = "csv";

    double tol(const std::string& key) const;
    bool wants(const std::string& part) const;

    // throws ConfigError, ResolutionError or UnknownKernel
    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

// defaults of every suite; unknown suite names throw ConfigError
ExperimentConfig default_config(const std::string& suite);
// defaults overlaid with the keys present in the file
ExperimentConfig load_config(const std::string& path);
const std::vector<std::string>& suite_names();

struct Row {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string digest;  // FNV-1a of the inputs description
    std::vector<std::pair<std::string, std::string>> labels;
    std::vector<std::pair<std::string, double>> values;
    bool pass = true;

    Row& label(const std::string& k, const std::string& v);
    Row& value(const std::string& k, double v);
    std::optional<std::string> find_label(const std::string& k) const;
    std::optional<double> find_value(const std::string& k) const;
};

struct Report {
    static constexpr const char* kSchema = "dyad-report/1";
    std::string suite;
    nlohmann::ordered_json config;
    std::vector<Row> rows;

    bool pass() const;
    std::vector<std::string> columns() const;
    void write_csv(std::ostream& os) const;
    void write_json(std::ostream& os) const;
    // <dir>/<suite>.<format>; returns the path
    std::string write(const std::string& dir, const std::string& format) const;
    static Report read_json(std::istream& is);
    static Report read_csv(std::istream& is);
    static Report read_file(const std::string& path);
};

std::string fnv1a_hex(const std::string& s);

// Per-cell regression bounds. Rows carrying the label "golden_key" and the
// value "stat" are compared with [min / safety, max * safety] (lower end only
// when band is set); stats at or below floor always pass.
struct GoldenCell {
    double min = 0.0, max = 0.0;
    std::size_t rows = 0;
};
struct Golden {
    std::string suite;
    double safety = 5.0;
    bool band = false;
    double floor = 0.0;
    std::string seeds;
    std::map<std::string, GoldenCell> cells;

    nlohmann::ordered_json to_json() const;
    static Golden from_json(const nlohmann::json& j);
    static Golden read(const std::string& path);
    void write(const std::string& path) const;
};

Golden calibrate_golden(const Report& r, double safety, bool band, double floor, const std::string& seeds);
void apply_golden(Report& r, const Golden& g);

// calibration settings per suite: (band, floor)
std::pair<bool, double> golden_policy(const std::string& suite);

Report run_suite(const ExperimentConfig& cfg);

// tidy long table: suite, experiment, seed, series, x_key, x, y_key, y
void emit_plotdata(const Report& r, const std::string& x_key, const std::string& y_key, std::ostream& os);

}  // namespace dyad
