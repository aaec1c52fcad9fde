#include "dyad/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "dyad/grid.hpp"
#include "dyad/lower_bounds.hpp"
#include "dyad/measures.hpp"
#include "suites.hpp"

namespace dyad {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double parse_exponent(const json& j) {
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        auto slash = s.find('/');
        try {
            if (slash != std::string::npos) return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
            return std::stod(s);
        } catch (const std::exception&) {
            throw ConfigError("bad exponent '" + s + "'");
        }
    }
    if (!j.is_number()) throw ConfigError("exponent must be a number, a fraction string or \"inf\"");
    return j.get<double>();
}

json exponent_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

ExponentTriple parse_triple(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("exponent triple must be [p, q, r]");
    return {parse_exponent(j[0]), parse_exponent(j[1]), parse_exponent(j[2])};
}

json triple_json(const ExponentTriple& e) { return json::array({exponent_json(e.p), exponent_json(e.q), exponent_json(e.r)}); }

void check_triple(const ExponentTriple& e) {
    auto inv = [](double x) { return std::isinf(x) ? 0.0 : 1.0 / x; };
    bool ok = e.p > 0 && e.q > 0 && e.r > 0 && !std::isinf(e.r) &&
              std::fabs(inv(e.p) + inv(e.q) - inv(e.r)) <= 1e-12 * std::max(1.0, inv(e.r));
    if (!ok) throw ConfigError("invalid exponent triple " + e.label() + ": need 1/p + 1/q = 1/r with p, q, r > 0");
}

int max_level(const std::string& suite) {
    if (suite == "representation") return 4;  // dense reconstruction is capped separately at 3
    if (suite == "lower-bound") return 5;
    return 6;
}

template <class T>
void take(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

std::string ExponentTriple::label() const { return short_num(p) + ":" + short_num(q) + ":" + short_num(r); }
std::string MixedExponents::label() const { return outer.label() + "|" + inner.label(); }

double ExperimentConfig::tol(const std::string& key) const {
    auto it = tolerances.find(key);
    if (it == tolerances.end()) throw ConfigError("no tolerance '" + key + "'");
    return it->second;
}

bool ExperimentConfig::wants(const std::string& part) const {
    return parts.empty() || std::find(parts.begin(), parts.end(), part) != parts.end();
}

void ExperimentConfig::validate() const {
    if (!suite.empty() && std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end())
        throw ConfigError("unknown suite '" + suite + "'");
    if (grid_level < 1) throw ConfigError("grid_level must be >= 1");
    if (grid_level > max_level(suite))
        throw ResolutionError("grid_level " + std::to_string(grid_level) + " exceeds " +
                              std::to_string(max_level(suite)) + " for suite '" + suite + "'");
    for (int l : levels) {
        if (l < 1) throw ConfigError("levels must be >= 1");
        if (l > max_level(suite)) throw ResolutionError("level " + std::to_string(l));
    }
    if (samples < 0) throw ConfigError("samples must be >= 0");
    if (format != "csv" && format != "json") throw ConfigError("format must be csv or json");
    for (const auto& e : exponents) check_triple(e);
    for (const auto& m : mixed) {
        check_triple(m.outer);
        check_triple(m.inner);
    }
    for (double p : linear_exponents)
        if (!(p > 0)) throw ConfigError("linear exponents must be positive");
    for (const auto& w : weights) {
        auto t = split(w, ':');
        bool ok = (t.size() == 1 && t[0] == "unit") || (t.size() == 3 && (t[0] == "power" || t[0] == "lacunary"));
        if (!ok) throw ConfigError("bad weight spec '" + w + "'");
    }
    for (const auto& g : gamma)
        if (g[0] < 1 || g[1] < 0 || g[2] < 0 || g[1] + g[2] != g[0])
            throw ConfigError("gamma entries are [k, g1, g2] with g1 + g2 = k >= 1");
    // kernel plug-ins resolve at a small level; UnknownKernel propagates
    for (const auto& k : kernels) {
        if (suite == "representation") suites::check_tensor_kernel(k);
        else make_kernel(k, 1);
    }
    for (const auto& s : symbols)
        if (std::find(bmo_test_symbol_names().begin(), bmo_test_symbol_names().end(), s) ==
            bmo_test_symbol_names().end())
            throw ConfigError("unknown symbol '" + s + "'");
}

ojson ExperimentConfig::to_json() const {
    ojson j;
    j["suite"] = suite;
    j["grid_level"] = grid_level;
    j["seed"] = seed;
    j["samples"] = samples;
    j["exponents"] = ojson::array();
    for (const auto& e : exponents) j["exponents"].push_back(ojson(triple_json(e)));
    j["linear_exponents"] = ojson::array();
    for (double p : linear_exponents) j["linear_exponents"].push_back(ojson(exponent_json(p)));
    j["mixed"] = ojson::array();
    for (const auto& m : mixed) j["mixed"].push_back(ojson::array({ojson(triple_json(m.outer)), ojson(triple_json(m.inner))}));
    j["weights"] = weights;
    j["families"] = families;
    j["kernels"] = kernels;
    j["symbols"] = symbols;
    j["gamma"] = gamma;
    j["levels"] = levels;
    j["parts"] = parts;
    j["tolerances"] = tolerances;
    j["golden"] = golden;
    j["out"] = out;
    j["format"] = format;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known{"suite",    "grid_level", "seed",    "samples", "exponents",
                                             "linear_exponents", "mixed", "weights", "families", "kernels",
                                             "symbols",  "gamma",      "levels",  "parts",   "tolerances",
                                             "golden",   "out",        "format"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    ExperimentConfig c = default_config(j.value("suite", std::string()));
    try {
        take(j, "grid_level", c.grid_level);
        take(j, "seed", c.seed);
        take(j, "samples", c.samples);
        if (j.contains("exponents")) {
            c.exponents.clear();
            for (const auto& e : j["exponents"]) c.exponents.push_back(parse_triple(e));
        }
        if (j.contains("linear_exponents")) {
            c.linear_exponents.clear();
            for (const auto& e : j["linear_exponents"]) c.linear_exponents.push_back(parse_exponent(e));
        }
        if (j.contains("mixed")) {
            c.mixed.clear();
            for (const auto& m : j["mixed"]) {
                if (!m.is_array() || m.size() != 2) throw ConfigError("mixed entries are [outer triple, inner triple]");
                c.mixed.push_back({parse_triple(m[0]), parse_triple(m[1])});
            }
        }
        take(j, "weights", c.weights);
        take(j, "families", c.families);
        take(j, "kernels", c.kernels);
        take(j, "symbols", c.symbols);
        take(j, "gamma", c.gamma);
        take(j, "levels", c.levels);
        take(j, "parts", c.parts);
        if (j.contains("tolerances"))
            for (const auto& [k, v] : j["tolerances"].items()) c.tolerances[k] = v.get<double>();
        take(j, "golden", c.golden);
        take(j, "out", c.out);
        take(j, "format", c.format);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config type error: ") + e.what());
    }
    return c;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> n{"identity",  "representation", "weighted-sweep",
                                            "commutator", "lower-bound",    "mixed-norm"};
    return n;
}

// Numeric defaults of every suite live here and nowhere else.
ExperimentConfig default_config(const std::string& suite) {
    ExperimentConfig c;
    c.suite = suite;
    c.tolerances = {{"exact", 1e-10}, {"mixed_equal", 1e-13}, {"extraction", 1e-12}, {"chain", 1e-12}};
    if (suite.empty()) return c;
    if (suite == "identity") {
        c.samples = 1000;
    } else if (suite == "representation") {
        c.samples = 50;
        c.kernels = {"riesz", "modulated"};
        c.levels = {2, 3, 4};
    } else if (suite == "weighted-sweep") {
        c.exponents = {{4.0 / 3, 4.0 / 3, 2.0 / 3}, {4.0 / 3, 2, 0.8}, {4.0 / 3, 4, 1},
                       {2, 4.0 / 3, 0.8},           {2, 2, 1},          {2, 4, 4.0 / 3},
                       {4, 4.0 / 3, 1},             {4, 2, 4.0 / 3},    {4, 4, 2}};
        c.linear_exponents = {4.0 / 3, 2, 4};
        c.weights = {"unit", "power:-0.5:0.25", "lacunary:4:4", "lacunary:40:1", "lacunary:400:1"};
        c.families = {"shift", "partial", "full", "aux", "adapted", "lower-sf"};
    } else if (suite == "commutator") {
        c.exponents = {{2, 2, 1}, {4, 4, 2}};
        c.families = {"shift", "partial", "full"};
    } else if (suite == "lower-bound") {
        c.kernels = {"riesz11"};
        c.symbols = bmo_test_symbol_names();
        c.gamma = {{1, 1, 0}, {1, 0, 1}, {2, 1, 1}};
        c.levels = {3, 4};
    } else if (suite == "mixed-norm") {
        c.mixed = {{{2, 2, 1}, {2, 2, 1}},
                   {{4, 4, 2}, {2, 2, 1}},
                   {{4, 4.0 / 3, 1}, {2, 4, 4.0 / 3}},
                   {{4.0 / 3, 4.0 / 3, 2.0 / 3}, {4, 4, 2}},
                   {{4.0 / 3, 4, 1}, {4.0 / 3, 4.0 / 3, 2.0 / 3}}};
        c.linear_exponents = {2.0 / 3, 1, 4.0 / 3, 2, 4, kInf};
    } else {
        throw ConfigError("unknown suite '" + suite + "'");
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return ExperimentConfig::from_json(j);
}

// ---- rows and reports ----

Row& Row::label(const std::string& k, const std::string& v) {
    labels.emplace_back(k, v);
    return *this;
}
Row& Row::value(const std::string& k, double v) {
    values.emplace_back(k, v);
    return *this;
}
std::optional<std::string> Row::find_label(const std::string& k) const {
    for (const auto& [a, b] : labels)
        if (a == k) return b;
    return std::nullopt;
}
std::optional<double> Row::find_value(const std::string& k) const {
    for (const auto& [a, b] : values)
        if (a == k) return b;
    return std::nullopt;
}

bool Report::pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.pass; });
}

std::vector<std::string> Report::columns() const {
    std::vector<std::string> cols{"experiment", "seed", "digest", "pass"};
    std::set<std::string> seen(cols.begin(), cols.end());
    for (const auto& r : rows) {
        for (const auto& l : r.labels)
            if (seen.insert(l.first).second) cols.push_back(l.first);
        for (const auto& v : r.values)
            if (seen.insert(v.first).second) cols.push_back(v.first);
    }
    return cols;
}

void Report::write_csv(std::ostream& os) const {
    auto cols = columns();
    os << "# " << kSchema << " suite=" << suite << "\n";
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) os << ",";
            const auto& c = cols[i];
            if (c == "experiment") os << r.experiment;
            else if (c == "seed") os << r.seed;
            else if (c == "digest") os << r.digest;
            else if (c == "pass") os << (r.pass ? 1 : 0);
            else if (auto l = r.find_label(c)) os << *l;
            else if (auto v = r.find_value(c)) os << num(*v);
        }
        os << "\n";
    }
}

void Report::write_json(std::ostream& os) const {
    ojson j;
    j["schema"] = kSchema;
    j["suite"] = suite;
    j["config"] = config;
    j["pass"] = pass();
    j["rows"] = ojson::array();
    for (const auto& r : rows) {
        ojson o;
        o["experiment"] = r.experiment;
        o["seed"] = r.seed;
        o["digest"] = r.digest;
        o["pass"] = r.pass;
        for (const auto& [k, v] : r.labels) o[k] = v;
        // non-finite values as strings keep the file valid JSON
        for (const auto& [k, v] : r.values) o[k] = std::isfinite(v) ? ojson(v) : ojson(num(v));
        j["rows"].push_back(o);
    }
    os << j.dump(1) << "\n";
}

std::string Report::write(const std::string& dir, const std::string& format) const {
    std::filesystem::create_directories(dir);
    std::string path = (std::filesystem::path(dir) / ((suite.empty() ? "empty" : suite) + "." + format)).string();
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write '" + path + "'");
    if (format == "json") write_json(os);
    else write_csv(os);
    return path;
}

Report Report::read_json(std::istream& is) {
    ojson j = ojson::parse(is);
    if (j.value("schema", "") != kSchema) throw ConfigError("not a " + std::string(kSchema) + " report");
    Report r;
    r.suite = j.value("suite", "");
    r.config = j.value("config", ojson());
    for (const auto& o : j["rows"]) {
        Row row;
        for (const auto& [k, v] : o.items()) {
            if (k == "experiment") row.experiment = v.get<std::string>();
            else if (k == "seed") row.seed = v.get<std::uint64_t>();
            else if (k == "digest") row.digest = v.get<std::string>();
            else if (k == "pass") row.pass = v.get<bool>();
            else if (v.is_number()) row.value(k, v.get<double>());
            else if (v.is_string()) {
                auto s = v.get<std::string>();
                if (s == "inf" || s == "-inf" || s == "nan") row.value(k, std::stod(s));
                else row.label(k, s);
            }
        }
        r.rows.push_back(std::move(row));
    }
    return r;
}

Report Report::read_csv(std::istream& is) {
    Report r;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0 || line.find(kSchema) == std::string::npos)
        throw ConfigError("not a " + std::string(kSchema) + " report");
    auto pos = line.find("suite=");
    if (pos != std::string::npos) r.suite = line.substr(pos + 6);
    if (!std::getline(is, line)) return r;
    auto cols = split(line, ',');
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split(line, ',');
        Row row;
        for (std::size_t i = 0; i < cols.size() && i < f.size(); ++i) {
            const auto& c = cols[i];
            if (c == "experiment") row.experiment = f[i];
            else if (c == "seed") row.seed = std::stoull(f[i]);
            else if (c == "digest") row.digest = f[i];
            else if (c == "pass") row.pass = f[i] == "1";
            else if (f[i].empty()) continue;
            else {
                char* end = nullptr;
                double v = std::strtod(f[i].c_str(), &end);
                if (end && *end == '\0') row.value(c, v);
                else row.label(c, f[i]);
            }
        }
        r.rows.push_back(std::move(row));
    }
    return r;
}

Report Report::read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open report '" + path + "'");
    int c = in.peek();
    try {
        return c == '{' ? read_json(in) : read_csv(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report parse error: ") + e.what());
    }
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- goldens ----

ojson Golden::to_json() const {
    ojson j;
    j["schema"] = "dyad-golden/1";
    j["suite"] = suite;
    j["safety"] = safety;
    j["band"] = band;
    j["floor"] = floor;
    j["seeds"] = seeds;
    j["cells"] = ojson::object();
    for (const auto& [k, c] : cells) j["cells"][k] = {{"min", c.min}, {"max", c.max}, {"rows", c.rows}};
    return j;
}

Golden Golden::from_json(const json& j) {
    if (j.value("schema", "") != "dyad-golden/1") throw ConfigError("not a dyad-golden/1 file");
    Golden g;
    g.suite = j.at("suite").get<std::string>();
    g.safety = j.at("safety").get<double>();
    g.band = j.at("band").get<bool>();
    g.floor = j.at("floor").get<double>();
    g.seeds = j.value("seeds", "");
    for (const auto& [k, c] : j.at("cells").items())
        g.cells[k] = {c.at("min").get<double>(), c.at("max").get<double>(), c.at("rows").get<std::size_t>()};
    return g;
}

Golden Golden::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open golden file '" + path + "'");
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("golden parse error: ") + e.what());
    }
}

void Golden::write(const std::string& path) const {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write '" + path + "'");
    os << to_json().dump(1) << "\n";
}

Golden calibrate_golden(const Report& r, double safety, bool band, double floor, const std::string& seeds) {
    Golden g;
    g.suite = r.suite;
    g.safety = safety;
    g.band = band;
    g.floor = floor;
    g.seeds = seeds;
    for (const auto& row : r.rows) {
        auto key = row.find_label("golden_key");
        auto stat = row.find_value("stat");
        if (!key || !stat) continue;
        auto it = g.cells.find(*key);
        if (it == g.cells.end()) {
            g.cells[*key] = {*stat, *stat, 1};
        } else {
            it->second.min = std::min(it->second.min, *stat);
            it->second.max = std::max(it->second.max, *stat);
            ++it->second.rows;
        }
    }
    return g;
}

void apply_golden(Report& r, const Golden& g) {
    for (auto& row : r.rows) {
        auto key = row.find_label("golden_key");
        auto stat = row.find_value("stat");
        if (!key || !stat) continue;
        auto it = g.cells.find(*key);
        if (it == g.cells.end()) {
            row.label("golden", "missing");
            row.pass = false;
            continue;
        }
        double hi = std::max(it->second.max * g.safety, g.floor);
        double lo = g.band ? it->second.min / g.safety : -kInf;
        bool ok = *stat <= g.floor || (*stat <= hi && *stat >= lo);
        row.label("golden", ok ? "within" : "outside");
        row.value("golden_lo", lo).value("golden_hi", hi);
        row.pass = row.pass && ok;
    }
}

std::pair<bool, double> golden_policy(const std::string& suite) {
    if (suite == "lower-bound") return {true, 0.0};
    // extracted paraproduct constants of paraproduct-free kernels sit at roundoff
    if (suite == "representation") return {false, 1e-12};
    return {false, 0.0};
}

Report run_suite(const ExperimentConfig& cfg) {
    cfg.validate();
    Report r;
    r.suite = cfg.suite;
    r.config = cfg.to_json();
    if (cfg.suite == "identity") r.rows = suites::identity(cfg);
    else if (cfg.suite == "representation") r.rows = suites::representation(cfg);
    else if (cfg.suite == "weighted-sweep") r.rows = suites::weighted(cfg);
    else if (cfg.suite == "commutator") r.rows = suites::commutator(cfg);
    else if (cfg.suite == "lower-bound") r.rows = suites::lower_bound(cfg);
    else if (cfg.suite == "mixed-norm") r.rows = suites::mixed_norm(cfg);
    if (!cfg.golden.empty()) apply_golden(r, Golden::read(cfg.golden));
    return r;
}

void emit_plotdata(const Report& r, const std::string& x_key, const std::string& y_key, std::ostream& os) {
    auto cols = r.columns();
    if (!r.rows.empty())
        for (const auto& k : {x_key, y_key})
            if (std::find(cols.begin(), cols.end(), k) == cols.end()) throw ConfigError("unknown key '" + k + "'");
    os << "suite,experiment,seed,series,x_key,x,y_key,y\n";
    auto get = [](const Row& row, const std::string& k) -> std::optional<std::string> {
        if (k == "experiment") return row.experiment;
        if (k == "seed") return std::to_string(row.seed);
        if (k == "pass") return std::string(row.pass ? "1" : "0");
        if (auto v = row.find_value(k)) return num(*v);
        return row.find_label(k);
    };
    for (const auto& row : r.rows) {
        auto x = get(row, x_key), y = get(row, y_key);
        if (!x || !y) continue;
        std::string series;
        for (const auto& [k, v] : row.labels) {
            if (k == x_key || k == y_key || k == "golden_key" || k == "golden") continue;
            series += (series.empty() ? "" : ";") + k + "=" + v;
        }
        os << r.suite << "," << row.experiment << "," << row.seed << "," << series << "," << x_key << "," << *x
           << "," << y_key << "," << *y << "\n";
    }
}

}  // namespace dyad
