#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dyad/grid.hpp"
#include "dyad/harness.hpp"
#include "dyad/lower_bounds.hpp"

using namespace dyad;

namespace {

std::string csv_of(const Report& r) {
    std::ostringstream os;
    r.write_csv(os);
    return os.str();
}

}  // namespace

TEST(Harness, EmptySuiteIsAnEmptySuccess) {
    ExperimentConfig c;
    Report r = run_suite(c);
    EXPECT_TRUE(r.rows.empty());
    EXPECT_TRUE(r.pass());
    std::ostringstream os;
    emit_plotdata(r, "seed", "stat", os);
    EXPECT_EQ(os.str(), "suite,experiment,seed,series,x_key,x,y_key,y\n");
}

TEST(Harness, IdenticalSeedsGiveIdenticalBytes) {
    auto c = default_config("identity");
    c.grid_level = 3;
    c.seed = 7;
    c.samples = 3;
    std::string a = csv_of(run_suite(c)), b = csv_of(run_suite(c));
    EXPECT_EQ(a, b);
    c.seed = 8;
    EXPECT_NE(a, csv_of(run_suite(c)));
}

TEST(Harness, ConfigErrors) {
    auto c = default_config("commutator");
    c.exponents = {{2, 2, 2}};
    EXPECT_THROW(c.validate(), ConfigError);
    c.exponents = {{4, kInf, 4}};
    EXPECT_NO_THROW(c.validate());

    auto l = default_config("lower-bound");
    l.kernels = {"no-such-kernel"};
    EXPECT_THROW(run_suite(l), UnknownKernel);

    auto rep = default_config("representation");
    rep.kernels = {"no-such-kernel"};
    EXPECT_THROW(rep.validate(), UnknownKernel);

    auto big = default_config("identity");
    big.grid_level = 12;
    EXPECT_THROW(big.validate(), ResolutionError);

    EXPECT_THROW(default_config("nope"), ConfigError);
    auto w = default_config("weighted-sweep");
    w.weights = {"power:x"};
    EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Harness, ConfigJsonRoundTripAndUnknownKeys) {
    auto c = default_config("weighted-sweep");
    c.seed = 12;
    c.samples = 4;
    auto d = ExperimentConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
    EXPECT_EQ(d.to_json().dump(), c.to_json().dump());

    auto j = nlohmann::json::parse(R"({"suite": "mixed-norm", "samples": 3, "linear_exponents": ["2/3", "inf", 2]})");
    auto m = ExperimentConfig::from_json(j);
    EXPECT_EQ(m.samples, 3);
    ASSERT_EQ(m.linear_exponents.size(), 3u);
    EXPECT_DOUBLE_EQ(m.linear_exponents[0], 2.0 / 3.0);
    EXPECT_EQ(m.linear_exponents[1], kInf);
    EXPECT_FALSE(m.mixed.empty());  // unspecified keys keep the suite defaults

    EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"suite": "identity", "sampels": 3})")),
                 ConfigError);
}

TEST(Harness, ReportRoundTripsThroughCsvAndJson) {
    auto c = default_config("mixed-norm");
    c.samples = 4;
    Report r = run_suite(c);
    ASSERT_FALSE(r.rows.empty());

    std::stringstream js;
    r.write_json(js);
    Report a = Report::read_json(js);
    std::stringstream cs;
    r.write_csv(cs);
    Report b = Report::read_csv(cs);
    for (const Report* x : {&a, &b}) {
        EXPECT_EQ(x->suite, r.suite);
        ASSERT_EQ(x->rows.size(), r.rows.size());
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
            EXPECT_EQ(x->rows[i].experiment, r.rows[i].experiment);
            EXPECT_EQ(x->rows[i].digest, r.rows[i].digest);
            EXPECT_EQ(x->rows[i].pass, r.rows[i].pass);
            for (const auto& [k, v] : r.rows[i].values) {
                auto got = x->rows[i].find_value(k);
                ASSERT_TRUE(got.has_value()) << k;
                if (std::isnan(v)) EXPECT_TRUE(std::isnan(*got));
                else EXPECT_EQ(*got, v) << k;
            }
        }
    }
    // csv carries no column types, so numeric labels come back as values; json keeps them
    EXPECT_EQ(csv_of(a), csv_of(r));
}

TEST(Harness, PlotDataIsLong) {
    auto c = default_config("mixed-norm");
    c.samples = 2;
    c.parts = {"sweep"};
    Report r = run_suite(c);
    std::ostringstream os;
    emit_plotdata(r, "r_outer", "stat", os);
    std::istringstream is(os.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) ++n;
    EXPECT_EQ(n, r.rows.size() + 1);
    std::ostringstream sink;
    EXPECT_THROW(emit_plotdata(r, "r_outer", "no_such_column", sink), ConfigError);
}

TEST(Harness, GoldenCalibrationAndComparison) {
    Report r;
    r.suite = "toy";
    for (double s : {1.0, 2.0, 4.0}) {
        Row row;
        row.experiment = "toy";
        row.label("golden_key", "a").value("stat", s);
        r.rows.push_back(row);
    }
    Golden g = calibrate_golden(r, 5.0, true, 0.0, "0..2");
    ASSERT_EQ(g.cells.count("a"), 1u);
    EXPECT_EQ(g.cells["a"].min, 1.0);
    EXPECT_EQ(g.cells["a"].max, 4.0);
    EXPECT_EQ(g.cells["a"].rows, 3u);

    std::string path = testing::TempDir() + "toy_golden.json";
    g.write(path);
    Golden h = Golden::read(path);
    std::remove(path.c_str());
    EXPECT_EQ(h.to_json().dump(), g.to_json().dump());

    Report t;
    for (auto [key, s] : std::vector<std::pair<std::string, double>>{{"a", 19.9}, {"a", 20.1}, {"a", 0.19}, {"b", 1.0}}) {
        Row row;
        row.label("golden_key", key).value("stat", s);
        t.rows.push_back(row);
    }
    apply_golden(t, h);
    EXPECT_TRUE(t.rows[0].pass);
    EXPECT_FALSE(t.rows[1].pass);   // above 4 * 5
    EXPECT_FALSE(t.rows[2].pass);   // below 1 / 5 with band
    EXPECT_FALSE(t.rows[3].pass);   // no golden cell
    EXPECT_EQ(t.rows[3].find_label("golden"), std::optional<std::string>("missing"));
}

TEST(Harness, ShippedGoldensParse) {
    for (const auto& s : {"weighted-sweep", "mixed-norm", "commutator", "representation", "lower-bound"}) {
        Golden g = Golden::read(std::string(DYAD_GOLDEN_DIR) + "/" + s + ".json");
        EXPECT_EQ(g.suite, s);
        EXPECT_FALSE(g.cells.empty());
        EXPECT_EQ(g.safety, 5.0);
    }
}
