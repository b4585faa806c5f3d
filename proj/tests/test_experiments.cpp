#include <doctest.h>

#include "shadowlab/experiments.hpp"
#include "shadowlab/parallel.hpp"

#include <filesystem>
#include <sstream>

using namespace shadow;

namespace {

ExperimentConfig tiny(const std::string& name)
{
    ExperimentConfig c;
    c.name = name;
    c.h = 0.5;
    c.n_samples = 16;
    c.width = 2;
    c.height = 2;
    c.lambdas = {1, 2};
    c.levels = {0.6, 1e9};
    c.distances = {8, 16};
    c.radii = {2, 4};
    c.origin_samples = 300;
    c.field_draws = 8;
    c.level_count = 4;
    c.kac_rice_box = 2;
    c.kac_rice_h = 0.25;
    return c;
}

std::string csv(const Table& t)
{
    std::ostringstream out;
    write_csv(out, t);
    return out.str();
}

int column(const Table& t, const std::string& name)
{
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        if (t.columns[i] == name)
            return static_cast<int>(i);
    return -1;
}

} // namespace

TEST_SUITE("experiments")
{
    TEST_CASE("config JSON round trip and errors")
    {
        auto c = tiny("chemical-scaling");
        c.kernel = Kernel::bump(2.0);
        c.level_offsets = {1, 3};
        c.slope.margin = 12;
        const auto back = experiment_from_json(to_json(c));
        CHECK(to_json(back) == to_json(c));
        CHECK(back.kernel == c.kernel);
        CHECK(back.slope.margin == 12);

        CHECK_THROWS_AS(experiment_from_json(Json{{"experiment", "x"}, {"n_samples", "many"}}), ConfigError);
        CHECK_THROWS_AS(experiment_from_json(Json{{"experiment", "x"}, {"kernel", Json::object()}}), ConfigError);
        CHECK_THROWS_AS(run_experiment(tiny("no-such-experiment")), ConfigError);
        auto bad = tiny("crossing-decay");
        bad.n_samples = 0;
        CHECK_THROWS_AS(run_experiment(bad), ConfigError);
    }

    TEST_CASE("crossing decay rows, the infinite level and thread independence")
    {
        const auto c = tiny("crossing-decay");
        set_max_threads(1);
        const auto a = run_experiment(c);
        set_max_threads(3);
        const auto b = run_experiment(c);
        set_max_threads(0);
        CHECK(a.table.rows.size() == c.lambdas.size() * c.levels.size());
        CHECK(csv(a.table) == csv(b.table));
        CHECK(a.summary == b.summary);
        const int lv = column(a.table, "level"), p = column(a.table, "p");
        for (const auto& row : a.table.rows) {
            CHECK(row[p].get<double>() >= 0.0);
            CHECK(row[p].get<double>() <= 1.0);
            if (row[lv].get<double>() == 1e9)
                CHECK(row[p].get<double>() == 1.0);
        }
    }

    TEST_CASE("chemical distance is never shorter than the Euclidean one")
    {
        const auto r = run_experiment(tiny("chemical-scaling"));
        const auto& levels = r.summary.at("levels");
        REQUIRE(levels.size() == 2);
        // At an infinite level everything is open and the path is straight.
        const auto& open = levels[1];
        CHECK(open.at("min_ratio").get<double>() == doctest::Approx(1.0));
        CHECK(open.at("median_ratio").get<double>() == doctest::Approx(1.0));
        CHECK(levels[0].at("min_ratio").get<double>() >= 1.0 - 1e-12);
        CHECK(r.summary.at("median_non_increasing_in_level").get<bool>());
        const int conn = column(r.table, "p_connected"), lv = column(r.table, "level");
        for (const auto& row : r.table.rows)
            if (row[lv].get<double>() == 1e9)
                CHECK(row[conn].get<double>() == 1.0);
    }

    TEST_CASE("global structure success is monotone in the constant")
    {
        const auto r = run_experiment(tiny("global-structure"));
        CHECK(r.summary.at("success_monotonicity_violations").get<int>() == 0);
        CHECK(!r.table.rows.empty());
    }

    TEST_CASE("truncation study on coupled noise")
    {
        auto c = tiny("truncation");
        c.kernel = Kernel::power_tail(3.0);
        const auto r = run_experiment(c);
        REQUIRE(r.table.rows.size() == 2);
        const int sup = column(r.table, "mean_sup");
        // Doubling R shrinks the mean discrepancy on the same noise.
        CHECK(r.table.rows[1][sup].get<double>() < r.table.rows[0][sup].get<double>());
        auto unsorted = c;
        unsorted.radii = {4, 2};
        CHECK_THROWS_AS(run_experiment(unsorted), ConfigError);
    }

    TEST_CASE("Lipschitz probe is finite")
    {
        const auto r = run_experiment(tiny("lipschitz"));
        CHECK(r.summary.at("all_finite").get<bool>());
        CHECK(r.table.rows.size() == 16);
    }

    TEST_CASE("Kac-Rice sweep produces one row per level")
    {
        const auto r = run_experiment(tiny("kac-rice"));
        CHECK(r.table.rows.size() == 4);
        CHECK(r.summary.at("agree_fraction").get<double>() >= 0.0);
    }

    TEST_CASE("results on disk carry no wall clock")
    {
        const auto dir = std::filesystem::temp_directory_path() / "shadowlab-experiments-test";
        std::filesystem::remove_all(dir);
        const auto c = tiny("crossing-decay");
        const auto a = write_result(run_experiment(c), dir / "a", "csv");
        const auto b = write_result(run_experiment(c), dir / "b", "csv");
        REQUIRE(a.size() == 2);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(read_text(a[i]) == read_text(b[i]));
        const auto j = write_result(run_experiment(c), dir / "j", "json");
        CHECK(Json::parse(read_text(j[0])).size() == 4);
        CHECK_THROWS_AS(write_result(run_experiment(c), dir / "x", "xml"), ConfigError);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("one-sided proportion test")
    {
        CHECK(proportion_greater(50, 100, 10, 100));
        CHECK(!proportion_greater(10, 100, 50, 100));
        CHECK(!proportion_greater(20, 100, 20, 100));
        CHECK(!proportion_greater(0, 100, 0, 100));
        CHECK(!proportion_greater(3, 100, 1, 100));
    }
}
