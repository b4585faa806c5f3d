#include <doctest.h>

#include "shadowlab/io.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

using namespace shadow;

namespace {

bool same_bits(const Grid& a, const Grid& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

FieldSample small_field(std::uint64_t seed = 3)
{
    const Kernel k = Kernel::gaussian();
    return FieldSynthesizer(k, make_grid(k, 20, 9, 0.5)).sample(seed);
}

std::string bytes_of(const Snapshot& s)
{
    std::ostringstream out;
    write_snapshot(out, s);
    return out.str();
}

Snapshot parse(const std::string& bytes)
{
    std::istringstream in(bytes);
    return read_snapshot(in);
}

} // namespace

TEST_SUITE("io")
{
    TEST_CASE("field snapshot round trip is bitwise")
    {
        const auto f = small_field();
        const auto back = field_from_snapshot(parse(bytes_of(to_snapshot(f))));
        CHECK(back.spec == f.spec);
        CHECK(back.kernel == f.kernel);
        CHECK(back.seed == f.seed);
        CHECK(!back.truncation);
        CHECK(same_bits(back.f, f.f));
        CHECK(same_bits(back.df1, f.df1));
        CHECK(same_bits(back.d2f22, f.d2f22));
        CHECK(bytes_of(to_snapshot(back)) == bytes_of(to_snapshot(f)));
    }

    TEST_CASE("slope and mask snapshots")
    {
        const auto f = small_field();
        const auto sf = slope_field(f, {.margin = 4});
        const auto back = slope_from_snapshot(parse(bytes_of(to_snapshot(sf, f.kernel, f.seed))));
        CHECK(back.margin == 4);
        CHECK(same_bits(back.alpha, sf.alpha));
        CHECK(same_bits(back.argmax_t, sf.argmax_t));

        const auto m = threshold(sf, 0.8);
        const auto s = parse(bytes_of(to_snapshot(m)));
        CHECK(s.header.at("kind") == "mask");
        for (int y = 0; y < m.spec.ny; ++y)
            for (int x = 0; x < m.spec.nx; ++x) {
                CHECK(s.array("open")(y, x) == (m.open(y, x) ? 1.0 : 0.0));
                CHECK(s.array("labels")(y, x) == m.labels(y, x));
            }
        CHECK_THROWS_AS(s.array("alpha"), FormatError);
    }

    TEST_CASE("malformed snapshots are format errors")
    {
        const std::string good = bytes_of(to_snapshot(small_field()));
        CHECK_THROWS_AS(parse(""), FormatError);
        CHECK_THROWS_AS(parse("not json\n"), FormatError);
        std::string wrong = good;
        wrong.replace(wrong.find("SHDW1"), 5, "SHDW9");
        CHECK_THROWS_AS(parse(wrong), FormatError);
        CHECK_THROWS_AS(parse(good.substr(0, good.size() - 8)), FormatError);
        CHECK_THROWS_AS(parse(good + "x"), FormatError);
        // A slope reader rejects a field snapshot.
        CHECK_THROWS_AS(slope_from_snapshot(parse(good)), FormatError);
    }

    TEST_CASE("kernel and grid JSON")
    {
        const Kernel k = Kernel::power_tail(2.8, 1.5, 2.0, 20.0);
        CHECK(kernel_from_json(to_json(k)) == k);
        const auto spec = make_grid(k, 10, 7, 0.3, Point(1.0, -2.0));
        CHECK(grid_from_json(to_json(spec)) == spec);

        auto message = [](const Json& j) {
            try {
                kernel_from_json(j);
            } catch (const ConfigError& e) {
                return std::string(e.what());
            }
            return std::string();
        };
        CHECK(message(Json::object()).find("kernel.family") != std::string::npos);
        CHECK(message(Json{{"family", 3}}).find("kernel.family") != std::string::npos);
        CHECK(message(Json{{"family", "gaussian"}, {"params", "x"}}).find("kernel.params") != std::string::npos);
        CHECK_THROWS_AS(kernel_from_json(Json{{"family", "cauchy"}}), ConfigError);
    }

    TEST_CASE("tables")
    {
        Table t;
        t.columns = {"a", "b", "c"};
        t.add({1, 0.1, "x"});
        t.add({std::numeric_limits<double>::infinity(), std::nan(""), nullptr});
        CHECK_THROWS_AS(t.add({1, 2}), ShapeError);
        std::ostringstream out;
        write_csv(out, t);
        CHECK(out.str() == "a,b,c\n1,0.1,x\ninf,nan,\n");
        const Json j = to_json(t);
        REQUIRE(j.size() == 2);
        CHECK(j[0].at("c") == "x");
        CHECK(format_cell(Json(-std::numeric_limits<double>::infinity())) == "-inf");
    }

    TEST_CASE("svg renderings")
    {
        const auto f = small_field();
        const std::string heat = svg_heatmap(f.f, f.spec.h, {{Point(0, 0), Point(1, 1)}});
        CHECK(heat.rfind("<svg", 0) == 0);
        CHECK(heat.find("<line") != std::string::npos);
        const auto m = threshold(slope_field(f, {.margin = 4}), 0.8);
        CHECK(svg_mask(m).rfind("<svg", 0) == 0);
    }
}
