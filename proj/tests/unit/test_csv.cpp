#include <doctest.h>

#include <cmath>

#include "dgnaea/csv.hpp"

using namespace dgnaea;

TEST_CASE("quoted fields, escapes, BOM and blank lines") {
    const auto t = csv::parse("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\n\n3,4\n");
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "x,1");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(t.line_numbers[1] == 4);
    CHECK(t.column("b") == 1);
    CHECK_THROWS(t.column("c"));
}

TEST_CASE("unterminated quote is an error") {
    CHECK_THROWS_AS(csv::parse("a\n\"open\n"), std::invalid_argument);
}

TEST_CASE("header and row width are enforced") {
    const auto t = csv::parse("a,b\n1,2\n3\n");
    CHECK_THROWS(csv::require_header(t, {"a", "c"}, "t"));
    CHECK_THROWS(csv::require_header(t, {"a", "b"}, "t"));
}

TEST_CASE("doubles round-trip through the shortest text form") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678, 0.0})
        CHECK(csv::parse_double(csv::format_double(v), "v") == v);
    CHECK_THROWS(csv::parse_double("1.5x", "v"));
    CHECK_THROWS(csv::parse_double("", "v"));
    CHECK(csv::parse_int(" 42 ", "v") == 42);
    CHECK_THROWS(csv::parse_int("4.2", "v"));
    CHECK(csv::quote("plain") == "plain");
    CHECK(csv::quote("a,b") == "\"a,b\"");
}

TEST_CASE("missing files are reported") {
    CHECK_THROWS_AS(csv::read("/nonexistent/file.csv"), std::invalid_argument);
}
