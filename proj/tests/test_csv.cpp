#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"
#include "hpoerm/random.hpp"

using namespace hpoerm;

TEST_CASE("format_double round-trips") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform01() - 0.5, static_cast<int>(rng.below(80)) - 40);
    std::istringstream in("x\n" + format_double(v) + "\n");
    const CsvTable t = read_csv(in);
    REQUIRE(t.number(0, "x") == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("comments and blank lines are skipped") {
  std::istringstream in("# schema=v1\n\na,b\n# note\n1,x\n2,y\r\n");
  const CsvTable t = read_csv(in);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.row_lines == std::vector<std::size_t>{5, 6});
  CHECK(t.number(1, "a") == 2.0);
  CHECK(t.text(1, "b") == "y");
}

TEST_CASE("special values parse") {
  std::istringstream in("v\nnan\ninf\n-inf\n\n");
  const CsvTable t = read_csv(in);
  REQUIRE(t.rows.size() == 3);
  CHECK(std::isnan(t.number(0, "v")));
  CHECK(t.number(1, "v") == std::numeric_limits<double>::infinity());
  CHECK(t.number(2, "v") == -std::numeric_limits<double>::infinity());
}

TEST_CASE("ragged rows report their line") {
  std::istringstream in("# schema=v1\na,b\n1,2\n3\n");
  try {
    read_csv(in);
    FAIL("no exception");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("bad numbers and missing columns") {
  std::istringstream in("a\n1x\n");
  const CsvTable t = read_csv(in);
  CHECK_THROWS_AS(t.number(0, "a"), ParseError);
  CHECK_THROWS_AS(t.column("b"), ParseError);
  CHECK_FALSE(t.has_column("b"));
}

TEST_CASE("write_csv_row joins fields") {
  std::ostringstream out;
  write_csv_row(out, {"a", "", "c"});
  CHECK(out.str() == "a,,c\n");
}
