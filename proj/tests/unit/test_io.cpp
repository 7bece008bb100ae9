#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

#include "nrc/error.hpp"
#include "nrc/io.hpp"

namespace fs = std::filesystem;
using namespace nrc;

namespace {
fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "nrc_test_io";
    fs::create_directories(dir);
    return dir / name;
}
ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::Io;
}
}  // namespace

TEST_CASE("jsonl round trip") {
    const auto path = scratch("rows.jsonl").string();
    std::vector<io::json> rows = {{{"a", 1}}, {{"b", "x"}}, {{"c", {1.5, 2.5}}}};
    io::write_jsonl(path, rows);
    CHECK(io::read_jsonl(path) == rows);
}

TEST_CASE("missing input and schema mismatch have distinct kinds") {
    CHECK(kind_of([] { io::read_jsonl("/nonexistent/file.jsonl"); }) == ErrorKind::MissingInput);
    CHECK(kind_of([] { io::require_schema(io::json{{"schema", "x.v2"}}, "x.v1"); }) ==
          ErrorKind::SchemaMismatch);
    CHECK_NOTHROW(io::require_schema(io::json{{"schema", "x.v1"}}, "x.v1"));
}

TEST_CASE("matrix round trip is exact") {
    Eigen::MatrixXd m(2, 3);
    m << 1.0 / 3.0, -2e-300, 7.0, 0.1, 1e300, -0.0;
    CHECK(io::matrix_from_json(io::matrix_to_json(m)) == m);
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, 12345.678901234567, -1e-17, 5e-324}) {
        CHECK(std::strtod(io::format_double(v).c_str(), nullptr) == v);
    }
    CHECK(io::format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("csv round trip and column lookup") {
    const auto path = scratch("t.csv").string();
    io::CsvTable t;
    t.header = {"id", "v"};
    t.rows = {{"a", "1"}, {"b", "2.5"}};
    io::write_csv(path, t);
    const auto back = io::read_csv(path);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("v") == 1);
    CHECK(kind_of([&] { back.column("missing"); }) == ErrorKind::SchemaMismatch);
}

TEST_CASE("fnv1a is stable") {
    CHECK(io::fnv1a("") == 14695981039346656037ULL);
    CHECK(io::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
