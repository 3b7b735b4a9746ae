#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "bfrog/csv.hpp"
#include "bfrog/parallel.hpp"

using namespace bfrog;
namespace fs = std::filesystem;

TEST(Csv, FormatDoubleRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5}) EXPECT_EQ(std::stod(format_double(v)), v);
    EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Csv, WriteAndReadBack) {
    CsvTable t({"a", "b", "c"});
    t.row() << 1 << 2.5 << "x";
    t.row() << std::uint64_t{7} << -0.125 << true;
    EXPECT_EQ(t.rows(), 2u);
    const auto dir = fs::temp_directory_path() / "bfrog_csv_test";
    fs::create_directories(dir);
    write_file_atomic(dir / "t.csv", t.str());
    const auto d = read_csv(dir / "t.csv");
    ASSERT_EQ(d.header, (std::vector<std::string>{"a", "b", "c"}));
    ASSERT_EQ(d.rows.size(), 2u);
    EXPECT_EQ(d.rows[1][2], "true");
    EXPECT_EQ(d.column("b"), 1);
    EXPECT_EQ(d.column("zz"), -1);
    fs::remove_all(dir);
}

TEST(Parallel, ResultsIndependentOfWorkers) {
    std::vector<std::uint64_t> a(1000), b(1000);
    parallel_for(1000, 1, [&](std::uint64_t i) { a[i] = i * i; });
    parallel_for(1000, 4, [&](std::uint64_t i) { b[i] = i * i; });
    EXPECT_EQ(a, b);
}

TEST(Parallel, PropagatesExceptions) {
    EXPECT_THROW(parallel_for(100, 3,
                              [](std::uint64_t i) {
                                  if (i == 50) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}
