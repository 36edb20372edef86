#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "readmit/csv.hpp"

using namespace readmit;

TEST(Csv, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<double>(static_cast<int>(rng() % 40) - 20));
    const auto back = csv::parse_double(csv::format_double(v));
    ASSERT_TRUE(back.has_value());
    ASSERT_EQ(*back, v);
  }
  EXPECT_EQ(csv::format_double(0.1), "0.1");
  EXPECT_EQ(*csv::parse_double(csv::format_double(std::numeric_limits<double>::denorm_min())),
            std::numeric_limits<double>::denorm_min());
}

TEST(Csv, ParseDoubleIsStrict) {
  EXPECT_FALSE(csv::parse_double("").has_value());
  EXPECT_FALSE(csv::parse_double("1.5x").has_value());
  EXPECT_FALSE(csv::parse_double("abc").has_value());
  EXPECT_DOUBLE_EQ(*csv::parse_double("+2.5"), 2.5);
  EXPECT_DOUBLE_EQ(*csv::parse_double("-1e-3"), -1e-3);
}

TEST(Csv, SplitLineTrimsAndUnquotes) {
  const auto f = csv::split_line(" a , \"b\" ,,c");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0], "a");
  EXPECT_EQ(f[1], "b");
  EXPECT_EQ(f[2], "");
  EXPECT_EQ(f[3], "c");
}

TEST(Csv, TableRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "readmit_csv_roundtrip.csv";
  csv::Table t{{"x", "y"}, {{"1", "2.5"}, {"a", ""}}};
  csv::write_table(path, t);
  const auto back = csv::read_table(path);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  std::filesystem::remove(path);
}
