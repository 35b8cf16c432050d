#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "hakan/data.hpp"

using namespace hakan;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("hakan_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

 private:
  fs::path path_;
};

LoadErrorKind load_error_kind(const std::string& path) {
  try {
    load_csv(path);
  } catch (const LoadError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no LoadError for " << path;
  return LoadErrorKind::missing_file;
}

RawDataset hourly(std::size_t rows, std::size_t cols) {
  RawDataset ds;
  ds.name = "synthetic";
  ds.values = RowMatrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  ds.interval_minutes = 60.0;
  return ds;
}

}  // namespace

TEST(LoadCsv, ToyFile) {
  TempDir dir;
  const auto path = dir.write("toy.csv",
                              "date,a,b\n2020-01-01 00:00:00,1.5,2\n2020-01-01 01:00:00,-3,4e-1\n"
                              "2020-01-01 02:00:00,5,6\n");
  const RawDataset ds = load_csv(path);
  EXPECT_EQ(ds.name, "toy");
  EXPECT_EQ(ds.rows(), 3u);
  EXPECT_EQ(ds.channels(), 2u);
  EXPECT_EQ(ds.columns, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.values(1, 0), -3.0);
  EXPECT_EQ(ds.values(1, 1), 0.4);
  ASSERT_TRUE(ds.interval_minutes.has_value());
  EXPECT_EQ(*ds.interval_minutes, 60.0);
  EXPECT_EQ(ds.frequency, "1 hour");
  EXPECT_EQ(infer_rows_per_month(ds), 720u);
}

TEST(LoadCsv, OrderStableBytes) {
  TempDir dir;
  const auto path = dir.write("s.csv", "date,x\n1,0.1\n2,0.2\n3,0.30000000000000004\n");
  const RawDataset a = load_csv(path);
  const RawDataset b = load_csv(path);
  ASSERT_EQ(a.values.size(), b.values.size());
  EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), sizeof(double) * a.values.size()), 0);
}

TEST(LoadCsv, DistinctErrors) {
  TempDir dir;
  EXPECT_EQ(load_error_kind(dir.write("x", "") + ".missing"), LoadErrorKind::missing_file);
  EXPECT_EQ(load_error_kind(dir.write("empty.csv", "")), LoadErrorKind::empty_file);
  EXPECT_EQ(load_error_kind(dir.write("narrow.csv", "date\n2020-01-01\n")), LoadErrorKind::too_few_columns);
  EXPECT_EQ(load_error_kind(dir.write("ragged.csv", "date,a,b\n1,2,3\n2,4\n")), LoadErrorKind::ragged_row);
  EXPECT_EQ(load_error_kind(dir.write("hole.csv", "date,a,b\n1,2,\n")), LoadErrorKind::missing_cell);
  EXPECT_EQ(load_error_kind(dir.write("text.csv", "date,a\n1,abc\n")), LoadErrorKind::non_numeric);
  EXPECT_EQ(load_error_kind(dir.write("order.csv", "date,a\n2020-01-02,1\n2020-01-01,2\n")),
            LoadErrorKind::non_monotone);
  EXPECT_EQ(load_error_kind(dir.write("dup.csv", "date,a\n5,1\n5,2\n")), LoadErrorKind::non_monotone);
}

TEST(Timestamps, Parsing) {
  EXPECT_EQ(*parse_timestamp_minutes("1970-01-02"), 1440.0);
  EXPECT_EQ(*parse_timestamp_minutes("1970/01/01 01:30"), 90.0);
  EXPECT_EQ(*parse_timestamp_minutes("1970-01-01T00:15:00"), 15.0);
  EXPECT_FALSE(parse_timestamp_minutes("2020-13-01").has_value());
  EXPECT_FALSE(parse_timestamp_minutes("yesterday").has_value());
}

TEST(Split, EttHourlyMonths) {
  SplitSpec spec;
  spec.kind = SplitKind::ett_months;
  const SplitRanges r = split(hourly(17420, 7), spec, 96, 96);
  EXPECT_EQ(r.train_end, 8640u);
  EXPECT_EQ(r.val_end - r.train_end, 2880u);
  EXPECT_EQ(r.test_end - r.val_end, 2880u);
  EXPECT_EQ(r.train, (IndexRange{0, 8640}));
  EXPECT_EQ(r.val, (IndexRange{8640 - 96, 11520}));
  EXPECT_EQ(r.test, (IndexRange{11520 - 96, 14400}));

  RawDataset quarter = hourly(69680, 7);
  quarter.interval_minutes = 15.0;
  const SplitRanges q = split(quarter, spec, 96, 96);
  EXPECT_EQ(q.train_end, 12u * 30 * 24 * 4);
}

TEST(Split, RatioBoundaries) {
  SplitSpec spec;
  spec.prepend_context = false;
  const SplitRanges r = split(hourly(1000, 1), spec, 10, 5);
  EXPECT_EQ(r.train_end, 700u);
  EXPECT_EQ(r.val_end, 800u);
  EXPECT_EQ(r.test_end, 1000u);
  EXPECT_EQ(r.val, (IndexRange{700, 800}));
}

TEST(Split, IllnessRatio) {
  SplitSpec spec;
  const SplitRanges r = split(hourly(966, 7), spec, 104, 24);
  EXPECT_EQ(r.train_end, 676u);
  EXPECT_EQ(r.val_end - r.train_end, 96u);
  EXPECT_EQ(r.test_end - r.val_end, 194u);
}

TEST(Split, TooShortSegments) {
  SplitSpec spec;
  spec.prepend_context = false;
  EXPECT_THROW(split(hourly(100, 1), spec, 10, 5), ConfigError);
  SplitSpec months;
  months.kind = SplitKind::ett_months;
  EXPECT_THROW(split(hourly(1000, 1), months, 96, 96), ConfigError);
  RawDataset undated = hourly(20000, 1);
  undated.interval_minutes.reset();
  EXPECT_THROW(split(undated, months, 96, 96), ConfigError);
  months.rows_per_month = 720;
  EXPECT_NO_THROW(split(undated, months, 96, 96));
}

TEST(Split, NoTargetLeaksAcrossBoundaries) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = std::uniform_int_distribution<std::size_t>(300, 2000)(rng);
    const std::size_t L = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const std::size_t T = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const SplitRanges r = split(hourly(rows, 1), SplitSpec{}, L, T);
    for (auto o : window_origins(r.train, L, T)) EXPECT_LE(o + L + T, r.train_end);
    for (auto o : window_origins(r.val, L, T)) {
      EXPECT_GE(o + L, r.train_end);
      EXPECT_LE(o + L + T, r.val_end);
    }
    const auto test = window_origins(r.test, L, T);
    ASSERT_FALSE(test.empty());
    EXPECT_EQ(test.front() + L, r.val_end);
    EXPECT_EQ(test.back() + L + T, r.test_end);
  }
}

TEST(Standardize, ConstantColumnWarns) {
  RawDataset ds = hourly(6, 2);
  for (Eigen::Index t = 0; t < 6; ++t) {
    ds.values(t, 0) = 4.0;
    ds.values(t, 1) = static_cast<double>(t);
  }
  auto [z, s] = standardize(ds, {0, 4});
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("column 0"), std::string::npos);
  for (Eigen::Index t = 0; t < 6; ++t) EXPECT_EQ(z(t, 0), 0.0);
  EXPECT_NEAR(z.col(1).head(4).mean(), 0.0, 1e-15);
}

TEST(Standardize, IdentityAndRoundTrip) {
  RawDataset ds = hourly(4, 1);
  ds.values << -1, 1, -1, 1;
  auto [z, s] = standardize(ds, {0, 4});
  EXPECT_EQ(z, ds.values);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(5.0, 3.0);
  RowMatrix x(50, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  const Standardizer st = fit_standardizer(x, {0, 30});
  EXPECT_LT((st.invert(st.apply(x)) - x).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(fit_standardizer(x, {10, 10}), ConfigError);
}

TEST(Standardize, OnlyTrainRowsMatter) {
  RowMatrix x = RowMatrix::Random(40, 2);
  const Standardizer a = fit_standardizer(x, {0, 25});
  RowMatrix y = x;
  y.bottomRows(15).setConstant(1e6);
  const Standardizer b = fit_standardizer(y, {0, 25});
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std, b.std);
}

TEST(Windows, Counts) {
  EXPECT_EQ(window_origins({0, 10}, 4, 2).size(), 5u);
  EXPECT_EQ(window_origins({3, 9}, 4, 2).size(), 1u);
  EXPECT_EQ(window_origins({0, 8}, 3, 2), (std::vector<std::size_t>{0, 1, 2, 3}));
  std::vector<std::string> warnings;
  EXPECT_TRUE(window_origins({0, 5}, 4, 2, 1, &warnings).empty());
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(window_origins({0, 10}, 4, 2, 2), (std::vector<std::size_t>{0, 2, 4}));
}

TEST(Windows, CountFormulaRandomized) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    const std::size_t L = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
    const std::size_t T = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
    const std::size_t begin = std::uniform_int_distribution<std::size_t>(0, 50)(rng);
    const std::size_t expected = len >= L + T ? len - L - T + 1 : 0;
    EXPECT_EQ(window_origins({begin, begin + len}, L, T).size(), expected);
  }
}

TEST(Windows, SamplesAreAdjacentSlices) {
  RowMatrix values(12, 2);
  for (Eigen::Index t = 0; t < 12; ++t) {
    values(t, 0) = static_cast<double>(t);
    values(t, 1) = 100.0 + static_cast<double>(t);
  }
  WindowRange range(values, {2, 12}, 4, 3);
  EXPECT_EQ(range.size(), 4u);
  std::size_t seen = 0;
  for (const WindowSample& w : range) {
    EXPECT_EQ(w.origin, 2 + seen);
    EXPECT_EQ(w.input.rows(), 4);
    EXPECT_EQ(w.target.rows(), 3);
    EXPECT_EQ(w.input(3, 0) + 1, w.target(0, 0));
    EXPECT_EQ(w.target(0, 1), 100.0 + static_cast<double>(w.origin + 4));
    ++seen;
  }
  EXPECT_EQ(seen, 4u);
  EXPECT_THROW(make_window(values, 7, 4, 3), DimensionError);
}
