#include "hakan/data.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hakan {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

bool parse_fields(const std::string& s, std::size_t& pos, int& out, std::size_t digits) {
  if (pos + digits > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < digits; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  pos += digits;
  return true;
}

std::string describe_interval(double minutes) {
  auto whole = [](double v) { return std::fabs(v - std::round(v)) < 1e-9; };
  if (minutes >= 7 * 24 * 60 && whole(minutes / (7 * 24 * 60))) {
    const auto w = static_cast<long long>(std::llround(minutes / (7 * 24 * 60)));
    return std::to_string(w) + (w == 1 ? " week" : " weeks");
  }
  if (minutes >= 24 * 60 && whole(minutes / (24 * 60))) {
    const auto d = static_cast<long long>(std::llround(minutes / (24 * 60)));
    return std::to_string(d) + (d == 1 ? " day" : " days");
  }
  if (minutes >= 60 && whole(minutes / 60)) {
    const auto h = static_cast<long long>(std::llround(minutes / 60));
    return std::to_string(h) + (h == 1 ? " hour" : " hours");
  }
  std::ostringstream os;
  os << minutes << " min";
  return os.str();
}

}  // namespace

std::optional<double> parse_timestamp_minutes(const std::string& text) {
  const std::string s = trim(text);
  std::size_t pos = 0;
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_fields(s, pos, year, 4)) return std::nullopt;
  if (pos >= s.size() || (s[pos] != '-' && s[pos] != '/')) return std::nullopt;
  const char sep = s[pos++];
  if (!parse_fields(s, pos, month, 2)) return std::nullopt;
  if (pos >= s.size() || s[pos++] != sep) return std::nullopt;
  if (!parse_fields(s, pos, day, 2)) return std::nullopt;
  if (pos < s.size()) {
    if (s[pos] != ' ' && s[pos] != 'T') return std::nullopt;
    ++pos;
    if (!parse_fields(s, pos, hour, 2)) return std::nullopt;
    if (pos >= s.size() || s[pos++] != ':') return std::nullopt;
    if (!parse_fields(s, pos, minute, 2)) return std::nullopt;
    if (pos < s.size()) {
      if (s[pos++] != ':') return std::nullopt;
      if (!parse_fields(s, pos, second, 2)) return std::nullopt;
    }
    if (pos != s.size()) return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  const auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<double>(days) * 1440.0 + hour * 60.0 + minute + second / 60.0;
}

RawDataset load_csv(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw LoadError(LoadErrorKind::missing_file, "cannot open dataset file '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw LoadError(LoadErrorKind::empty_file, "dataset file '" + path + "' has no header row");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_csv_line(line);
  if (header.size() < 2) {
    throw LoadError(LoadErrorKind::too_few_columns,
                    "dataset file '" + path + "' needs a timestamp column and at least one feature");
  }

  RawDataset ds;
  ds.name = name;
  if (ds.name.empty()) {
    const auto slash = path.find_last_of('/');
    ds.name = path.substr(slash == std::string::npos ? 0 : slash + 1);
    const auto dot = ds.name.rfind('.');
    if (dot != std::string::npos) ds.name.erase(dot);
  }
  ds.columns.assign(header.begin() + 1, header.end());
  const std::size_t m = ds.columns.size();

  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw LoadError(LoadErrorKind::ragged_row, path + ":" + std::to_string(line_no) + ": expected " +
                                                     std::to_string(header.size()) + " cells, got " +
                                                     std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty()) {
        throw LoadError(LoadErrorKind::missing_cell,
                        path + ":" + std::to_string(line_no) + ": missing value in column '" + header[c] + "'");
      }
    }
    ds.timestamps.push_back(cells[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto v = parse_number(cells[c]);
      if (!v) {
        throw LoadError(LoadErrorKind::non_numeric, path + ":" + std::to_string(line_no) + ": '" + cells[c] +
                                                        "' in column '" + header[c] + "' is not a number");
      }
      values.push_back(*v);
    }
  }
  if (ds.timestamps.empty()) throw LoadError(LoadErrorKind::empty_file, "dataset file '" + path + "' has no rows");

  // Strictly increasing timestamps: compare as dates, then as numbers, then
  // as text.
  std::vector<double> stamps;
  bool numeric = true;
  for (const auto& t : ds.timestamps) {
    auto v = parse_timestamp_minutes(t);
    if (!v) {
      numeric = false;
      break;
    }
    stamps.push_back(*v);
  }
  const bool dated = numeric;
  if (!numeric) {
    stamps.clear();
    numeric = true;
    for (const auto& t : ds.timestamps) {
      auto v = parse_number(t);
      if (!v) {
        numeric = false;
        break;
      }
      stamps.push_back(*v);
    }
  }
  for (std::size_t i = 1; i < ds.timestamps.size(); ++i) {
    const bool increasing = numeric ? stamps[i] > stamps[i - 1] : ds.timestamps[i] > ds.timestamps[i - 1];
    if (!increasing) {
      throw LoadError(LoadErrorKind::non_monotone, path + ": timestamp '" + ds.timestamps[i] + "' (row " +
                                                       std::to_string(i + 1) + ") does not follow '" +
                                                       ds.timestamps[i - 1] + "'");
    }
  }
  if (dated && stamps.size() >= 2) {
    ds.interval_minutes = stamps[1] - stamps[0];
    ds.frequency = describe_interval(*ds.interval_minutes);
  }

  const auto rows = static_cast<Eigen::Index>(ds.timestamps.size());
  ds.values = Eigen::Map<RowMatrix>(values.data(), rows, static_cast<Eigen::Index>(m));
  return ds;
}

std::string to_string(SplitKind kind) { return kind == SplitKind::ett_months ? "ett_months" : "ratio"; }

SplitKind parse_split_kind(const std::string& text) {
  if (text == "ett_months") return SplitKind::ett_months;
  if (text == "ratio") return SplitKind::ratio;
  throw ConfigError("unknown split kind '" + text + "' (expected ett_months or ratio)");
}

std::size_t infer_rows_per_month(const RawDataset& ds) {
  if (!ds.interval_minutes || *ds.interval_minutes <= 0) {
    throw ConfigError("cannot infer rows per month for '" + ds.name + "': set split.rows_per_month");
  }
  const double rows = 30.0 * 24.0 * 60.0 / *ds.interval_minutes;
  if (std::fabs(rows - std::round(rows)) > 1e-9) {
    throw ConfigError("sampling interval of '" + ds.name + "' does not divide 30 days evenly");
  }
  return static_cast<std::size_t>(std::llround(rows));
}

SplitRanges split(const RawDataset& ds, const SplitSpec& spec, std::size_t lookback, std::size_t horizon) {
  const std::size_t total = ds.rows();
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t test_end = 0;
  if (spec.kind == SplitKind::ett_months) {
    const std::size_t per_month = spec.rows_per_month ? spec.rows_per_month : infer_rows_per_month(ds);
    train_end = spec.train_months * per_month;
    val_end = train_end + spec.val_months * per_month;
    test_end = val_end + spec.test_months * per_month;
    if (test_end > total) {
      throw ConfigError("dataset '" + ds.name + "' has " + std::to_string(total) + " rows; the month split needs " +
                        std::to_string(test_end));
    }
  } else {
    if (spec.train_ratio <= 0 || spec.val_ratio <= 0 || spec.test_ratio <= 0 ||
        spec.train_ratio + spec.val_ratio + spec.test_ratio > 1.0 + 1e-9) {
      throw ConfigError("split ratios must be positive and sum to at most 1");
    }
    const double n = static_cast<double>(total);
    train_end = static_cast<std::size_t>(std::floor(n * spec.train_ratio + 1e-9));
    val_end = train_end + static_cast<std::size_t>(std::floor(n * spec.val_ratio + 1e-9));
    test_end = total;
  }

  SplitRanges out;
  out.train_end = train_end;
  out.val_end = val_end;
  out.test_end = test_end;
  out.train = {0, train_end};
  const std::size_t context = spec.prepend_context ? lookback : 0;
  out.val = {train_end >= context ? train_end - context : 0, val_end};
  out.test = {val_end >= context ? val_end - context : 0, test_end};

  const std::size_t need = lookback + horizon;
  auto check = [&](const IndexRange& r, const char* which) {
    if (r.size() < need) {
      throw ConfigError(std::string(which) + " segment of '" + ds.name + "' has " + std::to_string(r.size()) +
                        " rows, fewer than lookback + horizon = " + std::to_string(need));
    }
  };
  check(out.train, "train");
  check(out.val, "validation");
  check(out.test, "test");
  return out;
}

RowMatrix Standardizer::apply(const RowMatrix& values) const {
  return ((values.rowwise() - mean).array().rowwise() / std.array()).matrix();
}

RowMatrix Standardizer::invert(const RowMatrix& values) const {
  return ((values.array().rowwise() * std.array()).matrix().rowwise() + mean);
}

Standardizer fit_standardizer(const RowMatrix& values, IndexRange train) {
  if (train.size() == 0 || train.end > static_cast<std::size_t>(values.rows())) {
    throw ConfigError("standardize: empty or out-of-range training segment");
  }
  const auto rows = values.middleRows(static_cast<Eigen::Index>(train.begin), static_cast<Eigen::Index>(train.size()));
  Standardizer s;
  s.mean = rows.colwise().mean();
  s.std = ((rows.rowwise() - s.mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index c = 0; c < s.std.size(); ++c) {
    if (s.std(c) < 1e-12) {
      s.std(c) = 1.0;
      s.warnings.push_back("column " + std::to_string(c) + " is constant over the training rows");
    }
  }
  return s;
}

std::pair<RowMatrix, Standardizer> standardize(const RawDataset& ds, IndexRange train) {
  Standardizer s = fit_standardizer(ds.values, train);
  for (const auto& w : s.warnings) std::cerr << "warning: " << ds.name << ": " << w << '\n';
  RowMatrix z = s.apply(ds.values);
  return {std::move(z), std::move(s)};
}

std::vector<std::size_t> window_origins(IndexRange segment, std::size_t lookback, std::size_t horizon,
                                        std::size_t stride, std::vector<std::string>* warnings) {
  std::vector<std::size_t> out;
  if (stride == 0) throw ConfigError("window stride must be positive");
  if (segment.size() < lookback + horizon) {
    if (warnings) {
      warnings->push_back("segment of " + std::to_string(segment.size()) + " rows is shorter than " +
                          std::to_string(lookback + horizon) + "; no windows");
    }
    return out;
  }
  for (std::size_t o = segment.begin; o + lookback + horizon <= segment.end; o += stride) out.push_back(o);
  return out;
}

WindowSample make_window(const RowMatrix& values, std::size_t origin, std::size_t lookback, std::size_t horizon) {
  if (origin + lookback + horizon > static_cast<std::size_t>(values.rows())) {
    throw DimensionError("window at " + std::to_string(origin) + " runs past the data");
  }
  WindowSample w;
  w.origin = origin;
  w.input = values.middleRows(static_cast<Eigen::Index>(origin), static_cast<Eigen::Index>(lookback));
  w.target = values.middleRows(static_cast<Eigen::Index>(origin + lookback), static_cast<Eigen::Index>(horizon));
  return w;
}

WindowRange::WindowRange(const RowMatrix& values, IndexRange segment, std::size_t lookback, std::size_t horizon,
                         std::size_t stride)
    : values_(&values), lookback_(lookback), horizon_(horizon) {
  if (segment.end > static_cast<std::size_t>(values.rows())) throw DimensionError("segment runs past the data");
  origins_ = window_origins(segment, lookback, horizon, stride, &warnings_);
}

WindowSample WindowRange::iterator::operator*() const {
  return make_window(*owner_->values_, owner_->origins_[index_], owner_->lookback_, owner_->horizon_);
}

WindowRange windows(const RowMatrix& values, IndexRange segment, std::size_t lookback, std::size_t horizon,
                    std::size_t stride) {
  WindowRange range(values, segment, lookback, horizon, stride);
  for (const auto& w : range.warnings()) std::cerr << "warning: " << w << '\n';
  return range;
}

}  // namespace hakan
