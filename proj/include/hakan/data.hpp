#pragma once

#include <cstddef>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "hakan/error.hpp"
#include "hakan/tensor.hpp"

namespace hakan {

enum class LoadErrorKind { missing_file, empty_file, too_few_columns, ragged_row, missing_cell, non_numeric, non_monotone };

class LoadError : public DataError {
 public:
  LoadError(LoadErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  LoadErrorKind kind() const { return kind_; }

 private:
  LoadErrorKind kind_;
};

struct RawDataset {
  std::string name;
  std::vector<std::string> timestamps;
  std::vector<std::string> columns;  // feature names, without the date column
  RowMatrix values;                  // rows x M
  std::string frequency;             // e.g. "1 hour"; empty when not inferable
  std::optional<double> interval_minutes;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t channels() const { return static_cast<std::size_t>(values.cols()); }
};

// Header row, a leading timestamp column, then numeric feature columns.
RawDataset load_csv(const std::string& path, const std::string& name = "");

// Minutes since 1970-01-01 for "YYYY-MM-DD[ HH:MM[:SS]]" (also '/' or 'T'
// separators); nullopt when the text is not such a timestamp.
std::optional<double> parse_timestamp_minutes(const std::string& text);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool operator==(const IndexRange&) const = default;
};

enum class SplitKind { ett_months, ratio };

std::string to_string(SplitKind kind);
SplitKind parse_split_kind(const std::string& text);

struct SplitSpec {
  SplitKind kind = SplitKind::ratio;
  std::size_t train_months = 12;
  std::size_t val_months = 4;
  std::size_t test_months = 4;
  double train_ratio = 0.7;
  double val_ratio = 0.1;
  double test_ratio = 0.2;
  // Extend val/test segments on the left by L rows so the first target
  // directly follows the previous segment.
  bool prepend_context = true;
  // 0 infers 30 days' worth of rows from the timestamp interval.
  std::size_t rows_per_month = 0;

  bool operator==(const SplitSpec&) const = default;
};

struct SplitRanges {
  IndexRange train;
  IndexRange val;   // includes the context prefix when prepended
  IndexRange test;  // likewise
  // Target-bearing boundaries, before any context extension.
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t test_end = 0;
};

std::size_t infer_rows_per_month(const RawDataset& ds);

SplitRanges split(const RawDataset& ds, const SplitSpec& spec, std::size_t lookback, std::size_t horizon);

// Per-feature z-scoring with statistics from the training rows only.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;
  std::vector<std::string> warnings;

  RowMatrix apply(const RowMatrix& values) const;
  RowMatrix invert(const RowMatrix& values) const;
};

Standardizer fit_standardizer(const RowMatrix& values, IndexRange train);
std::pair<RowMatrix, Standardizer> standardize(const RawDataset& ds, IndexRange train);

struct WindowSample {
  std::size_t origin = 0;  // absolute row of the first input step
  RowMatrix input;         // L x M
  RowMatrix target;        // T x M
};

// Every origin o with o + L + T <= segment.end, stepping by `stride`.
// A segment shorter than L + T yields nothing and a warning.
std::vector<std::size_t> window_origins(IndexRange segment, std::size_t lookback, std::size_t horizon,
                                        std::size_t stride = 1, std::vector<std::string>* warnings = nullptr);

WindowSample make_window(const RowMatrix& values, std::size_t origin, std::size_t lookback, std::size_t horizon);

// Lazily materialized windows over one segment.
class WindowRange {
 public:
  WindowRange(const RowMatrix& values, IndexRange segment, std::size_t lookback, std::size_t horizon,
              std::size_t stride = 1);

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = WindowSample;
    using difference_type = std::ptrdiff_t;
    using pointer = const WindowSample*;
    using reference = WindowSample;

    iterator(const WindowRange* owner, std::size_t index) : owner_(owner), index_(index) {}
    WindowSample operator*() const;
    iterator& operator++() {
      ++index_;
      return *this;
    }
    bool operator==(const iterator& other) const { return index_ == other.index_; }

   private:
    const WindowRange* owner_;
    std::size_t index_;
  };

  iterator begin() const { return iterator(this, 0); }
  iterator end() const { return iterator(this, origins_.size()); }
  std::size_t size() const { return origins_.size(); }
  const std::vector<std::size_t>& origins() const { return origins_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  const RowMatrix* values_;
  std::size_t lookback_;
  std::size_t horizon_;
  std::vector<std::size_t> origins_;
  std::vector<std::string> warnings_;
};

WindowRange windows(const RowMatrix& values, IndexRange segment, std::size_t lookback, std::size_t horizon,
                    std::size_t stride = 1);

}  // namespace hakan
