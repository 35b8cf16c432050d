#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "hakan/config.hpp"
#include "hakan/training.hpp"

namespace hakan::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_data = 3,
  exit_numeric = 4,
};

// Runs one command; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_main(int argc, char** argv);
void tune_allocator();

// Loads, splits and (optionally) standardizes the dataset a run points at.
// Relative paths are tried as given, under $HAKAN_DATA_DIR, and next to the
// config file.
ForecastData prepare_data(const RunConfig& config, const std::string& config_dir = "");
std::string resolve_dataset_path(const std::string& path, const std::string& config_dir = "");

// "dataset,horizon,seed,mse,mae,epochs,seconds"; the header is written when
// the file is new.
void append_metrics(const std::string& path, const std::vector<MetricRecord>& rows);
std::vector<MetricRecord> read_metrics(const std::string& path);

}  // namespace hakan::cli
