#include "hakan/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "hakan/checkpoint.hpp"

namespace hakan::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::size_t horizon = 0;
  std::size_t lookback = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string seeds;
  bool deterministic = false;
  std::string out_dir;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value run configuration file");
  cmd->add_option("--set", o.sets, "override a configuration key (key=value), repeatable");
  cmd->add_option("--horizon", o.horizon, "forecast horizon T");
  cmd->add_option("--lookback", o.lookback, "look-back window L");
  cmd->add_option("--seed", o.seed, "single seed")->each([&o](const std::string&) { o.seed_given = true; });
  cmd->add_option("--seeds", o.seeds, "comma-separated seed list");
  cmd->add_flag("--deterministic", o.deterministic, "fixed reduction order and seeded shuffling");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_flag("--quiet", o.quiet, "suppress per-epoch progress");
}

std::string config_dir_of(const std::string& path) {
  if (path.empty()) return "";
  return fs::path(path).parent_path().string();
}

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig rc = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  apply_overrides(rc, o.sets);
  if (o.horizon) rc.model.horizon = o.horizon;
  if (o.lookback) rc.model.lookback = o.lookback;
  if (!o.seeds.empty()) rc.seeds = parse_seed_list(o.seeds);
  if (o.seed_given) rc.seeds = {o.seed};
  if (o.deterministic) rc.deterministic = true;
  if (!o.out_dir.empty()) rc.output_dir = o.out_dir;
  rc.train.deterministic = rc.deterministic;
  return rc;
}

std::string absolute_dataset_path(const std::string& path, const std::string& config_dir) {
  const std::string found = resolve_dataset_path(path, config_dir);
  return fs::exists(found) ? fs::absolute(found).lexically_normal().string() : found;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string run_tag(const RunConfig& rc, std::uint64_t seed) {
  std::string name = rc.dataset_name.empty() ? "dataset" : rc.dataset_name;
  return name + "_L" + std::to_string(rc.model.lookback) + "_T" + std::to_string(rc.model.horizon) + "_s" +
         std::to_string(seed);
}

KeyValues run_metadata(const RunConfig& rc) {
  KeyValues kv;
  for (const auto& [k, v] : to_key_values(rc)) {
    if (k.rfind("model.", 0) != 0) kv[k] = v;
  }
  return kv;
}

std::string range_text(IndexRange r) { return std::to_string(r.begin) + ".." + std::to_string(r.end); }

void write_manifest(const std::string& path, const RunConfig& rc, const ForecastData& data, const TrainResult& res,
                    const std::string& checkpoint) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path + "'");
  out << "# resolved configuration; rerun with: train --config " << path << "\n";
  out << "# split.train_rows = " << range_text(data.ranges.train) << "\n";
  out << "# split.val_rows = " << range_text(data.ranges.val) << "\n";
  out << "# split.test_rows = " << range_text(data.ranges.test) << "\n";
  out << "# result.best_epoch = " << res.best_epoch << "\n";
  out << "# result.epochs = " << res.record.epochs << "\n";
  out << "# result.test_mse = " << format_double(res.record.mse) << "\n";
  out << "# result.test_mae = " << format_double(res.record.mae) << "\n";
  out << "# result.seconds = " << format_double(res.record.seconds) << "\n";
  out << "# result.checkpoint = " << checkpoint << "\n";
  out << serialize_key_values(to_key_values(rc));
}

std::string summary_csv_header() { return "dataset,horizon,runs,mse_mean,mse_std,mae_mean,mae_std"; }

void write_summary(const std::string& path, const AggregateReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write summary '" + path + "'");
  out << summary_csv_header() << "\n";
  for (const auto& s : report.per_horizon) {
    out << s.dataset << ',' << s.horizon << ',' << s.runs << ',' << format_double(s.mse_mean) << ','
        << format_double(s.mse_std) << ',' << format_double(s.mae_mean) << ',' << format_double(s.mae_std) << "\n";
  }
}

// Trains one (config, seed) cell and writes its checkpoint and manifest.
MetricRecord train_one(RunConfig rc, std::uint64_t seed, const ForecastData& data, const std::string& out_dir,
                       bool quiet, std::ostream& out) {
  rc.seeds = {seed};
  rc.model.seed = seed;
  rc.train.seed = seed;
  rc.model.channels = static_cast<std::size_t>(data.values.cols());
  rc.model.validate();
  const HaKanModel initial(rc.model);
  EpochCallback progress;
  if (!quiet) {
    progress = [&out](const EpochLog& log) {
      out << "  epoch " << log.epoch << "  train " << fmt(log.train_loss) << "  val " << fmt(log.val_mse)
          << (log.improved ? "  *" : "") << "\n";
    };
  }
  const TrainResult res = train(initial, data, rc.train, progress);
  const std::string tag = run_tag(rc, seed);
  const std::string ckpt = (fs::path(out_dir) / (tag + ".ckpt")).string();
  save_checkpoint(ckpt, res.model, run_metadata(rc));
  write_manifest((fs::path(out_dir) / (tag + ".manifest")).string(), rc, data, res, ckpt);
  return res.record;
}

void print_record(std::ostream& out, const MetricRecord& r) {
  out << r.dataset << "  T=" << r.horizon << "  seed=" << r.seed << "  mse=" << fmt(r.mse) << "  mae=" << fmt(r.mae)
      << "  epochs=" << r.epochs << "  " << fmt(r.seconds, 1) << "s\n";
}

// ---- commands --------------------------------------------------------------

int cmd_train(const CommonOptions& o, std::ostream& out) {
  RunConfig rc = resolve_config(o);
  rc.dataset_path = absolute_dataset_path(rc.dataset_path, config_dir_of(o.config_path));
  const ForecastData data = prepare_data(rc);
  fs::create_directories(rc.output_dir);
  std::vector<MetricRecord> records;
  for (const auto seed : rc.seeds) {
    if (!o.quiet) out << "training " << run_tag(rc, seed) << "\n";
    records.push_back(train_one(rc, seed, data, rc.output_dir, o.quiet, out));
    print_record(out, records.back());
    append_metrics((fs::path(rc.output_dir) / "metrics.csv").string(), {records.back()});
  }
  if (records.size() > 1) {
    const AggregateReport report = aggregate_report(records);
    out << format_seed_table(report);
    write_summary((fs::path(rc.output_dir) / "summary.csv").string(), report);
  }
  return exit_ok;
}

struct EvalOptions {
  std::string checkpoint;
  std::string data_path;
  std::size_t horizon = 0;
  std::string out_dir;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  Checkpoint ckpt = load_checkpoint(o.checkpoint);
  RunConfig rc;
  apply_key_values(rc, ckpt.metadata);
  rc.model = ckpt.model.config();
  if (!o.data_path.empty()) rc.dataset_path = o.data_path;
  if (o.horizon && o.horizon != rc.model.horizon) {
    throw ConfigError("checkpoint forecasts T=" + std::to_string(rc.model.horizon) + " but --horizon " +
                      std::to_string(o.horizon) + " was requested");
  }
  const ForecastData data = prepare_data(rc);
  if (static_cast<std::size_t>(data.values.cols()) != rc.model.channels) {
    throw ConfigError("checkpoint was trained on " + std::to_string(rc.model.channels) + " channels but '" +
                      rc.dataset_path + "' has " + std::to_string(data.values.cols()));
  }
  const EvalResult res = evaluate(ckpt.model, data.values, data.ranges.test, rc.train.eval_batch_size);
  MetricRecord rec;
  rec.dataset = data.name;
  rec.horizon = rc.model.horizon;
  rec.seed = rc.model.seed;
  rec.mse = res.mse;
  rec.mae = res.mae;
  rec.epochs = 0;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  print_record(out, rec);
  out << "mse " << format_double(rec.mse) << "\nmae " << format_double(rec.mae) << "\n";
  const std::string dir = o.out_dir.empty() ? rc.output_dir : o.out_dir;
  fs::create_directories(dir);
  append_metrics((fs::path(dir) / "metrics.csv").string(), {rec});
  return exit_ok;
}

int cmd_params(const CommonOptions& o, std::ostream& out) {
  const RunConfig rc = resolve_config(o);
  rc.model.validate();
  const ParamBreakdown b = param_breakdown(rc.model);
  out << "L=" << rc.model.lookback << " T=" << rc.model.horizon << " P=" << rc.model.patch_len
      << " S=" << rc.model.stride << " N=" << rc.model.num_patches() << " D=" << rc.model.d_model
      << " R=" << rc.model.blocks << " H=" << rc.model.bottleneck << " mode=" << to_string(rc.model.mode) << "\n";
  for (const auto& [name, count] : b.items) out << std::left << std::setw(28) << name << count << "\n";
  out << std::left << std::setw(28) << "total" << b.total << "\n";
  return exit_ok;
}

struct GradOptions {
  std::string mode = "both";
  double tolerance = 0.0;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradOptions& o, std::ostream& out) {
  std::vector<LayerMode> modes;
  if (o.mode == "both") {
    modes = {LayerMode::kan, LayerMode::linear};
  } else {
    modes = {parse_layer_mode(o.mode)};
  }
  bool all_passed = true;
  for (const auto mode : modes) {
    GradCheckOptions opts;
    opts.tolerance = o.tolerance > 0.0 ? o.tolerance : (mode == LayerMode::kan ? 1e-4 : 1e-6);
    if (o.inject_fault) {
      opts.tamper = [](std::vector<NamedTensor>& params) {
        for (auto& p : params) {
          if (p.name.find("block.0.") == 0 && p.tensor.has_grad()) {
            for (auto& g : p.tensor.mutable_grad()) g = g * 1.5 + 1e-3;
          }
        }
      };
    }
    const GradCheckReport rep = run_tiny_gradcheck(mode, opts);
    out << "mode " << to_string(mode) << "  params " << model_param_count(tiny_gradcheck_config(mode)) << "\n";
    for (const auto& g : rep.groups) {
      out << "  " << std::left << std::setw(24) << g.name << std::setw(6) << g.checked << std::scientific
          << std::setprecision(3) << g.max_rel_error << std::defaultfloat << "\n";
    }
    out << "  worst " << std::scientific << std::setprecision(3) << rep.worst << "  tolerance " << rep.tolerance
        << std::defaultfloat << "  " << (rep.passed ? "PASS" : "FAIL") << "\n";
    all_passed = all_passed && rep.passed;
  }
  return all_passed ? exit_ok : exit_numeric;
}

struct SweepOptions {
  std::string axis;
  std::string values;
  std::string horizons;
};

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes = {"basis", "blocks", "bottleneck", "patch_len",
                                                "lookback", "components", "mlp"};
  return axes;
}

std::size_t parse_count(const std::string& axis, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("sweep axis '" + axis + "': value '" + v + "' is not a non-negative integer");
  }
}

void apply_axis(RunConfig& rc, const std::string& axis, const std::string& v) {
  if (axis == "basis") {
    rc.model.basis.kind = parse_basis_kind(v);
  } else if (axis == "blocks") {
    rc.model.blocks = parse_count(axis, v);
  } else if (axis == "bottleneck") {
    rc.model.bottleneck = parse_count(axis, v);
  } else if (axis == "patch_len") {
    rc.model.patch_len = parse_count(axis, v);
    rc.model.stride = std::max<std::size_t>(1, rc.model.patch_len / 2);
  } else if (axis == "lookback") {
    rc.model.lookback = parse_count(axis, v);
  } else if (axis == "components") {
    if (v == "both") {
      rc.model.intra_enabled = rc.model.inter_enabled = true;
    } else if (v == "intra-only") {
      rc.model.intra_enabled = true;
      rc.model.inter_enabled = false;
    } else if (v == "inter-only") {
      rc.model.intra_enabled = false;
      rc.model.inter_enabled = true;
    } else {
      throw ConfigError("sweep axis 'components': expected both, intra-only or inter-only, got '" + v + "'");
    }
  } else if (axis == "mlp") {
    rc.model.mode = parse_layer_mode(v);
  } else {
    std::string list;
    for (const auto& a : sweep_axes()) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError("unknown sweep axis '" + axis + "'; expected one of: " + list);
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_sweep(const CommonOptions& o, const SweepOptions& s, std::ostream& out) {
  RunConfig base = resolve_config(o);
  base.dataset_path = absolute_dataset_path(base.dataset_path, config_dir_of(o.config_path));
  const auto values = split_list(s.values);
  if (values.empty()) throw ConfigError("sweep needs --values");
  // Validate every cell before any training starts.
  for (const auto& v : values) {
    RunConfig probe = base;
    apply_axis(probe, s.axis, v);
    probe.model.validate();
  }
  std::vector<std::size_t> horizons;
  for (const auto& h : split_list(s.horizons)) horizons.push_back(parse_count("horizons", h));
  if (horizons.empty()) horizons.push_back(base.model.horizon);

  struct Row {
    std::string value;
    double mse = 0.0;
    double mae = 0.0;
    double params = 0.0;
  };
  std::vector<Row> rows;
  for (const auto& v : values) {
    RunConfig cell = base;
    apply_axis(cell, s.axis, v);
    const std::string cell_dir = (fs::path(base.output_dir) / (s.axis + "_" + v)).string();
    fs::create_directories(cell_dir);
    std::vector<MetricRecord> records;
    double params = 0.0;
    for (const auto h : horizons) {
      cell.model.horizon = h;
      const ForecastData data = prepare_data(cell);
      params += static_cast<double>(model_param_count(cell.model));
      for (const auto seed : cell.seeds) {
        if (!o.quiet) out << "sweep " << s.axis << "=" << v << "  " << run_tag(cell, seed) << "\n";
        records.push_back(train_one(cell, seed, data, cell_dir, o.quiet, out));
        print_record(out, records.back());
        append_metrics((fs::path(cell_dir) / "metrics.csv").string(), {records.back()});
      }
    }
    const AggregateReport report = aggregate_report(records);
    rows.push_back({v, report.mse, report.mae, params / static_cast<double>(horizons.size())});
  }

  const std::string table_path = (fs::path(base.output_dir) / ("sweep_" + s.axis + ".csv")).string();
  std::ofstream table(table_path);
  if (!table) throw DataError("cannot write '" + table_path + "'");
  table << s.axis << ",mse,mae,params\n";
  out << std::left << std::setw(14) << s.axis << std::setw(12) << "avg MSE" << std::setw(12) << "avg MAE"
      << "params (K)\n";
  for (const auto& r : rows) {
    table << r.value << ',' << format_double(r.mse) << ',' << format_double(r.mae) << ',' << format_double(r.params)
          << "\n";
    out << std::left << std::setw(14) << r.value << std::setw(12) << fmt(r.mse, 4) << std::setw(12) << fmt(r.mae, 4)
        << fmt(r.params / 1000.0, 1) << "\n";
  }
  return exit_ok;
}

}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  // Keep large per-batch buffers on the heap instead of fresh mmap pages.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

std::string resolve_dataset_path(const std::string& path, const std::string& config_dir) {
  if (path.empty()) throw ConfigError("no dataset path configured (set dataset.path)");
  const fs::path p(path);
  if (p.is_absolute() || fs::exists(p)) return path;
  if (const char* env = std::getenv("HAKAN_DATA_DIR"); env && *env) {
    const fs::path candidate = fs::path(env) / p.filename();
    if (fs::exists(candidate)) return candidate.string();
  }
  if (!config_dir.empty()) {
    for (const fs::path& candidate : {fs::path(config_dir) / p, fs::path(config_dir) / ".." / p}) {
      if (fs::exists(candidate)) return candidate.lexically_normal().string();
    }
  }
  return path;
}

ForecastData prepare_data(const RunConfig& config, const std::string& config_dir) {
  const std::string path = resolve_dataset_path(config.dataset_path, config_dir);
  const RawDataset ds = load_csv(path, config.dataset_name);
  ForecastData data;
  data.name = ds.name;
  data.ranges = split(ds, config.split, config.model.lookback, config.model.horizon);
  if (config.standardize) {
    data.values = standardize(ds, IndexRange{data.ranges.train.begin, data.ranges.train_end}).first;
  } else {
    data.values = ds.values;
  }
  return data;
}

void append_metrics(const std::string& path, const std::vector<MetricRecord>& rows) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot write metrics file '" + path + "'");
  if (fresh) out << "dataset,horizon,seed,mse,mae,epochs,seconds\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.horizon << ',' << r.seed << ',' << format_double(r.mse) << ','
        << format_double(r.mae) << ',' << r.epochs << ',' << fmt(r.seconds, 3) << "\n";
  }
}

std::vector<MetricRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics file '" + path + "'");
  std::vector<MetricRecord> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw DataError("malformed metrics row '" + line + "' in '" + path + "'");
    MetricRecord r;
    r.dataset = cells[0];
    r.horizon = std::stoull(cells[1]);
    r.seed = std::stoull(cells[2]);
    r.mse = std::stod(cells[3]);
    r.mae = std::stod(cells[4]);
    r.epochs = std::stoull(cells[5]);
    r.seconds = std::stod(cells[6]);
    rows.push_back(r);
  }
  return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"HaKAN forecasting toolkit", "hakan"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a model and report test metrics");
  add_common(train_cmd, train_opts);

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on its test split");
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_opts.data_path, "dataset CSV (defaults to the checkpoint's)");
  eval_cmd->add_option("--horizon", eval_opts.horizon, "expected forecast horizon");
  eval_cmd->add_option("--out", eval_opts.out_dir, "output directory for metrics.csv");

  CommonOptions sweep_common;
  SweepOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "ablation sweep over one axis");
  add_common(sweep_cmd, sweep_common);
  sweep_cmd->add_option("--axis", sweep_opts.axis, "basis|blocks|bottleneck|patch_len|lookback|components|mlp")
      ->required();
  sweep_cmd->add_option("--values", sweep_opts.values, "comma-separated axis values")->required();
  sweep_cmd->add_option("--horizons", sweep_opts.horizons, "comma-separated horizons averaged per row");

  CommonOptions params_opts;
  auto* params_cmd = app.add_subcommand("params", "parameter count with per-component breakdown");
  add_common(params_cmd, params_opts);

  GradOptions grad_opts;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check on a tiny model");
  grad_cmd->add_option("--mode", grad_opts.mode, "kan, linear or both");
  grad_cmd->add_option("--tolerance", grad_opts.tolerance, "maximum relative error");
  grad_cmd->add_flag("--inject-fault", grad_opts.inject_fault)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts, out);
    if (*eval_cmd) return cmd_eval(eval_opts, out);
    if (*sweep_cmd) return cmd_sweep(sweep_common, sweep_opts, out);
    if (*params_cmd) return cmd_params(params_opts, out);
    if (*grad_cmd) return cmd_gradcheck(grad_opts, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const BasisParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
  return exit_failure;
}

int run_main(int argc, char** argv) {
  tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace hakan::cli
