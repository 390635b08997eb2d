#include "commands.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wsdaor/ordinal.hpp"

namespace wsdaor::cli {

using json = nlohmann::ordered_json;

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json config_json(const ExperimentConfig& config) {
  std::stringstream ini;
  save_config(ini, config);
  json out = json::object();
  std::string line, section;
  while (std::getline(ini, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      out[section] = json::object();
      continue;
    }
    const auto eq = line.find(" = ");
    out[section][line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

json manifest(const std::string& command, const ExperimentConfig& config) {
  return json{{"command", command}, {"created", timestamp()}, {"seed", config.seed}, {"config", config_json(config)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void prepare_out(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

template <typename F>
int guarded(std::ostream& err, F body) {
  try {
    body();
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error [" << e.key() << "]: " << e.what() << "\n";
    return kConfigError;
  } catch (const MissingInput& e) {
    err << "missing input: " << e.what() << "\n";
    return kMissingInput;
  } catch (const ShapeMismatch& e) {
    err << "shape mismatch: " << e.what() << "\n";
    return kShapeMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

std::vector<int> subjects_of(const std::vector<Sequence>& seqs) {
  std::set<int> s;
  for (const auto& seq : seqs) s.insert(seq.subject);
  return {s.begin(), s.end()};
}

json metrics_json(const MetricsReport& r) {
  json per = json::array();
  for (const auto& s : r.per_sequence) {
    per.push_back({{"subject", s.subject}, {"sequence", s.sequence}, {"length", s.length},
                   {"pcc", opt_json(s.pcc)}, {"icc", opt_json(s.icc)}, {"mae", s.mae}});
  }
  return json{{"level", to_string(r.level)},       {"aggregation", to_string(r.aggregation)},
              {"pcc", opt_json(r.pcc)},            {"icc", opt_json(r.icc)},
              {"mae", r.mae},                      {"missing_pcc", r.missing_pcc},
              {"missing_icc", r.missing_icc},      {"per_sequence", per}};
}

}  // namespace

ExperimentConfig resolve_config(const CommonOptions& options) {
  ExperimentConfig config;
  if (!options.config.empty()) config = load_config(options.config);
  if (options.seed) config.seed = *options.seed;
  if (options.out) config.out = *options.out;
  if (options.level) config.level = *options.level;
  config.sync();
  config.validate();
  return config;
}

int cmd_generate(const CommonOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = resolve_config(options);
    prepare_out(config.out);
    const auto source = generate_source(config.data);
    const auto target = generate_target(config.data);
    write_dataset_csv(config.out / "source.csv", source);
    write_dataset_csv(config.out / "target.csv", target);
    json m = manifest("generate", config);
    m["outputs"] = {"source.csv", "target.csv"};
    m["rows"] = {{"source", source.size() * config.data.frames_per_sequence},
                 {"target", target.size() * config.data.frames_per_sequence}};
    write_json(config.out / "manifest.json", m);
    if (!options.quiet) log << "wrote " << source.size() << " source and " << target.size() << " target sequences to " << config.out.string() << "\n";
  });
}

int cmd_train(const CommonOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = resolve_config(options);
    const Dataset ds = load_dataset(config);
    const auto subjects = subjects_of(ds.target);
    if (subjects.size() < 2) throw ConfigError("data.target_subjects", "training needs at least 2 target subjects");
    const int validation_subject = config.validation_subject >= 0 ? config.validation_subject : subjects.back();

    std::vector<Bag> bags;
    std::vector<Sequence> validation;
    std::vector<int> train_subjects;
    for (const auto& seq : ds.target) {
      if (seq.subject == validation_subject) {
        validation.push_back(seq);
        continue;
      }
      auto b = make_bags(seq, config.train.window, config.train.stride, config.network.levels);
      std::move(b.begin(), b.end(), std::back_inserter(bags));
    }
    for (int s : subjects) {
      if (s != validation_subject) train_subjects.push_back(s);
    }
    if (validation.empty()) {
      throw ConfigError("experiment.validation_subject", "validation subject has no sequences");
    }

    const FitResult fit_result = fit(config.train, config.network, ds.source, bags, validation);

    prepare_out(config.out);
    save_checkpoint(config.out / "checkpoint.txt", config.network, fit_result.best_params);
    json records = json::array();
    for (const auto& e : fit_result.history) {
      records.push_back({{"epoch", e.epoch},
                         {"lambda", e.lambda},
                         {"lr", e.lr},
                         {"loss_source", e.loss.source},
                         {"loss_target", e.loss.target},
                         {"loss_domain", e.loss.domain},
                         {"loss_total", e.loss.total},
                         {"validation_pcc", opt_json(e.validation_pcc)},
                         {"zero_level_pool_events", e.zero_level_pool_events}});
    }
    write_json(config.out / "history.json", json{{"mode", to_string(config.train.mode)},
                                                  {"best_epoch", fit_result.best_epoch},
                                                  {"best_validation_pcc", opt_json(fit_result.best_score)},
                                                  {"epochs_run", fit_result.epochs_run},
                                                  {"stop_reason", fit_result.stop_reason},
                                                  {"records", records}});
    json m = manifest("train", config);
    m["outputs"] = {"checkpoint.txt", "history.json"};
    m["folds"] = {{"train_subjects", train_subjects}, {"validation_subject", validation_subject}};
    m["target_bags"] = bags.size();
    write_json(config.out / "manifest.json", m);
    if (!options.quiet) {
      log << "trained " << fit_result.epochs_run << " epochs (" << fit_result.stop_reason << "), best epoch "
          << fit_result.best_epoch << " validation pcc " << fmt(fit_result.best_score) << "\n";
    }
  });
}

int cmd_evaluate(const CommonOptions& options, const std::filesystem::path& checkpoint, std::ostream& log,
                 std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = resolve_config(options);
    if (!std::filesystem::exists(checkpoint)) throw MissingInput("checkpoint not found: " + checkpoint.string());
    Checkpoint ckpt;
    try {
      ckpt = load_checkpoint(checkpoint);
    } catch (const std::exception& e) {
      throw ShapeMismatch("unreadable checkpoint " + checkpoint.string() + ": " + e.what());
    }
    if (ckpt.config.input_dim != config.network.input_dim || ckpt.config.levels != config.network.levels) {
      throw ShapeMismatch("checkpoint expects input_dim=" + std::to_string(ckpt.config.input_dim) +
                          " levels=" + std::to_string(ckpt.config.levels) + " but the config has feature_dim=" +
                          std::to_string(config.network.input_dim) + " levels=" + std::to_string(config.network.levels));
    }
    const Dataset ds = load_dataset(config);
    if (ds.target.empty()) throw MissingInput("dataset has no target sequences");

    MetricsReport report;
    if (config.level == MetricLevel::frame) {
      report = evaluate_frames(ckpt.params, ckpt.config, ds.target, config.aggregation);
    } else {
      std::vector<Bag> bags;
      for (const auto& seq : ds.target) {
        auto b = make_bags(seq, config.train.window, config.train.stride, ckpt.config.levels);
        std::move(b.begin(), b.end(), std::back_inserter(bags));
      }
      if (bags.empty()) throw ShapeMismatch("no target sequence is as long as the bag window");
      report = evaluate_bags(ckpt.params, ckpt.config, bags, config.train.pooling);
    }

    prepare_out(config.out);
    write_json(config.out / "metrics.json", metrics_json(report));
    std::ostringstream trace;
    trace << "subject,sequence,frame,truth,predicted\n";
    std::size_t frames = 0;
    for (const auto& seq : ds.target) {
      const auto truth = seq.frame_levels(ckpt.config.levels);
      const auto pred = predict_levels(ckpt.params, ckpt.config, seq);
      for (std::size_t t = 0; t < pred.size(); ++t) {
        trace << seq.subject << ',' << seq.index << ',' << t << ',' << truth[t] << ',' << pred[t] << '\n';
      }
      frames += pred.size();
    }
    write_text(config.out / "trace.csv", trace.str());
    json m = manifest("evaluate", config);
    m["checkpoint"] = checkpoint.string();
    m["outputs"] = {"metrics.json", "trace.csv"};
    m["frames"] = frames;
    write_json(config.out / "manifest.json", m);
    if (!options.quiet) {
      log << to_string(report.level) << " pcc " << fmt(report.pcc) << " icc " << fmt(report.icc) << " mae "
          << fmt(report.mae) << "\n";
    }
  });
}

int cmd_ablate(const CommonOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = resolve_config(options);
    const auto cells = ablation_cells(config);
    const auto runs = run_ablation(config, cells, [&](const CellRun& r) {
      if (!options.quiet) {
        log << r.cell << " seed " << r.seed << " pcc " << fmt(r.frame.pcc) << " (" << std::fixed
            << std::setprecision(1) << r.seconds << "s)\n" << std::defaultfloat;
      }
    });

    prepare_out(config.out);
    std::ostringstream per_seed;
    per_seed << "cell,seed,pcc,icc,mae,sequence_pcc,sequence_icc,sequence_mae\n";
    for (const auto& r : runs) {
      per_seed << r.cell << ',' << r.seed << ',' << fmt(r.frame.pcc) << ',' << fmt(r.frame.icc) << ','
               << fmt(r.frame.mae) << ',' << fmt(r.sequence.pcc) << ',' << fmt(r.sequence.icc) << ','
               << fmt(r.sequence.mae) << '\n';
    }
    write_text(config.out / "ablation_seeds.csv", per_seed.str());

    std::ostringstream table;
    table << "cell,pooling,encoding,mode,window,seeds,pcc,icc,mae\n";
    json cell_seeds = json::object();
    json timings = json::array();
    std::set<std::vector<std::uint64_t>> seed_sets;
    for (const auto& cell : cells) {
      std::vector<std::optional<double>> pcc, icc, mae;
      std::vector<std::uint64_t> seeds;
      for (const auto& r : runs) {
        if (r.cell != cell.name) continue;
        pcc.push_back(r.frame.pcc);
        icc.push_back(r.frame.icc);
        mae.push_back(r.frame.mae);
        seeds.push_back(r.seed);
        timings.push_back({{"cell", r.cell}, {"seed", r.seed}, {"seconds", r.seconds}});
      }
      seed_sets.insert(seeds);
      cell_seeds[cell.name] = seeds;
      table << cell.name << ',' << to_string(cell.pooling) << ',' << to_string(cell.encoding) << ','
            << to_string(cell.mode) << ',' << cell.window << ',' << seeds.size() << ',' << fmt(mean_defined(pcc))
            << ',' << fmt(mean_defined(icc)) << ',' << fmt(mean_defined(mae)) << '\n';
    }
    write_text(config.out / "ablation.csv", table.str());

    json m = manifest("ablate", config);
    m["table"] = to_string(config.table);
    m["outputs"] = {"ablation.csv", "ablation_seeds.csv"};
    m["cell_seeds"] = cell_seeds;
    m["shared_seeds"] = seed_sets.size() == 1;
    m["timings"] = timings;
    write_json(config.out / "manifest.json", m);
    if (!options.quiet) log << "wrote " << cells.size() << " rows to " << (config.out / "ablation.csv").string() << "\n";
  });
}

int cmd_encode(int label, double sigma, int levels, bool normalize, std::ostream& out, std::ostream& err) {
  try {
    if (levels < 2) throw std::invalid_argument("levels must be >= 2");
    const auto code = gaussian_encode(OrdinalLevel(label, levels), sigma, levels, normalize);
    out << "label " << label << " sigma " << fmt(sigma) << " levels " << levels
        << (normalize ? " normalized" : "") << "\n";
    for (int k = 0; k < levels; ++k) out << k << ' ' << fmt(code.values[k]) << '\n';
    return kOk;
  } catch (const std::exception& e) {
    err << "config error [encode]: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace wsdaor::cli
