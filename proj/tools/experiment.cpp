#include "experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace wsdaor::cli {

namespace pt = boost::property_tree;

std::string_view to_string(AblationTable table) noexcept {
  switch (table) {
    case AblationTable::table2: return "table2";
    case AblationTable::table1: return "table1";
    case AblationTable::windows: return "windows";
  }
  return "unknown";
}

AblationTable parse_ablation_table(std::string_view name) {
  if (name == "table2") return AblationTable::table2;
  if (name == "table1") return AblationTable::table1;
  if (name == "windows") return AblationTable::windows;
  throw std::invalid_argument("unknown ablation table '" + std::string(name) + "'");
}

namespace {

std::string format(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string format(T v) requires std::is_integral_v<T> {
  return std::to_string(v);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError(key, "config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "config key '" + key + "': expected true or false, got '" + text + "'");
}

template <typename T>
std::string format_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError(key, "config key '" + key + "': empty list item");
    out.push_back(parse_number<T>(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError(key, "config key '" + key + "': list is empty");
  return out;
}

// Wraps enum parsers so their invalid_argument becomes a ConfigError.
template <typename F>
auto parse_enum(const std::string& key, const std::string& text, F parse) {
  try {
    return parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, "config key '" + key + "': " + e.what());
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string& name, const std::string& text)> set;
};

#define WSDAOR_NUM(sec, name, member)                                                              \
  Field {                                                                                          \
    sec, #name, [](const ExperimentConfig& c) { return format(c.member); },                         \
        [](ExperimentConfig& c, const std::string& k, const std::string& t) {                      \
          c.member = parse_number<std::remove_cvref_t<decltype(c.member)>>(k, t);                   \
        }                                                                                          \
  }

#define WSDAOR_ENUM(sec, name, member, parser)                                                     \
  Field {                                                                                          \
    sec, #name, [](const ExperimentConfig& c) { return std::string(to_string(c.member)); },         \
        [](ExperimentConfig& c, const std::string& k, const std::string& t) {                      \
          c.member = parse_enum(k, t, [](const std::string& s) { return parser(s); });             \
        }                                                                                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      WSDAOR_NUM("data", source_subjects, data.source_subjects),
      WSDAOR_NUM("data", target_subjects, data.target_subjects),
      WSDAOR_NUM("data", sequences_per_subject, data.sequences_per_subject),
      WSDAOR_NUM("data", frames, data.frames_per_sequence),
      WSDAOR_NUM("data", feature_dim, data.feature_dim),
      WSDAOR_NUM("data", levels, data.levels),
      WSDAOR_NUM("data", event_rate, data.event_rate),
      WSDAOR_NUM("data", episode_min, data.episode_min),
      WSDAOR_NUM("data", episode_max, data.episode_max),
      WSDAOR_NUM("data", peak_min, data.peak_min),
      WSDAOR_NUM("data", plateau_fraction, data.plateau_fraction),
      WSDAOR_NUM("data", cluster_separation, data.cluster_separation),
      WSDAOR_NUM("data", noise, data.noise),
      WSDAOR_NUM("data", subject_spread, data.subject_spread),
      WSDAOR_NUM("data", shift_scale, data.shift_scale),
      Field{"data", "shift_rotate", [](const ExperimentConfig& c) { return std::string(c.data.shift_rotate ? "true" : "false"); },
            [](ExperimentConfig& c, const std::string& k, const std::string& t) { c.data.shift_rotate = parse_bool(k, t); }},
      WSDAOR_NUM("data", shift_offset, data.shift_offset),

      WSDAOR_NUM("network", hidden_dim, network.hidden_dim),
      WSDAOR_NUM("network", feature_dim, network.feature_dim),
      WSDAOR_NUM("network", domain_hidden, network.domain_hidden),

      WSDAOR_NUM("train", lr, train.lr),
      WSDAOR_NUM("train", momentum, train.momentum),
      WSDAOR_NUM("train", weight_decay, train.weight_decay),
      WSDAOR_NUM("train", epochs, train.epochs),
      WSDAOR_NUM("train", source_batch, train.source_batch),
      WSDAOR_NUM("train", target_batch, train.target_batch),
      WSDAOR_NUM("train", anneal_start, train.anneal_start),
      WSDAOR_NUM("train", anneal_every, train.anneal_every),
      WSDAOR_NUM("train", anneal_factor, train.anneal_factor),
      WSDAOR_NUM("train", gamma, train.gamma),
      WSDAOR_NUM("train", patience, train.patience),
      WSDAOR_NUM("train", steps_per_epoch, train.steps_per_epoch),
      WSDAOR_NUM("train", window, train.window),
      WSDAOR_NUM("train", stride, train.stride),
      WSDAOR_ENUM("train", pooling, train.pooling, parse_pooling_mode),
      WSDAOR_ENUM("train", encoding, train.encoding, parse_label_encoding),
      WSDAOR_NUM("train", sigma, train.sigma),
      WSDAOR_ENUM("train", mode, train.mode, parse_da_mode),

      WSDAOR_NUM("experiment", seed, seed),
      Field{"experiment", "dataset", [](const ExperimentConfig& c) { return c.dataset.string(); },
            [](ExperimentConfig& c, const std::string&, const std::string& t) { c.dataset = t; }},
      Field{"experiment", "out", [](const ExperimentConfig& c) { return c.out.string(); },
            [](ExperimentConfig& c, const std::string& k, const std::string& t) {
              if (t.empty()) throw ConfigError(k, "config key '" + k + "': output directory is empty");
              c.out = t;
            }},
      WSDAOR_ENUM("experiment", level, level, parse_metric_level),
      WSDAOR_ENUM("experiment", aggregation, aggregation, parse_aggregation),
      WSDAOR_NUM("experiment", max_folds, max_folds),
      WSDAOR_NUM("experiment", validation_subject, validation_subject),
      WSDAOR_ENUM("experiment", table, table, parse_ablation_table),
      Field{"experiment", "seeds", [](const ExperimentConfig& c) { return format_list(c.seeds); },
            [](ExperimentConfig& c, const std::string& k, const std::string& t) {
              c.seeds = parse_list<std::uint64_t>(k, t);
            }},
      Field{"experiment", "windows", [](const ExperimentConfig& c) { return format_list(c.windows); },
            [](ExperimentConfig& c, const std::string& k, const std::string& t) {
              c.windows = parse_list<std::size_t>(k, t);
            }},
  };
  return table;
}

#undef WSDAOR_NUM
#undef WSDAOR_ENUM

// Runs a validate() that throws invalid_argument and reports it against `key`.
template <typename F>
void check(const std::string& key, F f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

void ExperimentConfig::sync() {
  data.seed = seed;
  network.input_dim = data.feature_dim;
  network.levels = data.levels;
  network.seed = derive_seed(seed, 0x6e6574);
  train.seed = seed;
}

void ExperimentConfig::validate() const {
  check("data", [&] { data.validate(); });
  check("network", [&] { network.validate(); });
  check("train", [&] { train.validate(); });
  if (max_folds < 0) throw ConfigError("experiment.max_folds", "experiment.max_folds must be >= 0");
  if (validation_subject < -1 || validation_subject >= data.target_subjects) {
    throw ConfigError("experiment.validation_subject",
                      "experiment.validation_subject must be -1 or a target subject index");
  }
  for (auto w : windows) {
    if (w == 0) throw ConfigError("experiment.windows", "experiment.windows entries must be positive");
  }
}

ExperimentConfig load_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), std::string("config syntax error: ") + e.message());
  }
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.section + "." + f.key] = &f;

  ExperimentConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section, "config key '" + section + "' is outside any section");
    }
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      auto it = index.find(name);
      if (it == index.end()) throw ConfigError(name, "unknown config key '" + name + "'");
      it->second->set(config, name, value.data());
    }
  }
  config.sync();
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open config " + path.string());
  return load_config(in);
}

void save_config(std::ostream& out, const ExperimentConfig& config) {
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_config(out, config);
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  for (const auto& f : fields()) {
    if (f.get(a) != f.get(b)) return false;
  }
  return a.network == b.network;
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.dataset.empty()) return {generate_source(config.data), generate_target(config.data)};
  Dataset ds;
  for (auto [name, dest] : {std::pair{"source.csv", &ds.source}, std::pair{"target.csv", &ds.target}}) {
    const auto path = config.dataset / name;
    if (!std::filesystem::exists(path)) throw MissingInput("dataset file not found: " + path.string());
    try {
      *dest = read_dataset_csv(path);
    } catch (const std::invalid_argument& e) {
      throw ShapeMismatch(path.string() + ": " + e.what());
    }
  }
  for (const auto* set : {&ds.source, &ds.target}) {
    for (const auto& seq : *set) {
      if (seq.dim != config.network.input_dim) {
        throw ShapeMismatch("dataset feature dim " + std::to_string(seq.dim) + " does not match config feature_dim " +
                            std::to_string(config.network.input_dim));
      }
    }
  }
  return ds;
}

std::vector<AblationCell> ablation_cells(const ExperimentConfig& config) {
  const auto& t = config.train;
  std::vector<AblationCell> cells;
  switch (config.table) {
    case AblationTable::table2:
      cells = {{"baseline", PoolingMode::max, LabelEncoding::onehot, t.mode, t.window},
               {"baseline+AMILP", PoolingMode::adaptive, LabelEncoding::onehot, t.mode, t.window},
               {"baseline+GM", PoolingMode::max, t.encoding, t.mode, t.window},
               {"baseline+GM+AMILP", PoolingMode::adaptive, t.encoding, t.mode, t.window}};
      if (t.encoding == LabelEncoding::onehot) {
        cells[2].encoding = cells[3].encoding = LabelEncoding::gaussian;
      }
      break;
    case AblationTable::table1:
      for (auto mode : {DaMode::none, DaMode::source_only, DaMode::target_only, DaMode::joint_no_da,
                        DaMode::adversarial, DaMode::transfer}) {
        cells.push_back({std::string(to_string(mode)), t.pooling, t.encoding, mode, t.window});
      }
      break;
    case AblationTable::windows:
      for (auto w : config.windows) {
        cells.push_back({"window=" + std::to_string(w), t.pooling, t.encoding, t.mode, w});
      }
      break;
  }
  return cells;
}

std::vector<CellRun> run_ablation(const ExperimentConfig& config, const std::vector<AblationCell>& cells,
                                  const std::function<void(const CellRun&)>& progress) {
  std::vector<CellRun> runs;
  for (auto seed : config.seeds) {
    ExperimentConfig seeded = config;
    seeded.seed = seed;
    seeded.sync();
    const Dataset ds = load_dataset(seeded);
    for (const auto& cell : cells) {
      TrainConfig train = seeded.train;
      train.pooling = cell.pooling;
      train.encoding = cell.encoding;
      train.mode = cell.mode;
      train.window = cell.window;
      const auto t0 = std::chrono::steady_clock::now();
      const LosoResult r = loso_evaluate(train, seeded.network, ds.source, ds.target,
                                         LosoOptions{seeded.max_folds, seeded.aggregation});
      CellRun run{cell.name, seed, r.frame, r.sequence,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
      if (progress) progress(run);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

}  // namespace wsdaor::cli
