#include "ecgtda/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ecgtda/errors.hpp"
#include "ecgtda/tables.hpp"

namespace ecgtda::config {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw InvalidInput("config key '" + key + "': invalid value '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Builds a field for a numeric member reached through `ref`.
template <typename T, typename Ref>
Field numeric(const std::string& key, Ref ref) {
  return {key,
          [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_number<T>(key, v); },
          [ref](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return io::format_number(ref(const_cast<RunConfig&>(c)));
            else return std::to_string(ref(const_cast<RunConfig&>(c)));
          }};
}

template <typename Ref>
Field boolean(const std::string& key, Ref ref) {
  return {key, [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); },
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <typename Ref>
Field text(const std::string& key, Ref ref) {
  return {key, [ref](RunConfig& c, const std::string& v) { ref(c) = v; },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back(numeric<double>("preprocess.target_rate_hz", [](RunConfig& c) -> double& { return c.preprocess.target_rate_hz; }));
    v.push_back(numeric<double>("preprocess.fir_low_hz", [](RunConfig& c) -> double& { return c.preprocess.fir_low_hz; }));
    v.push_back(numeric<double>("preprocess.fir_high_hz", [](RunConfig& c) -> double& { return c.preprocess.fir_high_hz; }));
    v.push_back(numeric<int>("preprocess.fir_taps", [](RunConfig& c) -> int& { return c.preprocess.fir_taps; }));
    v.push_back(text("preprocess.wavelet_name", [](RunConfig& c) -> std::string& { return c.preprocess.wavelet_name; }));
    v.push_back(numeric<int>("preprocess.wavelet_levels", [](RunConfig& c) -> int& { return c.preprocess.wavelet_levels; }));
    v.push_back(boolean("preprocess.kalman_enabled", [](RunConfig& c) -> bool& { return c.preprocess.kalman_enabled; }));
    v.push_back(numeric<double>("preprocess.kalman_q", [](RunConfig& c) -> double& { return c.preprocess.kalman_q; }));
    v.push_back(numeric<double>("preprocess.kalman_r", [](RunConfig& c) -> double& { return c.preprocess.kalman_r; }));
    v.push_back(numeric<int>("slice.beats_per_window", [](RunConfig& c) -> int& { return c.slice.beats_per_window; }));
    v.push_back(numeric<int>("slice.window_length", [](RunConfig& c) -> int& { return c.slice.window_length; }));
    v.push_back(numeric<int>("slice.stride_beats", [](RunConfig& c) -> int& { return c.slice.stride_beats; }));
    v.push_back(numeric<int>("record.channel", [](RunConfig& c) -> int& { return c.channel; }));
    v.push_back(text("record.annotator", [](RunConfig& c) -> std::string& { return c.annotator; }));
    v.push_back(text("record.beat_codes", [](RunConfig& c) -> std::string& { return c.beat_codes; }));
    v.push_back(numeric<int>("tda.bins", [](RunConfig& c) -> int& { return c.experiment.bins; }));
    v.push_back(numeric<int>("features.pca_components", [](RunConfig& c) -> int& { return c.experiment.pca_components; }));
    v.push_back({"ae.sizes",
                 [](RunConfig& c, const std::string& val) {
                   std::vector<int> sizes;
                   std::stringstream ss(val);
                   for (std::string tok; std::getline(ss, tok, ',');) sizes.push_back(parse_number<int>("ae.sizes", trim(tok)));
                   if (sizes.empty()) bad_value("ae.sizes", val);
                   c.experiment.ae_sizes = sizes;
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (const int n : c.experiment.ae_sizes) s += (s.empty() ? "" : ",") + std::to_string(n);
                   return s;
                 }});
    v.push_back(numeric<int>("ae.epochs", [](RunConfig& c) -> int& { return c.experiment.ae_train.epochs; }));
    v.push_back(numeric<int>("ae.batch_size", [](RunConfig& c) -> int& { return c.experiment.ae_train.batch_size; }));
    v.push_back(numeric<double>("ae.dropout_start", [](RunConfig& c) -> double& { return c.experiment.ae_train.dropout_start; }));
    v.push_back(numeric<int>("ae.dropout_anneal_epochs", [](RunConfig& c) -> int& { return c.experiment.ae_train.dropout_anneal_epochs; }));
    v.push_back(numeric<double>("ae.learning_rate", [](RunConfig& c) -> double& { return c.experiment.ae_train.learning_rate; }));
    v.push_back(boolean("ae.shuffle", [](RunConfig& c) -> bool& { return c.experiment.ae_train.shuffle; }));
    v.push_back(numeric<int>("head.iterations", [](RunConfig& c) -> int& { return c.experiment.head.iterations; }));
    v.push_back(numeric<double>("head.learning_rate", [](RunConfig& c) -> double& { return c.experiment.head.learning_rate; }));
    v.push_back(numeric<double>("head.l2", [](RunConfig& c) -> double& { return c.experiment.head.l2; }));
    v.push_back({"eval.task",
                 [](RunConfig& c, const std::string& val) {
                   if (val == "detection") c.experiment.task = eval::Task::detection;
                   else if (val == "classification") c.experiment.task = eval::Task::classification;
                   else bad_value("eval.task", val);
                 },
                 [](const RunConfig& c) {
                   return std::string(c.experiment.task == eval::Task::detection ? "detection" : "classification");
                 }});
    v.push_back({"eval.channels",
                 [](RunConfig& c, const std::string& val) {
                   try {
                     c.experiment.mask = eval::ChannelMask::parse(val);
                   } catch (const InvalidInput&) {
                     bad_value("eval.channels", val);
                   }
                 },
                 [](const RunConfig& c) { return c.experiment.mask.to_string(); }});
    v.push_back(numeric<int>("eval.test_size", [](RunConfig& c) -> int& { return c.test_size; }));
    v.push_back(numeric<double>("eval.train_ratio", [](RunConfig& c) -> double& { return c.train_ratio; }));
    v.push_back(numeric<int>("eval.max_classes", [](RunConfig& c) -> int& { return c.experiment.max_classes; }));
    v.push_back({"eval.normal_labels",
                 [](RunConfig& c, const std::string& val) {
                   std::set<char> labels;
                   std::stringstream ss(val);
                   for (std::string tok; std::getline(ss, tok, ',');) {
                     tok = trim(tok);
                     if (tok.size() != 1) bad_value("eval.normal_labels", val);
                     labels.insert(tok[0]);
                   }
                   if (labels.empty()) bad_value("eval.normal_labels", val);
                   c.experiment.normal_labels = labels;
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (const char l : c.experiment.normal_labels) {
                     if (!s.empty()) s += ',';
                     s += l;
                   }
                   return s;
                 }});
    v.push_back(numeric<std::uint64_t>("run.seed", [](RunConfig& c) -> std::uint64_t& { return c.experiment.seed; }));
    v.push_back(numeric<int>("run.jobs", [](RunConfig& c) -> int& { return c.experiment.jobs; }));
    return v;
  }();
  return f;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw InvalidInput("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

void set(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& f = field(key);
  if (value.empty() && key != "record.beat_codes") throw InvalidInput("config key '" + key + "' has no value");
  f.set(cfg, value);
}

std::string get(const RunConfig& cfg, const std::string& key) { return field(key).get(cfg); }

void parse(std::istream& in, RunConfig& cfg) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected 'key = value'", n);
    set(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void load(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path.string());
  parse(in, cfg);
}

std::string snapshot(const RunConfig& cfg) {
  std::string s;
  for (const auto& f : fields()) s += f.key + " = " + f.get(cfg) + '\n';
  return s;
}

void validate(const RunConfig& cfg) {
  cfg.preprocess.validate();
  cfg.experiment.ae_train.validate();
  if (cfg.slice.beats_per_window < 1) throw InvalidInput("slice.beats_per_window must be >= 1");
  if (cfg.slice.window_length < 2) throw InvalidInput("slice.window_length must be >= 2");
  if (cfg.slice.stride_beats < 1) throw InvalidInput("slice.stride_beats must be >= 1");
  if (cfg.channel < 0) throw InvalidInput("record.channel must be >= 0");
  if (cfg.experiment.bins < 2) throw InvalidInput("tda.bins must be >= 2");
  if (cfg.experiment.pca_components < 1) throw InvalidInput("features.pca_components must be >= 1");
  if (cfg.test_size < 1) throw InvalidInput("eval.test_size must be >= 1");
  if (!(cfg.train_ratio > 0 && cfg.train_ratio <= 1)) throw InvalidInput("eval.train_ratio must be in (0, 1]");
  if (cfg.experiment.max_classes < 2) throw InvalidInput("eval.max_classes must be >= 2");
  if (cfg.experiment.jobs < 1) throw InvalidInput("run.jobs must be >= 1");
  if (cfg.experiment.head.iterations < 1 || !(cfg.experiment.head.learning_rate > 0) || cfg.experiment.head.l2 < 0)
    throw InvalidInput("head settings out of range");
}

}  // namespace ecgtda::config
