#pragma once

// Flat `key = value` run configuration. Every key has a default; unknown keys
// are rejected. `#` starts a comment.

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mdn/pipeline/synth.hpp"
#include "mdn/pipeline/train.hpp"

namespace mdn {

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"modenet", "true", "use ModeNet (false: CodecNet-only system)"},
      {"mode.f", "32", "ModeNet internal features"},
      {"mode.n", "32", "ModeNet latent channels"},
      {"mode.hyper_f", "16", "ModeNet hyperprior internal features"},
      {"mode.hyper_n", "16", "ModeNet hyper-latent channels"},
      {"mode.context", "false", "ModeNet autoregressive context model"},
      {"mode.straight_through", "true", "pass gradients through the alpha clip"},
      {"codec.mode", "conditional", "CodecNet configuration: image | difference | conditional"},
      {"codec.f", "72", "CodecNet internal features"},
      {"codec.n", "80", "CodecNet latent channels"},
      {"codec.hyper_f", "48", "CodecNet hyperprior internal features"},
      {"codec.hyper_n", "48", "CodecNet hyper-latent channels"},
      {"codec.context", "true", "CodecNet autoregressive context model"},
      {"lambda", "0.01", "rate weight in the loss (bpp units)"},
      {"lambda_grid", "0.001,0.003,0.01,0.03", "lambdas trained by `train --sweep` and evaluated by `eval`"},
      {"warmup_epochs", "2", "CodecNet-only epochs before alternation"},
      {"alternate_epochs", "18", "alternating epochs (ModeNet first)"},
      {"batch", "8", "batch size"},
      {"lr", "1e-4", "initial learning rate"},
      {"lr_factor", "5", "learning-rate divisor at each drop"},
      {"lr_drops", "0.5,0.75", "fractions of the total epochs where the rate drops"},
      {"mode_lr_scale", "1", "ModeNet learning rate relative to CodecNet's"},
      {"seed", "1", "model initialisation and training seed"},
      {"data", "synth", "training data: synth | manifest"},
      {"manifest", "", "manifest file (data = manifest)"},
      {"crop", "256", "crop size for manifest data"},
      {"synth.count", "256", "number of synthetic pairs"},
      {"synth.height", "64", "synthetic frame height"},
      {"synth.width", "64", "synthetic frame width"},
      {"synth.objects", "2", "moving objects per pair"},
      {"synth.min_size", "12", "smallest object side"},
      {"synth.max_size", "20", "largest object side"},
      {"synth.min_speed", "2", "slowest object speed (px/frame)"},
      {"synth.max_speed", "6", "fastest object speed (px/frame)"},
      {"synth.noise", "0", "uniform noise amplitude per frame"},
      {"synth.seed", "1", "synthetic data seed"},
      {"out_dir", "run", "output directory for checkpoints and logs"},
  };
  return keys;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.default_value;
  }

  static RunConfig parse(const std::string& text) {
    RunConfig c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
      }
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
  }

  // `key=value` override, as given on the command line.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "': expected key=value");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  std::int64_t get_int(const std::string& key) const {
    const std::string& v = get(key);
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad(key, "an integer");
    return out;
  }

  double get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) bad(key, "a number");
      return d;
    } catch (const std::logic_error&) {
      bad(key, "a number");
    }
  }

  bool get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad(key, "true or false");
  }

  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    std::istringstream is(get(key));
    std::string item;
    while (std::getline(is, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stod(item));
      } catch (const std::logic_error&) {
        bad(key, "a comma-separated list of numbers");
      }
    }
    return out;
  }

  // Every key with its resolved value, in documentation order.
  std::string resolved_text() const {
    std::ostringstream os;
    for (const auto& k : config_keys()) os << k.name << " = " << values_.at(k.name) << "\n";
    return os.str();
  }

  SystemConfig system() const {
    SystemConfig s;
    s.use_modenet = get_bool("modenet");
    s.mode = ModeNetConfig{static_cast<int>(get_int("mode.f")), static_cast<int>(get_int("mode.n")),
                           static_cast<int>(get_int("mode.hyper_f")), static_cast<int>(get_int("mode.hyper_n")),
                           get_bool("mode.context"), get_bool("mode.straight_through")};
    try {
      s.codec.mode = parse_codec_mode(get("codec.mode"));
    } catch (const Error&) {
      bad("codec.mode", "image, difference or conditional");
    }
    s.codec.f = static_cast<int>(get_int("codec.f"));
    s.codec.n = static_cast<int>(get_int("codec.n"));
    s.codec.hyper_f = static_cast<int>(get_int("codec.hyper_f"));
    s.codec.hyper_n = static_cast<int>(get_int("codec.hyper_n"));
    s.codec.context = get_bool("codec.context");
    for (int v : {s.mode.f, s.mode.n, s.mode.hyper_f, s.mode.hyper_n, s.codec.f, s.codec.n, s.codec.hyper_f,
                  s.codec.hyper_n}) {
      if (v <= 0) throw ConfigError("config: channel widths must be positive");
    }
    return s;
  }

  TrainSchedule schedule() const {
    TrainSchedule t;
    t.warmup_epochs = static_cast<int>(get_int("warmup_epochs"));
    t.alternate_epochs = static_cast<int>(get_int("alternate_epochs"));
    t.batch = static_cast<int>(get_int("batch"));
    t.lambda = get_double("lambda");
    t.lr.base_lr = get_double("lr");
    t.lr.factor = get_double("lr_factor");
    t.lr.drop_fractions = get_list("lr_drops");
    t.mode_lr_scale = get_double("mode_lr_scale");
    t.seed = static_cast<std::uint64_t>(get_int("seed"));
    try {
      t.validate();
    } catch (const ValueError& e) {
      throw ConfigError(e.what());
    }
    for (double l : get_list("lambda_grid")) {
      if (!(l >= 0)) throw ConfigError("config: lambda_grid entries must be non-negative");
    }
    return t;
  }

  SynthSpec synth() const {
    SynthSpec s;
    s.height = static_cast<int>(get_int("synth.height"));
    s.width = static_cast<int>(get_int("synth.width"));
    s.objects = static_cast<int>(get_int("synth.objects"));
    s.min_size = static_cast<int>(get_int("synth.min_size"));
    s.max_size = static_cast<int>(get_int("synth.max_size"));
    s.min_speed = get_double("synth.min_speed");
    s.max_speed = get_double("synth.max_speed");
    s.noise = get_double("synth.noise");
    s.seed = static_cast<std::uint64_t>(get_int("synth.seed"));
    try {
      s.validate();
    } catch (const ValueError& e) {
      throw ConfigError(e.what());
    }
    return s;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  [[noreturn]] void bad(const std::string& key, const char* what) const {
    throw ConfigError("config key '" + key + "' = '" + values_.at(key) + "' is not " + what);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace mdn
