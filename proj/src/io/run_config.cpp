#include "rcnds/io/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rcnds/core/error.hpp"

namespace rcnds::io {
namespace {

using nlohmann::json;

template <typename F>
void for_each_field(train::TrainConfig& c, F&& f) {
  f("epochs", c.epochs);
  f("base_lr", c.base_lr);
  f("lr_halving_period", c.lr_halving_period);
  f("batch_train", c.batch_train);
  f("batch_val", c.batch_val);
  f("alpha0", c.alpha0);
  f("crop", c.crop);
  f("source_side", c.source_side);
  f("init_std", c.init_std);
  f("seed", c.seed);
  f("momentum", c.momentum);
  f("weight_decay", c.weight_decay);
  f("threads", c.threads);
}

}  // namespace

train::TrainConfig parse_run_config(const std::string& json_text, const train::TrainConfig& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("run config: top level must be an object");

  train::TrainConfig cfg = base;
  std::size_t matched = 0;
  for_each_field(cfg, [&](const char* key, auto& field) {
    auto it = j.find(key);
    if (it == j.end()) return;
    ++matched;
    using Field = std::decay_t<decltype(field)>;
    const bool ok = std::is_floating_point_v<Field> ? it->is_number()
                    : std::is_unsigned_v<Field>    ? it->is_number_unsigned()
                                                   : it->is_number_integer();
    if (!ok) throw ConfigError(std::string("run config: '") + key + "' has the wrong type");
    field = it->template get<Field>();
  });
  if (matched != j.size()) {
    for (const auto& [key, _] : j.items()) {
      bool known = false;
      for_each_field(cfg, [&](const char* k, auto&) { known = known || key == k; });
      if (!known) throw ConfigError("run config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

train::TrainConfig load_run_config(const std::string& path, const train::TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open run config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), base);
}

std::string format_run_config(const train::TrainConfig& cfg) {
  json j = json::object();
  train::TrainConfig copy = cfg;
  for_each_field(copy, [&](const char* key, auto& field) { j[key] = field; });
  return j.dump(2) + "\n";
}

void save_run_config(const train::TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  out << format_run_config(cfg);
  if (!out) throw InputError("cannot write run config '" + path + "'");
}

void apply_seed_env(train::TrainConfig& cfg) {
  const char* v = std::getenv("RCNDS_SEED");
  if (!v || !*v) return;
  const std::string s(v);
  std::uint64_t seed = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
  if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("RCNDS_SEED is not an unsigned integer: '" + s + "'");
  cfg.seed = seed;
}

}  // namespace rcnds::io
