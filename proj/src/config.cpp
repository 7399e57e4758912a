#include "msnmt/config.hpp"

#include <charconv>
#include <filesystem>
#include <set>
#include <sstream>

#include "msnmt/errors.hpp"
#include "msnmt/rng.hpp"

namespace msnmt {

namespace fs = std::filesystem;

namespace {

// Written into manifests by the pipeline; accepted and ignored on reload.
bool is_output_key(const std::string& key) {
  return key.starts_with("stage.") || key.starts_with("result.") || key == "augmented" || key == "filled";
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "corpus", "valid_corpus", "test_corpus", "split", "out", "mode", "pivot", "helper", "target",
      "strategy", "filler", "iterations", "seed", "merges_pivot", "merges_shared", "d_embed", "d_lstm",
      "d_dec", "learning_rate", "clip_norm", "batch_size", "patience", "max_epochs", "filler_max_epochs",
      "init_range", "resume.step", "resume.generator", "resume.previous_pseudo"};
  return keys;
}

std::string fmt_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ValidationError("config key " + key + ": '" + text + "' is not a valid number");
  return v;
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_relative()) path = fs::path(base) / path;
  return fs::absolute(path).lexically_normal().string();
}

}  // namespace

ExperimentConfig parse_experiment_config(const KeyValues& kv, const std::string& base_dir) {
  for (const auto& [key, value] : kv)
    if (!known_keys().contains(key) && !is_output_key(key))
      throw ValidationError("unknown config key '" + key + "'");
  const auto get = [&](const std::string& key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  const auto need = [&](const std::string& key) {
    const auto* v = get(key);
    if (!v || v->empty()) throw ValidationError("missing required config key '" + key + "'");
    return *v;
  };
  const auto size_key = [&](const std::string& key, std::size_t def) {
    const auto* v = get(key);
    return v ? parse_number<std::size_t>(key, *v) : def;
  };
  const auto double_key = [&](const std::string& key, double def) {
    const auto* v = get(key);
    return v ? parse_number<double>(key, *v) : def;
  };

  ExperimentConfig c;
  c.corpus = resolve(base_dir, need("corpus"));
  if (const auto* v = get("valid_corpus")) c.valid_corpus = resolve(base_dir, *v);
  if (const auto* v = get("test_corpus")) c.test_corpus = resolve(base_dir, *v);
  if (c.valid_corpus.empty() != c.test_corpus.empty())
    throw ValidationError("valid_corpus and test_corpus must be given together");
  if (const auto* v = get("split")) {
    std::istringstream in(*v);
    std::string part;
    std::size_t i = 0;
    while (std::getline(in, part, ',')) {
      if (i == 3) throw ValidationError("split takes three comma-separated fractions");
      c.split[i++] = parse_number<double>("split", part);
    }
    if (i != 3) throw ValidationError("split takes three comma-separated fractions");
  }
  if (const auto* v = get("out")) c.out = resolve(base_dir, *v);
  if (const auto* v = get("mode")) {
    if (*v != "one_to_one" && *v != "null_fill")
      throw ValidationError("mode must be one of: one_to_one, null_fill (got '" + *v + "')");
    c.mode = *v;
  }

  auto& p = c.pipeline;
  p.pivot = need("pivot");
  p.helper = need("helper");
  p.target = need("target");
  if (const auto* v = get("strategy")) {
    const auto s = parse_strategy(*v);
    if (!s) throw ValidationError("unknown strategy '" + *v + "'; valid strategies: " + std::string(kStrategyNames));
    p.strategy = *s;
  }
  if (const auto* v = get("filler")) {
    const auto f = parse_filler(*v);
    if (!f) throw ValidationError("filler must be one of: multi_source, one_to_one (got '" + *v + "')");
    p.filler = *f;
  }
  p.iterations = size_key("iterations", 1);
  p.seed = size_key("seed", 1);
  p.pivot_merges = static_cast<int>(size_key("merges_pivot", 500));
  p.shared_merges = static_cast<int>(size_key("merges_shared", 500));

  TrainConfig t;
  t.d_embed = size_key("d_embed", t.d_embed);
  t.d_lstm = size_key("d_lstm", t.d_lstm);
  t.d_dec = size_key("d_dec", 2 * t.d_lstm);
  t.learning_rate = double_key("learning_rate", t.learning_rate);
  t.clip_norm = double_key("clip_norm", t.clip_norm);
  t.batch_size = size_key("batch_size", t.batch_size);
  t.patience = size_key("patience", t.patience);
  t.max_epochs = size_key("max_epochs", t.max_epochs);
  t.init_range = double_key("init_range", t.init_range);
  try {
    t.validate();
  } catch (const ContractError& e) {
    throw ValidationError(e.what());
  }
  p.final_train = t;
  p.filler_train = t;
  p.filler_train.max_epochs = size_key("filler_max_epochs", t.max_epochs);
  if (p.filler_train.max_epochs == 0) throw ValidationError("filler_max_epochs must be positive");

  if (const auto* v = get("resume.step")) {
    c.resume_step = parse_number<std::size_t>("resume.step", *v);
    if (*c.resume_step < 2) throw ValidationError("resume.step must be at least 2");
    c.resume_generator = resolve(base_dir, need("resume.generator"));
    c.resume_previous_pseudo = resolve(base_dir, need("resume.previous_pseudo"));
  }
  p.inputs = c.to_key_values();
  return c;
}

KeyValues ExperimentConfig::to_key_values() const {
  KeyValues kv;
  const auto& p = pipeline;
  const auto& t = p.final_train;
  kv["corpus"] = corpus;
  if (!valid_corpus.empty()) {
    kv["valid_corpus"] = valid_corpus;
    kv["test_corpus"] = test_corpus;
  } else {
    kv["split"] = fmt_double(split[0]) + "," + fmt_double(split[1]) + "," + fmt_double(split[2]);
  }
  kv["mode"] = mode;
  kv["pivot"] = p.pivot;
  kv["helper"] = p.helper;
  kv["target"] = p.target;
  kv["strategy"] = std::string(strategy_name(p.strategy));
  kv["filler"] = std::string(filler_name(p.filler));
  kv["iterations"] = std::to_string(p.iterations);
  kv["seed"] = std::to_string(p.seed);
  kv["merges_pivot"] = std::to_string(p.pivot_merges);
  kv["merges_shared"] = std::to_string(p.shared_merges);
  kv["d_embed"] = std::to_string(t.d_embed);
  kv["d_lstm"] = std::to_string(t.d_lstm);
  kv["d_dec"] = std::to_string(t.d_dec);
  kv["learning_rate"] = fmt_double(t.learning_rate);
  kv["clip_norm"] = fmt_double(t.clip_norm);
  kv["batch_size"] = std::to_string(t.batch_size);
  kv["patience"] = std::to_string(t.patience);
  kv["max_epochs"] = std::to_string(t.max_epochs);
  kv["filler_max_epochs"] = std::to_string(p.filler_train.max_epochs);
  kv["init_range"] = fmt_double(t.init_range);
  if (resume_step) {
    kv["resume.step"] = std::to_string(*resume_step);
    kv["resume.generator"] = resume_generator;
    kv["resume.previous_pseudo"] = resume_previous_pseudo;
  }
  return kv;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const auto kv = parse_key_values(read_text_file(path), path);
  return parse_experiment_config(kv, fs::absolute(path).parent_path().string());
}

PipelineData load_data(const ExperimentConfig& config) {
  if (!config.valid_corpus.empty())
    return {load_corpus(config.corpus), load_corpus(config.valid_corpus), load_corpus(config.test_corpus)};
  auto parts = split(load_corpus(config.corpus), config.split, derive_seed(config.pipeline.seed, "split"));
  return {std::move(parts.train), std::move(parts.valid), std::move(parts.test)};
}

}  // namespace msnmt
