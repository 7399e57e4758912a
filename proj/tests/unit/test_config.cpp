#include <doctest.h>

#include <filesystem>

#include "msnmt/config.hpp"
#include "msnmt/errors.hpp"
#include "msnmt/kvfile.hpp"

using namespace msnmt;
namespace fs = std::filesystem;

namespace {

KeyValues minimal() { return {{"corpus", "c.tsv"}, {"pivot", "en"}, {"helper", "cs"}, {"target", "sk"}}; }

std::string error_of(const KeyValues& kv) {
  try {
    parse_experiment_config(kv, "/base");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults fill everything but the required keys") {
  const auto c = parse_experiment_config(minimal(), "/base");
  CHECK(c.corpus == "/base/c.tsv");
  CHECK(c.pipeline.strategy == Strategy::FillIn);
  CHECK(c.pipeline.filler == FillerKind::MultiSource);
  CHECK(c.pipeline.iterations == 1);
  CHECK(c.pipeline.final_train.d_dec == 2 * c.pipeline.final_train.d_lstm);
  CHECK(c.split == std::array<double, 3>{0.8, 0.1, 0.1});
  CHECK_FALSE(c.resume_step.has_value());
}

TEST_CASE("missing and unknown keys are named") {
  for (const auto* key : {"corpus", "pivot", "helper", "target"}) {
    auto kv = minimal();
    kv.erase(key);
    CHECK(error_of(kv).find(key) != std::string::npos);
  }
  auto kv = minimal();
  kv["learning_rat"] = "0.1";
  CHECK(error_of(kv).find("learning_rat") != std::string::npos);
}

TEST_CASE("invalid strategy lists the valid ones") {
  auto kv = minimal();
  kv["strategy"] = "fill_out";
  const auto e = error_of(kv);
  CHECK(e.find("fill_out") != std::string::npos);
  for (const auto* s : {"fill_in", "fill_in_replace", "fill_in_add"}) CHECK(e.find(s) != std::string::npos);
}

TEST_CASE("malformed values are rejected") {
  for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"seed", "x"}, {"d_lstm", "-1"}, {"learning_rate", "0"}, {"split", "0.5,0.5"}, {"mode", "bt"},
           {"filler", "two"}, {"max_epochs", "0"}, {"resume.step", "1"}, {"d_dec", "100"}}) {
    auto kv = minimal();
    kv[k] = v;
    CAPTURE(k);
    CHECK_THROWS_AS(parse_experiment_config(kv, "/base"), ValidationError);
  }
  auto kv = minimal();
  kv["valid_corpus"] = "v.tsv";
  CHECK_THROWS_AS(parse_experiment_config(kv, "/base"), ValidationError);
}

TEST_CASE("round trip through key values and key order does not matter") {
  auto kv = minimal();
  kv["strategy"] = "fill_in_add";
  kv["d_lstm"] = "16";
  kv["seed"] = "9";
  kv["filler_max_epochs"] = "2";
  const auto c = parse_experiment_config(kv, "/base");
  const auto again = parse_experiment_config(c.to_key_values(), "/elsewhere");
  CHECK(again.to_key_values() == c.to_key_values());
  CHECK(again.pipeline.filler_train.max_epochs == 2);
  CHECK(again.pipeline.final_train.d_dec == 32);

  const auto a = parse_key_values("pivot=en\ncorpus=c.tsv\nhelper=cs\ntarget=sk\n", "a");
  const auto b = parse_key_values("target=sk\nhelper=cs\ncorpus=c.tsv\npivot=en\n", "b");
  CHECK(parse_experiment_config(a, "/x").to_key_values() == parse_experiment_config(b, "/x").to_key_values());
}

TEST_CASE("pipeline output keys in a manifest are ignored") {
  auto kv = minimal();
  kv["stage.1"] = "filler:filler";
  kv["result.bleu"] = "12";
  kv["augmented"] = "augmented.tsv";
  CHECK_NOTHROW(parse_experiment_config(kv, "/base"));
}

TEST_CASE("paths resolve against the config file's directory") {
  const auto dir = fs::temp_directory_path() / "msnmt_config";
  fs::create_directories(dir / "sub");
  write_text_file((dir / "sub/exp.conf").string(), "corpus=../c.tsv\npivot=en\nhelper=cs\ntarget=sk\nout=runs\n");
  const auto c = load_experiment_config((dir / "sub/exp.conf").string());
  CHECK(c.corpus == (fs::absolute(dir) / "c.tsv").lexically_normal().string());
  CHECK(c.out == (fs::absolute(dir) / "sub/runs").lexically_normal().string());
  CHECK_FALSE(c.to_key_values().contains("out"));
  fs::remove_all(dir);
}

TEST_CASE("a config without valid/test splits the corpus") {
  const auto dir = fs::temp_directory_path() / "msnmt_split";
  fs::create_directories(dir);
  std::string text = "en\tcs\tsk\n";
  for (int i = 0; i < 20; ++i) text += "a\tb\tc\n";
  write_text_file((dir / "c.tsv").string(), text);
  write_text_file((dir / "e.conf").string(), "corpus=c.tsv\npivot=en\nhelper=cs\ntarget=sk\nsplit=0.5,0.25,0.25\n");
  const auto data = load_data(load_experiment_config((dir / "e.conf").string()));
  CHECK(data.train.size() + data.valid.size() + data.test.size() == 20);
  CHECK(data.train.size() == 10);
  fs::remove_all(dir);
}
