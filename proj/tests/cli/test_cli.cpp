#include <doctest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>

#include "msnmt/kvfile.hpp"
#include "msnmt/synthetic.hpp"

namespace fs = std::filesystem;
using namespace msnmt;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MSNMT_CLI_PATH + "\" " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path fresh(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("msnmt_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Tiny synthetic task plus a config that trains in about a second.
fs::path tiny_experiment(const std::string& name) {
  const auto dir = fresh(name);
  SyntheticSpec s;
  s.train_rows = 60;
  s.valid_rows = 10;
  s.test_rows = 10;
  s.alphabet = 6;
  s.max_len = 6;
  const auto data = make_synthetic(s);
  save_corpus((dir / "train.tsv").string(), data.train);
  save_corpus((dir / "valid.tsv").string(), data.valid);
  save_corpus((dir / "test.tsv").string(), data.test);
  write_text_file((dir / "exp.conf").string(),
                  "corpus=train.tsv\nvalid_corpus=valid.tsv\ntest_corpus=test.tsv\npivot=en\nhelper=cs\ntarget=sk\n"
                  "merges_pivot=0\nmerges_shared=0\nd_embed=8\nd_lstm=8\nmax_epochs=2\nbatch_size=16\n"
                  "learning_rate=0.005\nseed=4\n");
  return dir;
}

}  // namespace

TEST_CASE("no subcommand is a usage error") { CHECK(cli("").status == 2); }

TEST_CASE("unknown option is a usage error") { CHECK(cli("stats --frobnicate x").status == 2); }

TEST_CASE("stats on a missing file names the path") {
  const auto r = cli("stats /nonexistent/corpus.tsv");
  CHECK(r.status == 2);
  CHECK(r.out.find("/nonexistent/corpus.tsv") != std::string::npos);
}

TEST_CASE("stats reports both missing fractions") {
  const auto dir = fresh("stats");
  write_text_file((dir / "c.tsv").string(), "en\tcs\na\tb\nc\t\nd\t\ne\tf\n");
  const auto human = cli("stats " + q(dir / "c.tsv"));
  CHECK(human.status == 0);
  CHECK(human.out.find("cs: present=2 missing=2 missing/(present+missing)=50.0% missing/present=100.0%") !=
        std::string::npos);
  const auto tsv = cli("--tsv stats " + q(dir / "c.tsv"));
  CHECK(tsv.out == "language\tpresent\tmissing\tmissing_of_rows\tmissing_per_present\nen\t4\t0\t0\t0\ncs\t2\t2\t0.5\t1\n");
}

TEST_CASE("stats on a malformed corpus is exit 2") {
  const auto dir = fresh("bad");
  write_text_file((dir / "c.tsv").string(), "en\tcs\na\tb\tc\n");
  CHECK(cli("stats " + q(dir / "c.tsv")).status == 2);
}

TEST_CASE("score: identical files give 100, mismatched lengths exit 2") {
  const auto dir = fresh("score");
  write_text_file((dir / "h.txt").string(), "a b c d\ne f g h\n");
  write_text_file((dir / "r.txt").string(), "a b c d\n");
  const auto same = cli("score " + q(dir / "h.txt") + " " + q(dir / "h.txt"));
  CHECK(same.status == 0);
  CHECK(same.out.rfind("BLEU=100", 0) == 0);
  const auto bad = cli("score " + q(dir / "h.txt") + " " + q(dir / "r.txt"));
  CHECK(bad.status == 2);
  CHECK(bad.out.find("lines") != std::string::npos);
}

TEST_CASE("config errors exit 2 with the reason") {
  const auto dir = tiny_experiment("cfg");
  write_text_file((dir / "bad.conf").string(), read_text_file((dir / "exp.conf").string()) + "strategy=fill_out\n");
  const auto r = cli("pipeline --config " + q(dir / "bad.conf"));
  CHECK(r.status == 2);
  CHECK(r.out.find("fill_in_replace") != std::string::npos);
  write_text_file((dir / "unknown.conf").string(), read_text_file((dir / "exp.conf").string()) + "colour=red\n");
  CHECK(cli("train --config " + q(dir / "unknown.conf")).status == 2);
}

TEST_CASE("train, translate and rerun determinism") {
  const auto dir = tiny_experiment("train");
  const auto a = cli("train --config " + q(dir / "exp.conf") + " --out " + q(dir / "a"));
  REQUIRE(a.status == 0);
  CHECK(a.out.rfind("BLEU=", 0) == 0);
  const auto b = cli("train --config " + q(dir / "exp.conf") + " --out " + q(dir / "b"));
  CHECK(a.out == b.out);
  CHECK(read_text_file((dir / "a/manifest.txt").string()) == read_text_file((dir / "b/manifest.txt").string()));
  CHECK(read_text_file((dir / "a/model/out.weight.bin").string()) ==
        read_text_file((dir / "b/model/out.weight.bin").string()));
  const auto seeded = cli("train --config " + q(dir / "exp.conf") + " --seed 5 --out " + q(dir / "c"));
  CHECK(read_key_values((dir / "c/manifest.txt").string()).at("seed") == "5");

  std::string en, cs;
  for (int i = 0; i < 10; ++i) {
    en += "A B C\n";
    cs += i == 3 ? "\n" : (i == 4 ? "⟨NULL⟩\n" : "a b\n");
  }
  write_text_file((dir / "en.txt").string(), en);
  write_text_file((dir / "cs.txt").string(), cs);
  const auto t = cli("translate --checkpoint " + q(dir / "a/model") + " " + q(dir / "en.txt") + " " + q(dir / "cs.txt"));
  CHECK(t.status == 0);
  CHECK(std::count(t.out.begin(), t.out.end(), '\n') == 10);

  const auto to_file = cli("translate --checkpoint " + q(dir / "a/model") + " --out " + q(dir / "tr") + " " +
                           q(dir / "en.txt") + " " + q(dir / "cs.txt"));
  CHECK(to_file.status == 0);
  CHECK(read_text_file((dir / "tr/hypotheses.txt").string()) == t.out);

  write_text_file((dir / "empty1.txt").string(), "");
  write_text_file((dir / "empty2.txt").string(), "");
  const auto e =
      cli("translate --checkpoint " + q(dir / "a/model") + " " + q(dir / "empty1.txt") + " " + q(dir / "empty2.txt"));
  CHECK(e.status == 0);
  CHECK(e.out.empty());

  const auto wrong = cli("translate --checkpoint " + q(dir / "a/model") + " " + q(dir / "en.txt"));
  CHECK(wrong.status == 2);
  CHECK(cli("translate --checkpoint " + q(dir / "nope") + " " + q(dir / "en.txt")).status == 2);
}

TEST_CASE("pipeline writes a manifest that reruns to the same result") {
  const auto dir = tiny_experiment("pipe");
  const auto a = cli("pipeline --config " + q(dir / "exp.conf") + " --out " + q(dir / "run"));
  REQUIRE(a.status == 0);
  const auto b = cli("pipeline --config " + q(dir / "run/manifest.txt") + " --out " + q(dir / "rerun"));
  REQUIRE(b.status == 0);
  CHECK(a.out == b.out);
  CHECK(read_text_file((dir / "run/manifest.txt").string()) == read_text_file((dir / "rerun/manifest.txt").string()));
}

TEST_CASE("iterative pipeline prints one line per step and step manifests rerun") {
  const auto dir = tiny_experiment("iter");
  write_text_file((dir / "iter.conf").string(), read_text_file((dir / "exp.conf").string()) + "iterations=3\n");
  const auto a = cli("pipeline --config " + q(dir / "iter.conf") + " --out " + q(dir / "run"));
  REQUIRE(a.status == 0);
  CHECK(a.out.find("step=1 target=sk") != std::string::npos);
  CHECK(a.out.find("step=2 target=cs") != std::string::npos);
  CHECK(a.out.find("step=3 target=sk") != std::string::npos);
  CHECK(fs::exists(dir / "run/iterations.tsv"));
  CHECK(read_key_values((dir / "run/step1/manifest.txt").string()).at("iterations") == "1");
  const auto step3 = a.out.substr(a.out.find("BLEU=", a.out.find("step=2")));
  const auto r = cli("pipeline --config " + q(dir / "run/step3/manifest.txt") + " --out " + q(dir / "rerun3"));
  REQUIRE(r.status == 0);
  CHECK(r.out == step3);
  CHECK(read_text_file((dir / "run/step3/model/out.weight.bin").string()) ==
        read_text_file((dir / "rerun3/model/out.weight.bin").string()));
}
