// Writes the synthetic three-language task as train/valid/test corpora plus
// a pipeline config next to them.
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "msnmt/synthetic.hpp"

namespace fs = std::filesystem;
using namespace msnmt;

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic pivot/helper/target corpus"};
  SyntheticSpec spec;
  std::string dir = "demo";
  app.add_option("--dir", dir, "Output directory");
  app.add_option("--rows", spec.train_rows, "Training rows");
  app.add_option("--seed", spec.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto data = make_synthetic(spec);
    fs::create_directories(dir);
    save_corpus((fs::path(dir) / "train.tsv").string(), data.train);
    save_corpus((fs::path(dir) / "valid.tsv").string(), data.valid);
    save_corpus((fs::path(dir) / "test.tsv").string(), data.test);
    write_text_file((fs::path(dir) / "pipeline.conf").string(),
                    "corpus=train.tsv\nvalid_corpus=valid.tsv\ntest_corpus=test.tsv\n"
                    "pivot=en\nhelper=cs\ntarget=sk\nstrategy=fill_in\n"
                    "merges_pivot=0\nmerges_shared=0\nd_embed=32\nmax_epochs=30\npatience=3\nseed=1\n");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
