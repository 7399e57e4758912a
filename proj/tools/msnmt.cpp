#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msnmt/augmentation.hpp"
#include "msnmt/config.hpp"
#include "msnmt/errors.hpp"
#include "msnmt/tokens.hpp"

namespace fs = std::filesystem;
using namespace msnmt;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool tsv = false;
};

std::vector<std::string> read_lines(const std::string& path) {
  const auto text = read_text_file(path);
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

ExperimentConfig load_config(const Globals& g) {
  if (g.config.empty()) throw ValidationError("--config is required for this command");
  auto c = load_experiment_config(g.config);
  if (g.seed) c.pipeline.seed = *g.seed;
  if (!g.out.empty()) c.out = fs::absolute(g.out).lexically_normal().string();
  if (c.out.empty()) throw ValidationError("no output directory: set out= in the config or pass --out");
  c.pipeline.inputs = c.to_key_values();
  return c;
}

std::string percent(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * f);
  return buf;
}

void print_bleu(const BleuReport& r, const std::string& suffix = {}) {
  std::cout << "BLEU=" << r.bleu << suffix << '\n';
}

int cmd_stats(const Globals& g, std::string path) {
  if (path.empty()) path = load_experiment_config(g.config).corpus;
  const auto stats = corpus_stats(load_corpus(path));
  if (g.tsv) {
    std::cout << "language\tpresent\tmissing\tmissing_of_rows\tmissing_per_present\n";
    for (const auto& l : stats.languages)
      std::cout << l.language << '\t' << l.present << '\t' << l.missing << '\t' << l.missing_fraction_of_rows
                << '\t' << l.missing_per_present << '\n';
    return 0;
  }
  std::cout << "rows: " << stats.rows << '\n';
  for (const auto& l : stats.languages)
    std::cout << l.language << ": present=" << l.present << " missing=" << l.missing
              << " missing/(present+missing)=" << percent(l.missing_fraction_of_rows)
              << " missing/present=" << percent(l.missing_per_present) << '\n';
  return 0;
}

int cmd_train(const Globals& g) {
  const auto c = load_config(g);
  const auto data = load_data(c);
  const auto subwords = train_subwords(data.train, c.pipeline.pivot_merges, c.pipeline.shared_merges);
  const auto kind = c.mode == "one_to_one" ? Baseline::OneToOne : Baseline::NullFill;
  const auto res = run_baseline(data, c.pipeline, kind, subwords, c.out);
  print_bleu(res.evaluation.report);
  return 0;
}

int cmd_pipeline(const Globals& g) {
  const auto c = load_config(g);
  const auto data = load_data(c);
  if (c.resume_step) {
    StepInputs in;
    in.step = *c.resume_step;
    SubwordSet subwords;
    in.generator = load_trained_model(c.resume_generator, &subwords);
    in.generator_path = c.resume_generator;
    in.previous_pseudo = parse_pseudo_audit(read_text_file(c.resume_previous_pseudo),
                                            filled_language(c.pipeline, in.step - 1), c.resume_previous_pseudo);
    in.previous_pseudo_path = c.resume_previous_pseudo;
    const auto rec = run_iteration_step(data, c.pipeline, subwords, in, c.out);
    print_bleu(rec.bleu, " step=" + std::to_string(rec.step) + " target=" + rec.target_language);
    return 0;
  }
  const auto subwords = train_subwords(data.train, c.pipeline.pivot_merges, c.pipeline.shared_merges);
  if (c.pipeline.iterations > 1) {
    for (const auto& rec : iterative_augment(data, c.pipeline, subwords, c.pipeline.iterations, c.out))
      print_bleu(rec.bleu, " step=" + std::to_string(rec.step) + " target=" + rec.target_language);
    return 0;
  }
  print_bleu(run_pipeline(data, c.pipeline, subwords, c.out).evaluation.report);
  return 0;
}

int cmd_translate(const Globals& g, const std::string& checkpoint, const std::vector<std::string>& sources) {
  SubwordSet subwords;
  const auto model = load_trained_model(checkpoint, &subwords);
  if (sources.size() != model.sources.size())
    throw ValidationError("checkpoint has " + std::to_string(model.sources.size()) + " encoders, got " +
                          std::to_string(sources.size()) + " source files");
  std::vector<std::vector<std::string>> columns;
  for (const auto& path : sources) {
    columns.push_back(read_lines(path));
    if (columns.back().size() != columns.front().size())
      throw ValidationError(path + " has " + std::to_string(columns.back().size()) + " lines, " + sources.front() +
                            " has " + std::to_string(columns.front().size()));
  }
  std::vector<std::vector<std::string>> sentences(columns.front().size());
  for (std::size_t k = 0; k < sentences.size(); ++k)
    for (const auto& col : columns)
      sentences[k].push_back(split_whitespace(col[k]).empty() ? std::string(kNullToken) : col[k]);
  std::vector<std::string> hyps;
  if (!sentences.empty())
    hyps = translate_texts(model.model, subwords.codec(model.sources, model.target), sentences);
  std::string text;
  for (const auto& h : hyps) text += h + '\n';
  if (g.out.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(g.out);
    write_text_file((fs::path(g.out) / "hypotheses.txt").string(), text);
  }
  return 0;
}

int cmd_score(const std::string& hyp_path, const std::string& ref_path) {
  const auto hyps = read_lines(hyp_path);
  const auto refs = read_lines(ref_path);
  if (hyps.size() != refs.size())
    throw ValidationError(hyp_path + " has " + std::to_string(hyps.size()) + " lines, " + ref_path + " has " +
                          std::to_string(refs.size()));
  std::cout << bleu_lines(hyps, refs).format();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source NMT with pseudo-translation fill-in for missing source sentences"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (key=value file)");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--tsv", g.tsv, "Machine-readable output");

  std::string stats_path;
  auto* stats = app.add_subcommand("stats", "Present/missing counts per language");
  stats->add_option("corpus", stats_path, "Corpus TSV (defaults to the config's corpus)");

  auto* train = app.add_subcommand("train", "Train a baseline model (mode=one_to_one|null_fill)");

  std::string checkpoint;
  std::vector<std::string> sources;
  auto* translate = app.add_subcommand("translate", "Translate parallel source files with a checkpoint");
  translate->add_option("--checkpoint", checkpoint, "Model directory")->required();
  translate->add_option("sources", sources, "One file per encoder, in encoder order")->required();

  std::string hyp_path, ref_path;
  auto* score = app.add_subcommand("score", "Corpus BLEU of a hypothesis file against a reference file");
  score->add_option("hypotheses", hyp_path)->required();
  score->add_option("references", ref_path)->required();

  auto* pipeline = app.add_subcommand("pipeline", "Fill-in pipeline, optionally iterated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (stats->parsed()) {
      if (stats_path.empty() && g.config.empty()) throw ValidationError("stats needs a corpus path or --config");
      return cmd_stats(g, stats_path);
    }
    if (train->parsed()) return cmd_train(g);
    if (translate->parsed()) return cmd_translate(g, checkpoint, sources);
    if (score->parsed()) return cmd_score(hyp_path, ref_path);
    if (pipeline->parsed()) return cmd_pipeline(g);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
