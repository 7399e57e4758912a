#include "msnmt/augmentation.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "msnmt/errors.hpp"
#include "msnmt/rng.hpp"
#include "msnmt/tokens.hpp"

namespace msnmt {

namespace fs = std::filesystem;

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::FillIn: return "fill_in";
    case Strategy::FillInReplace: return "fill_in_replace";
    case Strategy::FillInAdd: return "fill_in_add";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : {Strategy::FillIn, Strategy::FillInReplace, Strategy::FillInAdd})
    if (strategy_name(s) == name) return s;
  return std::nullopt;
}

std::string_view filler_name(FillerKind k) { return k == FillerKind::MultiSource ? "multi_source" : "one_to_one"; }

std::optional<FillerKind> parse_filler(std::string_view name) {
  if (name == "multi_source") return FillerKind::MultiSource;
  if (name == "one_to_one") return FillerKind::OneToOne;
  return std::nullopt;
}

std::string_view baseline_name(Baseline b) { return b == Baseline::OneToOne ? "one_to_one" : "null_fill"; }

PseudoScope scope_for(Strategy s) { return s == Strategy::FillIn ? PseudoScope::MissingOnly : PseudoScope::All; }

namespace {

bool usable(const Cell& c) { return c.present() && c.provenance != Provenance::NullFilled; }

std::string fmt_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string join(std::span<const std::string> parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_evaluation(const std::string& dir, const Evaluation& ev) {
  std::string hyps;
  for (const auto& h : ev.hypotheses) hyps += h + '\n';
  write_text_file(in_dir(dir, "hypotheses.txt"), hyps);
  write_text_file(in_dir(dir, "bleu.txt"), ev.report.format());
}

void add_result_keys(KeyValues& kv, const Evaluation& ev) {
  kv["result.bleu"] = fmt_double(ev.report.bleu);
  kv["result.hyp_len"] = std::to_string(ev.report.hyp_length);
  kv["result.ref_len"] = std::to_string(ev.report.ref_length);
  kv["result.hypotheses"] = "hypotheses.txt";
}

void add_stage_keys(KeyValues& kv, const std::vector<StageRecord>& stages) {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto key = "stage." + std::to_string(i + 1);
    kv[key] = stages[i].name + ":" + stages[i].artifact;
    if (stages[i].report) kv[key + ".best_epoch"] = std::to_string(stages[i].report->best_epoch);
  }
}

std::string sub_dir(const std::string& out, const std::string& name) {
  return out.empty() ? std::string() : in_dir(out, name);
}

TrainConfig seeded(TrainConfig c, std::uint64_t seed, std::string_view tag) {
  c.seed = derive_seed(seed, tag);
  return c;
}

// Prefixes failures with the stage that raised them.
template <class F>
auto in_stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const DivergenceError& e) {
    throw DivergenceError("stage " + name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage " + name + ": " + e.what());
  } catch (const ContractError& e) {
    throw ContractError("stage " + name + ": " + e.what());
  }
}

}  // namespace

Codec SubwordSet::codec(std::span<const std::string> sources, const std::string& target) const {
  Codec c;
  for (const auto& s : sources) c.sources.push_back(&for_language(s));
  c.target = &for_language(target);
  return c;
}

SubwordSet train_subwords(const MultiCorpus& corpus, int pivot_merges, int shared_merges) {
  if (corpus.languages().empty()) throw ContractError("train_subwords: corpus has no languages");
  std::vector<std::string> pivot_text, shared_text;
  for (const auto& row : corpus.rows()) {
    for (std::size_t l = 0; l < row.size(); ++l) {
      if (!row[l].present() || row[l].provenance != Provenance::Original) continue;
      (l == 0 ? pivot_text : shared_text).push_back(*row[l].text);
    }
  }
  if (shared_text.empty()) throw ContractError("train_subwords: no non-pivot text to learn from");
  SubwordSet set;
  set.pivot_language = corpus.languages()[0];
  set.pivot = SubwordModel::train(pivot_text, pivot_merges);
  set.shared = SubwordModel::train(shared_text, shared_merges);
  return set;
}

std::vector<Example> make_examples(const MultiCorpus& corpus, std::span<const std::string> sources,
                                   const std::string& target, const SubwordSet& subwords) {
  std::vector<std::size_t> src;
  for (const auto& s : sources) src.push_back(corpus.index_of(s));
  const auto tgt = corpus.index_of(target);
  const auto& tgt_model = subwords.for_language(target);
  std::vector<Example> out;
  for (const auto& row : corpus.rows()) {
    if (!usable(row[tgt])) continue;
    Example ex;
    for (std::size_t i = 0; i < src.size(); ++i) {
      std::vector<int> ids;
      if (usable(row[src[i]])) ids = subwords.for_language(sources[i]).segment(*row[src[i]].text);
      if (ids.empty()) ids = {kNullId};
      ex.sources.push_back(std::move(ids));
    }
    ex.target = tgt_model.segment(*row[tgt].text);
    out.push_back(std::move(ex));
  }
  return out;
}

TrainedModel train_model(const MultiCorpus& train, const MultiCorpus& valid, std::span<const std::string> sources,
                         const std::string& target, const SubwordSet& subwords, const TrainConfig& config,
                         const std::string& checkpoint_dir) {
  if (sources.empty()) throw ContractError("train_model: no source languages");
  const auto train_set = make_examples(train, sources, target, subwords);
  if (train_set.empty()) throw ContractError("train_model: no training rows with " + target + " present");
  std::vector<std::string> all(sources.begin(), sources.end());
  all.push_back(target);
  const auto valid_set = make_examples(filter_complete(valid, all), sources, target, subwords);
  if (valid_set.empty()) throw ContractError("train_model: no validation rows complete in " + join(all, ','));

  ModelDims dims;
  dims.n_sources = sources.size();
  for (const auto& s : sources) dims.source_vocab.push_back(subwords.for_language(s).vocab_size());
  dims.target_vocab = subwords.for_language(target).vocab_size();
  dims.d_embed = config.d_embed;
  dims.d_lstm = config.d_lstm;
  dims.d_dec = config.d_dec;
  dims.validate();
  auto init = MultiEncoderModel::initialize(dims, derive_seed(config.seed, "init"), config.init_range);
  auto result = msnmt::train(std::move(init), train_set, valid_set, config);
  TrainedModel m{std::move(result.model), std::move(result.report), all, target};
  m.sources.pop_back();
  if (!checkpoint_dir.empty()) save_trained_model(checkpoint_dir, m, subwords);
  return m;
}

void save_trained_model(const std::string& dir, const TrainedModel& m, const SubwordSet& subwords) {
  Metadata meta;
  meta["sources"] = join(m.sources, ',');
  meta["target"] = m.target;
  meta["pivot_language"] = subwords.pivot_language;
  meta["best_epoch"] = std::to_string(m.report.best_epoch);
  save_checkpoint(dir, m.model, meta);
  subwords.pivot.save(in_dir(dir, "subword.pivot.txt"));
  subwords.shared.save(in_dir(dir, "subword.shared.txt"));
  write_text_file(in_dir(dir, "report.tsv"), m.report.format());
}

TrainedModel load_trained_model(const std::string& dir, SubwordSet* subwords) {
  Metadata meta;
  TrainedModel m;
  m.model = load_checkpoint(dir, &meta);
  const auto need = [&](const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw ParseError(in_dir(dir, "metadata.txt") + ": missing key " + key);
    return it->second;
  };
  m.sources = split_on(need("sources"), ',');
  m.target = need("target");
  if (m.sources.size() != m.model.n_sources())
    throw ParseError(in_dir(dir, "metadata.txt") + ": sources do not match n_sources");
  m.report.checkpoint = dir;
  if (subwords) {
    subwords->pivot_language = need("pivot_language");
    subwords->pivot = SubwordModel::load(in_dir(dir, "subword.pivot.txt"));
    subwords->shared = SubwordModel::load(in_dir(dir, "subword.shared.txt"));
  }
  return m;
}

TrainedModel train_filler(const MultiCorpus& train, const MultiCorpus& valid, const std::string& pivot,
                          const std::string& other_source, const std::string& fill_target,
                          const SubwordSet& subwords, const TrainConfig& config, const std::string& checkpoint_dir) {
  const std::vector<std::string> sources{pivot, other_source};
  return train_model(train, valid, sources, fill_target, subwords, config, checkpoint_dir);
}

PseudoMap generate_pseudo(const TrainedModel& model, const MultiCorpus& corpus, PseudoScope scope,
                          const SubwordSet& subwords, const PseudoMap& fallback) {
  std::vector<std::size_t> src;
  for (const auto& s : model.sources) src.push_back(corpus.index_of(s));
  const auto tgt = corpus.index_of(model.target);
  std::vector<std::size_t> rows;
  std::vector<std::vector<std::string>> sentences;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto& row = corpus.row(r);
    if (scope == PseudoScope::MissingOnly && usable(row[tgt])) continue;
    std::vector<std::string> texts;
    for (auto l : src) {
      std::string text;
      if (usable(row[l])) text = *row[l].text;
      else if (auto it = fallback.find(r); it != fallback.end()) text = it->second;
      if (split_whitespace(text).empty()) text = std::string(kNullToken);
      texts.push_back(std::move(text));
    }
    rows.push_back(r);
    sentences.push_back(std::move(texts));
  }
  PseudoMap out;
  if (rows.empty()) return out;
  const auto hyps = translate_texts(model.model, subwords.codec(model.sources, model.target), sentences);
  for (std::size_t k = 0; k < rows.size(); ++k) out.emplace(rows[k], hyps[k]);
  return out;
}

MultiCorpus apply_strategy(const MultiCorpus& corpus, const PseudoMap& pseudo, std::string_view language,
                           Strategy strategy) {
  const auto l = corpus.index_of(language);
  if (l == 0) throw ContractError("apply_strategy: the pivot column cannot be augmented");
  const auto lookup = [&](std::size_t r) -> const std::string& {
    const auto it = pseudo.find(r);
    if (it == pseudo.end())
      throw ContractError("apply_strategy: no pseudo-translation for row " + std::to_string(r) + " (" +
                          std::string(language) + ", " + std::string(strategy_name(strategy)) + ")");
    return it->second;
  };
  std::vector<Row> rows = corpus.rows();
  std::vector<Row> added;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& cell = rows[r][l];
    if (!usable(cell)) {
      cell = Cell::pseudo(lookup(r));
    } else if (cell.provenance == Provenance::Original) {
      if (strategy == Strategy::FillInReplace) {
        cell = Cell::pseudo(lookup(r));
      } else if (strategy == Strategy::FillInAdd) {
        Row copy = rows[r];
        copy[l] = Cell::pseudo(lookup(r));
        added.push_back(std::move(copy));
      }
    }
  }
  for (auto& r : added) rows.push_back(std::move(r));
  return corpus.with_rows(std::move(rows));
}

PseudoMap back_translate_baseline(const MultiCorpus& train, const MultiCorpus& valid, const std::string& pivot,
                                  const std::string& fill_target, const SubwordSet& subwords,
                                  const TrainConfig& config, PseudoScope scope, TrainedModel* model_out) {
  const std::vector<std::string> sources{pivot};
  auto model = train_model(train, valid, sources, fill_target, subwords, config);
  auto pseudo = generate_pseudo(model, train, scope, subwords);
  if (model_out) *model_out = std::move(model);
  return pseudo;
}

void PipelineConfig::validate(const MultiCorpus& corpus) const {
  if (corpus.languages().empty() || corpus.languages()[0] != pivot)
    throw ValidationError("pivot '" + pivot + "' must be the first corpus column");
  for (const auto* lang : {&helper, &target})
    if (!corpus.has_language(*lang)) throw ValidationError("language '" + *lang + "' is not a corpus column");
  if (helper == target || helper == pivot || target == pivot)
    throw ValidationError("pivot, helper and target must be distinct");
  if (iterations == 0) throw ValidationError("iterations must be at least 1");
  if (pivot_merges < 0 || shared_merges < 0) throw ValidationError("merge counts must be non-negative");
  try {
    filler_train.validate();
    final_train.validate();
  } catch (const ContractError& e) {
    throw ValidationError(e.what());
  }
}

std::string filled_language(const PipelineConfig& config, std::size_t step) {
  if (step == 0) throw ContractError("steps are numbered from 1");
  return step % 2 == 1 ? config.helper : config.target;
}

ExperimentResult run_pipeline(const PipelineData& data, const PipelineConfig& config, const SubwordSet& subwords,
                              const std::string& out_dir) {
  config.validate(data.train);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  ExperimentResult res;
  const auto scope = scope_for(config.strategy);
  const auto filler_cfg = seeded(config.filler_train, config.seed, "filler");
  const auto h = data.train.index_of(config.helper);

  bool needed = scope == PseudoScope::All;
  for (const auto& row : data.train.rows()) needed = needed || !usable(row[h]);

  if (needed) {
    const auto dir = sub_dir(out_dir, "filler");
    res.filler = in_stage("filler", [&] {
      std::vector<std::string> sources{config.pivot};
      if (config.filler == FillerKind::MultiSource) sources.push_back(config.target);
      return train_model(data.train, data.valid, sources, config.helper, subwords, filler_cfg, dir);
    });
    res.stages.push_back({"filler", "filler", res.filler->report});
    res.pseudo = in_stage("pseudo", [&] { return generate_pseudo(*res.filler, data.train, scope, subwords); });
  } else {
    res.stages.push_back({"filler", "skipped", std::nullopt});
  }
  if (!out_dir.empty()) write_text_file(in_dir(out_dir, "pseudo.tsv"), format_pseudo_audit(res.pseudo, config.helper));
  res.stages.push_back({"pseudo", "pseudo.tsv", std::nullopt});

  res.training_corpus = in_stage("pseudo", [&] {
    return apply_strategy(data.train, res.pseudo, config.helper, config.strategy);
  });
  if (!out_dir.empty()) save_corpus(in_dir(out_dir, "augmented.tsv"), res.training_corpus);

  const std::vector<std::string> sources{config.pivot, config.helper};
  res.model = in_stage("final", [&] {
    return train_model(res.training_corpus, data.valid, sources, config.target, subwords,
                       seeded(config.final_train, config.seed, "final"), sub_dir(out_dir, "model"));
  });
  res.stages.push_back({"final", "model", res.model.report});
  res.evaluation = in_stage("evaluate", [&] {
    return evaluate_model(res.model.model, data.test, sources, config.target, subwords.codec(sources, config.target));
  });

  res.manifest = config.inputs;
  res.manifest["augmented"] = "augmented.tsv";
  add_stage_keys(res.manifest, res.stages);
  add_result_keys(res.manifest, res.evaluation);
  if (!out_dir.empty()) {
    write_evaluation(out_dir, res.evaluation);
    write_key_values(in_dir(out_dir, "manifest.txt"), res.manifest);
  }
  return res;
}

ExperimentResult run_baseline(const PipelineData& data, const PipelineConfig& config, Baseline kind,
                              const SubwordSet& subwords, const std::string& out_dir) {
  config.validate(data.train);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  ExperimentResult res;
  std::vector<std::string> sources{config.pivot};
  if (kind == Baseline::NullFill) {
    sources.push_back(config.helper);
    res.training_corpus = fill_null(data.train, config.helper);
  } else {
    res.training_corpus = data.train;
  }
  res.model = train_model(res.training_corpus, data.valid, sources, config.target, subwords,
                          seeded(config.final_train, config.seed, "final"), sub_dir(out_dir, "model"));
  res.stages.push_back({std::string(baseline_name(kind)), "model", res.model.report});
  res.evaluation = evaluate_model(res.model.model, data.test, sources, config.target,
                                  subwords.codec(sources, config.target));
  res.manifest = config.inputs;
  res.manifest["mode"] = std::string(baseline_name(kind));
  add_stage_keys(res.manifest, res.stages);
  add_result_keys(res.manifest, res.evaluation);
  if (!out_dir.empty()) {
    write_evaluation(out_dir, res.evaluation);
    write_key_values(in_dir(out_dir, "manifest.txt"), res.manifest);
  }
  return res;
}

IterationRecord run_iteration_step(const PipelineData& data, const PipelineConfig& config,
                                   const SubwordSet& subwords, const StepInputs& inputs,
                                   const std::string& out_dir, TrainedModel* model_out, PseudoMap* pseudo_out) {
  config.validate(data.train);
  if (inputs.step < 2) throw ContractError("run_iteration_step: step 1 is the plain pipeline");
  const auto fill = filled_language(config, inputs.step);
  const auto other = fill == config.helper ? config.target : config.helper;
  const auto& gen = inputs.generator;
  if (gen.target != fill || gen.sources != std::vector<std::string>{config.pivot, other})
    throw ContractError("run_iteration_step: step " + std::to_string(inputs.step) + " needs a {" + config.pivot +
                        "," + other + "} -> " + fill + " generator");
  if (!out_dir.empty()) fs::create_directories(out_dir);

  auto pseudo = generate_pseudo(gen, data.train, scope_for(config.strategy), subwords, inputs.previous_pseudo);
  const auto augmented = apply_strategy(data.train, pseudo, fill, config.strategy);
  const std::vector<std::string> sources{config.pivot, fill};
  auto model = train_model(augmented, data.valid, sources, other, subwords,
                           seeded(config.final_train, config.seed, "iter" + std::to_string(inputs.step)),
                           sub_dir(out_dir, "model"));
  const auto ev = evaluate_model(model.model, data.test, sources, other, subwords.codec(sources, other));

  IterationRecord rec{inputs.step, fill, other, ev.report, {}};
  if (!out_dir.empty()) {
    write_text_file(in_dir(out_dir, "pseudo.tsv"), format_pseudo_audit(pseudo, fill));
    save_corpus(in_dir(out_dir, "augmented.tsv"), augmented);
    write_evaluation(out_dir, ev);
    KeyValues kv = config.inputs;
    kv["augmented"] = "augmented.tsv";
    kv["resume.step"] = std::to_string(inputs.step);
    kv["resume.generator"] = inputs.generator_path;
    kv["resume.previous_pseudo"] = inputs.previous_pseudo_path;
    kv["filled"] = fill;
    add_stage_keys(kv, {{"pseudo", "pseudo.tsv", std::nullopt}, {"final", "model", model.report}});
    add_result_keys(kv, ev);
    rec.manifest = in_dir(out_dir, "manifest.txt");
    write_key_values(rec.manifest, kv);
  }
  if (model_out) *model_out = std::move(model);
  if (pseudo_out) *pseudo_out = std::move(pseudo);
  return rec;
}

std::vector<IterationRecord> iterative_augment(const PipelineData& data, const PipelineConfig& config,
                                               const SubwordSet& subwords, std::size_t n_steps,
                                               const std::string& out_dir) {
  if (n_steps == 0) throw ContractError("iterative_augment: need at least one step");
  const auto step_dir = [&](std::size_t k) { return sub_dir(out_dir, "step" + std::to_string(k)); };
  // each step's manifest reruns that step alone
  auto step_config = config;
  if (step_config.inputs.contains("iterations")) step_config.inputs["iterations"] = "1";
  std::vector<IterationRecord> records;
  auto first = run_pipeline(data, step_config, subwords, step_dir(1));
  records.push_back({1, config.helper, config.target, first.evaluation.report,
                     out_dir.empty() ? std::string() : in_dir(step_dir(1), "manifest.txt")});
  StepInputs in;
  in.generator = std::move(first.model);
  in.previous_pseudo = std::move(first.pseudo);
  for (std::size_t k = 2; k <= n_steps; ++k) {
    in.step = k;
    in.generator_path = "../step" + std::to_string(k - 1) + "/model";
    in.previous_pseudo_path = "../step" + std::to_string(k - 1) + "/pseudo.tsv";
    TrainedModel next;
    PseudoMap pseudo;
    records.push_back(run_iteration_step(data, step_config, subwords, in, step_dir(k), &next, &pseudo));
    in.generator = std::move(next);
    in.previous_pseudo = std::move(pseudo);
  }
  if (!out_dir.empty()) {
    std::string table = "step\tfilled\ttarget\tbleu\n";
    for (const auto& r : records)
      table += std::to_string(r.step) + '\t' + r.filled_language + '\t' + r.target_language + '\t' +
               fmt_double(r.bleu.bleu) + '\n';
    write_text_file(in_dir(out_dir, "iterations.tsv"), table);
  }
  return records;
}

std::string format_pseudo_audit(const PseudoMap& pseudo, const std::string& language) {
  std::string out;
  for (const auto& [row, text] : pseudo) out += std::to_string(row) + '\t' + language + '\t' + text + '\n';
  return out;
}

PseudoMap parse_pseudo_audit(const std::string& text, const std::string& language, const std::string& origin) {
  PseudoMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto fields = split_on(line, '\t');
    const auto where = origin + ":" + std::to_string(n);
    if (fields.size() != 3) throw ParseError(where + ": expected row_id, language and text");
    if (fields[1] != language) throw ParseError(where + ": language " + fields[1] + ", expected " + language);
    std::size_t row = 0;
    try {
      std::size_t used = 0;
      row = std::stoull(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(where + ": bad row id '" + fields[0] + "'");
    }
    if (!out.emplace(row, fields[2]).second) throw ParseError(where + ": duplicate row " + fields[0]);
  }
  return out;
}

}  // namespace msnmt
