#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msnmt/bpe.hpp"
#include "msnmt/corpus.hpp"
#include "msnmt/evaluation.hpp"
#include "msnmt/kvfile.hpp"
#include "msnmt/trainer.hpp"

namespace msnmt {

enum class Strategy { FillIn, FillInReplace, FillInAdd };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
inline constexpr std::string_view kStrategyNames = "fill_in, fill_in_replace, fill_in_add";

enum class PseudoScope { MissingOnly, All };

// How the helper language's pseudo-translations are produced.
enum class FillerKind {
  MultiSource,  // {pivot, target} -> helper, missing target cells null-filled
  OneToOne,     // pivot -> helper (back-translation baseline)
};

std::string_view filler_name(FillerKind k);
std::optional<FillerKind> parse_filler(std::string_view name);

// Row index -> pseudo-translation text.
using PseudoMap = std::map<std::size_t, std::string>;

// One model for the pivot language and one shared by the other languages.
struct SubwordSet {
  std::string pivot_language;
  SubwordModel pivot;
  SubwordModel shared;

  const SubwordModel& for_language(std::string_view lang) const {
    return lang == pivot_language ? pivot : shared;
  }
  Codec codec(std::span<const std::string> sources, const std::string& target) const;
};

// The shared model is trained on the Original cells of all non-pivot languages.
SubwordSet train_subwords(const MultiCorpus& corpus, int pivot_merges, int shared_merges);

// Training pairs from rows whose target cell holds Original or Pseudo text.
// Missing (or null-filled, or empty) source cells become the single null token.
std::vector<Example> make_examples(const MultiCorpus& corpus, std::span<const std::string> sources,
                                   const std::string& target, const SubwordSet& subwords);

struct TrainedModel {
  MultiEncoderModel model;
  TrainReport report;
  std::vector<std::string> sources;
  std::string target;
};

// Fresh model for the given languages, trained on `train`; early stopping
// uses the rows of `valid` complete in all of them.
TrainedModel train_model(const MultiCorpus& train, const MultiCorpus& valid, std::span<const std::string> sources,
                         const std::string& target, const SubwordSet& subwords, const TrainConfig& config,
                         const std::string& checkpoint_dir = {});

void save_trained_model(const std::string& dir, const TrainedModel& m, const SubwordSet& subwords);

// Two-encoder {pivot, other_source} -> fill_target model on the rows where
// fill_target is present.
TrainedModel train_filler(const MultiCorpus& train, const MultiCorpus& valid, const std::string& pivot,
                          const std::string& other_source, const std::string& fill_target,
                          const SubwordSet& subwords, const TrainConfig& config,
                          const std::string& checkpoint_dir = {});

// Pseudo-translations into model.target for the rows in scope. Source cells
// that are missing are taken from `fallback` when it has the row, and are
// null-filled otherwise.
PseudoMap generate_pseudo(const TrainedModel& model, const MultiCorpus& corpus, PseudoScope scope,
                          const SubwordSet& subwords, const PseudoMap& fallback = {});

MultiCorpus apply_strategy(const MultiCorpus& corpus, const PseudoMap& pseudo, std::string_view language,
                           Strategy strategy);

PseudoScope scope_for(Strategy s);

// One-to-one pivot -> fill_target model trained on the complete pairs, then
// pseudo-translations for the rows in scope.
PseudoMap back_translate_baseline(const MultiCorpus& train, const MultiCorpus& valid, const std::string& pivot,
                                  const std::string& fill_target, const SubwordSet& subwords,
                                  const TrainConfig& config, PseudoScope scope, TrainedModel* model_out = nullptr);

struct PipelineConfig {
  std::string pivot;
  std::string helper;
  std::string target;
  Strategy strategy = Strategy::FillIn;
  FillerKind filler = FillerKind::MultiSource;
  TrainConfig filler_train;
  TrainConfig final_train;
  std::size_t iterations = 1;
  std::uint64_t seed = 1;
  int pivot_merges = 500;
  int shared_merges = 500;
  // Copied into every manifest written (configuration and input paths).
  KeyValues inputs;

  void validate(const MultiCorpus& corpus) const;
};

struct PipelineData {
  MultiCorpus train;
  MultiCorpus valid;
  MultiCorpus test;
};

struct StageRecord {
  std::string name;
  std::string artifact;  // relative to the output directory
  std::optional<TrainReport> report;
};

struct ExperimentResult {
  TrainedModel model;
  Evaluation evaluation;
  std::vector<StageRecord> stages;
  MultiCorpus training_corpus;
  PseudoMap pseudo;
  std::optional<TrainedModel> filler;
  KeyValues manifest;
};

// Writes artifacts below out_dir when it is non-empty.
ExperimentResult run_pipeline(const PipelineData& data, const PipelineConfig& config, const SubwordSet& subwords,
                              const std::string& out_dir = {});

enum class Baseline { OneToOne, NullFill };
std::string_view baseline_name(Baseline b);

// one_to_one: pivot -> target; null_fill: {pivot, helper} -> target with
// missing helper cells null-filled.
ExperimentResult run_baseline(const PipelineData& data, const PipelineConfig& config, Baseline kind,
                              const SubwordSet& subwords, const std::string& out_dir = {});

struct IterationRecord {
  std::size_t step = 0;
  std::string filled_language;
  std::string target_language;
  BleuReport bleu;
  std::string manifest;  // path of the step manifest, empty when not written
};

// Step 1 is run_pipeline. Step k > 1 regenerates pseudo-translations of the
// language produced by step k-1's model (helper on odd steps, target on even
// ones), retrains the opposite-direction model from scratch, and evaluates it.
std::vector<IterationRecord> iterative_augment(const PipelineData& data, const PipelineConfig& config,
                                               const SubwordSet& subwords, std::size_t n_steps,
                                               const std::string& out_dir = {});

// Inputs of one iterative step beyond the first, so a step can be rerun alone.
struct StepInputs {
  std::size_t step = 2;
  TrainedModel generator;
  PseudoMap previous_pseudo;
  // Recorded in the step manifest as resume.generator / resume.previous_pseudo.
  std::string generator_path;
  std::string previous_pseudo_path;
};

// Language filled at a step: the helper on odd steps, the target on even ones.
std::string filled_language(const PipelineConfig& config, std::size_t step);

IterationRecord run_iteration_step(const PipelineData& data, const PipelineConfig& config,
                                   const SubwordSet& subwords, const StepInputs& inputs,
                                   const std::string& out_dir, TrainedModel* model_out = nullptr,
                                   PseudoMap* pseudo_out = nullptr);

// "row_id\tlanguage\ttext" lines.
std::string format_pseudo_audit(const PseudoMap& pseudo, const std::string& language);
PseudoMap parse_pseudo_audit(const std::string& text, const std::string& language, const std::string& origin);

// Reads a checkpoint written by save_trained_model.
TrainedModel load_trained_model(const std::string& dir, SubwordSet* subwords = nullptr);

}  // namespace msnmt
