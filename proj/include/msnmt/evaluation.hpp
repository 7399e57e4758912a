#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msnmt/bpe.hpp"
#include "msnmt/corpus.hpp"
#include "msnmt/seq2seq.hpp"

namespace msnmt {

struct BleuReport {
  double bleu = 0.0;  // percentage
  std::array<double, 4> precisions{};
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  // key=value lines
  std::string format() const;
};

// Corpus-level BLEU-4 with clipped n-gram counts, one reference per
// hypothesis and no smoothing.
BleuReport bleu(std::span<const std::vector<std::string>> hypotheses,
                std::span<const std::vector<std::string>> references);
// Whitespace-tokenizes each line first.
BleuReport bleu_lines(std::span<const std::string> hypotheses, std::span<const std::string> references);

struct Codec {
  std::vector<const SubwordModel*> sources;
  const SubwordModel* target = nullptr;
};

// Segments each sentence's source texts, decodes greedily with the default
// length cap, and desegments. sentences[k][i] feeds encoder i.
std::vector<std::string> translate_texts(const MultiEncoderModel& model, const Codec& codec,
                                         std::span<const std::vector<std::string>> sentences,
                                         std::size_t batch_size = 64);

struct Evaluation {
  BleuReport report;
  std::vector<std::string> hypotheses;
  std::vector<std::string> references;
};

// Translates every test row from source_languages and scores against the
// target cells. Rows must hold Original or Pseudo text in all those languages.
Evaluation evaluate_model(const MultiEncoderModel& model, const MultiCorpus& test,
                          std::span<const std::string> source_languages, const std::string& target_language,
                          const Codec& codec);

}  // namespace msnmt
