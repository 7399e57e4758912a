#include "msnmt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "msnmt/errors.hpp"

namespace msnmt {

std::string BleuReport::format() const {
  std::ostringstream out;
  out.precision(10);
  out << "BLEU=" << bleu << '\n';
  for (std::size_t n = 0; n < 4; ++n)
    out << "p" << n + 1 << '=' << precisions[n] << " (" << matches[n] << '/' << totals[n] << ")\n";
  out << "BP=" << brevity_penalty << '\n'
      << "hyp_len=" << hyp_length << '\n'
      << "ref_len=" << ref_length << '\n';
  return out.str();
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Ngram(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  for (auto w : split_whitespace(line)) out.emplace_back(w);
  return out;
}

}  // namespace

BleuReport bleu(std::span<const std::vector<std::string>> hypotheses,
                std::span<const std::vector<std::string>> references) {
  if (hypotheses.size() != references.size())
    throw ContractError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                        std::to_string(references.size()) + " references");
  if (hypotheses.empty()) throw ContractError("bleu: need at least one sentence pair");
  BleuReport r;
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const auto& hyp = hypotheses[k];
    const auto& ref = references[k];
    r.hyp_length += hyp.size();
    r.ref_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hc = ngram_counts(hyp, n);
      const auto rc = ngram_counts(ref, n);
      for (const auto& [gram, count] : hc) {
        const auto it = rc.find(gram);
        if (it != rc.end()) r.matches[n - 1] += std::min(count, it->second);
        r.totals[n - 1] += count;
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.precisions[n] == 0.0) zero = true;
    else log_sum += std::log(r.precisions[n]);
  }
  if (r.hyp_length == 0) r.brevity_penalty = 0.0;
  else if (r.hyp_length >= r.ref_length) r.brevity_penalty = 1.0;
  else r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  r.bleu = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

BleuReport bleu_lines(std::span<const std::string> hypotheses, std::span<const std::string> references) {
  std::vector<std::vector<std::string>> h, rf;
  for (const auto& s : hypotheses) h.push_back(tokenize(s));
  for (const auto& s : references) rf.push_back(tokenize(s));
  return bleu(h, rf);
}

std::vector<std::string> translate_texts(const MultiEncoderModel& model, const Codec& codec,
                                         std::span<const std::vector<std::string>> sentences,
                                         std::size_t batch_size) {
  if (codec.sources.size() != model.n_sources() || codec.target == nullptr)
    throw ContractError("translate_texts: codec does not match the model's encoders");
  if (batch_size == 0) throw ContractError("translate_texts: batch_size must be positive");
  std::vector<std::string> out;
  out.reserve(sentences.size());
  for (std::size_t start = 0; start < sentences.size(); start += batch_size) {
    const auto n = std::min(batch_size, sentences.size() - start);
    std::vector<std::vector<std::vector<int>>> batch;
    std::vector<std::size_t> caps;
    for (std::size_t k = start; k < start + n; ++k) {
      const auto& texts = sentences[k];
      if (texts.size() != model.n_sources())
        throw ContractError("translate_texts: sentence " + std::to_string(k) + " has " +
                            std::to_string(texts.size()) + " sources");
      std::vector<std::vector<int>> ids;
      for (std::size_t i = 0; i < texts.size(); ++i) {
        auto seg = codec.sources[i]->segment(texts[i]);
        if (seg.empty())
          throw ContractError("translate_texts: sentence " + std::to_string(k) + " source " + std::to_string(i) +
                              " is empty");
        ids.push_back(std::move(seg));
      }
      caps.push_back(default_max_len(ids));
      batch.push_back(std::move(ids));
    }
    for (const auto& h : translate_batch(model, batch, caps)) out.push_back(codec.target->desegment(h.tokens));
  }
  return out;
}

Evaluation evaluate_model(const MultiEncoderModel& model, const MultiCorpus& test,
                          std::span<const std::string> source_languages, const std::string& target_language,
                          const Codec& codec) {
  std::vector<std::size_t> src;
  for (const auto& l : source_languages) src.push_back(test.index_of(l));
  const auto tgt = test.index_of(target_language);
  std::vector<std::vector<std::string>> sentences;
  Evaluation ev;
  for (std::size_t r = 0; r < test.size(); ++r) {
    const auto& row = test.row(r);
    std::vector<std::string> texts;
    for (auto l : src) {
      if (!row[l].present() || row[l].provenance == Provenance::NullFilled)
        throw ContractError("evaluate_model: test row " + std::to_string(r) + " lacks " + test.languages()[l]);
      texts.push_back(*row[l].text);
    }
    if (!row[tgt].present() || row[tgt].provenance == Provenance::NullFilled)
      throw ContractError("evaluate_model: test row " + std::to_string(r) + " lacks " + target_language);
    ev.references.push_back(*row[tgt].text);
    sentences.push_back(std::move(texts));
  }
  if (sentences.empty()) throw ContractError("evaluate_model: empty test corpus");
  ev.hypotheses = translate_texts(model, codec, sentences);
  ev.report = bleu_lines(ev.hypotheses, ev.references);
  return ev;
}

}  // namespace msnmt
