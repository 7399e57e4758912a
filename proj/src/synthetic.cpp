#include "msnmt/synthetic.hpp"

#include <numeric>

#include "msnmt/errors.hpp"
#include "msnmt/rng.hpp"

namespace msnmt {

namespace {

std::string symbol(char base, std::size_t k) {
  if (k < 26) return std::string(1, static_cast<char>(base + k));
  return std::string(1, base) + std::to_string(k);
}

std::string render(const std::vector<std::size_t>& seq, const std::vector<std::size_t>& map, char base) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += symbol(base, map[seq[i]]);
  }
  return out;
}

}  // namespace

PipelineData make_synthetic(const SyntheticSpec& spec) {
  if (spec.alphabet == 0 || spec.min_len == 0 || spec.min_len > spec.max_len)
    throw ContractError("make_synthetic: bad alphabet or length range");
  Rng rng(spec.seed);
  std::vector<std::size_t> identity(spec.alphabet);
  std::iota(identity.begin(), identity.end(), 0);
  auto pivot_map = identity;
  auto helper_map = identity;
  rng.shuffle(pivot_map);
  rng.shuffle(helper_map);

  const std::vector<std::string> langs(spec.languages.begin(), spec.languages.end());
  const auto make = [&](std::size_t n, bool drop) {
    MultiCorpus c(langs);
    for (std::size_t r = 0; r < n; ++r) {
      const auto len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
      std::vector<std::size_t> seq(len);
      for (auto& s : seq) s = rng.below(spec.alphabet);
      std::vector<std::size_t> rev(seq.rbegin(), seq.rend());
      Row row{Cell::original(render(seq, pivot_map, 'A')), Cell::original(render(rev, helper_map, 'a')),
              Cell::original(render(seq, identity, 'a'))};
      if (drop) {
        if (rng.uniform() < spec.helper_drop) row[1] = Cell::missing();
        if (rng.uniform() < spec.target_drop) row[2] = Cell::missing();
      }
      c.add_row(std::move(row));
    }
    return c;
  };
  PipelineData data;
  data.train = make(spec.train_rows, true);
  data.valid = make(spec.valid_rows, false);
  data.test = make(spec.test_rows, false);
  return data;
}

}  // namespace msnmt
