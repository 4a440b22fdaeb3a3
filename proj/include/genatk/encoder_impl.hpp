#pragma once

#include <random>

namespace genatk {

template <typename Rng>
MaskedExample make_masked_example(const TokenSequence& seq, double mask_rate, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> residue(0, vocab::kAminoAcids.size() - 1);
  std::uniform_int_distribution<std::size_t> any_pos(0, seq.length() - 1);

  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (unit(rng) < mask_rate) positions.push_back(i);
  }
  if (positions.empty()) positions.push_back(any_pos(rng));

  std::vector<std::size_t> ids = seq.ids();
  std::vector<std::size_t> targets;
  targets.reserve(positions.size());
  for (auto p : positions) {
    targets.push_back(ids[p]);
    const double r = unit(rng);
    if (r < 0.8) {
      ids[p] = vocab::kMask;
    } else if (r < 0.9) {
      ids[p] = vocab::kFirstAmino + residue(rng);
    }
  }
  return MaskedExample{TokenSequence(std::move(ids)), std::move(positions), std::move(targets)};
}

}  // namespace genatk
