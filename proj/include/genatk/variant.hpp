#pragma once

#include "genatk/vocab.hpp"

namespace genatk {

// Wild-type / mutant pair with a binary label (0 benign, 1 pathogenic).
struct VariantPair {
  TokenSequence wt;
  TokenSequence mut;
  int label = 0;

  // Throws DataError on length mismatch or a label outside {0,1}. Identical
  // sequences are accepted only when `allow_identical` is set.
  void validate(bool allow_identical = false) const;
  std::size_t hamming_distance() const;

  friend bool operator==(const VariantPair&, const VariantPair&) = default;
  friend auto operator<=>(const VariantPair&, const VariantPair&) = default;
};

}  // namespace genatk
