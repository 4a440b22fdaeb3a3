#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "genatk/variant.hpp"

namespace genatk {

// Planted-motif generator settings. Every wild type is i.i.d. background
// residues with `motif` inserted at one offset (centred unless `motif_offset`
// is set, or drawn per sequence with `random_offset`); each mutant carries one
// substitution, placed inside the motif with probability `inside_rate`.
// Label = mutation inside motif, then flipped with probability `label_noise`.
struct SyntheticSpec {
  std::size_t n_pairs = 1000;
  std::size_t seq_len = 48;
  std::string motif = "WCHKY";
  double label_noise = 0.0;
  double inside_rate = 0.5;
  std::optional<std::size_t> motif_offset;
  bool random_offset = false;

  std::size_t fixed_offset() const;

  void validate() const;
};

std::vector<VariantPair> generate(const SyntheticSpec& spec, std::uint64_t seed);

// Wild types of `spec` without mutants, for MLM pretraining corpora.
std::vector<TokenSequence> generate_wild_types(const SyntheticSpec& spec, std::uint64_t seed);

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<VariantPair> pairs;
  std::size_t unknown_residues = 0;  // characters mapped to UNK
  std::vector<RejectedRow> rejected;
};

inline constexpr const char* kTsvHeader = "wt_seq\tmut_seq\tlabel";

// Header `wt_seq<TAB>mut_seq<TAB>label`, LF line endings, labels "0"/"1".
LoadResult load_tsv(const std::filesystem::path& path);
void save_tsv(const std::filesystem::path& path, const std::vector<VariantPair>& pairs);
std::string to_tsv(const std::vector<VariantPair>& pairs);

struct DatasetSplit {
  std::vector<VariantPair> train;
  std::vector<VariantPair> test;
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

// Class-stratified, seeded split; `ratio` is the training share.
DatasetSplit split(const std::vector<VariantPair>& pairs, double ratio, std::uint64_t seed);

// ⌈fraction·N⌉ pairs drawn without replacement, allocated across classes by
// largest remainder so class proportions follow the input.
std::vector<VariantPair> stratified_subsample(const std::vector<VariantPair>& pairs,
                                              double fraction, std::uint64_t seed);

}  // namespace genatk
