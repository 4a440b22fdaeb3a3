#include "genatk/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "genatk/errors.hpp"
#include "genatk/io.hpp"

namespace genatk {

void VariantPair::validate(bool allow_identical) const {
  if (wt.length() != mut.length()) {
    throw DataError("wild-type length " + std::to_string(wt.length()) + " differs from mutant " +
                    std::to_string(mut.length()));
  }
  if (label != 0 && label != 1) throw DataError("label must be 0 or 1, got " + std::to_string(label));
  if (!allow_identical && wt == mut) throw DataError("wild type and mutant are identical");
}

std::size_t VariantPair::hamming_distance() const {
  std::size_t d = 0;
  const std::size_t n = std::min(wt.length(), mut.length());
  for (std::size_t i = 0; i < n; ++i) d += wt[i] != mut[i] ? 1 : 0;
  return d + std::max(wt.length(), mut.length()) - n;
}

void SyntheticSpec::validate() const {
  if (seq_len == 0) throw ConfigError("seq_len must be positive");
  if (motif.empty() || motif.size() >= seq_len) {
    throw ConfigError("motif length must be in [1, seq_len)");
  }
  for (char c : motif) {
    if (!vocab::amino_id(c)) throw ConfigError(std::string("motif residue '") + c + "' is not an amino acid");
  }
  if (!(label_noise >= 0.0 && label_noise < 0.5)) throw ConfigError("label noise must lie in [0, 0.5)");
  if (!(inside_rate > 0.0 && inside_rate < 1.0)) throw ConfigError("inside_rate must lie in (0, 1)");
  if (motif_offset && *motif_offset + motif.size() > seq_len) {
    throw ConfigError("motif at offset " + std::to_string(*motif_offset) + " runs past seq_len");
  }
  if (motif_offset && random_offset) throw ConfigError("motif_offset and random_offset are exclusive");
}

std::size_t SyntheticSpec::fixed_offset() const {
  return motif_offset.value_or((seq_len - motif.size()) / 2);
}

namespace {

std::vector<std::size_t> random_wild_type(const SyntheticSpec& spec, std::mt19937_64& rng,
                                          std::size_t& offset) {
  std::uniform_int_distribution<std::size_t> residue(0, vocab::kAminoAcids.size() - 1);
  std::uniform_int_distribution<std::size_t> place(0, spec.seq_len - spec.motif.size());
  std::vector<std::size_t> ids(spec.seq_len);
  for (auto& id : ids) id = vocab::kFirstAmino + residue(rng);
  offset = spec.random_offset ? place(rng) : spec.fixed_offset();
  for (std::size_t k = 0; k < spec.motif.size(); ++k) ids[offset + k] = *vocab::amino_id(spec.motif[k]);
  return ids;
}

}  // namespace

std::vector<VariantPair> generate(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> other_residue(0, vocab::kAminoAcids.size() - 2);
  const std::size_t k = spec.motif.size();

  std::vector<VariantPair> pairs;
  pairs.reserve(spec.n_pairs);
  for (std::size_t n = 0; n < spec.n_pairs; ++n) {
    std::size_t offset = 0;
    std::vector<std::size_t> wt = random_wild_type(spec, rng, offset);

    const bool inside = unit(rng) < spec.inside_rate;
    std::size_t pos;
    if (inside) {
      pos = offset + std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
    } else {
      // Index among the seq_len - k positions outside the motif span.
      std::size_t j = std::uniform_int_distribution<std::size_t>(0, spec.seq_len - k - 1)(rng);
      pos = j < offset ? j : j + k;
    }
    std::vector<std::size_t> mut = wt;
    std::size_t sub = vocab::kFirstAmino + other_residue(rng);
    if (sub >= wt[pos]) ++sub;
    mut[pos] = sub;

    int label = inside ? 1 : 0;
    if (spec.label_noise > 0.0 && unit(rng) < spec.label_noise) label = 1 - label;
    pairs.push_back(VariantPair{TokenSequence(std::move(wt)), TokenSequence(std::move(mut)), label});
  }
  return pairs;
}

std::vector<TokenSequence> generate_wild_types(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<TokenSequence> out;
  out.reserve(spec.n_pairs);
  for (std::size_t n = 0; n < spec.n_pairs; ++n) {
    std::size_t offset = 0;
    out.emplace_back(random_wild_type(spec, rng, offset));
  }
  return out;
}

LoadResult load_tsv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileMissingError("dataset not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw FileMissingError("cannot open dataset " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTsvHeader) {
    throw FormatError(path.string() + ": malformed header, expected wt_seq<TAB>mut_seq<TAB>label");
  }

  LoadResult result;
  std::size_t line_no = 1;
  std::size_t data_rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++data_rows;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3) {
      result.rejected.push_back({line_no, "expected 3 tab-separated fields"});
      continue;
    }
    if (fields[2] != "0" && fields[2] != "1") {
      result.rejected.push_back({line_no, "label '" + fields[2] + "' is not 0 or 1"});
      continue;
    }
    if (fields[0].empty() || fields[1].empty()) {
      result.rejected.push_back({line_no, "empty sequence"});
      continue;
    }
    if (fields[0].size() != fields[1].size()) {
      result.rejected.push_back({line_no, "wild-type and mutant lengths differ"});
      continue;
    }
    VariantPair pair{TokenSequence::from_string_lenient(fields[0], result.unknown_residues),
                     TokenSequence::from_string_lenient(fields[1], result.unknown_residues),
                     fields[2] == "1" ? 1 : 0};
    result.pairs.push_back(std::move(pair));
  }
  if (data_rows == 0) throw EmptyDataError(path.string() + ": no data rows");
  if (result.pairs.empty()) {
    throw DataError(path.string() + ": all " + std::to_string(data_rows) + " rows rejected (first at line " +
                    std::to_string(result.rejected.front().line) + ": " + result.rejected.front().reason + ")");
  }
  return result;
}

std::string to_tsv(const std::vector<VariantPair>& pairs) {
  std::string out = std::string(kTsvHeader) + "\n";
  for (const auto& p : pairs) {
    out += p.wt.to_string() + "\t" + p.mut.to_string() + "\t" + std::to_string(p.label) + "\n";
  }
  return out;
}

void save_tsv(const std::filesystem::path& path, const std::vector<VariantPair>& pairs) {
  write_file_atomic(path, to_tsv(pairs));
}

namespace {

std::array<std::vector<std::size_t>, 2> class_indices(const std::vector<VariantPair>& pairs) {
  std::array<std::vector<std::size_t>, 2> idx;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].label != 0 && pairs[i].label != 1) throw DataError("label outside {0,1}");
    idx[static_cast<std::size_t>(pairs[i].label)].push_back(i);
  }
  return idx;
}

}  // namespace

DatasetSplit split(const std::vector<VariantPair>& pairs, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  auto idx = class_indices(pairs);
  for (int c = 0; c < 2; ++c) {
    if (idx[c].size() < 2) {
      throw StratificationError("class " + std::to_string(c) + " has " + std::to_string(idx[c].size()) +
                                " member(s); stratified split needs at least 2");
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : idx) {
    std::shuffle(members.begin(), members.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(members.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  DatasetSplit out;
  out.ratio = ratio;
  out.seed = seed;
  for (auto i : train_idx) out.train.push_back(pairs[i]);
  for (auto i : test_idx) out.test.push_back(pairs[i]);
  return out;
}

std::vector<VariantPair> stratified_subsample(const std::vector<VariantPair>& pairs,
                                              double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  const std::size_t n = pairs.size();
  const auto target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  auto idx = class_indices(pairs);

  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(target) * static_cast<double>(idx[c].size()) / static_cast<double>(n);
    take[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(take[c]);
    assigned += take[c];
  }
  while (assigned < target) {
    const int c = remainder[0] >= remainder[1] ? 0 : 1;
    const int pick = take[c] < idx[c].size() ? c : 1 - c;
    ++take[pick];
    remainder[pick] = -1.0;
    ++assigned;
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (int c = 0; c < 2; ++c) {
    std::shuffle(idx[c].begin(), idx[c].end(), rng);
    chosen.insert(chosen.end(), idx[c].begin(), idx[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<VariantPair> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(pairs[i]);
  return out;
}

}  // namespace genatk
