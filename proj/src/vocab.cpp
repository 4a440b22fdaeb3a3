#include "genatk/vocab.hpp"

#include "genatk/digest.hpp"
#include "genatk/errors.hpp"

namespace genatk {

namespace vocab {

std::optional<std::size_t> amino_id(char c) {
  const auto pos = kAminoAcids.find(c);
  if (pos == std::string_view::npos) return std::nullopt;
  return kFirstAmino + pos;
}

bool is_amino(std::size_t id) { return id >= kFirstAmino && id < kSize; }

char symbol(std::size_t id) {
  switch (id) {
    case kPad: return '<';
    case kMask: return '#';
    case kCls: return '^';
    case kEos: return '$';
    case kUnk: return 'X';
    default: break;
  }
  if (!is_amino(id)) throw VocabError("token id " + std::to_string(id) + " outside vocabulary");
  return kAminoAcids[id - kFirstAmino];
}

std::string token_name(std::size_t id) {
  switch (id) {
    case kPad: return "<pad>";
    case kMask: return "<mask>";
    case kCls: return "<cls>";
    case kEos: return "<eos>";
    case kUnk: return "<unk>";
    default: return std::string(1, symbol(id));
  }
}

std::string digest() {
  std::string table;
  for (std::size_t id = 0; id < kSize; ++id) table += std::to_string(id) + "=" + token_name(id) + ";";
  return sha256_hex(table);
}

}  // namespace vocab

TokenSequence::TokenSequence(std::vector<std::size_t> ids) : ids_(std::move(ids)) {
  if (ids_.empty()) throw VocabError("token sequence must contain at least one token");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] >= vocab::kSize) {
      throw VocabError("token id " + std::to_string(ids_[i]) + " at position " + std::to_string(i) +
                       " outside vocabulary of " + std::to_string(vocab::kSize));
    }
    if (ids_[i] == vocab::kPad) {
      throw VocabError("PAD token inside sequence at position " + std::to_string(i));
    }
  }
}

TokenSequence TokenSequence::from_string(std::string_view residues) {
  std::vector<std::size_t> ids;
  ids.reserve(residues.size());
  for (std::size_t i = 0; i < residues.size(); ++i) {
    auto id = vocab::amino_id(residues[i]);
    if (!id) {
      throw VocabError(std::string("unknown residue '") + residues[i] + "' at position " +
                       std::to_string(i));
    }
    ids.push_back(*id);
  }
  return TokenSequence(std::move(ids));
}

TokenSequence TokenSequence::from_string_lenient(std::string_view residues,
                                                 std::size_t& unknown_count) {
  std::vector<std::size_t> ids;
  ids.reserve(residues.size());
  for (char c : residues) {
    auto id = vocab::amino_id(c);
    if (!id) ++unknown_count;
    ids.push_back(id.value_or(vocab::kUnk));
  }
  return TokenSequence(std::move(ids));
}

std::string TokenSequence::to_string() const {
  std::string out;
  out.reserve(ids_.size());
  for (auto id : ids_) out += vocab::symbol(id);
  return out;
}

}  // namespace genatk
