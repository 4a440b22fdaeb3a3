#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace genatk {

// Fixed 25-symbol vocabulary: five special tokens followed by the twenty
// standard amino acids in alphabetical one-letter order.
namespace vocab {

inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kMask = 1;
inline constexpr std::size_t kCls = 2;
inline constexpr std::size_t kEos = 3;
inline constexpr std::size_t kUnk = 4;
inline constexpr std::size_t kFirstAmino = 5;
inline constexpr std::size_t kSize = 25;
inline constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";

std::optional<std::size_t> amino_id(char c);
bool is_amino(std::size_t id);
// Single display character per id; specials render as '<', '#', '^', '$', 'X'.
char symbol(std::size_t id);
std::string token_name(std::size_t id);
// Stable digest of the id↔symbol table, stored in checkpoints.
std::string digest();

}  // namespace vocab

// A validated token string. Ids are in-range and never PAD.
class TokenSequence {
 public:
  TokenSequence() = default;
  explicit TokenSequence(std::vector<std::size_t> ids);

  // Strict parse: any character outside the amino-acid alphabet throws.
  static TokenSequence from_string(std::string_view residues);
  // Lenient parse: unknown characters become UNK and are counted.
  static TokenSequence from_string_lenient(std::string_view residues, std::size_t& unknown_count);

  const std::vector<std::size_t>& ids() const { return ids_; }
  std::size_t length() const { return ids_.size(); }
  std::size_t operator[](std::size_t i) const { return ids_[i]; }
  std::string to_string() const;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
  friend auto operator<=>(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<std::size_t> ids_;
};

}  // namespace genatk
