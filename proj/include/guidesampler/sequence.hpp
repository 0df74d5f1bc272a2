#pragma once

#include <compare>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace guidesampler {

using Token = int;

/// Real symbols are 0..S-1; the mask sentinel is S.
class Alphabet {
 public:
  explicit Alphabet(int size);

  int size() const noexcept { return size_; }
  Token mask() const noexcept { return size_; }
  bool is_real(Token t) const noexcept { return t >= 0 && t < size_; }

  /// Letters 'A'.. for real symbols (S <= 26), '?' for the mask.
  char symbol(Token t) const;
  Token parse(char c) const;

 private:
  int size_;
};

/// Clean sequence: every token is a real symbol.
class TokenSequence {
 public:
  TokenSequence() = default;
  TokenSequence(std::vector<Token> tokens, int alphabet_size);

  int length() const noexcept { return static_cast<int>(tokens_.size()); }
  int alphabet_size() const noexcept { return alphabet_size_; }
  Token operator[](int i) const { return tokens_[static_cast<std::size_t>(i)]; }
  std::span<const Token> tokens() const noexcept { return tokens_; }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
  friend auto operator<=>(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<Token> tokens_;
  int alphabet_size_ = 0;
};

/// Partially masked sequence x_t. Entries equal to alphabet_size() are masked.
class MaskedSequence {
 public:
  MaskedSequence() = default;
  MaskedSequence(std::vector<Token> tokens, int alphabet_size);
  explicit MaskedSequence(const TokenSequence& clean);

  static MaskedSequence fully_masked(int length, int alphabet_size);

  int length() const noexcept { return static_cast<int>(tokens_.size()); }
  int alphabet_size() const noexcept { return alphabet_size_; }
  Token mask() const noexcept { return alphabet_size_; }
  Token operator[](int i) const { return tokens_[static_cast<std::size_t>(i)]; }
  std::span<const Token> tokens() const noexcept { return tokens_; }

  bool is_masked(int i) const { return (*this)[i] == alphabet_size_; }
  int masked_count() const noexcept;
  bool is_clean() const noexcept { return masked_count() == 0; }
  std::vector<int> masked_positions() const;
  std::vector<int> unmasked_positions() const;

  /// Copy with position `pos` set to `token` (a real symbol or the mask).
  MaskedSequence with(int pos, Token token) const;
  void set(int pos, Token token);
  TokenSequence to_clean() const;

  friend bool operator==(const MaskedSequence&, const MaskedSequence&) = default;

 private:
  std::vector<Token> tokens_;
  int alphabet_size_ = 0;
};

std::string to_string(const TokenSequence& x);
std::string to_string(const MaskedSequence& x);
TokenSequence parse_sequence(std::string_view text, int alphabet_size);
MaskedSequence parse_masked(std::string_view text, int alphabet_size);

int hamming_distance(const TokenSequence& a, const TokenSequence& b);

}  // namespace guidesampler
