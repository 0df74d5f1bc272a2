#include "guidesampler/sequence.hpp"

#include <algorithm>

#include "guidesampler/errors.hpp"

namespace guidesampler {

Alphabet::Alphabet(int size) : size_(size) {
  if (size < 2) throw DomainError("alphabet size must be at least 2");
}

char Alphabet::symbol(Token t) const {
  if (t == mask()) return '?';
  if (!is_real(t)) throw DomainError("token out of alphabet range: " + std::to_string(t));
  if (size_ > 26) throw DomainError("letter rendering needs an alphabet of at most 26 symbols");
  return static_cast<char>('A' + t);
}

Token Alphabet::parse(char c) const {
  if (c == '?') return mask();
  const Token t = c - 'A';
  if (!is_real(t)) throw DomainError(std::string("symbol not in alphabet: '") + c + "'");
  return t;
}

TokenSequence::TokenSequence(std::vector<Token> tokens, int alphabet_size)
    : tokens_(std::move(tokens)), alphabet_size_(alphabet_size) {
  Alphabet alphabet(alphabet_size);
  if (tokens_.empty()) throw DomainError("sequence length must be positive");
  for (Token t : tokens_) {
    if (!alphabet.is_real(t)) {
      throw DomainError("clean sequence holds a non-real token: " + std::to_string(t));
    }
  }
}

MaskedSequence::MaskedSequence(std::vector<Token> tokens, int alphabet_size)
    : tokens_(std::move(tokens)), alphabet_size_(alphabet_size) {
  Alphabet alphabet(alphabet_size);
  if (tokens_.empty()) throw DomainError("sequence length must be positive");
  for (Token t : tokens_) {
    if (!alphabet.is_real(t) && t != alphabet.mask()) {
      throw DomainError("masked sequence holds an invalid token: " + std::to_string(t));
    }
  }
}

MaskedSequence::MaskedSequence(const TokenSequence& clean)
    : tokens_(clean.tokens().begin(), clean.tokens().end()),
      alphabet_size_(clean.alphabet_size()) {}

MaskedSequence MaskedSequence::fully_masked(int length, int alphabet_size) {
  if (length <= 0) throw DomainError("sequence length must be positive");
  return MaskedSequence(std::vector<Token>(static_cast<std::size_t>(length), alphabet_size),
                        alphabet_size);
}

int MaskedSequence::masked_count() const noexcept {
  return static_cast<int>(std::count(tokens_.begin(), tokens_.end(), alphabet_size_));
}

std::vector<int> MaskedSequence::masked_positions() const {
  std::vector<int> out;
  for (int i = 0; i < length(); ++i) {
    if (is_masked(i)) out.push_back(i);
  }
  return out;
}

std::vector<int> MaskedSequence::unmasked_positions() const {
  std::vector<int> out;
  for (int i = 0; i < length(); ++i) {
    if (!is_masked(i)) out.push_back(i);
  }
  return out;
}

MaskedSequence MaskedSequence::with(int pos, Token token) const {
  MaskedSequence copy = *this;
  copy.set(pos, token);
  return copy;
}

void MaskedSequence::set(int pos, Token token) {
  if (pos < 0 || pos >= length()) throw DomainError("position out of range");
  if (token < 0 || token > alphabet_size_) throw DomainError("token out of range");
  tokens_[static_cast<std::size_t>(pos)] = token;
}

TokenSequence MaskedSequence::to_clean() const {
  return TokenSequence(tokens_, alphabet_size_);
}

std::string to_string(const TokenSequence& x) {
  Alphabet alphabet(x.alphabet_size());
  std::string out;
  for (Token t : x.tokens()) out.push_back(alphabet.symbol(t));
  return out;
}

std::string to_string(const MaskedSequence& x) {
  Alphabet alphabet(x.alphabet_size());
  std::string out;
  for (Token t : x.tokens()) out.push_back(alphabet.symbol(t));
  return out;
}

TokenSequence parse_sequence(std::string_view text, int alphabet_size) {
  Alphabet alphabet(alphabet_size);
  std::vector<Token> tokens;
  for (char c : text) tokens.push_back(alphabet.parse(c));
  return TokenSequence(std::move(tokens), alphabet_size);
}

MaskedSequence parse_masked(std::string_view text, int alphabet_size) {
  Alphabet alphabet(alphabet_size);
  std::vector<Token> tokens;
  for (char c : text) tokens.push_back(alphabet.parse(c));
  return MaskedSequence(std::move(tokens), alphabet_size);
}

int hamming_distance(const TokenSequence& a, const TokenSequence& b) {
  if (a.length() != b.length()) throw DomainError("hamming distance needs equal lengths");
  int d = 0;
  for (int i = 0; i < a.length(); ++i) d += a[i] != b[i];
  return d;
}

}  // namespace guidesampler
