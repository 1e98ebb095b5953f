// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <span>
#include <string_view>
#include <vector>

#include "qscreen/error.hpp"

namespace qscreen {

/// Fixed-width packed bit vector. Used both as a molecular fingerprint and as
/// the binary decision vector of a QUBO. Bit 0 is printed leftmost.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t width)
      : width_(width), words_((width + 63) / 64, 0) {}

  static BitVector from_string(std::string_view text) {
    BitVector v(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '1') {
        v.set(i);
      } else if (text[i] != '0') {
        throw Error(Errc::NonBinaryCharacter,
                    "non-binary character in bit string at position " +
                        std::to_string(i),
                    i);
      }
    }
    return v;
  }

  std::size_t width() const noexcept { return width_; }
  bool empty() const noexcept { return width_ == 0; }

  bool test(std::size_t i) const noexcept {
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  bool operator[](std::size_t i) const noexcept { return test(i); }

  void set(std::size_t i, bool value = true) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }
  void flip(std::size_t i) noexcept {
    words_[i >> 6] ^= std::uint64_t{1} << (i & 63);
  }

  std::size_t popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  /// Indices of set bits, ascending.
  std::vector<std::uint32_t> ones() const {
    std::vector<std::uint32_t> out;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      auto word = words_[w];
      while (word) {
        out.push_back(static_cast<std::uint32_t>(w * 64 + std::countr_zero(word)));
        word &= word - 1;
      }
    }
    return out;
  }

  std::string to_string() const {
    std::string s(width_, '0');
    for (std::size_t i = 0; i < width_; ++i) {
      if (test(i)) s[i] = '1';
    }
    return s;
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  friend bool operator==(const BitVector&, const BitVector&) = default;

  /// Orders by width, then as a big-endian integer (bit 0 most significant).
  friend std::strong_ordering operator<=>(const BitVector& a,
                                          const BitVector& b) noexcept {
    if (auto c = a.width_ <=> b.width_; c != 0) return c;
    for (std::size_t i = 0; i < a.width_; ++i) {
      const bool x = a.test(i);
      const bool y = b.test(i);
      if (x != y) return x ? std::strong_ordering::greater : std::strong_ordering::less;
    }
    return std::strong_ordering::equal;
  }

 private:
  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

using FingerprintVector = BitVector;

inline std::size_t hamming_distance(const BitVector& a, const BitVector& b) {
  if (a.width() != b.width()) {
    throw Error(Errc::WidthMismatch, "hamming_distance: width " +
                                         std::to_string(a.width()) + " vs " +
                                         std::to_string(b.width()));
  }
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t d = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    d += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  }
  return d;
}

struct BitVectorHash {
  std::size_t operator()(const BitVector& v) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ v.width();
    for (auto w : v.words()) {
      h ^= w;
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace qscreen
