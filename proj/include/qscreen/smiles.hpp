// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Parser for the organic-subset + bracket-atom fragment of SMILES.
//
// Supported: organic atoms (B C N O P S F Cl Br I and aromatic b c n o p s),
// bracket atoms with isotope, chirality, H count, charge and atom class,
// branches, ring closures (digit and %nn), bond symbols - = # : / \ and
// disconnected fragments separated by '.'. Stereo marks are counted and
// otherwise ignored; aromaticity is syntactic (lowercase atom).

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qscreen/error.hpp"

namespace qscreen {

enum class Element : std::uint8_t { H, B, C, N, O, F, P, S, Cl, Br, I };

constexpr int atomic_number(Element e) noexcept {
  switch (e) {
    case Element::H: return 1;
    case Element::B: return 5;
    case Element::C: return 6;
    case Element::N: return 7;
    case Element::O: return 8;
    case Element::F: return 9;
    case Element::P: return 15;
    case Element::S: return 16;
    case Element::Cl: return 17;
    case Element::Br: return 35;
    case Element::I: return 53;
  }
  return 0;
}

constexpr std::string_view symbol(Element e) noexcept {
  switch (e) {
    case Element::H: return "H";
    case Element::B: return "B";
    case Element::C: return "C";
    case Element::N: return "N";
    case Element::O: return "O";
    case Element::F: return "F";
    case Element::P: return "P";
    case Element::S: return "S";
    case Element::Cl: return "Cl";
    case Element::Br: return "Br";
    case Element::I: return "I";
  }
  return "?";
}

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  Element element = Element::C;
  bool aromatic = false;
  int formal_charge = 0;
  std::optional<int> explicit_h;  // bracket atoms only
  std::optional<int> isotope;
  bool bracket = false;

  friend bool operator==(const Atom&, const Atom&) = default;
};

struct Bond {
  std::size_t a = 0;
  std::size_t b = 0;
  BondOrder order = BondOrder::Single;

  friend bool operator==(const Bond&, const Bond&) = default;
};

class MolecularGraph {
 public:
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::size_t stereo_marks = 0;   // '/', '\\', '@' seen and discarded
  std::size_t ring_closures = 0;  // bonds created by ring-closure pairs

  std::size_t size() const noexcept { return atoms.size(); }

  /// Neighbour lists, one (neighbour, order) pair per incident bond.
  std::vector<std::vector<std::pair<std::size_t, BondOrder>>> adjacency() const {
    std::vector<std::vector<std::pair<std::size_t, BondOrder>>> adj(atoms.size());
    for (const auto& b : bonds) {
      adj[b.a].emplace_back(b.b, b.order);
      adj[b.b].emplace_back(b.a, b.order);
    }
    return adj;
  }

  /// Total hydrogens on atom i: implicit (organic subset) or bracket count,
  /// plus explicit [H] neighbours.
  int hydrogen_count(std::size_t i) const {
    const auto adj = adjacency();
    return hydrogen_count(i, adj);
  }

  int hydrogen_count(
      std::size_t i,
      const std::vector<std::vector<std::pair<std::size_t, BondOrder>>>& adj) const {
    const Atom& atom = atoms[i];
    int h = 0;
    for (const auto& [j, order] : adj[i]) {
      if (atoms[j].element == Element::H) ++h;
    }
    if (atom.bracket) return h + atom.explicit_h.value_or(0);
    return h + implicit_hydrogens(i, adj);
  }

  friend bool operator==(const MolecularGraph&, const MolecularGraph&) = default;

 private:
  int implicit_hydrogens(
      std::size_t i,
      const std::vector<std::vector<std::pair<std::size_t, BondOrder>>>& adj) const {
    const Atom& atom = atoms[i];
    int valence = 0;
    bool has_aromatic = false;
    for (const auto& [j, order] : adj[i]) {
      if (order == BondOrder::Aromatic) {
        valence += 1;
        has_aromatic = true;
      } else {
        valence += static_cast<int>(order);
      }
    }
    // Aromatic b, c, n and p take part in one ring double bond; aromatic o
    // and s donate a lone pair instead and keep their plain valence.
    if (atom.aromatic && has_aromatic && atom.element != Element::O && atom.element != Element::S) {
      valence += 1;
    }

    static constexpr std::array<int, 1> kB{3}, kC{4}, kHal{1}, kO{2};
    static constexpr std::array<int, 2> kN{3, 5};
    static constexpr std::array<int, 3> kS{2, 4, 6};
    std::span<const int> normal;
    switch (atom.element) {
      case Element::B: normal = kB; break;
      case Element::C: normal = kC; break;
      case Element::N:
      case Element::P: normal = kN; break;
      case Element::O: normal = kO; break;
      case Element::S: normal = kS; break;
      case Element::F:
      case Element::Cl:
      case Element::Br:
      case Element::I: normal = kHal; break;
      case Element::H: return 0;
    }
    for (int v : normal) {
      if (v >= valence) return v - valence;
    }
    return 0;
  }
};

inline std::size_t heavy_atom_count(const MolecularGraph& graph) noexcept {
  std::size_t n = 0;
  for (const auto& a : graph.atoms) {
    if (a.element != Element::H) ++n;
  }
  return n;
}

namespace detail {

class SmilesParser {
 public:
  explicit SmilesParser(std::string_view text) : text_(text) {}

  MolecularGraph parse() {
    if (text_.empty()) fail(Errc::EmptyInput, "empty SMILES string", 0);

    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      switch (c) {
        case '(': open_branch(); break;
        case ')': close_branch(); break;
        case '-': bond_symbol(BondOrder::Single, false); break;
        case '=': bond_symbol(BondOrder::Double, false); break;
        case '#': bond_symbol(BondOrder::Triple, false); break;
        case ':': bond_symbol(BondOrder::Aromatic, false); break;
        case '/':
        case '\\': bond_symbol(BondOrder::Single, true); break;
        case '.': dot(); break;
        case '%': ring_bond(); break;
        case '[': add_atom(bracket_atom()); break;
        default:
          if (c >= '0' && c <= '9') {
            ring_bond();
          } else {
            add_atom(organic_atom());
          }
      }
    }

    if (pending_) fail(Errc::UnexpectedToken, "bond symbol at end of input", pending_offset_);
    if (!branches_.empty()) {
      fail(Errc::UnmatchedParenthesis, "unclosed '('", branches_.back().offset);
    }
    if (!rings_.empty()) {
      std::size_t first = text_.size();
      for (const auto& [num, ring] : rings_) first = std::min(first, ring.offset);
      fail(Errc::UnclosedRingBond, "ring bond opened but never closed", first);
    }
    if (!prev_) fail(Errc::UnexpectedToken, "SMILES ends without an atom", text_.size());
    return std::move(graph_);
  }

 private:
  struct Branch {
    std::size_t root;
    std::size_t offset;
  };
  struct OpenRing {
    std::size_t atom;
    std::optional<BondOrder> order;
    std::size_t offset;
  };

  [[noreturn]] static void fail(Errc code, const std::string& what, std::size_t offset) {
    throw Error(code, "SMILES " + std::string(to_string(code)) + " at offset " +
                          std::to_string(offset) + ": " + what,
                offset);
  }

  void open_branch() {
    if (!prev_ || pending_ || branch_empty_) {
      fail(Errc::UnexpectedToken, "'(' must follow an atom", pos_);
    }
    branches_.push_back({*prev_, pos_});
    branch_empty_ = true;
    ++pos_;
  }

  void close_branch() {
    if (branches_.empty()) fail(Errc::UnmatchedParenthesis, "')' without '('", pos_);
    if (pending_ || branch_empty_ || !prev_) {
      fail(Errc::UnexpectedToken, "branch must end with an atom", pos_);
    }
    prev_ = branches_.back().root;
    branches_.pop_back();
    ++pos_;
  }

  void bond_symbol(BondOrder order, bool stereo) {
    if (!prev_ || pending_) fail(Errc::UnexpectedToken, "bond symbol must follow an atom", pos_);
    if (stereo) ++graph_.stereo_marks;
    pending_ = order;
    pending_offset_ = pos_;
    ++pos_;
  }

  void dot() {
    if (!prev_ || pending_) fail(Errc::UnexpectedToken, "'.' must follow an atom", pos_);
    prev_.reset();
    ++pos_;
  }

  void ring_bond() {
    const std::size_t start = pos_;
    int number = 0;
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() || !is_digit(text_[pos_ + 1]) ||
          !is_digit(text_[pos_ + 2])) {
        fail(Errc::UnexpectedToken, "'%' must be followed by two digits", pos_);
      }
      number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
    } else {
      number = text_[pos_] - '0';
      ++pos_;
    }
    if (!prev_) fail(Errc::UnexpectedToken, "ring bond must follow an atom", start);

    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_.emplace(number, OpenRing{*prev_, pending_, start});
      pending_.reset();
      return;
    }
    const OpenRing open = it->second;
    rings_.erase(it);
    if (open.atom == *prev_) fail(Errc::UnexpectedToken, "ring bond to the same atom", start);
    if (open.order && pending_ && *open.order != *pending_) {
      fail(Errc::UnexpectedToken, "conflicting ring bond orders", start);
    }
    const auto order = pending_ ? pending_ : open.order;
    pending_.reset();
    connect(open.atom, *prev_, order, start);
    ++graph_.ring_closures;
  }

  Atom organic_atom() {
    const char c = text_[pos_];
    const char next = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    Atom atom;
    std::size_t len = 1;
    switch (c) {
      case 'B':
        if (next == 'r') {
          atom.element = Element::Br;
          len = 2;
        } else {
          atom.element = Element::B;
        }
        break;
      case 'C':
        if (next == 'l') {
          atom.element = Element::Cl;
          len = 2;
        } else {
          atom.element = Element::C;
        }
        break;
      case 'N': atom.element = Element::N; break;
      case 'O': atom.element = Element::O; break;
      case 'P': atom.element = Element::P; break;
      case 'S': atom.element = Element::S; break;
      case 'F': atom.element = Element::F; break;
      case 'I': atom.element = Element::I; break;
      default:
        if (auto e = aromatic_element(c)) {
          atom.element = *e;
          atom.aromatic = true;
        } else {
          fail(Errc::UnknownAtomSymbol, "unknown atom symbol", pos_);
        }
    }
    pos_ += len;
    return atom;
  }

  Atom bracket_atom() {
    const std::size_t open = pos_;
    ++pos_;
    Atom atom;
    atom.bracket = true;

    if (auto iso = read_number(3, open)) {
      if (*iso == 0) fail(Errc::MalformedBracketAtom, "isotope must be positive", open);
      atom.isotope = *iso;
    }

    if (at_end()) fail(Errc::MalformedBracketAtom, "unterminated bracket atom", open);
    const std::size_t sym_pos = pos_;
    const char c = text_[pos_];
    if (std::isupper(static_cast<unsigned char>(c))) {
      const char next = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
      if (std::islower(static_cast<unsigned char>(next))) {
        if (c == 'C' && next == 'l') {
          atom.element = Element::Cl;
        } else if (c == 'B' && next == 'r') {
          atom.element = Element::Br;
        } else {
          fail(Errc::UnknownAtomSymbol, "unsupported element in bracket atom", sym_pos);
        }
        pos_ += 2;
      } else {
        switch (c) {
          case 'H': atom.element = Element::H; break;
          case 'B': atom.element = Element::B; break;
          case 'C': atom.element = Element::C; break;
          case 'N': atom.element = Element::N; break;
          case 'O': atom.element = Element::O; break;
          case 'P': atom.element = Element::P; break;
          case 'S': atom.element = Element::S; break;
          case 'F': atom.element = Element::F; break;
          case 'I': atom.element = Element::I; break;
          default: fail(Errc::UnknownAtomSymbol, "unsupported element in bracket atom", sym_pos);
        }
        ++pos_;
      }
    } else if (auto e = aromatic_element(c)) {
      atom.element = *e;
      atom.aromatic = true;
      ++pos_;
    } else {
      fail(Errc::UnknownAtomSymbol, "missing or unknown element in bracket atom", sym_pos);
    }

    if (!at_end() && text_[pos_] == '@') {
      ++pos_;
      if (!at_end() && text_[pos_] == '@') ++pos_;
      ++graph_.stereo_marks;
    }

    if (!at_end() && text_[pos_] == 'H') {
      ++pos_;
      atom.explicit_h = read_number(1, open).value_or(1);
    } else {
      atom.explicit_h = 0;
    }

    if (!at_end() && (text_[pos_] == '+' || text_[pos_] == '-')) {
      const char sign_char = text_[pos_];
      const int sign = sign_char == '+' ? 1 : -1;
      ++pos_;
      int magnitude = 1;
      if (auto digits = read_number(2, open)) {
        magnitude = *digits;
      } else {
        while (!at_end() && text_[pos_] == sign_char) {
          ++magnitude;
          ++pos_;
        }
      }
      if (magnitude > 15) fail(Errc::MalformedBracketAtom, "formal charge out of range", open);
      atom.formal_charge = sign * magnitude;
    }

    if (!at_end() && text_[pos_] == ':') {
      ++pos_;
      if (!read_number(4, open)) fail(Errc::MalformedBracketAtom, "empty atom class", open);
    }

    if (at_end() || text_[pos_] != ']') {
      fail(Errc::MalformedBracketAtom, "expected ']'", at_end() ? open : pos_);
    }
    ++pos_;
    return atom;
  }

  void add_atom(const Atom& atom) {
    const std::size_t offset = pos_;
    graph_.atoms.push_back(atom);
    const std::size_t index = graph_.atoms.size() - 1;
    if (prev_) connect(*prev_, index, pending_, offset);
    pending_.reset();
    prev_ = index;
    branch_empty_ = false;
  }

  void connect(std::size_t a, std::size_t b, std::optional<BondOrder> order, std::size_t offset) {
    for (const auto& bond : graph_.bonds) {
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) {
        fail(Errc::UnexpectedToken, "duplicate bond between the same atoms", offset);
      }
    }
    BondOrder resolved = BondOrder::Single;
    if (order) {
      resolved = *order;
    } else if (graph_.atoms[a].aromatic && graph_.atoms[b].aromatic) {
      resolved = BondOrder::Aromatic;
    }
    graph_.bonds.push_back({a, b, resolved});
  }

  /// Reads up to `max_digits` decimal digits; more digits is malformed.
  std::optional<int> read_number(int max_digits, std::size_t open) {
    int value = 0;
    int count = 0;
    while (!at_end() && is_digit(text_[pos_])) {
      if (++count > max_digits) fail(Errc::MalformedBracketAtom, "number too long", open);
      value = value * 10 + (text_[pos_] - '0');
      ++pos_;
    }
    if (count == 0) return std::nullopt;
    return value;
  }

  static std::optional<Element> aromatic_element(char c) noexcept {
    switch (c) {
      case 'b': return Element::B;
      case 'c': return Element::C;
      case 'n': return Element::N;
      case 'o': return Element::O;
      case 'p': return Element::P;
      case 's': return Element::S;
      default: return std::nullopt;
    }
  }

  static bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }
  bool at_end() const noexcept { return pos_ >= text_.size(); }

  std::string_view text_;
  std::size_t pos_ = 0;
  MolecularGraph graph_;
  std::optional<std::size_t> prev_;
  std::optional<BondOrder> pending_;
  std::size_t pending_offset_ = 0;
  bool branch_empty_ = false;
  std::vector<Branch> branches_;
  std::map<int, OpenRing> rings_;
};

}  // namespace detail

/// Parses a SMILES string. Throws qscreen::Error whose location() is the
/// byte offset of the offending character.
inline MolecularGraph parse_smiles(std::string_view text) {
  return detail::SmilesParser(text).parse();
}

}  // namespace qscreen
