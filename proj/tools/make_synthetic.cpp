// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

// Generates the bundled synthetic dataset: small QM9-like molecules (up to
// nine heavy atoms of C, N, O, F) whose HOMO-LUMO gap is a planted linear
// function of a few fingerprint bits plus Gaussian noise,
//
//   gap = base + sum_i v_i x_i + noise.
//
// The cost (gap - 0.32)^2 is then, up to the noise and a constant, exactly a
// QUBO over those bits, so the surrogate has something real to recover.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qscreen/qscreen.hpp"

namespace {

using qscreen::Rng;

struct GenAtom {
  char symbol;  // C N O F, lower case when aromatic
  int valence;
  int used = 0;
};

struct GenBond {
  std::size_t a, b;
  int order;  // 1, 2, 3; 4 for aromatic
};

struct GenMolecule {
  std::vector<GenAtom> atoms;
  std::vector<GenBond> bonds;

  int free_valence(std::size_t i) const { return atoms[i].valence - atoms[i].used; }

  void bond(std::size_t a, std::size_t b, int order) {
    bonds.push_back({a, b, order});
    const int cost = order == 4 ? 1 : order;
    atoms[a].used += cost;
    atoms[b].used += cost;
  }

  bool bonded(std::size_t a, std::size_t b) const {
    return std::any_of(bonds.begin(), bonds.end(), [&](const GenBond& e) {
      return (e.a == a && e.b == b) || (e.a == b && e.b == a);
    });
  }
};

GenAtom random_atom(Rng& rng) {
  static constexpr char kSymbols[] = {'C', 'C', 'C', 'C', 'C', 'N', 'N', 'O', 'O', 'F'};
  const char s = kSymbols[rng.below(sizeof kSymbols)];
  const int v = s == 'C' ? 4 : s == 'N' ? 3 : s == 'O' ? 2 : 1;
  return {s, v};
}

GenMolecule random_molecule(Rng& rng) {
  GenMolecule m;
  const std::size_t heavy = 3 + rng.below(7);  // 3..9 heavy atoms
  if (rng.uniform() < 0.25) {
    // Six-membered aromatic ring, occasionally a pyridine.
    const bool pyridine = rng.uniform() < 0.3;
    for (int k = 0; k < 6; ++k) m.atoms.push_back({(pyridine && k == 3) ? 'n' : 'c', (pyridine && k == 3) ? 2 : 3});
    for (std::size_t k = 0; k < 6; ++k) m.bond(k, (k + 1) % 6, 4);
  } else {
    m.atoms.push_back(random_atom(rng));
    if (m.atoms[0].valence == 1) m.atoms[0] = {'C', 4};
  }
  // Grow a tree by attaching new atoms to atoms with free valence.
  std::size_t attempts = 0;
  while (m.atoms.size() < heavy && attempts++ < 100) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < m.atoms.size(); ++i) {
      if (m.free_valence(i) > 0) open.push_back(i);
    }
    if (open.empty()) break;
    const std::size_t parent = open[rng.below(open.size())];
    GenAtom a = random_atom(rng);
    int order = 1;
    const int room = std::min(m.free_valence(parent), a.valence);
    const double u = rng.uniform();
    if (room >= 3 && u < 0.06) order = 3;
    else if (room >= 2 && u < 0.2) order = 2;
    m.atoms.push_back(a);
    m.bond(parent, m.atoms.size() - 1, order);
  }
  // Optionally close one aliphatic ring of size 3..6.
  if (rng.uniform() < 0.3) {
    for (int tries = 0; tries < 20; ++tries) {
      const std::size_t a = rng.below(m.atoms.size());
      const std::size_t b = rng.below(m.atoms.size());
      if (a == b || m.bonded(a, b) || m.free_valence(a) < 1 || m.free_valence(b) < 1) continue;
      if (std::islower(m.atoms[a].symbol) || std::islower(m.atoms[b].symbol)) continue;
      m.bond(a, b, 1);
      break;
    }
  }
  return m;
}

/// Depth-first SMILES writer. Non-tree edges become ring-closure digits.
std::string to_smiles(const GenMolecule& m) {
  const std::size_t n = m.atoms.size();
  std::vector<std::vector<std::pair<std::size_t, int>>> adj(n);
  for (const auto& b : m.bonds) {
    adj[b.a].push_back({b.b, b.order});
    adj[b.b].push_back({b.a, b.order});
  }
  std::vector<int> state(n, 0);
  std::set<std::pair<std::size_t, std::size_t>> tree;
  std::vector<std::vector<std::pair<int, int>>> closures(n);  // (digit, order) written after the atom
  int next_digit = 1;

  // First pass: discover tree edges; back edges get a ring digit.
  std::vector<std::size_t> order;
  auto discover = [&](auto&& self, std::size_t u, std::size_t parent) -> void {
    state[u] = 1;
    order.push_back(u);
    for (auto [v, o] : adj[u]) {
      if (v == parent) continue;
      if (state[v] == 0) {
        tree.insert({u, v});
        self(self, v, u);
      } else if (!tree.count({v, u}) && !tree.count({u, v})) {
        // A back edge is met from both ends; open the ring at the earlier
        // atom only, which is the one written first.
        if (std::find(order.begin(), order.end(), v) < std::find(order.begin(), order.end(), u)) {
          closures[v].push_back({next_digit, o});
          closures[u].push_back({next_digit, 0});
          ++next_digit;
        }
      }
    }
  };
  discover(discover, 0, n);

  auto bond_symbol = [](int o) -> std::string {
    return o == 2 ? "=" : o == 3 ? "#" : "";
  };
  std::string out;
  auto emit = [&](auto&& self, std::size_t u, std::size_t parent) -> void {
    out += m.atoms[u].symbol;
    for (auto [d, o] : closures[u]) out += bond_symbol(o) + std::to_string(d);
    std::vector<std::pair<std::size_t, int>> kids;
    for (auto [v, o] : adj[u]) {
      if (v != parent && tree.count({u, v})) kids.push_back({v, o});
    }
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const bool last = k + 1 == kids.size();
      if (!last) out += '(';
      out += bond_symbol(kids[k].second);
      self(self, kids[k].first, u);
      if (!last) out += ')';
    }
  };
  emit(emit, 0, n);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic screening dataset"};
  std::filesystem::path out_csv = "data/synthetic_200.csv";
  std::filesystem::path out_planted = "data/synthetic_planted.json";
  std::size_t rows = 200;
  std::uint64_t seed = 2024;
  std::size_t planted_bits = 8;
  double noise = 0.004;
  double base = 0.30;
  app.add_option("--out", out_csv, "CSV output path");
  app.add_option("--planted", out_planted, "JSON file describing the planted model");
  app.add_option("--rows", rows, "number of molecules");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--bits", planted_bits, "number of fingerprint bits carrying signal");
  app.add_option("--noise", noise, "standard deviation of the gap noise (eV)");
  app.add_option("--base", base, "gap of a molecule with none of the planted bits (eV)");
  CLI11_PARSE(app, argc, argv);

  Rng rng(seed);
  std::vector<std::string> smiles;
  std::vector<qscreen::FingerprintVector> fps;
  std::set<std::string> seen;
  while (smiles.size() < rows) {
    const auto s = to_smiles(random_molecule(rng));
    if (!seen.insert(s).second) continue;
    fps.push_back(qscreen::circular_fingerprint(qscreen::parse_smiles(s)));
    smiles.push_back(s);
  }

  // Signal bits: columns set in 20%..80% of molecules, so they survive a
  // 10% compression threshold and split the data usefully.
  std::vector<std::size_t> counts(qscreen::kDefaultFingerprintBits, 0);
  for (const auto& fp : fps) {
    for (auto i : fp.ones()) ++counts[i];
  }
  std::vector<std::size_t> candidates;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= rows / 5 && counts[c] <= 4 * rows / 5) candidates.push_back(c);
  }
  rng.shuffle(candidates.begin(), candidates.end());
  candidates.resize(std::min(planted_bits, candidates.size()));
  std::sort(candidates.begin(), candidates.end());
  std::vector<double> weights;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double mag = rng.uniform(0.01, 0.04);
    weights.push_back(k % 2 == 0 ? mag : -mag);
  }

  std::filesystem::create_directories(out_csv.parent_path().empty() ? "." : out_csv.parent_path());
  std::ofstream csv(out_csv);
  csv << "smiles,gap\n";
  for (std::size_t r = 0; r < rows; ++r) {
    double gap = base + noise * rng.normal();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (fps[r].test(candidates[k])) gap += weights[k];
    }
    csv << smiles[r] << ',' << qscreen::format_double(gap) << '\n';
  }
  nlohmann::json planted = {{"columns", candidates}, {"weights", weights}, {"base", base},
                            {"noise", noise},        {"seed", seed},       {"rows", rows}};
  std::ofstream(out_planted) << planted.dump(2) << '\n';
  std::cerr << "wrote " << rows << " rows to " << out_csv.string() << " (" << candidates.size()
            << " planted bits)\n";
  return 0;
}
