// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qscreen {

enum class Errc {
  // smiles
  EmptyInput,
  UnmatchedParenthesis,
  UnclosedRingBond,
  UnknownAtomSymbol,
  MalformedBracketAtom,
  UnexpectedToken,
  // fingerprint / dataset
  InvalidWidth,
  InconsistentWidth,
  NonBinaryCharacter,
  EmptyTrainSet,
  WidthMismatch,
  MissingColumn,
  MalformedNumber,
  EmptyFile,
  EmptyList,
  IoError,
  // regression
  DimensionCapExceeded,
  NonFiniteLossDiverged,
  LengthMismatch,
  ZeroVariance,
  // annealing
  InvalidSchedule,
  InvalidBeta,
  TooLarge,
  ZeroDenominator,
  ConsistencyFailure,
  // importance / screening
  DegenerateSamples,
  EmptySampleSet,
  IndexOutOfRange,
  // pipeline
  ConfigInvalid,
  MissingUpstreamArtifact,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::UnmatchedParenthesis: return "UnmatchedParenthesis";
    case Errc::UnclosedRingBond: return "UnclosedRingBond";
    case Errc::UnknownAtomSymbol: return "UnknownAtomSymbol";
    case Errc::MalformedBracketAtom: return "MalformedBracketAtom";
    case Errc::UnexpectedToken: return "UnexpectedToken";
    case Errc::InvalidWidth: return "InvalidWidth";
    case Errc::InconsistentWidth: return "InconsistentWidth";
    case Errc::NonBinaryCharacter: return "NonBinaryCharacter";
    case Errc::EmptyTrainSet: return "EmptyTrainSet";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::MalformedNumber: return "MalformedNumber";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::EmptyList: return "EmptyList";
    case Errc::IoError: return "IoError";
    case Errc::DimensionCapExceeded: return "DimensionCapExceeded";
    case Errc::NonFiniteLossDiverged: return "NonFiniteLossDiverged";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::InvalidSchedule: return "InvalidSchedule";
    case Errc::InvalidBeta: return "InvalidBeta";
    case Errc::TooLarge: return "TooLarge";
    case Errc::ZeroDenominator: return "ZeroDenominator";
    case Errc::ConsistencyFailure: return "ConsistencyFailure";
    case Errc::DegenerateSamples: return "DegenerateSamples";
    case Errc::EmptySampleSet: return "EmptySampleSet";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::MissingUpstreamArtifact: return "MissingUpstreamArtifact";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code and, where meaningful, a
/// location: a byte offset for SMILES errors, a 1-based line or row number
/// for file ingestion errors.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> location = std::nullopt)
      : std::runtime_error(message), code_(code), location_(location) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> location() const noexcept { return location_; }

 private:
  Errc code_;
  std::optional<std::size_t> location_;
};

}  // namespace qscreen
