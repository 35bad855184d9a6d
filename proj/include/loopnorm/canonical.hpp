#pragma once

// Name-abstracted canonical text and FNV-1a fingerprints.
//
// Iterators become L0, L1, ... in preorder, arrays A0, A1, ... by first use
// (write before reads, computations in preorder), parameters P0, P1, ... by
// first use, computation ids S0, S1, ... by position. Literal constants are
// kept. The text is DSL: declarations of what the nest uses, then the nest.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loopnorm/ir.hpp"

namespace loopnorm {

enum class KeyMode { Exact, ShapeInsensitive };

const char* to_string(KeyMode m);
/// Accepts "exact" and "shape-insensitive"; throws Error otherwise.
KeyMode key_mode_from_string(std::string_view s);

struct CanonicalForm {
  std::string text;
  std::vector<std::string> shape;  // "A0[16, 8]" per array in canonical order
  std::uint64_t fingerprint = 0;
  std::map<std::string, std::string, std::less<>> arrays;  // original -> canonical
  std::map<std::string, std::string, std::less<>> params;
};

/// Canonical form of one top-level node of `context`.
CanonicalForm canonicalize(const Program& context, const Node& nest, KeyMode mode = KeyMode::Exact);

/// Canonical form of a whole program (unused arrays and parameters follow the
/// used ones in declaration order).
CanonicalForm canonicalize_program(const Program& program, KeyMode mode = KeyMode::Exact);

/// Fingerprint of canonicalize(context, nest, mode).
std::uint64_t match_key(const Program& context, const Node& nest, KeyMode mode);

}  // namespace loopnorm
