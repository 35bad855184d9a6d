#pragma once

// Reference interpreter. Programs run sequentially in source order on
// concrete buffers; parallel/vector marks are ignored.
//
// Input buffers are a pure function of (seed, array name, flat index):
//
//   state = seed ^ fnv1a64(name)
//   x     = splitmix64_mix(state + (flat + 1) * 0x9e3779b97f4a7c15)
//   int   = int64(x >> 54) - 512                  // [-512, 511]
//   float = double(x >> 11) * 2^-53 * 2 - 1       // [-1, 1)

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loopnorm/ir.hpp"

namespace loopnorm {

enum class Mode { Integer, Float };

struct ExecutionConfig {
  Bindings bindings;  // overrides on top of parameter defaults
  Mode mode = Mode::Integer;
  std::uint64_t seed = 0;
  std::uint64_t iteration_cap = 10'000'000;
  /// Array name -> name whose initial contents it receives. Lets a variant
  /// with renamed arrays start from the same inputs as its origin.
  std::map<std::string, std::string, std::less<>> init_alias;
};

/// One array after execution. Exactly one of the vectors is populated,
/// according to the mode.
struct Buffer {
  std::vector<std::int64_t> ints;
  std::vector<double> floats;

  std::size_t size() const { return ints.empty() ? floats.size() : ints.size(); }
  bool operator==(const Buffer&) const = default;
};

using Memory = std::map<std::string, Buffer, std::less<>>;

std::int64_t initial_int(std::uint64_t seed, std::string_view array, std::uint64_t flat);
double initial_float(std::uint64_t seed, std::string_view array, std::uint64_t flat);

/// Executes the program. Throws IterationCapExceeded, InterpError (division
/// or float literal in integer mode, out-of-bounds access, unbound parameter).
Memory run(const Program& program, const ExecutionConfig& config);

struct Verdict {
  bool equivalent = true;
  std::string array;      // first mismatching array, if any
  std::size_t index = 0;  // flat index of the first mismatch
  std::string detail;

  explicit operator bool() const { return equivalent; }
};

/// Compares two memories array by array. `array_map` maps names in `b` to
/// names in `a` (identity when absent).
Verdict compare(const Memory& a, const Memory& b, Mode mode,
                const std::map<std::string, std::string, std::less<>>& array_map = {});

/// Runs both programs under each config and compares: bit-exact in integer
/// mode, relative error <= 1e-10 in float mode. `array_map` maps array names
/// of `p2` to those of `p1`; aliases for initialization are derived from it.
Verdict equivalent(const Program& p1, const Program& p2, const std::vector<ExecutionConfig>& configs,
                   const std::map<std::string, std::string, std::less<>>& array_map = {});

/// FNV-1a over array names and little-endian values.
std::uint64_t digest(const Memory& memory);

}  // namespace loopnorm
