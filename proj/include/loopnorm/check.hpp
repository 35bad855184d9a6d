#pragma once

// Corpus-wide convergence experiment: every kernel's variants must
// normalize to the kernel's own fingerprint while keeping its semantics.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "loopnorm/normalize.hpp"

namespace loopnorm {

struct CheckOptions {
  std::vector<std::uint64_t> seeds{1, 2};  // variant generator seeds
  std::size_t count = 5;                   // variants per seed
  std::vector<std::uint64_t> interp_seeds{1, 2, 3};
  StrideMetric metric;
  std::uint64_t iteration_cap = 10'000'000;
  std::size_t stride_check_depth = 5;  // nests up to this many loops are re-enumerated
  unsigned jobs = 0;                   // 0: hardware concurrency
};

struct PropertyResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct KernelReport {
  std::string name;
  std::string fingerprint;  // hex of the normalized origin
  std::size_t variants = 0;
  std::vector<PropertyResult> properties;

  bool pass() const;
  const PropertyResult* first_failure() const;
};

struct CheckReport {
  std::vector<KernelReport> kernels;  // ordered by name

  bool pass() const;
  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

/// Checks one kernel. `extra_variants` are hand-written variants (array
/// names must match the origin).
KernelReport check_kernel(const std::string& name, const Program& origin, const std::vector<Program>& extra_variants,
                          const CheckOptions& options);

/// Runs check_kernel over every `name.loop` in `dir`; files named
/// `name.vK.loop` are added to kernel `name` as extra variants.
CheckReport check_corpus(const std::string& dir, const CheckOptions& options);

/// Stride minimality of a normalized program: for every top-level nest with
/// at most `max_loops` loops, no legal permutation of any of its perfect
/// bands yields a strictly smaller stride. Returns an empty string or a
/// description of the first counterexample.
std::string stride_counterexample(const Program& normalized, const StrideMetric& metric, std::size_t max_loops);

}  // namespace loopnorm
