#pragma once

// Normalization: maximal loop fission followed by stride minimization over
// every perfect band, repeated until nothing changes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "loopnorm/deps.hpp"
#include "loopnorm/ir.hpp"

namespace loopnorm {

enum class MetricMode { TotalDistance, OutOfOrder };

const char* to_string(MetricMode m);
/// Accepts "distance" and "ooo".
MetricMode metric_mode_from_string(std::string_view s);

inline constexpr std::size_t kPermCap = 6;

struct StrideMetric {
  MetricMode mode = MetricMode::TotalDistance;
  Bindings bindings;  // overrides on top of parameter defaults
  std::uint64_t cap = 1'000'000;
};

/// Result of a stride evaluation. `bindings` are the values actually used,
/// which differ from the requested ones when the iteration count had to be
/// shrunk below the cap.
struct StrideValue {
  std::uint64_t value = 0;
  Bindings bindings;
  bool scaled = false;
};

/// Total-distance: sum over access sites of |address(t+1) - address(t)|
/// between consecutive executions of the site (row-major, in elements).
/// Out-of-order: number of (outer loop, inner loop, access) triples where
/// the outer iterator indexes a less significant dimension than the inner.
StrideValue stride(const Program& context, const Node& nest, const StrideMetric& metric);

/// Out-of-order count of a nest (bindings not needed).
std::uint64_t out_of_order_count(const Node& nest);

/// Bindings with every parameter scaled down by a common factor until the
/// body runs at most `cap` computation instances.
Bindings shrink_bindings(const Program& context, const Body& body, const Bindings& requested, std::uint64_t cap,
                         bool* scaled = nullptr);

struct FissionStep {
  std::string scope;  // loop path, e.g. "body[0]/loop i"
  std::size_t groups = 0;
};

struct BandReport {
  std::string scope;
  std::vector<std::string> original_order;
  std::vector<std::string> chosen_order;
  std::size_t considered = 0;
  std::size_t legal = 0;
  std::uint64_t stride = 0;
  bool approximated = false;  // deeper than kPermCap: grouped sort
  bool scaled = false;
  Bindings bindings;
  /// Every legal candidate with its stride value, in enumeration order.
  std::vector<std::pair<std::vector<std::string>, std::uint64_t>> candidates;
};

struct NormalizationReport {
  MetricMode mode = MetricMode::TotalDistance;
  std::vector<FissionStep> fission_steps;
  std::vector<BandReport> bands;
  std::size_t rounds = 0;

  nlohmann::ordered_json to_json() const;
};

AnalysisOptions analysis_options(const Bindings& bindings);

/// Distributes every loop into its atomic groups, top-down, until a full
/// pass changes nothing. Groups after the first get fresh iterator names.
Program max_fission(const Program& program, const AnalysisOptions& options = {},
                    std::vector<FissionStep>* steps = nullptr);

/// Distributes the single loop at `path` into its atomic groups; nullopt
/// when the loop is atomic.
std::optional<Program> distribute(const Program& program, const NodePath& path, const AnalysisOptions& options = {});

/// Replaces every perfect band by its legal permutation of minimal stride.
/// Ties go to the smallest canonical text of the resulting nest, then to
/// the lexicographically smallest permutation.
Program minimize_strides(const Program& program, const StrideMetric& metric,
                         std::vector<BandReport>* reports = nullptr);

struct Normalized {
  Program program;
  NormalizationReport report;
};

Normalized normalize_program(const Program& program, const StrideMetric& metric = {});

/// Path text like "body[0]/loop i/body[1]/loop j" for diagnostics.
std::string scope_text(const Body& body, const NodePath& path);

}  // namespace loopnorm
