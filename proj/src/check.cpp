#include "loopnorm/check.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <future>
#include <numeric>
#include <sstream>
#include <thread>

#include "loopnorm/canonical.hpp"
#include "loopnorm/frontend.hpp"
#include "loopnorm/hash.hpp"
#include "loopnorm/interp.hpp"
#include "loopnorm/recipes.hpp"
#include "loopnorm/variants.hpp"

namespace loopnorm {

bool KernelReport::pass() const { return first_failure() == nullptr; }

const PropertyResult* KernelReport::first_failure() const {
  for (const auto& p : properties)
    if (!p.pass) return &p;
  return nullptr;
}

bool CheckReport::pass() const {
  return std::all_of(kernels.begin(), kernels.end(), [](const KernelReport& k) { return k.pass(); });
}

nlohmann::ordered_json CheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["pass"] = pass();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& k : kernels) {
    nlohmann::ordered_json e;
    e["name"] = k.name;
    e["fingerprint"] = k.fingerprint;
    e["variants"] = k.variants;
    auto props = nlohmann::ordered_json::array();
    for (const auto& p : k.properties) {
      nlohmann::ordered_json q;
      q["name"] = p.name;
      q["status"] = p.pass ? "pass" : "fail";
      if (!p.detail.empty()) q["detail"] = p.detail;
      props.push_back(std::move(q));
    }
    e["properties"] = props;
    arr.push_back(std::move(e));
  }
  j["kernels"] = arr;
  return j;
}

std::string CheckReport::to_text() const {
  std::ostringstream os;
  std::size_t width = 6;
  for (const auto& k : kernels) width = std::max(width, k.name.size());
  std::vector<std::string> columns;
  for (const auto& k : kernels)
    for (const auto& p : k.properties)
      if (std::find(columns.begin(), columns.end(), p.name) == columns.end()) columns.push_back(p.name);
  os << std::string("kernel") + std::string(width - 6 + 2, ' ') << "variants";
  for (const auto& c : columns) os << "  " << c;
  os << "\n";
  for (const auto& k : kernels) {
    os << k.name << std::string(width - k.name.size() + 2, ' ');
    std::string v = std::to_string(k.variants);
    os << std::string(8 - std::min<std::size_t>(8, v.size()), ' ') << v;
    for (const auto& c : columns) {
      auto it = std::find_if(k.properties.begin(), k.properties.end(), [&](const auto& p) { return p.name == c; });
      std::string cell = it == k.properties.end() ? "-" : (it->pass ? "pass" : "FAIL");
      os << "  " << cell << std::string(c.size() > cell.size() ? c.size() - cell.size() : 0, ' ');
    }
    os << "\n";
  }
  for (const auto& k : kernels)
    for (const auto& p : k.properties)
      if (!p.pass) os << k.name << ": " << p.name << ": " << p.detail << "\n";
  std::size_t passed = std::count_if(kernels.begin(), kernels.end(), [](const KernelReport& k) { return k.pass(); });
  os << passed << "/" << kernels.size() << " kernels pass\n";
  return os.str();
}

std::string stride_counterexample(const Program& normalized, const StrideMetric& metric, std::size_t max_loops) {
  AnalysisOptions options = analysis_options(metric.bindings);
  for (std::size_t t = 0; t < normalized.body.size(); ++t) {
    if (!normalized.body[t].is_loop()) continue;
    Body sub{normalized.body[t]};
    std::size_t loops = 0;
    for_each_loop(sub, [&](const Loop&, const NodePath&) { ++loops; });
    if (loops > max_loops) continue;
    std::uint64_t current = stride(normalized, sub.front(), metric).value;
    DependenceGraph graph = analyze(normalized, sub, options);
    for (const Band& band : perfect_bands(sub)) {
      if (band.size < 2) continue;
      std::vector<std::size_t> perm(band.size);
      std::iota(perm.begin(), perm.end(), 0);
      while (std::next_permutation(perm.begin(), perm.end())) {
        if (!is_permutation_legal(sub, band, perm, graph)) continue;
        Body candidate = permute_band(sub, band, perm);
        std::uint64_t value = stride(normalized, candidate.front(), metric).value;
        if (value < current) {
          std::string order;
          for (const Loop* l : band_loops(candidate, band)) order += (order.empty() ? "" : ",") + l->iter;
          return "nest " + std::to_string(t) + ": order (" + order + ") has stride " + std::to_string(value) +
                 " < " + std::to_string(current);
        }
      }
    }
  }
  return {};
}

namespace {

std::string atomicity_violation(const Program& p) {
  DependenceGraph graph = analyze(p);
  std::string found;
  for_each_loop(p.body, [&](const Loop& l, const NodePath& path) {
    if (!found.empty() || l.body.size() < 2) return;
    auto groups = fission_partition(p.body, path, graph);
    if (groups.size() > 1) found = "loop " + l.iter + " splits into " + std::to_string(groups.size()) + " groups";
  });
  return found;
}

struct Subject {
  std::string label;
  Program program;
  std::map<std::string, std::string, std::less<>> array_map;
};

}  // namespace

KernelReport check_kernel(const std::string& name, const Program& origin, const std::vector<Program>& extra_variants,
                          const CheckOptions& options) {
  KernelReport rep;
  rep.name = name;
  auto record = [&](std::string prop, std::string failure) {
    rep.properties.push_back(PropertyResult{std::move(prop), failure.empty(), std::move(failure)});
  };
  std::vector<ExecutionConfig> configs;
  for (auto s : options.interp_seeds) {
    ExecutionConfig c;
    c.mode = Mode::Integer;
    c.seed = s;
    c.iteration_cap = options.iteration_cap;
    configs.push_back(c);
  }

  std::vector<Subject> variants;
  for (auto seed : options.seeds) {
    auto generated = generate(origin, seed, options.count);
    for (std::size_t k = 0; k < generated.size(); ++k)
      variants.push_back(Subject{"seed " + std::to_string(seed) + " variant " + std::to_string(k + 1),
                                 std::move(generated[k].program), std::move(generated[k].array_map)});
  }
  for (std::size_t k = 0; k < extra_variants.size(); ++k)
    variants.push_back(Subject{"file variant " + std::to_string(k + 1), extra_variants[k], {}});
  rep.variants = variants.size();

  Normalized base;
  try {
    base = normalize_program(origin, options.metric);
  } catch (const Error& e) {
    record("normalize", e.what());
    return rep;
  }
  std::uint64_t fp = canonicalize_program(base.program).fingerprint;
  rep.fingerprint = hex64(fp);

  std::vector<Program> normalized;
  std::string convergence;
  for (const auto& v : variants) {
    try {
      normalized.push_back(normalize_program(v.program, options.metric).program);
    } catch (const Error& e) {
      normalized.push_back(v.program);
      if (convergence.empty()) convergence = v.label + ": " + e.what();
      continue;
    }
    std::uint64_t vfp = canonicalize_program(normalized.back()).fingerprint;
    if (vfp != fp && convergence.empty())
      convergence = v.label + " normalizes to " + hex64(vfp) + ", expected " + hex64(fp);
  }
  record("convergence", convergence);

  std::string equivalence;
  auto same = [&](const std::string& label, const Program& p, const auto& map) {
    if (!equivalence.empty()) return;
    try {
      Verdict verdict = equivalent(origin, p, configs, map);
      if (!verdict) equivalence = label + ": " + verdict.detail;
    } catch (const Error& e) {
      equivalence = label + ": " + e.what();
    }
  };
  std::map<std::string, std::string, std::less<>> identity;
  same("normalized origin", base.program, identity);
  for (std::size_t k = 0; k < variants.size(); ++k) {
    same(variants[k].label, variants[k].program, variants[k].array_map);
    same("normalized " + variants[k].label, normalized[k], variants[k].array_map);
  }
  record("equivalence", equivalence);

  std::string idempotence;
  try {
    Program again = normalize_program(base.program, options.metric).program;
    if (canonicalize_program(again).text != canonicalize_program(base.program).text)
      idempotence = "second normalization changes the canonical form";
  } catch (const Error& e) {
    idempotence = e.what();
  }
  record("idempotence", idempotence);

  std::string minimality;
  try {
    minimality = stride_counterexample(base.program, options.metric, options.stride_check_depth);
  } catch (const Error& e) {
    minimality = e.what();
  }
  record("stride_minimality", minimality);

  std::string atomic;
  try {
    atomic = atomicity_violation(base.program);
  } catch (const Error& e) {
    atomic = e.what();
  }
  record("atomicity", atomic);

  std::string transfer;
  try {
    RecipeDatabase db;
    db.seed(base.program, KeyMode::Exact, name);
    for (std::size_t k = 0; k < variants.size() && transfer.empty(); ++k) {
      ApplyOutcome out = apply_database(db, normalized[k]);
      if (out.misses) {
        transfer = variants[k].label + ": " + std::to_string(out.misses) + " nest(s) without recipe";
        break;
      }
      Verdict verdict = equivalent(origin, out.program, configs, variants[k].array_map);
      if (!verdict) transfer = variants[k].label + " with recipes: " + verdict.detail;
    }
  } catch (const Error& e) {
    transfer = e.what();
  }
  record("recipes", transfer);
  return rep;
}

CheckReport check_corpus(const std::string& dir, const CheckOptions& options) {
  namespace fs = std::filesystem;
  std::map<std::string, fs::path> kernels;
  std::map<std::string, std::vector<fs::path>> extras;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".loop") continue;
    std::string stem = entry.path().stem().string();
    auto dot = stem.rfind(".v");
    if (dot != std::string::npos && dot + 2 < stem.size() &&
        std::all_of(stem.begin() + static_cast<std::ptrdiff_t>(dot) + 2, stem.end(), ::isdigit))
      extras[stem.substr(0, dot)].push_back(entry.path());
    else
      kernels[stem] = entry.path();
  }
  std::vector<std::pair<std::string, fs::path>> work(kernels.begin(), kernels.end());
  CheckReport report;
  report.kernels.resize(work.size());

  auto job = [&](std::size_t k) {
    const auto& [name, path] = work[k];
    try {
      Program origin = parse_file(path.string());
      std::vector<Program> extra;
      auto it = extras.find(name);
      if (it != extras.end()) {
        std::sort(it->second.begin(), it->second.end());
        for (const auto& p : it->second) extra.push_back(parse_file(p.string()));
      }
      report.kernels[k] = check_kernel(name, origin, extra, options);
    } catch (const Error& e) {
      report.kernels[k].name = name;
      report.kernels[k].properties.push_back(PropertyResult{"parse", false, e.what()});
    }
  };

  unsigned jobs = options.jobs ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  for (unsigned w = 0; w < std::min<std::size_t>(jobs, work.size()); ++w)
    workers.push_back(std::async(std::launch::async, [&] {
      for (std::size_t k; (k = next++) < work.size();) job(k);
    }));
  for (auto& f : workers) f.get();
  return report;
}

}  // namespace loopnorm
