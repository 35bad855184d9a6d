// loopnorm command-line driver.
//
// Exit codes: 0 success, 1 a checked property failed (equiv, check, match
// misses), 2 invalid input or usage.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "loopnorm/canonical.hpp"
#include "loopnorm/check.hpp"
#include "loopnorm/deps.hpp"
#include "loopnorm/frontend.hpp"
#include "loopnorm/hash.hpp"
#include "loopnorm/interp.hpp"
#include "loopnorm/lower.hpp"
#include "loopnorm/normalize.hpp"
#include "loopnorm/recipes.hpp"
#include "loopnorm/serialize.hpp"
#include "loopnorm/variants.hpp"

namespace fs = std::filesystem;
using namespace loopnorm;
using Json = nlohmann::ordered_json;

namespace {

std::string read_input(const std::string& path) {
  std::ostringstream ss;
  if (path == "-") {
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  ss << in.rdbuf();
  return ss.str();
}

Program load(const std::string& path) {
  std::string text = read_input(path);
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return deserialize(text);
  return parse(text, path == "-" ? "<stdin>" : path);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

Bindings parse_bindings(const std::vector<std::string>& items) {
  Bindings out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part.empty()) continue;
      auto eq = part.find('=');
      if (eq == std::string::npos || eq == 0) throw Error("binding '" + part + "' is not NAME=VALUE");
      try {
        std::size_t used = 0;
        std::int64_t v = std::stoll(part.substr(eq + 1), &used);
        if (used != part.size() - eq - 1) throw std::invalid_argument("trailing");
        out[part.substr(0, eq)] = v;
      } catch (const std::logic_error&) {
        throw Error("binding '" + part + "' has a non-integer value");
      }
    }
  }
  return out;
}

Json graph_json(const DependenceGraph& g) {
  Json j;
  j["version"] = kFormatVersion;
  j["nodes"] = g.nodes;
  auto edges = Json::array();
  for (const auto& e : g.edges) {
    Json x;
    x["src"] = e.src;
    x["dst"] = e.dst;
    x["kind"] = to_string(e.kind);
    x["array"] = e.array;
    x["src_access"] = e.src_access;
    x["dst_access"] = e.dst_access;
    auto entries = Json::array();
    for (const auto& en : e.entries) {
      Json y;
      y["iter"] = en.iter;
      y["direction"] = to_string(en.direction);
      y["distance"] = en.distance ? Json(*en.distance) : Json(nullptr);
      entries.push_back(std::move(y));
    }
    x["entries"] = entries;
    x["carried_at"] = e.carried_at ? Json(*e.carried_at) : Json(nullptr);
    x["concrete_exact"] = e.concrete_exact;
    edges.push_back(std::move(x));
  }
  j["edges"] = edges;
  return j;
}

std::string graph_table(const DependenceGraph& g) {
  std::ostringstream os;
  os << "src\tdst\tkind\tarray\tvector\n";
  for (const auto& e : g.edges) {
    os << e.src << "\t" << e.dst << "\t" << to_string(e.kind) << "\t" << e.array << "\t(";
    for (std::size_t k = 0; k < e.entries.size(); ++k) {
      const auto& en = e.entries[k];
      os << (k ? ", " : "") << en.iter << ":";
      if (en.distance) os << *en.distance;
      else os << to_string(en.direction);
    }
    os << ")" << (e.concrete_exact ? " exact" : "") << "\n";
  }
  return os.str();
}

Mode mode_from_string(const std::string& s) {
  if (s == "int" || s == "integer") return Mode::Integer;
  if (s == "float") return Mode::Float;
  throw Error("unknown mode '" + s + "' (expected int or float)");
}

std::string buffer_text(const Memory& m) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& [name, buf] : m) {
    os << name << " =";
    for (auto v : buf.ints) os << " " << v;
    for (auto v : buf.floats) os << " " << v;
    os << "\n";
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loop-nest normalization toolkit"};
  app.require_subcommand(1);
  std::uint64_t iter_cap = iteration_cap_from_env(10'000'000);

  // parse
  std::string parse_in = "-";
  bool parse_json_out = false;
  auto* c_parse = app.add_subcommand("parse", "Parse and pretty-print a program");
  c_parse->add_option("input", parse_in, "DSL or JSON file ('-' for stdin)");
  c_parse->add_flag("--json", parse_json_out, "Emit the interchange format");

  // deps
  std::string deps_in = "-";
  bool deps_json = false, deps_oracle = false;
  std::vector<std::string> deps_bind;
  auto* c_deps = app.add_subcommand("deps", "Dependence graph");
  c_deps->add_option("input", deps_in);
  c_deps->add_flag("--json", deps_json);
  c_deps->add_flag("--oracle", deps_oracle, "Brute-force edges instead of static analysis");
  c_deps->add_option("--bindings,--bind", deps_bind, "NAME=VALUE[,...]");

  // normalize
  std::string norm_in = "-", norm_out, norm_report, norm_metric = "distance";
  std::vector<std::string> norm_bind;
  bool norm_json = false;
  auto* c_norm = app.add_subcommand("normalize", "Maximal fission and stride minimization");
  c_norm->add_option("input", norm_in);
  c_norm->add_option("-o,--output", norm_out);
  c_norm->add_option("--report", norm_report, "Write the normalization report (JSON)");
  c_norm->add_option("--metric", norm_metric)->check(CLI::IsMember({"distance", "ooo"}));
  c_norm->add_option("--bindings,--bind", norm_bind);
  c_norm->add_flag("--json", norm_json, "Emit the interchange format");

  // canon
  std::string canon_in = "-", canon_mode = "exact";
  bool canon_json = false, canon_raw = false;
  auto* c_canon = app.add_subcommand("canon", "Canonical text and fingerprint of the normalized program");
  c_canon->add_option("input", canon_in);
  c_canon->add_option("--mode", canon_mode)->check(CLI::IsMember({"exact", "shape-insensitive"}));
  c_canon->add_flag("--raw", canon_raw, "Skip normalization");
  c_canon->add_flag("--json", canon_json);

  // variants
  std::string var_in, var_dir = ".";
  std::uint64_t var_seed = 1;
  std::size_t var_count = 5;
  auto* c_var = app.add_subcommand("variants", "Write random equivalent variants");
  c_var->add_option("input", var_in)->required();
  c_var->add_option("--seed", var_seed);
  c_var->add_option("--count", var_count);
  c_var->add_option("-o,--output-dir", var_dir);

  // equiv
  std::string eq_a, eq_b, eq_mode = "int";
  std::vector<std::uint64_t> eq_seeds{1, 2, 3};
  std::vector<std::string> eq_bind;
  auto* c_eq = app.add_subcommand("equiv", "Compare two programs under the interpreter");
  c_eq->add_option("first", eq_a)->required();
  c_eq->add_option("second", eq_b)->required();
  c_eq->add_option("--seed", eq_seeds);
  c_eq->add_option("--mode", eq_mode);
  c_eq->add_option("--bindings,--bind", eq_bind);

  // interp
  std::string run_in = "-", run_mode = "int";
  std::uint64_t run_seed = 0;
  std::vector<std::string> run_bind;
  bool run_buffers = false, run_json = false;
  auto* c_run = app.add_subcommand("interp", "Run a program on seeded inputs");
  c_run->add_option("input", run_in);
  c_run->add_option("--mode", run_mode);
  c_run->add_option("--seed", run_seed);
  c_run->add_option("--bindings,--bind", run_bind);
  c_run->add_flag("--buffers", run_buffers, "Print every buffer instead of the digest");
  c_run->add_flag("--json", run_json);

  // match
  std::string match_in = "-", match_db;
  bool match_json = false;
  auto* c_match = app.add_subcommand("match", "Look up recipes for each normalized nest");
  c_match->add_option("input", match_in);
  c_match->add_option("--db", match_db)->required();
  c_match->add_flag("--json", match_json);

  // apply
  std::string apply_in = "-", apply_db, apply_out;
  auto* c_apply = app.add_subcommand("apply", "Normalize, then apply recipes from a database");
  c_apply->add_option("input", apply_in);
  c_apply->add_option("--db", apply_db)->required();
  c_apply->add_option("-o,--output", apply_out);

  // db
  auto* c_db = app.add_subcommand("db", "Recipe database maintenance");
  c_db->require_subcommand(1);
  std::vector<std::string> seed_inputs;
  std::string seed_db, seed_mode = "exact";
  auto* c_seed = c_db->add_subcommand("seed", "Add default recipes for normalized programs");
  c_seed->add_option("inputs", seed_inputs)->required();
  c_seed->add_option("--db", seed_db)->required();
  c_seed->add_option("--mode", seed_mode)->check(CLI::IsMember({"exact", "shape-insensitive"}));
  std::string show_db;
  auto* c_show = c_db->add_subcommand("show", "Print a database");
  c_show->add_option("--db", show_db)->required();

  // emit-c
  std::string emit_in = "-", emit_db, emit_out, emit_name = "kernel";
  bool emit_raw = false;
  auto* c_emit = app.add_subcommand("emit-c", "Emit C source");
  c_emit->add_option("input", emit_in);
  c_emit->add_option("--db", emit_db, "Normalize and apply recipes first");
  c_emit->add_flag("--raw", emit_raw, "Emit the program as written");
  c_emit->add_option("--name", emit_name);
  c_emit->add_option("-o,--output", emit_out);

  // check
  std::string check_dir, check_metric = "distance";
  std::vector<std::uint64_t> check_seeds{1, 2};
  std::size_t check_count = 5;
  std::vector<std::string> check_bind;
  bool check_json = false;
  unsigned check_jobs = 0;
  auto* c_check = app.add_subcommand("check", "Convergence experiment over a corpus directory");
  c_check->add_option("corpus", check_dir)->required();
  c_check->add_option("--seed", check_seeds);
  c_check->add_option("--count", check_count);
  c_check->add_option("--metric", check_metric)->check(CLI::IsMember({"distance", "ooo"}));
  c_check->add_option("--bindings,--bind", check_bind);
  c_check->add_option("--jobs", check_jobs);
  c_check->add_flag("--json", check_json);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_parse) {
      Program p = load(parse_in);
      std::cout << (parse_json_out ? serialize(p) + "\n" : pretty_print(p));
      return 0;
    }
    if (*c_deps) {
      Program p = load(deps_in);
      Bindings b = parse_bindings(deps_bind);
      AnalysisOptions opts = analysis_options(b);
      DependenceGraph g = deps_oracle ? brute_force_oracle(p, b, iter_cap) : analyze(p, opts);
      std::cout << (deps_json ? graph_json(g).dump(2) + "\n" : graph_table(g));
      return 0;
    }
    if (*c_norm) {
      Program p = load(norm_in);
      StrideMetric metric{metric_mode_from_string(norm_metric), parse_bindings(norm_bind), 1'000'000};
      Normalized n = normalize_program(p, metric);
      if (!norm_report.empty()) write_output(norm_report, n.report.to_json().dump(2) + "\n");
      write_output(norm_out, norm_json ? serialize(n.program) + "\n" : pretty_print(n.program));
      return 0;
    }
    if (*c_canon) {
      Program p = load(canon_in);
      if (!canon_raw) p = normalize_program(p).program;
      KeyMode mode = key_mode_from_string(canon_mode);
      CanonicalForm f = canonicalize_program(p, mode);
      if (canon_json) {
        Json j;
        j["version"] = kFormatVersion;
        j["mode"] = to_string(mode);
        j["fingerprint"] = hex64(f.fingerprint);
        j["text"] = f.text;
        j["shape"] = f.shape;
        auto nests = Json::array();
        for (const auto& n : p.body)
          if (n.is_loop()) nests.push_back(hex64(match_key(p, n, mode)));
        j["nests"] = nests;
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << f.text << "fingerprint " << hex64(f.fingerprint) << "\n";
      }
      return 0;
    }
    if (*c_var) {
      Program p = load(var_in);
      std::string stem = var_in == "-" ? "stdin" : fs::path(var_in).stem().string();
      fs::create_directories(var_dir);
      auto vs = generate(p, var_seed, var_count);
      for (std::size_t k = 0; k < vs.size(); ++k) {
        fs::path out = fs::path(var_dir) / (stem + ".v" + std::to_string(k + 1) + ".loop");
        std::string header = "// moves:";
        for (const auto& m : vs[k].moves) header += " [" + m + "]";
        write_output(out.string(), header + "\n" + pretty_print(vs[k].program));
        std::cout << out.string() << "\n";
      }
      return 0;
    }
    if (*c_eq) {
      Program a = load(eq_a), b = load(eq_b);
      std::vector<ExecutionConfig> configs;
      for (auto s : eq_seeds) {
        ExecutionConfig c;
        c.bindings = parse_bindings(eq_bind);
        c.mode = mode_from_string(eq_mode);
        c.seed = s;
        c.iteration_cap = iter_cap;
        configs.push_back(c);
      }
      Verdict v = equivalent(a, b, configs);
      std::cout << (v ? "equivalent" : "different: " + v.detail) << "\n";
      return v ? 0 : 1;
    }
    if (*c_run) {
      Program p = load(run_in);
      ExecutionConfig c;
      c.bindings = parse_bindings(run_bind);
      c.mode = mode_from_string(run_mode);
      c.seed = run_seed;
      c.iteration_cap = iter_cap;
      Memory m = run(p, c);
      if (run_json) {
        Json j;
        j["digest"] = hex64(digest(m));
        Json bufs;
        for (const auto& [name, buf] : m) bufs[name] = c.mode == Mode::Integer ? Json(buf.ints) : Json(buf.floats);
        j["buffers"] = bufs;
        std::cout << j.dump(2) << "\n";
      } else if (run_buffers) {
        std::cout << buffer_text(m);
      } else {
        std::cout << hex64(digest(m)) << "\n";
      }
      return 0;
    }
    if (*c_match) {
      Program p = normalize_program(load(match_in)).program;
      RecipeDatabase db = RecipeDatabase::load(match_db);
      Json rows = Json::array();
      std::size_t misses = 0;
      for (std::size_t t = 0; t < p.body.size(); ++t) {
        if (!p.body[t].is_loop()) continue;
        const Recipe* r = db.lookup(p, p.body[t]);
        Json row;
        row["nest"] = t;
        row["key_hex"] = hex64(match_key(p, p.body[t], KeyMode::Exact));
        row["match"] = r ? Json(to_string(r->mode)) : Json(nullptr);
        if (r) {
          row["recipe"] = hex64(r->key);
          Json steps = Json::array();
          for (const auto& s : r->steps) steps.push_back(s.describe());
          row["steps"] = steps;
        } else {
          ++misses;
        }
        if (!match_json) {
          std::cout << "nest " << t << " " << row["key_hex"].get<std::string>() << " ";
          if (r) {
            std::cout << to_string(r->mode) << " [";
            for (std::size_t s = 0; s < r->steps.size(); ++s) std::cout << (s ? ", " : "") << r->steps[s].describe();
            std::cout << "]\n";
          } else {
            std::cout << "miss\n";
          }
        }
        rows.push_back(std::move(row));
      }
      if (match_json) std::cout << rows.dump(2) << "\n";
      return misses ? 1 : 0;
    }
    if (*c_apply) {
      Program p = normalize_program(load(apply_in)).program;
      ApplyOutcome out = apply_database(RecipeDatabase::load(apply_db), p);
      for (const auto& l : out.log) std::cerr << l << "\n";
      write_output(apply_out, pretty_print(out.program));
      return 0;
    }
    if (*c_seed) {
      RecipeDatabase db = fs::exists(seed_db) ? RecipeDatabase::load(seed_db) : RecipeDatabase{};
      KeyMode mode = key_mode_from_string(seed_mode);
      std::size_t added = 0;
      for (const auto& in : seed_inputs) {
        Program p = normalize_program(load(in)).program;
        added += db.seed(p, mode, fs::path(in).filename().string());
      }
      db.save(seed_db);
      std::cout << added << " recipe(s) added, " << db.size() << " total\n";
      return 0;
    }
    if (*c_show) {
      std::cout << RecipeDatabase::load(show_db).dump();
      return 0;
    }
    if (*c_emit) {
      Program p = load(emit_in);
      if (!emit_raw) p = normalize_program(p).program;
      if (!emit_db.empty()) p = apply_database(RecipeDatabase::load(emit_db), p).program;
      write_output(emit_out, emit_c(p, emit_name));
      return 0;
    }
    if (*c_check) {
      CheckOptions opts;
      opts.seeds = check_seeds;
      opts.count = check_count;
      opts.metric = StrideMetric{metric_mode_from_string(check_metric), parse_bindings(check_bind), 1'000'000};
      opts.iteration_cap = iter_cap;
      opts.jobs = check_jobs;
      if (!fs::is_directory(check_dir)) throw Error("'" + check_dir + "' is not a directory");
      CheckReport r = check_corpus(check_dir, opts);
      std::cout << (check_json ? r.to_json().dump(2) + "\n" : r.to_text());
      for (const auto& k : r.kernels)
        if (const PropertyResult* f = k.first_failure()) {
          std::cerr << "first failure: " << k.name << ": " << f->name << "\n";
          return 1;
        }
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.span().to_string() << ": " << e.message() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
