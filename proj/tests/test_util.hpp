#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "loopnorm/frontend.hpp"
#include "loopnorm/interp.hpp"

namespace testutil {

inline std::string corpus_dir() { return LOOPNORM_CORPUS_DIR; }
inline std::string fixture_dir() { return LOOPNORM_FIXTURE_DIR; }

inline loopnorm::Program fixture(const std::string& name) {
  return loopnorm::parse_file(fixture_dir() + "/" + name);
}

inline std::vector<std::string> corpus_names() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(corpus_dir()))
    if (e.path().extension() == ".loop") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

inline loopnorm::Program corpus(const std::string& name) {
  return loopnorm::parse_file(corpus_dir() + "/" + name + ".loop");
}

inline std::vector<loopnorm::ExecutionConfig> int_configs(std::initializer_list<std::uint64_t> seeds = {1, 2, 3},
                                                         loopnorm::Bindings bindings = {}) {
  std::vector<loopnorm::ExecutionConfig> out;
  for (auto s : seeds) {
    loopnorm::ExecutionConfig c;
    c.seed = s;
    c.bindings = bindings;
    out.push_back(c);
  }
  return out;
}

}  // namespace testutil
