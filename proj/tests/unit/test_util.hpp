#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "uda/nn.hpp"
#include "uda/tensor.hpp"

namespace uda::test {

inline Tensor uniform(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

inline Var leaf(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Var(uniform(s, rng, lo, hi), true);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("uda_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace uda::test
