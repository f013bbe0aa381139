#pragma once

#include <vector>

#include "uda/nn.hpp"

namespace uda {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over every entry of a ParameterStore. Parameters listed in `frozen`
/// are skipped.
class Adam {
 public:
  Adam(const ParameterStore& store, AdamOptions opts = {});

  void step(double lr);
  void freeze(const Var& param);
  long steps_taken() const { return t_; }

 private:
  struct Slot {
    Var param;
    Tensor m;
    Tensor v;
    bool frozen = false;
  };
  std::vector<Slot> slots_;
  AdamOptions opts_;
  long t_ = 0;
};

}  // namespace uda
