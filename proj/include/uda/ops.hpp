#pragma once

#include <vector>

#include "uda/autograd.hpp"

// Differentiable primitives over NCHW tensors. Every op validates shapes and
// throws DimensionError on mismatch.
namespace uda::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
/// Identity inside [lo, hi], saturates outside with zero gradient.
Var clamp(const Var& x, double lo, double hi);

/// Same-padding, stride-1 convolution. weight (out, in, k, k) with odd k,
/// bias (1, out, 1, 1).
Var conv2d(const Var& x, const Var& weight, const Var& bias);

/// Fully connected layer on (n, in, 1, 1) inputs; weight (out, in, 1, 1).
Var linear(const Var& x, const Var& weight, const Var& bias);

Var max_pool2(const Var& x);
Var avg_pool2(const Var& x);
Var upsample_nearest2(const Var& x);

Var concat_channels(const std::vector<Var>& parts);

/// Softmax over the channel axis at every pixel.
Var softmax_channels(const Var& x);

/// (n, c, h, w) -> (n, c, 1, 1) spatial mean.
Var global_avg_pool(const Var& x);

/// (n, c, 1, 1) -> (n, c, h, w) by replication.
Var broadcast_spatial(const Var& x, int h, int w);

/// out[i] = x[(i + shift) mod n] along the batch axis.
Var roll_batch(const Var& x, int shift);

Var mean_all(const Var& x);
Var sum_all(const Var& x);

/// Identity forward, negated gradient backward.
Var gradient_reversal(const Var& x);

/// While alive, gradient_reversal records an identity backward so that the
/// graph carries the plain gradient of its root (finite-difference checks).
class ReversalBypass {
 public:
  ReversalBypass();
  ~ReversalBypass();
  ReversalBypass(const ReversalBypass&) = delete;
  ReversalBypass& operator=(const ReversalBypass&) = delete;

 private:
  bool previous_;
};

}  // namespace uda::ops

namespace uda {

inline Var operator+(const Var& a, const Var& b) { return ops::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ops::sub(a, b); }
inline Var operator*(double s, const Var& a) { return ops::scale(a, s); }
inline Var operator*(const Var& a, double s) { return ops::scale(a, s); }
inline Var operator-(const Var& a) { return ops::scale(a, -1.0); }

}  // namespace uda
