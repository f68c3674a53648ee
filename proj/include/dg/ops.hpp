#pragma once

#include <cstdint>
#include <span>

#include "dg/tape.hpp"

namespace dg {

// Differentiable primitives. Each computes its value eagerly and records a
// backward rule on the tape of its inputs.

/// y = W x + b for W [out x in], b [out], x [in] or a batch x [B x in].
Var dense(Var weight, Var bias, Var x);

/// 3x3 valid, stride-1 cross-correlation. Kernel [co x ci x 3 x 3];
/// x is [ci x H x W] or a batch [B x ci x H x W].
Var conv2d(Var kernel, Var x);
/// conv2d plus a per-output-channel bias [co].
Var conv2d(Var kernel, Var bias, Var x);

/// max(0, x); the subgradient at 0 is 0.
Var relu(Var x);
/// Non-overlapping 2x2 mean pooling over the last two axes; odd trailing
/// rows/columns are dropped.
Var mean_pool2x2(Var x);

Var add(Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var mean(Var x);
Var reshape(Var x, Shape shape);
/// [B x ...] -> [B x rest].
Var flatten_batch(Var x);

/// Row-wise gather: out[b] = x[b, index[b]] for x [B x K].
Var pick(Var x, std::span<const std::uint32_t> index);

}  // namespace dg
