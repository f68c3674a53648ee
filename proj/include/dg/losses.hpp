#pragma once

#include <cstdint>
#include <span>

#include "dg/tape.hpp"

namespace dg {

/// Mean over the batch of -log softmax(logits)[label], for logits [B x K].
/// Uses max subtraction, so saturated logits stay finite.
Var cross_entropy(Var logits, std::span<const std::uint32_t> labels);

}  // namespace dg
