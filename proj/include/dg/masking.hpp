#pragma once

#include "dg/tensor.hpp"

namespace dg {

/// Feature masks from per-sample gradients [B x G] (or a single [G] row).
/// Per row, the k = round(q / 100 * G) entries with the largest |grad| get 0,
/// the rest 1; equal magnitudes go to the lower index first.
Tensor top_q_mask(const Tensor& grads, double q);

/// IDFM: mask from d(true-domain logit)/dg.
inline Tensor idfm_mask(const Tensor& domain_grads, double q) { return top_q_mask(domain_grads, q); }
/// RSC-style: mask from d(true-class logit)/dg.
inline Tensor rsc_mask(const Tensor& class_grads, double q) { return top_q_mask(class_grads, q); }

/// Variant that ranks features by batch-mean |grad| and shares one mask
/// across the batch. Output has the input's shape.
Tensor batch_mean_mask(const Tensor& grads, double q);

/// k for a feature width and percentile.
std::size_t masked_count(std::size_t width, double q);

}  // namespace dg
