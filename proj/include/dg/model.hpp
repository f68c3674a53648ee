#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dg/tape.hpp"

namespace dg {

/// Layer sizes of the two-branch network:
/// conv(3->conv1) -> relu -> pool -> conv(conv1->conv2) -> relu -> pool ->
/// dense(->feature_width) -> relu = g; class head and domain head read g.
/// With `bottleneck`, the class head is preceded by a linear 2-unit layer.
struct Architecture {
  std::size_t image_size = 16;
  std::size_t in_channels = 3;
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t feature_width = 64;
  std::size_t classes = 7;
  std::size_t domains = 4;
  bool bottleneck = false;

  /// Width of the flattened trunk activation fed to the feature layer.
  std::size_t flat_width() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

/// Trunk, class head and domain head parameters.
struct TwoBranchParams {
  Architecture arch;
  Tensor conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
  Tensor bneck_w, bneck_b;  // empty unless arch.bottleneck
  Tensor cls_w, cls_b;
  Tensor dom_w, dom_b;

  enum class Group { Trunk, ClassHead, DomainHead };

  /// Every parameter tensor in a fixed order (trunk, class head, domain head).
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<Group> groups() const;
  std::size_t parameter_count() const;

  friend bool operator==(const TwoBranchParams&, const TwoBranchParams&) = default;
};

/// Glorot-uniform weights, zero biases.
TwoBranchParams init_two_branch(const Architecture& arch, std::uint64_t seed);

/// Gradient reversal: identity forward, upstream gradient times -lambda
/// backward. Disabled means plain identity.
struct GrlConfig {
  bool enabled = false;
  double lambda = 1.0;

  void validate() const;
};

/// Identity forward; multiplies the upstream gradient by `factor` backward.
Var scale_gradient(Var x, double factor);

/// Result of one recorded forward pass. Owns the tape.
struct ForwardPass {
  std::unique_ptr<Tape> tape;
  /// Leaves for every parameter, same order as TwoBranchParams::tensors().
  std::vector<Var> params;
  Var input;
  Var g;
  Var bottleneck;  // valid only for bottleneck architectures
  Var class_logits;
  Var domain_logits;
};

/// Runs the network on a [B x 3 x H x W] batch. `mask` ([|g|] or [B x |g|])
/// multiplies g on the class path only; the domain head always sees g,
/// through the reversal node when `grl.enabled`.
ForwardPass forward(const TwoBranchParams& params, const Tensor& batch, const GrlConfig& grl = {},
                    const Tensor* mask = nullptr);

/// Computes a class-path mask from the recorded value of g ([B x |g|]).
using MaskProvider = std::function<Tensor(const Tensor& g)>;

/// Same as above with the mask computed from g during the pass, so the trunk
/// runs once. An empty provider means no mask.
ForwardPass forward(const TwoBranchParams& params, const Tensor& batch, const GrlConfig& grl,
                    const MaskProvider& mask_provider);

/// d(sum_b logits[b, label_b]) / dg for the class head (`class_head` true,
/// through the bottleneck if any) or the domain head, evaluated at g
/// ([B x |g|]). Row b is the gradient of sample b's true-label logit.
Tensor head_gradient(const TwoBranchParams& params, const Tensor& g, std::span<const std::uint32_t> labels,
                     bool class_head);

/// Trunk output g only, [B x |g|], without keeping a tape around.
Tensor extract_features(const TwoBranchParams& params, const Tensor& batch);

/// 2-D bottleneck activations, [B x 2].
Tensor bottleneck_embed(const TwoBranchParams& params, const Tensor& batch);

/// ckpt.bin holds the parameters as flat float64 in tensors() order;
/// ckpt.json holds the architecture and step count.
void save_checkpoint(const TwoBranchParams& params, std::uint64_t step, const std::string& dir);
TwoBranchParams load_checkpoint(const std::string& dir, std::uint64_t* step = nullptr);

}  // namespace dg
