#include "dg/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dg/error.hpp"
#include "dg/ops.hpp"
#include "dg/rng.hpp"

namespace dg {
namespace {

constexpr std::uint64_t kInitTag = 0x494e4954ULL;

void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = rng.uniform(-a, a);
}

struct TrunkVars {
  std::vector<Var> params;
  Var input;
  Var g;
};

TrunkVars record_trunk(Tape& tape, const TwoBranchParams& p, const Tensor& batch) {
  const Architecture& a = p.arch;
  if (batch.rank() != 4 || batch.dim(0) == 0 || batch.dim(1) != a.in_channels || batch.dim(2) != a.image_size ||
      batch.dim(3) != a.image_size) {
    throw DimensionError("model expects a nonempty [B x " + std::to_string(a.in_channels) + " x " +
                         std::to_string(a.image_size) + " x " + std::to_string(a.image_size) + "] batch, got " +
                         to_string(batch.shape()));
  }
  TrunkVars t;
  for (const Tensor* w : p.tensors()) t.params.push_back(tape.leaf(*w));
  t.input = tape.constant(batch);
  Var h = mean_pool2x2(relu(conv2d(t.params[0], t.params[1], t.input)));
  h = mean_pool2x2(relu(conv2d(t.params[2], t.params[3], h)));
  t.g = relu(dense(t.params[4], t.params[5], flatten_batch(h)));
  return t;
}

}  // namespace

std::size_t Architecture::flat_width() const {
  if (image_size < 8) return 0;
  const std::size_t p1 = (image_size - 2) / 2;
  if (p1 < 4) return 0;
  const std::size_t p2 = (p1 - 2) / 2;
  return conv2 * p2 * p2;
}

void Architecture::validate() const {
  if (in_channels == 0 || conv1 == 0 || conv2 == 0 || feature_width == 0) {
    throw ConfigError("architecture widths must be positive");
  }
  if (classes == 0 || domains == 0) throw ConfigError("architecture needs at least one class and one domain");
  if (flat_width() == 0) {
    throw ConfigError("image_size " + std::to_string(image_size) + " too small for two conv/pool stages");
  }
}

nlohmann::json to_json(const Architecture& a) {
  return {{"image_size", a.image_size}, {"in_channels", a.in_channels},     {"conv1", a.conv1},
          {"conv2", a.conv2},           {"feature_width", a.feature_width}, {"classes", a.classes},
          {"domains", a.domains},       {"bottleneck", a.bottleneck}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture a;
  a.image_size = j.value("image_size", a.image_size);
  a.in_channels = j.value("in_channels", a.in_channels);
  a.conv1 = j.value("conv1", a.conv1);
  a.conv2 = j.value("conv2", a.conv2);
  a.feature_width = j.value("feature_width", a.feature_width);
  a.classes = j.value("classes", a.classes);
  a.domains = j.value("domains", a.domains);
  a.bottleneck = j.value("bottleneck", a.bottleneck);
  a.validate();
  return a;
}

std::vector<Tensor*> TwoBranchParams::tensors() {
  std::vector<Tensor*> out = {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc_w, &fc_b};
  if (arch.bottleneck) {
    out.push_back(&bneck_w);
    out.push_back(&bneck_b);
  }
  for (Tensor* t : {&cls_w, &cls_b, &dom_w, &dom_b}) out.push_back(t);
  return out;
}

std::vector<const Tensor*> TwoBranchParams::tensors() const {
  auto mut = const_cast<TwoBranchParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::vector<TwoBranchParams::Group> TwoBranchParams::groups() const {
  std::vector<Group> g(6, Group::Trunk);
  const std::size_t head = arch.bottleneck ? 4 : 2;
  g.insert(g.end(), head, Group::ClassHead);
  g.insert(g.end(), 2, Group::DomainHead);
  return g;
}

std::size_t TwoBranchParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

TwoBranchParams init_two_branch(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(derive_seed({kInitTag, seed}));
  TwoBranchParams p;
  p.arch = arch;
  const std::size_t g = arch.feature_width;
  p.conv1_w = Tensor({arch.conv1, arch.in_channels, 3, 3});
  glorot_fill(p.conv1_w, arch.in_channels * 9, arch.conv1 * 9, rng);
  p.conv1_b = Tensor({arch.conv1});
  p.conv2_w = Tensor({arch.conv2, arch.conv1, 3, 3});
  glorot_fill(p.conv2_w, arch.conv1 * 9, arch.conv2 * 9, rng);
  p.conv2_b = Tensor({arch.conv2});
  p.fc_w = Tensor({g, arch.flat_width()});
  glorot_fill(p.fc_w, arch.flat_width(), g, rng);
  p.fc_b = Tensor({g});
  std::size_t head_in = g;
  if (arch.bottleneck) {
    p.bneck_w = Tensor({2, g});
    glorot_fill(p.bneck_w, g, 2, rng);
    p.bneck_b = Tensor({2});
    head_in = 2;
  }
  p.cls_w = Tensor({arch.classes, head_in});
  glorot_fill(p.cls_w, head_in, arch.classes, rng);
  p.cls_b = Tensor({arch.classes});
  p.dom_w = Tensor({arch.domains, g});
  glorot_fill(p.dom_w, g, arch.domains, rng);
  p.dom_b = Tensor({arch.domains});
  return p;
}

void GrlConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) throw ConfigError("GRL lambda must be finite and >= 0");
}

Var scale_gradient(Var x, double factor) {
  return x.tape().record(x.value(), {x}, [x, factor](const Tensor& up, Gradients& grads) {
    Tensor& g = grads.slot(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * up[i];
  });
}

ForwardPass forward(const TwoBranchParams& params, const Tensor& batch, const GrlConfig& grl,
                    const MaskProvider& mask_provider) {
  grl.validate();
  ForwardPass fp;
  fp.tape = std::make_unique<Tape>();
  TrunkVars t = record_trunk(*fp.tape, params, batch);
  fp.params = std::move(t.params);
  fp.input = t.input;
  fp.g = t.g;

  const std::size_t B = batch.dim(0), G = params.arch.feature_width;
  Var class_in = fp.g;
  if (mask_provider) {
    Tensor m = mask_provider(fp.g.value());
    if (m.shape() == Shape{G}) {
      Tensor full({B, G});
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < G; ++i) full[b * G + i] = m[i];
      m = std::move(full);
    } else if (m.shape() != Shape{B, G}) {
      throw DimensionError("mask must be [" + std::to_string(G) + "] or [" + std::to_string(B) + " x " +
                           std::to_string(G) + "], got " + to_string(m.shape()));
    }
    class_in = mul(fp.g, fp.tape->constant(std::move(m)));
  }
  std::size_t k = 6;
  if (params.arch.bottleneck) {
    fp.bottleneck = dense(fp.params[k], fp.params[k + 1], class_in);
    class_in = fp.bottleneck;
    k += 2;
  }
  fp.class_logits = dense(fp.params[k], fp.params[k + 1], class_in);
  Var dom_in = grl.enabled ? scale_gradient(fp.g, -grl.lambda) : fp.g;
  fp.domain_logits = dense(fp.params[k + 2], fp.params[k + 3], dom_in);
  return fp;
}

ForwardPass forward(const TwoBranchParams& params, const Tensor& batch, const GrlConfig& grl, const Tensor* mask) {
  if (!mask) return forward(params, batch, grl, MaskProvider{});
  return forward(params, batch, grl, [mask](const Tensor&) { return *mask; });
}

Tensor head_gradient(const TwoBranchParams& params, const Tensor& g, std::span<const std::uint32_t> labels,
                     bool class_head) {
  Tape tape;
  Var gv = tape.leaf(g);
  Var logits;
  if (class_head) {
    Var h = gv;
    if (params.arch.bottleneck) h = dense(tape.constant(params.bneck_w), tape.constant(params.bneck_b), h);
    logits = dense(tape.constant(params.cls_w), tape.constant(params.cls_b), h);
  } else {
    logits = dense(tape.constant(params.dom_w), tape.constant(params.dom_b), gv);
  }
  return tape.backward(sum(pick(logits, labels))).wrt(gv);
}

Tensor extract_features(const TwoBranchParams& params, const Tensor& batch) {
  Tape tape;
  return record_trunk(tape, params, batch).g.value();
}

Tensor bottleneck_embed(const TwoBranchParams& params, const Tensor& batch) {
  if (!params.arch.bottleneck) throw ContractError("bottleneck_embed needs a bottleneck architecture");
  Tape tape;
  TrunkVars t = record_trunk(tape, params, batch);
  return dense(t.params[6], t.params[7], t.g).value();
}

void save_checkpoint(const TwoBranchParams& params, std::uint64_t step, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());
  std::ofstream bin(fs::path(dir) / "ckpt.bin", std::ios::binary);
  if (!bin) throw IoError("cannot write " + (fs::path(dir) / "ckpt.bin").string());
  for (const Tensor* t : params.tensors()) {
    bin.write(reinterpret_cast<const char*>(t->data().data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  std::ofstream js(fs::path(dir) / "ckpt.json");
  if (!js) throw IoError("cannot write " + (fs::path(dir) / "ckpt.json").string());
  js << nlohmann::json{{"arch", to_json(params.arch)}, {"step", step}, {"parameters", params.parameter_count()}}.dump(2)
     << '\n';
}

TwoBranchParams load_checkpoint(const std::string& dir, std::uint64_t* step) {
  namespace fs = std::filesystem;
  std::ifstream js(fs::path(dir) / "ckpt.json");
  if (!js) throw IoError("cannot read " + (fs::path(dir) / "ckpt.json").string());
  const auto meta = nlohmann::json::parse(js);
  TwoBranchParams p = init_two_branch(architecture_from_json(meta.at("arch")), 0);
  if (step) *step = meta.value("step", std::uint64_t{0});
  std::ifstream bin(fs::path(dir) / "ckpt.bin", std::ios::binary);
  if (!bin) throw IoError("cannot read " + (fs::path(dir) / "ckpt.bin").string());
  for (Tensor* t : p.tensors()) {
    bin.read(reinterpret_cast<char*>(t->data().data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
    if (!bin) throw IoError("ckpt.bin is shorter than the architecture requires");
  }
  return p;
}

}  // namespace dg
