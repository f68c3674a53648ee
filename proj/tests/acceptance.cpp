// Runs every acceptance criterion once and prints one PASS/FAIL line each.
// Usage: acceptance <config-dir> <dg-binary> [work-dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dg/config.hpp"
#include "dg/error.hpp"
#include "dg/experiment.hpp"
#include "dg/fid.hpp"
#include "dg/gradcheck.hpp"
#include "dg/losses.hpp"
#include "dg/masking.hpp"
#include "dg/ops.hpp"
#include "dg/split.hpp"
#include "support/checks.hpp"

using namespace dg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string series(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt("%.4f", v[i]);
  return out + "]";
}

struct Context {
  fs::path configs;
  fs::path dg;
  fs::path work;
  /// Runs of criteria 7-10, kept for the ordering check.
  std::vector<std::pair<std::string, RunEntry>> training_runs;
};

Report run_config(Context& ctx, const std::string& file) {
  auto cfg = load_config((ctx.configs / file).string());
  cfg.workers = 1;
  Report r = run_experiment(cfg);
  if (!r.complete) throw std::runtime_error("experiment incomplete: " + r.error);
  emit_report(r, (ctx.work / fs::path(file).stem()).string());
  for (const auto& e : r.runs) ctx.training_runs.emplace_back(file, e);
  return r;
}

double group_mean(const Report& r, const std::string& group, const std::string& metric) {
  for (const auto& row : r.summary()) {
    if (row.group == group && row.metric == metric) return row.mean;
  }
  throw std::runtime_error("no summary row " + group + "/" + metric);
}

// ---------------------------------------------------------------------------

Outcome combinatorics() {
  const auto start = std::chrono::steady_clock::now();
  const auto n = count_cwdg_assignments(4, 7);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {n == 16384 && ms < 1.0, "count=" + std::to_string(n) + " in " + fmt("%.4f", ms) + " ms"};
}

Outcome tdg_inside_cwdg() {
  StyleShapesConfig c;
  c.classes = 7;
  c.styles = {Style::Plain, Style::PaintJitter, Style::CartoonFlat, Style::SketchOutline};
  c.per_cell = 10;
  c.seed = 1;
  const auto b = generate_style_shapes(c);
  bool ok = true;
  for (std::uint32_t d = 0; d < 4; ++d) {
    const auto cw = make_cwdg_split(b, {std::vector<std::uint32_t>(7, d), 0});
    const auto td = make_tdg_split(b, d);
    ok = ok && cw.train == td.train && cw.test == td.test && cw.val == td.val;
  }
  return {ok, "4 constant assignments compared"};
}

Outcome frechet() {
  const GaussianSummary a1{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 1.0), 2};
  const GaussianSummary b1{Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Constant(1, 1, 4.0), 2};
  const GaussianSummary a2{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), 2};
  const GaussianSummary b2{Eigen::VectorXd::Ones(2), 4.0 * Eigen::MatrixXd::Identity(2, 2), 2};
  const double e1 = std::abs(frechet_distance(a1, b1) - std::sqrt(10.0));
  const double e2 = std::abs(frechet_distance(a2, b2) - 2.0);
  const double self = std::max(frechet_distance(a1, a1), frechet_distance(b2, b2));

  Rng rng(2024);
  double asym = 0.0, residual = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(16));
    Eigen::MatrixXd x(n, n), y(n, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = rng.normal();
      y.data()[i] = rng.normal();
    }
    if (trial % 3 == 0) x.col(0).setZero();
    const Eigen::MatrixXd c = x * x.transpose(), c2 = y * y.transpose();
    const Eigen::MatrixXd s = psd_sqrt(c);
    residual = std::max(residual, (s * s - c).cwiseAbs().maxCoeff() / c.cwiseAbs().maxCoeff());
    Eigen::VectorXd m1(n), m2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m1[i] = rng.normal();
      m2[i] = rng.normal();
    }
    const GaussianSummary p{m1, c, 2}, q{m2, c2, 2};
    asym = std::max(asym, std::abs(frechet_distance(p, q) - frechet_distance(q, p)));
  }
  const bool ok = e1 <= 1e-9 && e2 <= 1e-9 && self == 0.0 && asym <= 1e-10 && residual <= 1e-8;
  return {ok, "sqrt10 err=" + fmt("%.2e", e1) + " d2 err=" + fmt("%.2e", e2) + " d(a,a)=" + fmt("%.1e", self) +
                  " asym=" + fmt("%.2e", asym) + " sqrt residual=" + fmt("%.2e", residual)};
}

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

/// Projects an op output onto fixed random weights so the check covers
/// every output coordinate.
Var project(Var y, const Tensor& w) { return sum(mul(y, y.tape().constant(w))); }

Outcome autodiff() {
  Rng rng(77);
  double worst = 0.0;
  std::map<std::string, double> per_case;
  const std::vector<std::string> names = {"dense",   "conv2d",     "conv2d+bias", "relu",       "mean_pool",
                                          "add/mul", "scale/mean", "reshape",     "pick",       "cross_entropy",
                                          "model",   "model+grl",  "model+mask",  "model+grl+mask"};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t which = static_cast<std::size_t>(trial) % names.size();
    const std::string& name = names[which];
    double err = 0.0;
    if (which >= 10) {
      const bool grl = which == 11 || which == 13, masked = which >= 12;
      const auto arch = testing::tiny_architecture(trial % 2 == 1);
      const auto [p, batch] = testing::smooth_point(arch, 3, rng);
      Tensor mask({3, arch.feature_width}, 1.0);
      for (std::size_t i = 0; i < mask.size(); i += 3) mask[i] = 0.0;
      err = testing::model_gradcheck(p, batch, GrlConfig{grl, 0.8}, masked ? &mask : nullptr, 4, rng);
    } else {
      const Tensor x = random_tensor(which <= 2 ? Shape{2, 2, 6, 6} : Shape{3, 4, 4}, rng);
      const Tensor k = random_tensor({3, 2, 3, 3}, rng), bias = random_tensor({3}, rng);
      const Tensor w = random_tensor({4, 6}, rng), b = random_tensor({4}, rng);
      const Tensor other = random_tensor({3, 4, 4}, rng);
      std::vector<std::uint32_t> labels = {0, 2, 3};
      ScalarFn fn;
      Tensor point = x;
      switch (which) {
        case 0:
          point = random_tensor({5, 6}, rng);
          fn = [&](Var v) {
            Tape& t = v.tape();
            auto y = dense(t.constant(w), t.constant(b), v);
            return project(y, Tensor({5, 4}, 0.7));
          };
          break;
        case 1:
          fn = [&](Var v) {
            auto y = conv2d(v.tape().constant(k), v);
            Rng r(5);
            return project(y, random_tensor(y.shape(), r));
          };
          break;
        case 2:
          point = k;
          fn = [&](Var v) {
            Tape& t = v.tape();
            auto y = conv2d(v, t.constant(bias), t.constant(x));
            Rng r(6);
            return project(y, random_tensor(y.shape(), r));
          };
          break;
        case 3:
          fn = [&](Var v) { return project(relu(v), other); };
          break;
        case 4:
          point = random_tensor({2, 5, 5}, rng);
          fn = [&](Var v) {
            auto y = mean_pool2x2(v);
            Rng r(7);
            return project(y, random_tensor(y.shape(), r));
          };
          break;
        case 5:
          fn = [&](Var v) { return sum(mul(add(v, v.tape().constant(other)), v)); };
          break;
        case 6:
          fn = [&](Var v) { return mean(mul(scale(v, -1.7), v)); };
          break;
        case 7:
          fn = [&](Var v) { return project(flatten_batch(reshape(v, {3, 2, 8})), Tensor({3, 16}, 0.3)); };
          break;
        case 8:
          point = random_tensor({3, 5}, rng);
          fn = [&](Var v) { return sum(mul(pick(v, labels), v.tape().constant(Tensor::vector({1, -2, 3})))); };
          break;
        default:
          point = random_tensor({3, 5}, rng);
          fn = [&](Var v) { return cross_entropy(v, labels); };
          break;
      }
      err = finite_difference_check(fn, point, 1e-5).max_rel_error;
    }
    per_case[name] = std::max(per_case[name], err);
    worst = std::max(worst, err);
  }
  std::string detail = "max rel err=" + fmt("%.2e", worst) + " over 100 trials;";
  for (const auto& [name, e] : per_case) detail += " " + name + "=" + fmt("%.1e", e);
  return {worst <= 1e-4, detail};
}

Outcome grl_exact() {
  Rng rng(8);
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto arch = testing::tiny_architecture(seed % 2 == 1);
    const auto p = init_two_branch(arch, seed);
    ok = ok && testing::exact_negation(testing::domain_loss_trunk_gradients(p, testing::random_batch(arch, 4, rng)));
  }
  Architecture full;
  const auto p = init_two_branch(full, 3);
  ok = ok && testing::exact_negation(testing::domain_loss_trunk_gradients(p, testing::random_batch(full, 8, rng)));
  return {ok, "bitwise negation on 5 models"};
}

Outcome mask_cardinality() {
  Rng rng(9);
  std::size_t cases = 0, bad = 0;
  for (double q : {0.0, 33.0, 50.0, 100.0}) {
    for (std::size_t width : {6u, 64u, 65u}) {
      const auto k = static_cast<std::size_t>(std::floor(q / 100.0 * static_cast<double>(width) + 0.5));
      for (int variant = 0; variant < 3; ++variant) {
        Tensor g({4, width});
        for (double& v : g.data()) v = variant == 0 ? rng.normal() : (variant == 1 ? 0.5 : -0.5);
        for (const Tensor& m : {idfm_mask(g, q), rsc_mask(g, q)}) {
          for (std::size_t z : testing::zeros_per_row(m)) {
            ++cases;
            bad += z != k;
          }
        }
      }
    }
  }
  return {bad == 0, std::to_string(cases - bad) + "/" + std::to_string(cases) + " rows exact"};
}

Outcome shortcut(Context& ctx) {
  const Report r = run_config(ctx, "shortcut.json");
  const double shade = group_mean(r, "train=class-shade", "a_sel");
  const double texture = group_mean(r, "train=class-texture", "a_sel");
  const double joint = group_mean(r, "train=class-shade+class-texture", "a_sel");
  const bool singles_low = shade <= 0.30 && texture <= 0.30;
  const bool joint_better = joint >= shade + 0.03 && joint >= texture + 0.03;
  return {singles_low && joint_better, "plain-domain A_sel: shade-only=" + fmt("%.4f", shade) +
                                           " texture-only=" + fmt("%.4f", texture) + " joint=" + fmt("%.4f", joint) +
                                           " (single<=0.30: " + (singles_low ? "yes" : "no") +
                                           ", joint +3pts: " + (joint_better ? "yes" : "no") + ")"};
}

Outcome prior_injection(Context& ctx) {
  const Report r = run_config(ctx, "prior_injection.json");
  const std::size_t classes = r.runs.size() / r.config.seeds.size();
  std::vector<double> acc;
  for (std::size_t k = 0; k < classes; ++k) acc.push_back(group_mean(r, "injected=" + std::to_string(k), "a_sel"));
  const double on_injected = group_mean(r, "injected=1", "injected_prediction_fraction");
  const double fraction = group_mean(r, "injected=1", "injected_test_fraction");
  std::size_t steps = 0, rising = 0;
  for (std::size_t k = 2; k < classes; ++k) {
    ++steps;
    rising += acc[k] >= acc[k - 1];
  }
  const bool collapse = on_injected >= 0.70;
  const bool at_fraction = std::abs(acc[1] - fraction) <= 0.05;
  const bool monotone = static_cast<double>(rising) >= 0.9 * static_cast<double>(steps);
  return {collapse && at_fraction && monotone,
          "one injected class: predictions on it=" + fmt("%.4f", on_injected) + " acc=" + fmt("%.4f", acc[1]) +
              " injected fraction=" + fmt("%.4f", fraction) + "; sweep acc " + series(acc) + ", non-decreasing " +
              std::to_string(rising) + "/" + std::to_string(steps)};
}

Outcome incremental(Context& ctx) {
  const Report r = run_config(ctx, "incremental.json");
  std::vector<double> acc, fid;
  for (int step = 0; step < 3; ++step) {
    acc.push_back(group_mean(r, "step=" + std::to_string(step), "a_sel"));
    fid.push_back(group_mean(r, "step=" + std::to_string(step), "fid"));
  }
  const bool acc_ok = acc[1] >= acc[0] && acc[2] >= acc[1];
  const bool fid_ok = fid[1] <= fid[0] && fid[2] <= fid[1];
  return {acc_ok && fid_ok, "mean acc " + series(acc) + (acc_ok ? " non-decreasing" : " not monotone") +
                                "; mean pixel FID " + series(fid) + (fid_ok ? " non-increasing" : " not monotone")};
}

Outcome cwdg(Context& ctx) {
  const Report r = run_config(ctx, "cwdg_benchmark.json");
  const double erm = group_mean(r, "trainer=erm", "a_sel");
  const double grl = group_mean(r, "trainer=grl", "a_sel");
  const double idfm = group_mean(r, "trainer=idfm", "a_sel");
  return {idfm >= erm + 0.03, "mean A_sel erm=" + fmt("%.4f", erm) + " idfm=" + fmt("%.4f", idfm) +
                                  " (margin " + fmt("%+.4f", idfm - erm) + "); soft check grl=" + fmt("%.4f", grl) +
                                  (grl >= erm ? " >= erm" : " < erm")};
}

Outcome selection_order(Context& ctx) {
  std::size_t bad = 0;
  for (const auto& [file, e] : ctx.training_runs) {
    if (!(e.record.a_min <= e.record.a_sel && e.record.a_sel <= e.record.a_max)) ++bad;
  }
  const bool ok = bad == 0 && !ctx.training_runs.empty();
  return {ok, std::to_string(ctx.training_runs.size() - bad) + "/" + std::to_string(ctx.training_runs.size()) +
                  " runs satisfy A_min <= A_sel <= A_max"};
}

std::string numeric_fields(const fs::path& report) {
  std::ifstream in(report);
  if (!in) throw std::runtime_error("missing " + report.string());
  const auto j = nlohmann::json::parse(in);
  return j.at("runs").dump() + j.at("summary").dump();
}

Outcome determinism(Context& ctx) {
  const auto cfg = ctx.configs / "determinism.json";
  std::vector<std::string> dumps;
  for (const auto& [tag, workers] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 1}, {"c", 4}}) {
    const auto out = ctx.work / ("determinism_" + tag);
    fs::remove_all(out);
    const std::string cmd = "\"" + ctx.dg.string() + "\" experiment \"" + cfg.string() + "\" --workers " +
                            std::to_string(workers) + " --out \"" + out.string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "dg experiment failed: " + cmd};
    dumps.push_back(numeric_fields(out / "report.json"));
  }
  const bool same = dumps[0] == dumps[1] && dumps[0] == dumps[2];
  return {same, std::string("workers 1 vs 1 vs 4: ") + (same ? "byte-identical" : "differ") + " (" +
                    std::to_string(dumps[0].size()) + " bytes compared)"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <config-dir> <dg-binary> [work-dir]\n";
    return 2;
  }
  Context ctx{argv[1], argv[2], argc > 3 ? fs::path(argv[3]) : fs::current_path() / "acceptance_reports", {}};
  fs::create_directories(ctx.work);

  const std::vector<Criterion> criteria = {
      {1, "cwdg combinatorics", 0.001, combinatorics},
      {2, "tdg inside cwdg", 1, tdg_inside_cwdg},
      {3, "frechet metric", 5, frechet},
      {4, "autodiff", 30, autodiff},
      {5, "grl exactness", 1, grl_exact},
      {6, "mask cardinality", 1, mask_cardinality},
      {7, "shortcut", 300, [&] { return shortcut(ctx); }},
      {8, "prior injection", 600, [&] { return prior_injection(ctx); }},
      {9, "incremental trend", 600, [&] { return incremental(ctx); }},
      {10, "idfm over erm under cwdg", 1200, [&] { return cwdg(ctx); }},
      {11, "selection ordering", 1, [&] { return selection_order(ctx); }},
      {12, "determinism", 600, [&] { return determinism(ctx); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.id == 1 || secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt("%.2f", secs) << " s" << (in_time ? "" : ", over budget") << "]" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
