#include "dg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dg/error.hpp"

namespace dg {
namespace {

double evaluate(const ScalarFn& fn, const Tensor& point) {
  Tape tape;
  return fn(tape.leaf(point)).value().item();
}

}  // namespace

GradCheckResult finite_difference_check(const ScalarFn& fn, const Tensor& point, double eps,
                                        std::span<const std::size_t> coordinates) {
  if (!(eps > 0.0)) throw ContractError("finite_difference_check needs eps > 0");
  Tape tape;
  Var x = tape.leaf(point);
  Var out = fn(x);
  const Tensor analytic = tape.backward(out).wrt(x);

  std::vector<std::size_t> all;
  if (coordinates.empty()) {
    all.resize(point.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    coordinates = all;
  }
  GradCheckResult result;
  Tensor probe = point;
  for (std::size_t i : coordinates) {
    if (i >= point.size()) throw ContractError("finite_difference_check coordinate out of range");
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = evaluate(fn, probe);
    probe[i] = orig - eps;
    const double fm = evaluate(fn, probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_coordinate = i;
    }
  }
  return result;
}

}  // namespace dg
