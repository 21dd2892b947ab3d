#include "mtaw/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mtaw/errors.hpp"

namespace mtaw::num {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
  Tensor probe(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double plus = f(probe);
    probe[i] = original - h;
    const double minus = f(probe);
    probe[i] = original;
    out[i] = (plus - minus) / (2.0 * h);
  }
  return out;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace mtaw::num
