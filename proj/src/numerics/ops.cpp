#include "mtaw/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtaw/errors.hpp"

namespace mtaw::num {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Var add(Graph& g, Var a, Var b) {
  const Tensor& x = g.value(a);
  const Tensor& y = g.value(b);
  require_same_shape(x, y, "add");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, Var self) {
    auto go = g.grad(self);
    for (Var in : {a, b}) {
      auto gi = g.grad(in);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i];
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& x = g.value(a);
  const Tensor& y = g.value(b);
  require_same_shape(x, y, "mul");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, Var self) {
    auto go = g.grad(self);
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    auto ga = g.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * y[i];
    auto gb = g.grad(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * x[i];
  });
}

Var add_bias(Graph& g, Var x, Var bias) {
  const Tensor& xv = g.value(x);
  const Tensor& bv = g.value(bias);
  if (bv.size() != xv.cols()) {
    throw DimensionError("add_bias: bias " + to_string(bv.shape()) + " does not match " +
                         to_string(xv.shape()));
  }
  Tensor out(xv.shape());
  const std::size_t cols = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = xv.at(r, c) + bv[c];
  }
  return g.record(std::move(out), {x, bias}, [x, bias, cols](Graph& g, Var self) {
    auto go = g.grad(self);
    auto gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
    auto gb = g.grad(bias);
    if (!gb.empty()) {
      for (std::size_t i = 0; i < go.size(); ++i) gb[i % cols] += go[i];
    }
  });
}

Var scale(Graph& g, Var x, double factor) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  return g.record(std::move(out), {x}, [x, factor](Graph& g, Var self) {
    auto go = g.grad(self);
    auto gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
  });
}

Var relu(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return g.record(std::move(out), {x}, [x](Graph& g, Var self) {
    auto go = g.grad(self);
    const Tensor& xv = g.value(x);
    auto gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += go[i];
    }
  });
}

Var dropout(Graph& g, Var x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const Tensor& xv = g.value(x);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> factors(xv.size());
  for (double& f : factors) f = unit(rng) < rate ? 0.0 : keep_scale;
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factors[i];
  return g.record(std::move(out), {x}, [x, factors = std::move(factors)](Graph& g, Var self) {
    auto go = g.grad(self);
    auto gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factors[i];
  });
}

Var sum(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  double total = 0.0;
  for (double v : xv.values()) total += v;
  return g.record(Tensor::scalar(total), {x}, [x](Graph& g, Var self) {
    const double go = g.grad(self)[0];
    for (double& v : g.grad(x)) v += go;
  });
}

Var matmul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + to_string(av.shape()) + " and " +
                         to_string(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  gemm_nn(av.data(), bv.data(), out.data(), m, k, n);
  return g.record(std::move(out), {a, b}, [a, b, m, k, n](Graph& g, Var self) {
    auto go = g.grad(self);
    auto ga = g.grad(a);
    if (!ga.empty()) gemm_nt(go.data(), g.value(b).data(), ga.data(), m, n, k);
    auto gb = g.grad(b);
    if (!gb.empty()) gemm_tn(g.value(a).data(), go.data(), gb.data(), m, k, n);
  });
}

Var batched_matmul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1)) {
    throw DimensionError("batched_matmul: incompatible shapes " + to_string(av.shape()) +
                         " and " + to_string(bv.shape()));
  }
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor out({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_nn(av.data() + s * m * k, bv.data() + s * k * n, out.data() + s * m * n, m, k, n);
  }
  return g.record(std::move(out), {a, b}, [a, b, batch, m, k, n](Graph& g, Var self) {
    auto go = g.grad(self);
    auto ga = g.grad(a);
    auto gb = g.grad(b);
    const double* av = g.value(a).data();
    const double* bv = g.value(b).data();
    for (std::size_t s = 0; s < batch; ++s) {
      const double* gos = go.data() + s * m * n;
      if (!ga.empty()) gemm_nt(gos, bv + s * k * n, ga.data() + s * m * k, m, n, k);
      if (!gb.empty()) gemm_tn(av + s * m * k, gos, gb.data() + s * k * n, m, k, n);
    }
  });
}

Var transpose(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DimensionError("transpose: expected rank 2 or 3, got " + to_string(xv.shape()));
  }
  const std::size_t r = xv.shape()[xv.rank() - 2];
  const std::size_t c = xv.shape()[xv.rank() - 1];
  const std::size_t batch = xv.size() / (r * c == 0 ? 1 : r * c);
  Shape shape = xv.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Tensor out(shape);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* src = xv.data() + s * r * c;
    double* dst = out.data() + s * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
  }
  return g.record(std::move(out), {x}, [x, batch, r, c](Graph& g, Var self) {
    auto go = g.grad(self);
    auto gx = g.grad(x);
    for (std::size_t s = 0; s < batch; ++s) {
      const double* src = go.data() + s * r * c;
      double* dst = gx.data() + s * r * c;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += src[j * r + i];
      }
    }
  });
}

Var reshape(Graph& g, Var x, Shape shape) {
  Tensor out = g.value(x).reshaped(std::move(shape));
  return g.record(std::move(out), {x}, [x](Graph& g, Var self) {
    auto go = g.grad(self);
    auto gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
  });
}

Var gather_rows(Graph& g, Var table, std::span<const std::size_t> rows, Shape out_shape) {
  const Tensor& tv = g.value(table);
  if (tv.rank() != 2) {
    throw DimensionError("gather_rows: table must be 2-D, got " + to_string(tv.shape()));
  }
  const std::size_t cols = tv.dim(1);
  if (element_count(out_shape) != rows.size() * cols) {
    throw DimensionError("gather_rows: output shape " + to_string(out_shape) + " cannot hold " +
                         std::to_string(rows.size()) + " rows of width " + std::to_string(cols));
  }
  Tensor out(std::move(out_shape));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] == kNoRow) continue;
    if (rows[r] >= tv.dim(0)) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[r]) + " outside table " +
                           to_string(tv.shape()));
    }
    std::copy_n(tv.data() + rows[r] * cols, cols, out.data() + r * cols);
  }
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return g.record(std::move(out), {table},
                  [table, cols, index = std::move(index)](Graph& g, Var self) {
                    auto go = g.grad(self);
                    auto gt = g.grad(table);
                    for (std::size_t r = 0; r < index.size(); ++r) {
                      if (index[r] == kNoRow) continue;
                      double* dst = gt.data() + index[r] * cols;
                      const double* src = go.data() + r * cols;
                      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                    }
                  });
}

Var softmax(Graph& g, Var x, const Mask* mask) {
  const Tensor& xv = g.value(x);
  if (mask && mask->shape != xv.shape()) {
    throw DimensionError("softmax: mask " + to_string(mask->shape) + " does not match input " +
                         to_string(xv.shape()));
  }
  const std::size_t cols = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const std::size_t base = r * cols;
    auto kept = [&](std::size_t c) { return !mask || mask->keep[base + c] != 0; };
    double peak = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!kept(c)) continue;
      any = true;
      peak = std::max(peak, xv[base + c]);
    }
    if (!any) {
      throw DegenerateRowError("softmax: row " + std::to_string(r) + " is fully masked");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!kept(c)) continue;
      const double e = std::exp(xv[base + c] - peak);
      out[base + c] = e;
      total += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out[base + c] /= total;
  }
  return g.record(std::move(out), {x}, [x, cols](Graph& g, Var self) {
    auto go = g.grad(self);
    auto gx = g.grad(x);
    const Tensor& y = g.value(self);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const std::size_t base = r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += go[base + c] * y[base + c];
      for (std::size_t c = 0; c < cols; ++c) gx[base + c] += y[base + c] * (go[base + c] - dot);
    }
  });
}

Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = g.value(x);
  const Tensor& gv = g.value(gain);
  const Tensor& bv = g.value(bias);
  const std::size_t d = xv.cols();
  if (gv.size() != d || bv.size() != d) {
    throw DimensionError("layer_norm: parameters " + to_string(gv.shape()) + "/" +
                         to_string(bv.shape()) + " do not match input " + to_string(xv.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");

  const std::size_t rows = xv.rows();
  Tensor out(xv.shape());
  std::vector<double> normalized(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += row[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = (row[c] - mean) * inv_std[r];
      normalized[r * d + c] = xhat;
      out[r * d + c] = gv[c] * xhat + bv[c];
    }
  }
  return g.record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, d, rows, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](Graph& g, Var self) {
        auto go = g.grad(self);
        auto gx = g.grad(x);
        auto ggain = g.grad(gain);
        auto gbias = g.grad(bias);
        const Tensor& gv = g.value(gain);
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gorow = go.data() + r * d;
          const double* xhat = normalized.data() + r * d;
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            if (!ggain.empty()) ggain[c] += gorow[c] * xhat[c];
            if (!gbias.empty()) gbias[c] += gorow[c];
            dxhat[c] = gorow[c] * gv[c];
            sum_dxhat += dxhat[c];
            sum_dxhat_xhat += dxhat[c] * xhat[c];
          }
          if (gx.empty()) continue;
          const double n = static_cast<double>(d);
          for (std::size_t c = 0; c < d; ++c) {
            gx[r * d + c] +=
                inv_std[r] / n * (n * dxhat[c] - sum_dxhat - xhat[c] * sum_dxhat_xhat);
          }
        }
      });
}

Var l2_normalize(Graph& g, Var x, double floor) {
  const Tensor& xv = g.value(x);
  const std::size_t d = xv.cols();
  const std::size_t rows = xv.rows();
  Tensor out(xv.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += xv.at(r, c) * xv.at(r, c);
    norms[r] = std::sqrt(sq);
    if (!(norms[r] >= floor)) {
      throw NormalizationError("l2_normalize: row " + std::to_string(r) + " has norm " +
                               std::to_string(norms[r]) + " below floor");
    }
    for (std::size_t c = 0; c < d; ++c) out.at(r, c) = xv.at(r, c) / norms[r];
  }
  return g.record(std::move(out), {x}, [x, d, norms = std::move(norms)](Graph& g, Var self) {
    auto go = g.grad(self);
    auto gx = g.grad(x);
    const Tensor& y = g.value(self);
    for (std::size_t r = 0; r < norms.size(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += y[r * d + c] * go[r * d + c];
      for (std::size_t c = 0; c < d; ++c) {
        gx[r * d + c] += (go[r * d + c] - y[r * d + c] * dot) / norms[r];
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Graph g;
  return g.value(matmul(g, g.parameter(a), g.parameter(b)));
}

Tensor softmax(const Tensor& x, const Mask* mask) {
  Graph g;
  return g.value(softmax(g, g.parameter(x), mask));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  Graph g;
  return g.value(layer_norm(g, g.parameter(x), g.parameter(gain), g.parameter(bias), eps));
}

Tensor l2_normalize(const Tensor& x, double floor) {
  Graph g;
  return g.value(l2_normalize(g, g.parameter(x), floor));
}

}  // namespace mtaw::num
