#include "mnagt/ops.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <type_traits>

#include "eigen_view.hpp"

namespace mnagt::ops {

namespace {

template <class T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

template <class T>
Tensor<T> matrix_like(std::size_t rows, std::size_t cols) {
  return Tensor<T>(Shape{rows, cols});
}

template <class T, class F>
Var<T> unary_elementwise(const char* op, Var<T> x, F value_and_slope) {
  const Tensor<T>& in = x.value();
  Tensor<T> out(in.shape());
  auto slope = std::make_shared<Tensor<T>>(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [v, s] = value_and_slope(static_cast<double>(in[i]));
    out[i] = static_cast<T>(v);
    (*slope)[i] = static_cast<T>(s);
  }
  return x.tape().record(op, std::move(out), {x}, [x, slope](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    Tensor<T> dx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * (*slope)[i];
    tape.accumulate(x, dx);
  });
}

// In-place tanh. Float goes through Eigen's vectorized rational
// approximation (a few ulp); double keeps std::tanh for the gradient checks.
template <class T>
void tanh_inplace(T* data, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    Eigen::Map<Eigen::ArrayXf> a(data, static_cast<Eigen::Index>(n));
    a = a.tanh();
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = std::tanh(data[i]);
  }
}

// Elementwise op whose value and slope are cheap given t = tanh(pre(x)).
template <class T, class Pre, class Finish>
Var<T> tanh_based(const char* op, Var<T> x, Pre pre, Finish finish) {
  const Tensor<T>& in = x.value();
  const std::size_t n = in.size();
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < n; ++i) out[i] = pre(in[i]);
  tanh_inplace(out.data(), n);
  auto slope = std::make_shared<Tensor<T>>(in.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const auto [v, s] = finish(in[i], out[i]);
    out[i] = v;
    (*slope)[i] = s;
  }
  return x.tape().record(op, std::move(out), {x}, [x, slope](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    Tensor<T> dx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * (*slope)[i];
    tape.accumulate(x, dx);
  });
}

}  // namespace

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto [n, k] = matrix_dims(a.shape());
  const auto [k2, m] = matrix_dims(b.shape());
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree, " +
                         shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  Tensor<T> out = matrix_like<T>(n, m);
  if (n && m) {
    out_view(out).noalias() = in_view(a.value()) * in_view(b.value());
  }
  return a.tape().record("matmul", std::move(out), {a, b}, [a, b](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    if (a.requires_grad()) {
      Tensor<T> da(a.shape());
      out_view(da).noalias() = in_view(g) * in_view(b.value()).transpose();
      tape.accumulate(a, da);
    }
    if (b.requires_grad()) {
      Tensor<T> db(b.shape());
      out_view(db).noalias() = in_view(a.value()).transpose() * in_view(g);
      tape.accumulate(b, db);
    }
  });
}

template <class T>
Var<T> transpose(Var<T> x) {
  const auto [r, c] = matrix_dims(x.shape());
  Tensor<T> out = matrix_like<T>(c, r);
  out_view(out) = in_view(x.value()).transpose();
  return x.tape().record("transpose", std::move(out), {x}, [x](Tape<T>& tape, std::size_t self) {
    Tensor<T> dx(x.shape());
    out_view(dx) = in_view(tape.grad_output(self)).transpose();
    tape.accumulate(x, dx);
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape("add", a.value(), b.value());
  Tensor<T> out = a.value();
  out.set_requires_grad(false);
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

template <class T>
Var<T> add_row(Var<T> x, Var<T> bias) {
  const auto [n, d] = matrix_dims(x.shape());
  if (bias.value().size() != d) {
    throw DimensionError("add_row: bias " + shape_to_string(bias.shape()) +
                         " does not match " + shape_to_string(x.shape()));
  }
  Tensor<T> out(Shape{n, d});
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xv[i * d + j] + bv[j];
  return x.tape().record("add_row", std::move(out), {x, bias},
                         [x, bias, n, d](Tape<T>& tape, std::size_t self) {
                           const Tensor<T>& g = tape.grad_output(self);
                           tape.accumulate(x, g);
                           if (bias.requires_grad()) {
                             Tensor<T> db(bias.shape());
                             for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = 0; j < d; ++j) db[j] += g[i * d + j];
                             tape.accumulate(bias, db);
                           }
                         });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    Tensor<T> da(a.shape()), db(b.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      da[i] = g[i] * b.value()[i];
      db[i] = g[i] * a.value()[i];
    }
    tape.accumulate(a, da);
    tape.accumulate(b, db);
  });
}

template <class T>
Var<T> scale(Var<T> x, T factor) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * factor;
  return x.tape().record("scale", std::move(out), {x}, [x, factor](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    Tensor<T> dx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * factor;
    tape.accumulate(x, dx);
  });
}

template <class T>
Var<T> mul_col(Var<T> x, Var<T> s) {
  const auto [n, d] = matrix_dims(x.shape());
  if (s.value().size() != n) {
    throw DimensionError("mul_col: column " + shape_to_string(s.shape()) +
                         " does not match " + shape_to_string(x.shape()));
  }
  Tensor<T> out(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.value()[i * d + j] * s.value()[i];
  return x.tape().record("mul_col", std::move(out), {x, s}, [x, s, n, d](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    if (x.requires_grad()) {
      Tensor<T> dx(x.shape());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) dx[i * d + j] = g[i * d + j] * s.value()[i];
      tape.accumulate(x, dx);
    }
    if (s.requires_grad()) {
      Tensor<T> ds(s.shape());
      for (std::size_t i = 0; i < n; ++i) {
        T acc = 0;
        for (std::size_t j = 0; j < d; ++j) acc += g[i * d + j] * x.value()[i * d + j];
        ds[i] = acc;
      }
      tape.accumulate(s, ds);
    }
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row mismatch " +
                           shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor<T> out(Shape{n, total});
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor<T>& v = parts[p].value();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data() + i * widths[p], widths[p], out.data() + i * total + offset);
    offset += widths[p];
  }
  return parts.front().tape().record(
      "concat_cols", std::move(out), parts,
      [parts, widths, n, total](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_output(self);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          if (parts[p].requires_grad()) {
            Tensor<T> dp(parts[p].shape());
            for (std::size_t i = 0; i < n; ++i)
              std::copy_n(g.data() + i * total + offset, widths[p], dp.data() + i * widths[p]);
            tape.accumulate(parts[p], dp);
          }
          offset += widths[p];
        }
      });
}

template <class T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count) {
  const auto [n, d] = matrix_dims(x.shape());
  if (start + count > d) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_to_string(x.shape()));
  }
  Tensor<T> out(Shape{n, count});
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(x.value().data() + i * d + start, count, out.data() + i * count);
  return x.tape().record("slice_cols", std::move(out), {x},
                         [x, start, count, n, d](Tape<T>& tape, std::size_t self) {
                           const Tensor<T>& g = tape.grad_output(self);
                           Tensor<T> dx(x.shape());
                           for (std::size_t i = 0; i < n; ++i)
                             std::copy_n(g.data() + i * count, count, dx.data() + i * d + start);
                           tape.accumulate(x, dx);
                         });
}

template <class T>
Var<T> sum(Var<T> x) {
  T acc = 0;
  for (T v : x.value().values()) acc += v;
  return x.tape().record("sum", Tensor<T>::scalar(acc), {x}, [x](Tape<T>& tape, std::size_t self) {
    tape.accumulate(x, Tensor<T>(x.shape(), tape.grad_output(self)[0]));
  });
}

template <class T>
Var<T> sum_rows(Var<T> x) {
  const auto [n, d] = matrix_dims(x.shape());
  Tensor<T> out(Shape{1, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += x.value()[i * d + j];
  return x.tape().record("sum_rows", std::move(out), {x}, [x, n, d](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    Tensor<T> dx(x.shape());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) dx[i * d + j] = g[j];
    tape.accumulate(x, dx);
  });
}

template <class T>
Var<T> mean_rows(Var<T> x) {
  const auto n = x.rows();
  if (n == 0) throw DimensionError("mean_rows: empty input");
  auto s = sum_rows(x);
  return scale(s, T(1) / static_cast<T>(n));
}

template <class T>
Var<T> relu(Var<T> x) {
  return unary_elementwise("relu", x, [](double v) {
    return std::pair{v > 0 ? v : 0.0, v > 0 ? 1.0 : 0.0};
  });
}

template <class T>
Var<T> tanh(Var<T> x) {
  return tanh_based(
      "tanh", x, [](T v) { return v; }, [](T, T t) { return std::pair<T, T>{t, T(1) - t * t}; });
}

double gelu_value(double x, GeluForm form) {
  if (form == GeluForm::Erf) return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

double gelu_derivative(double x, GeluForm form) {
  if (form == GeluForm::Erf) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
  }
  constexpr double c = 0.7978845608028654;
  const double t = std::tanh(c * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

template <class T>
Var<T> gelu(Var<T> x, GeluForm form) {
  if (form == GeluForm::Erf) {
    return unary_elementwise("gelu", x, [](double v) {
      return std::pair{gelu_value(v, GeluForm::Erf), gelu_derivative(v, GeluForm::Erf)};
    });
  }
  // Same formulas as gelu_value / gelu_derivative with one tanh per entry.
  constexpr T c = T(0.7978845608028654);
  constexpr T a = T(0.044715);
  return tanh_based(
      "gelu", x, [](T v) { return c * (v + a * v * v * v); },
      [](T v, T t) {
        return std::pair<T, T>{T(0.5) * v * (T(1) + t),
                               T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * c * (T(1) + T(3) * a * v * v)};
      });
}

template <class T>
Var<T> softmax_rows(Var<T> x) {
  const auto [n, m] = matrix_dims(x.shape());
  if (m == 0) throw DimensionError("softmax_rows: rows must have at least one entry");
  Tensor<T> out(Shape{n, m});
  const Tensor<T>& in = x.value();
  for (std::size_t i = 0; i < n; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      const T v = in[i * m + j];
      if (!std::isfinite(v)) throw NumericError("softmax_rows: non-finite input");
      mx = std::max(mx, v);
    }
    T total = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const T e = std::exp(in[i * m + j] - mx);
      out[i * m + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= total;
  }
  return x.tape().record("softmax_rows", std::move(out), {x}, [x, n, m](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    const Tensor<T>& y = tape.value(self);
    Tensor<T> dx(x.shape());
    for (std::size_t i = 0; i < n; ++i) {
      T dot = 0;
      for (std::size_t j = 0; j < m; ++j) dot += g[i * m + j] * y[i * m + j];
      for (std::size_t j = 0; j < m; ++j) dx[i * m + j] = y[i * m + j] * (g[i * m + j] - dot);
    }
    tape.accumulate(x, dx);
  });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  const auto [n, d] = matrix_dims(x.shape());
  if (d == 0) throw DimensionError("layer_norm: zero-width rows");
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw DimensionError("layer_norm: affine parameters " + shape_to_string(gamma.shape()) +
                         "/" + shape_to_string(beta.shape()) + " do not match " +
                         shape_to_string(x.shape()));
  }
  auto xhat = std::make_shared<Tensor<T>>(Shape{n, d});
  auto inv_std = std::make_shared<std::vector<T>>(n);
  Tensor<T> out(Shape{n, d});
  const Tensor<T>& in = x.value();
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += in[i * d + j];
    mean /= static_cast<double>(d);
    double var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = in[i * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    (*inv_std)[i] = static_cast<T>(is);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = static_cast<T>((in[i * d + j] - mean) * is);
      (*xhat)[i * d + j] = h;
      out[i * d + j] = h * gv[j] + bv[j];
    }
  }
  return x.tape().record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, n, d](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_output(self);
        const Tensor<T>& gv = gamma.value();
        Tensor<T> dgamma(gamma.shape()), dbeta(beta.shape()), dx(x.shape());
        for (std::size_t i = 0; i < n; ++i) {
          T mean_dh = 0, mean_dh_h = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const T gij = g[i * d + j];
            const T h = (*xhat)[i * d + j];
            dgamma[j] += gij * h;
            dbeta[j] += gij;
            const T dh = gij * gv[j];
            mean_dh += dh;
            mean_dh_h += dh * h;
          }
          mean_dh /= static_cast<T>(d);
          mean_dh_h /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const T h = (*xhat)[i * d + j];
            const T dh = g[i * d + j] * gv[j];
            dx[i * d + j] = (*inv_std)[i] * (dh - mean_dh - h * mean_dh_h);
          }
        }
        tape.accumulate(x, dx);
        tape.accumulate(gamma, dgamma);
        tape.accumulate(beta, dbeta);
      });
}

template <class T>
Var<T> dropout(Var<T> x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<Tensor<T>>(x.shape());
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T m = uniform01(rng) < p ? T(0) : keep_scale;
    (*mask)[i] = m;
    out[i] = x.value()[i] * m;
  }
  return x.tape().record("dropout", std::move(out), {x}, [x, mask](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad_output(self);
    Tensor<T> dx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * (*mask)[i];
    tape.accumulate(x, dx);
  });
}

template <class T>
Var<T> cross_entropy_logits(Var<T> logits, std::span<const int> labels) {
  const auto [b, c] = matrix_dims(logits.shape());
  if (labels.size() != b) {
    throw DimensionError("cross_entropy_logits: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_to_string(logits.shape()));
  }
  if (b == 0) throw DimensionError("cross_entropy_logits: empty batch");
  auto probs = std::make_shared<Tensor<T>>(Shape{b, c});
  auto targets = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  const Tensor<T>& z = logits.value();
  double total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(z[i * c + j]));
    double s = 0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(z[i * c + j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j)
      (*probs)[i * c + j] = static_cast<T>(std::exp(z[i * c + j] - lse));
    total += lse - z[i * c + y];
  }
  if (!std::isfinite(total)) throw NumericError("cross_entropy_logits: non-finite loss");
  const T loss = static_cast<T>(total / static_cast<double>(b));
  return logits.tape().record(
      "cross_entropy", Tensor<T>::scalar(loss), {logits},
      [logits, probs, targets, b, c](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad_output(self)[0] / static_cast<T>(b);
        Tensor<T> dz(logits.shape());
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < c; ++j) dz[i * c + j] = (*probs)[i * c + j] * g;
          dz[i * c + static_cast<std::size_t>((*targets)[i])] -= g;
        }
        tape.accumulate(logits, dz);
      });
}

template <class T>
Var<T> pool_segments(Var<T> x, std::span<const std::size_t> offsets, PoolKind kind) {
  const auto [n, d] = matrix_dims(x.shape());
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != n) {
    throw DimensionError("pool_segments: offsets do not cover " + shape_to_string(x.shape()));
  }
  const std::size_t segments = offsets.size() - 1;
  auto seg = std::make_shared<std::vector<std::size_t>>(offsets.begin(), offsets.end());
  Tensor<T> out(Shape{segments, d});
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (hi <= lo) throw DimensionError("pool_segments: empty segment " + std::to_string(s));
    const T w = kind == PoolKind::Mean ? T(1) / static_cast<T>(hi - lo) : T(1);
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t j = 0; j < d; ++j) out[s * d + j] += x.value()[i * d + j];
    for (std::size_t j = 0; j < d; ++j) out[s * d + j] *= w;
  }
  return x.tape().record("pool_segments", std::move(out), {x},
                         [x, seg, kind, d](Tape<T>& tape, std::size_t self) {
                           const Tensor<T>& g = tape.grad_output(self);
                           Tensor<T> dx(x.shape());
                           for (std::size_t s = 0; s + 1 < seg->size(); ++s) {
                             const std::size_t lo = (*seg)[s], hi = (*seg)[s + 1];
                             const T w = kind == PoolKind::Mean ? T(1) / static_cast<T>(hi - lo) : T(1);
                             for (std::size_t i = lo; i < hi; ++i)
                               for (std::size_t j = 0; j < d; ++j) dx[i * d + j] = g[s * d + j] * w;
                           }
                           tape.accumulate(x, dx);
                         });
}

#define MNAGT_INSTANTIATE_OPS(T)                                                   \
  template Var<T> matmul(Var<T>, Var<T>);                                          \
  template Var<T> transpose(Var<T>);                                               \
  template Var<T> add(Var<T>, Var<T>);                                             \
  template Var<T> add_row(Var<T>, Var<T>);                                         \
  template Var<T> mul(Var<T>, Var<T>);                                             \
  template Var<T> scale(Var<T>, T);                                                \
  template Var<T> mul_col(Var<T>, Var<T>);                                         \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                         \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                    \
  template Var<T> sum(Var<T>);                                                     \
  template Var<T> sum_rows(Var<T>);                                                \
  template Var<T> mean_rows(Var<T>);                                               \
  template Var<T> relu(Var<T>);                                                    \
  template Var<T> tanh(Var<T>);                                                    \
  template Var<T> gelu(Var<T>, GeluForm);                                          \
  template Var<T> softmax_rows(Var<T>);                                            \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                           \
  template Var<T> dropout(Var<T>, double, bool, Rng&);                             \
  template Var<T> cross_entropy_logits(Var<T>, std::span<const int>);              \
  template Var<T> pool_segments(Var<T>, std::span<const std::size_t>, PoolKind);

MNAGT_INSTANTIATE_OPS(float)
MNAGT_INSTANTIATE_OPS(double)

#undef MNAGT_INSTANTIATE_OPS

}  // namespace mnagt::ops
