#include "mnagt/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace mnagt::oracle {

namespace {

std::string dims(const DenseMatrix& m) { return std::to_string(m.rows) + "x" + std::to_string(m.cols); }

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("oracle: " + what);
}

double activate(double x, Activation act) {
  switch (act) {
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Relu:
      return x > 0 ? x : 0.0;
    case Activation::Identity:
      break;
  }
  return x;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t r, std::size_t c, double fill) : rows(r), cols(c), values(r * c, fill) {}

DenseMatrix::DenseMatrix(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  require(values.size() == r * c, "value count does not match " + dims(*this));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols == b.rows, "cannot multiply " + dims(a) + " by " + dims(b));
  DenseMatrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows == b.rows && a.cols == b.cols, "cannot add " + dims(a) + " and " + dims(b));
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
  return out;
}

DenseMatrix hstack(const std::vector<DenseMatrix>& parts) {
  require(!parts.empty(), "hstack of nothing");
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require(p.rows == parts[0].rows, "hstack row mismatch");
    cols += p.cols;
  }
  DenseMatrix out(parts[0].rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.rows; ++i)
      for (std::size_t j = 0; j < p.cols; ++j) out(i, offset + j) = p(i, j);
    offset += p.cols;
  }
  return out;
}

DenseMatrix dense_normalized_adjacency(std::size_t n,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                       bool symmetric) {
  DenseMatrix a = DenseMatrix::identity(n);
  for (const auto& [i, j] : edges) {
    require(i < n && j < n, "edge endpoint out of range");
    if (i == j) continue;
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) == 0.0) continue;
      a(i, j) = symmetric ? 1.0 / (std::sqrt(deg[i]) * std::sqrt(deg[j])) : 1.0 / deg[i];
    }
  return a;
}

DenseMatrix dense_power_propagate(const DenseMatrix& a, const DenseMatrix& h, int k) {
  require(k >= 0, "negative hop count");
  require(a.rows == a.cols, "propagation matrix must be square, got " + dims(a));
  require(a.cols == h.rows, "cannot propagate " + dims(h) + " with " + dims(a));
  DenseMatrix out = h;
  for (int step = 0; step < k; ++step) out = multiply(a, out);
  return out;
}

DenseMatrix naive_attention_weights(const DenseMatrix& q, const DenseMatrix& k) {
  require(q.cols == k.cols, "query/key widths differ: " + dims(q) + " vs " + dims(k));
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
  DenseMatrix w(q.rows, k.rows);
  for (std::size_t i = 0; i < q.rows; ++i) {
    double peak = -INFINITY;
    for (std::size_t j = 0; j < k.rows; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < q.cols; ++c) dot += q(i, c) * k(j, c);
      w(i, j) = dot * scale;
      peak = std::max(peak, w(i, j));
    }
    double total = 0;
    for (std::size_t j = 0; j < k.rows; ++j) {
      w(i, j) = std::exp(w(i, j) - peak);
      total += w(i, j);
    }
    for (std::size_t j = 0; j < k.rows; ++j) w(i, j) /= total;
  }
  return w;
}

DenseMatrix naive_attention(const DenseMatrix& q, const DenseMatrix& k, const DenseMatrix& v) {
  require(k.rows == v.rows, "key/value counts differ: " + dims(k) + " vs " + dims(v));
  const DenseMatrix w = naive_attention_weights(q, k);
  DenseMatrix out(q.rows, v.cols);
  for (std::size_t i = 0; i < q.rows; ++i)
    for (std::size_t j = 0; j < v.rows; ++j)
      for (std::size_t c = 0; c < v.cols; ++c) out(i, c) += w(i, j) * v(j, c);
  return out;
}

DenseMatrix naive_kernel_mha(const DenseMatrix& h, const DenseMatrix& a, int hop, bool propagate_value,
                             const std::vector<HeadWeights>& heads, const DenseMatrix& wo) {
  require(!heads.empty(), "no heads");
  const DenseMatrix hk = dense_power_propagate(a, h, hop);
  const DenseMatrix& src_v = propagate_value ? hk : h;
  std::vector<DenseMatrix> outs;
  for (const auto& w : heads)
    outs.push_back(naive_attention(multiply(hk, w.wq), multiply(hk, w.wk), multiply(src_v, w.wv)));
  return multiply(hstack(outs), wo);
}

AdaptiveResult naive_adaptive_aggregate(const std::vector<DenseMatrix>& z_list, const DenseMatrix& proj,
                                        const DenseMatrix& w, Activation act) {
  require(!z_list.empty(), "no kernel outputs");
  const std::size_t n = z_list[0].rows, d = z_list[0].cols;
  for (const auto& z : z_list) require(z.rows == n && z.cols == d, "kernel outputs differ in shape");
  require(proj.rows == d && proj.cols == d, "projection must be d x d");
  require(w.rows == 1 && w.cols == d, "score vector must be 1 x d");
  const std::size_t kernels = z_list.size();
  AdaptiveResult r{DenseMatrix(n, d), DenseMatrix(n, kernels)};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> score(kernels, 0.0);
    for (std::size_t k = 0; k < kernels; ++k) {
      for (std::size_t c = 0; c < d; ++c) {
        double pre = 0;
        for (std::size_t e = 0; e < d; ++e) pre += z_list[k](i, e) * proj(e, c);
        score[k] += activate(pre, act) * w(0, c);
      }
    }
    const double peak = *std::max_element(score.begin(), score.end());
    double total = 0;
    for (double& s : score) {
      s = std::exp(s - peak);
      total += s;
    }
    for (std::size_t k = 0; k < kernels; ++k) {
      r.alpha(i, k) = score[k] / total;
      for (std::size_t c = 0; c < d; ++c) r.z(i, c) += r.alpha(i, k) * z_list[k](i, c);
    }
  }
  return r;
}

std::vector<double> numerical_gradient(const std::function<double()>& f, std::span<double> theta,
                                       double step) {
  require(step > 0, "step must be positive");
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    const double up = f();
    theta[i] = saved - step;
    const double down = f();
    theta[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("oracle: non-finite objective at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2 * step);
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  require(a.size() == b.size(), "length mismatch");
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i], floor));
  return worst;
}

double normwise_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  require(a.size() == b.size(), "length mismatch");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "length mismatch");
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace mnagt::oracle
