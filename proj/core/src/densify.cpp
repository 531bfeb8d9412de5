#include "radardepth/densify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace radardepth {

namespace {

constexpr double kVarianceFloor = 1e-4;
// A = Σ l_r l_rᵀ couples pixels up to two steps apart: a 5×5 stencil.
constexpr int kBand = 5;
constexpr int kBandHalf = 2;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

void SparseSystem::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      s += values[k] * x[col_idx[k]];
    }
    y[i] = s;
  }
}

std::vector<double> SparseSystem::diagonal() const {
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = coeff(i, i);
  }
  return d;
}

double SparseSystem::coeff(std::size_t row, std::size_t col) const {
  const auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[row]);
  const auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[row + 1]);
  const auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) {
    return 0.0;
  }
  return values[static_cast<std::size_t>(it - col_idx.begin())];
}

std::vector<NeighbourWeight> colorization_weights(const Grid& gray, int u, int v) {
  std::vector<NeighbourWeight> nb;
  const double center = gray.at(u, v);
  double sum = center;
  double sum_sq = center * center;
  int count = 1;
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      const int su = u + du;
      const int sv = v + dv;
      if ((du == 0 && dv == 0) || su < 0 || sv < 0 || su >= gray.width() || sv >= gray.height()) {
        continue;
      }
      const double i = gray.at(su, sv);
      sum += i;
      sum_sq += i * i;
      ++count;
      nb.push_back({su, sv, 0.0});
    }
  }
  const double mean = sum / count;
  const double variance = std::max(sum_sq / count - mean * mean, kVarianceFloor);
  double total = 0.0;
  for (auto& n : nb) {
    const double diff = center - gray.at(n.u, n.v);
    n.weight = std::exp(-diff * diff / (2.0 * variance));
    total += n.weight;
  }
  for (auto& n : nb) {
    n.weight /= total;
  }
  return nb;
}

SparseSystem build_colorization_system(const Grid& gray, const SparseDepthImage& anchors,
                                       double lambda_anchor) {
  if (!gray.same_shape(anchors.grid())) {
    throw std::invalid_argument("build_colorization_system: image and anchors differ in shape");
  }
  if (anchors.valid_count() == 0) {
    throw std::invalid_argument("build_colorization_system: no valid anchor pixels");
  }
  if (!(lambda_anchor > 0.0)) {
    throw std::invalid_argument("build_colorization_system: anchor weight must be positive");
  }
  const int w = gray.width();
  const int h = gray.height();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  constexpr int kStencil = kBand * kBand;
  std::vector<double> band(n * kStencil, 0.0);
  std::vector<char> touched(n * kStencil, 0);

  auto add = [&](int ui, int vi, int uj, int vj, double value) {
    const std::size_t row = static_cast<std::size_t>(vi) * w + ui;
    const std::size_t slot =
        row * kStencil + static_cast<std::size_t>((vj - vi + kBandHalf) * kBand + (uj - ui + kBandHalf));
    band[slot] += value;
    touched[slot] = 1;
  };

  SparseSystem sys;
  sys.n = n;
  sys.rhs.assign(n, 0.0);

  struct Term {
    int u;
    int v;
    double c;
  };
  std::vector<Term> terms;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (anchors.valid(u, v)) {
        add(u, v, u, v, lambda_anchor);
        sys.rhs[static_cast<std::size_t>(v) * w + u] += lambda_anchor * anchors.at(u, v);
        continue;
      }
      // Row l_r of (I - W): +1 at r, -w_rs at each neighbour.
      terms.clear();
      terms.push_back({u, v, 1.0});
      for (const auto& nb : colorization_weights(gray, u, v)) {
        terms.push_back({nb.u, nb.v, -nb.weight});
      }
      for (const auto& a : terms) {
        for (const auto& b : terms) {
          add(a.u, a.v, b.u, b.v, a.c * b.c);
        }
      }
    }
  }

  sys.row_ptr.reserve(n + 1);
  sys.row_ptr.push_back(0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t row = static_cast<std::size_t>(v) * w + u;
      for (int dv = -kBandHalf; dv <= kBandHalf; ++dv) {
        for (int du = -kBandHalf; du <= kBandHalf; ++du) {
          const std::size_t slot =
              row * kStencil + static_cast<std::size_t>((dv + kBandHalf) * kBand + (du + kBandHalf));
          if (!touched[slot]) {
            continue;
          }
          sys.col_idx.push_back(static_cast<std::size_t>(v + dv) * w + static_cast<std::size_t>(u + du));
          sys.values.push_back(band[slot]);
        }
      }
      sys.row_ptr.push_back(sys.col_idx.size());
    }
  }
  return sys;
}

CgNotConverged::CgNotConverged(int iterations, double residual)
    : std::runtime_error("conjugate gradient did not converge after " +
                         std::to_string(iterations) + " iterations (relative residual " +
                         std::to_string(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

CgResult solve_cg(const SparseSystem& sys, double tol, int max_iter, std::span<const double> x0) {
  const std::size_t n = sys.n;
  CgResult result;
  result.x.assign(n, 0.0);
  if (!x0.empty()) {
    if (x0.size() != n) {
      throw std::invalid_argument("solve_cg: initial guess has the wrong size");
    }
    std::copy(x0.begin(), x0.end(), result.x.begin());
  }
  const double b_norm = norm(sys.rhs);
  if (b_norm == 0.0) {
    std::fill(result.x.begin(), result.x.end(), 0.0);
    return result;
  }

  std::vector<double> inv_diag = sys.diagonal();
  for (double& d : inv_diag) {
    if (!(d > 0.0)) {
      throw std::invalid_argument("solve_cg: matrix diagonal must be strictly positive");
    }
    d = 1.0 / d;
  }

  std::vector<double> r(n), z(n), p(n), ap(n);
  auto true_residual = [&]() {
    sys.multiply(result.x, ap);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = sys.rhs[i] - ap[i];
    }
    return norm(r) / b_norm;
  };

  double rel = true_residual();
  int it = 0;
  while (rel > tol) {
    // (Re)start from the true residual; restarts only happen if the
    // recursive residual drifted below tol while the true one did not.
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = inv_diag[i] * r[i];
    }
    p = z;
    double rz = dot(r, z);
    while (it < max_iter) {
      sys.multiply(p, ap);
      const double alpha = rz / dot(p, ap);
      for (std::size_t i = 0; i < n; ++i) {
        result.x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      ++it;
      if (norm(r) / b_norm <= tol) {
        break;
      }
      for (std::size_t i = 0; i < n; ++i) {
        z[i] = inv_diag[i] * r[i];
      }
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = z[i] + beta * p[i];
      }
    }
    rel = true_residual();
    if (rel > tol && it >= max_iter) {
      throw CgNotConverged(it, rel);
    }
  }
  result.iterations = it;
  result.relative_residual = rel;
  return result;
}

DenseDepthImage densify_depth(const Grid& gray, const SparseDepthImage& sparse,
                              const DensifyOptions& options) {
  const SparseSystem sys = build_colorization_system(gray, sparse, options.lambda_anchor);
  double anchor_sum = 0.0;
  std::size_t anchor_count = 0;
  for (double d : sparse.grid().values()) {
    if (d > 0.0) {
      anchor_sum += d;
      ++anchor_count;
    }
  }
  const std::vector<double> x0(sys.n, anchor_sum / static_cast<double>(anchor_count));
  const CgResult sol = solve_cg(sys, options.tol, options.max_iter, x0);
  Grid out(gray.width(), gray.height());
  for (std::size_t i = 0; i < sys.n; ++i) {
    out[i] = std::max(sol.x[i], options.min_depth);
  }
  return DenseDepthImage(std::move(out));
}

}  // namespace radardepth
