#pragma once

#include "radardepth/geometry.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace radardepth {

/// Symmetric positive-definite system A x = b with A in CSR form.
struct SparseSystem {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;  // n + 1 entries
  std::vector<std::size_t> col_idx;  // sorted within each row
  std::vector<double> values;
  std::vector<double> rhs;

  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> diagonal() const;
  /// Entry lookup; zero when not stored.
  double coeff(std::size_t row, std::size_t col) const;
};

/// Neighbour weights of pixel (u, v): w_rs ∝ exp(-(I_r - I_s)^2 / (2 σ_r^2))
/// over the in-bounds 8-neighbourhood, normalised to sum to 1. σ_r^2 is the
/// intensity variance over the pixel and its neighbours, floored at 1e-4.
struct NeighbourWeight {
  int u;
  int v;
  double weight;
};
std::vector<NeighbourWeight> colorization_weights(const Grid& gray, int u, int v);

/// Normal equations of
///   Σ_{r not anchored} (d_r - Σ_s w_rs d_s)^2 + λ Σ_{anchors} (d_r - a_r)^2.
/// Throws std::invalid_argument when there are no anchors or shapes differ.
SparseSystem build_colorization_system(const Grid& gray, const SparseDepthImage& anchors,
                                       double lambda_anchor = 100.0);

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;  // ‖Ax − b‖ / ‖b‖, recomputed from x
};

class CgNotConverged : public std::runtime_error {
 public:
  CgNotConverged(int iterations, double residual);
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// Jacobi-preconditioned conjugate gradient. Returns only when
/// ‖Ax − b‖/‖b‖ <= tol; throws CgNotConverged after max_iter iterations.
CgResult solve_cg(const SparseSystem& sys, double tol = 1e-8, int max_iter = 10000,
                  std::span<const double> x0 = {});

struct DensifyOptions {
  double lambda_anchor = 100.0;
  double tol = 1e-8;
  int max_iter = 20000;
  double min_depth = 1e-3;
};

/// Colorization-style densification of sparse depth guided by a grayscale
/// image in [0, 1]. Output is clamped to at least min_depth.
DenseDepthImage densify_depth(const Grid& gray, const SparseDepthImage& sparse,
                              const DensifyOptions& options = {});

}  // namespace radardepth
