// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_OPNORM_HPP
#define LEAN_OPNORM_HPP

#include <cstddef>
#include <vector>

#include "lean/network.hpp"

namespace lean {

/// Dense row-major real matrix; used for kernels, spectra and oracle operators.
class RealGrid {
 public:
  RealGrid() = default;
  RealGrid(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {}

  static RealGrid from_kernel(const Kernel& kernel);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double operator()(int r, int c) const { return data_[index(r, c)]; }
  double& operator()(int r, int c) { return data_[index(r, c)]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double max() const;

  bool operator==(const RealGrid&) const = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

struct NormConfig {
  /// Side of the periodic image on which operators act (the DFT size).
  int n = 64;
  int oracle_iterations = 200;
  double oracle_tolerance = 1e-8;
};

/// Parity-class partition of a kernel for a stride-s convolution. Sub-kernel c = r*s + q
/// holds the entries whose (row mod s, col mod s) == (r, q), compacted and zero-padded to
/// sub_size x sub_size, sub_size = ceil(k/s).
struct SubKernelSet {
  int stride = 1;
  int sub_size = 0;
  std::vector<RealGrid> sub_kernels;
};

/// |DFT2| of the kernel zero-padded (top-left) to n x n: the singular values of the
/// circulant convolution operator. Throws Error{size} when the kernel exceeds n.
RealGrid dft2_magnitudes(const RealGrid& kernel, int n);

/// Dilated convolution as a regular one: entries placed at spacing `dilation`.
RealGrid dilate_kernel(const RealGrid& kernel, int dilation);

SubKernelSet split_strided(const RealGrid& kernel, int stride);

/// Spectral norm of a (possibly strided / dilated) periodic convolution on an n x n image.
/// Stride s > 1 uses the sub-kernel decomposition: per frequency of the (n/s)^2 grid the
/// singular value is the L2 norm over sub-kernel spectra, and the norm is the maximum.
double conv_operator_norm(const RealGrid& kernel, int stride, int dilation, int n);

/// Exact spectral norm of one operator (1 for relu and identity_skip).
double operator_norm(const OperatorDescriptor& op, const NormConfig& cfg);

double l1_filter_norm(const RealGrid& kernel);
double l1_filter_norm(const Kernel& kernel);

/// The operator's full linear map on an n x n periodic image, built by applying the
/// operator literally to every basis image. Rows index outputs, columns inputs.
RealGrid dense_operator_matrix(const OperatorDescriptor& op, int n);

/// Largest singular value by power iteration on M^T M. Throws Error{convergence}
/// (reporting the last iterate) if the relative change does not fall below `tolerance`.
double largest_singular_value(const RealGrid& matrix, int iterations, double tolerance);

/// Brute-force spectral norm: dense_operator_matrix followed by power iteration.
double oracle_norm(const OperatorDescriptor& op, int n, int iterations = 200, double tolerance = 1e-8);

}  // namespace lean

#endif  // LEAN_OPNORM_HPP
