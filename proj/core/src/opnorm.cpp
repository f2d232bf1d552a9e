// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "lean/opnorm.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "lean/error.hpp"
#include "random.hpp"

namespace lean {

namespace {

using Complex = std::complex<double>;

std::vector<Complex> twiddles(int n) {
  std::vector<Complex> table(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) {
    table[static_cast<std::size_t>(m)] = std::polar(1.0, -2.0 * std::numbers::pi * m / n);
  }
  return table;
}

// Squared DFT magnitudes of a k x k kernel zero-padded to n x n. Only the k nonzero rows
// and columns are summed, so the cost is O(k n^2) rather than O(n^2 log n).
std::vector<double> dft2_power(const RealGrid& kernel, int n, const std::vector<Complex>& tw) {
  const int k = kernel.rows();
  const auto nn = static_cast<std::size_t>(n);
  std::vector<Complex> rows(static_cast<std::size_t>(k) * nn);
  for (int a = 0; a < k; ++a) {
    for (int v = 0; v < n; ++v) {
      Complex acc = 0.0;
      for (int b = 0; b < k; ++b) {
        const double h = kernel(a, b);
        if (h != 0.0) acc += h * tw[static_cast<std::size_t>((b * v) % n)];
      }
      rows[static_cast<std::size_t>(a) * nn + static_cast<std::size_t>(v)] = acc;
    }
  }
  std::vector<double> power(nn * nn);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      Complex acc = 0.0;
      for (int a = 0; a < k; ++a) {
        acc += tw[static_cast<std::size_t>((a * u) % n)] * rows[static_cast<std::size_t>(a) * nn + static_cast<std::size_t>(v)];
      }
      power[static_cast<std::size_t>(u) * nn + static_cast<std::size_t>(v)] = std::norm(acc);
    }
  }
  return power;
}

void require_square(const RealGrid& kernel, const char* what) {
  if (kernel.rows() != kernel.cols() || kernel.rows() < 1) {
    throw Error(ErrorCode::size, std::string(what) + ": kernel must be a non-empty square matrix");
  }
}

double batchnorm_norm(const BatchNormParams& bn) {
  if (bn.running_var < 0.0f) throw Error(ErrorCode::domain, "batchnorm running_var must be >= 0");
  if (!(bn.epsilon > 0.0f)) throw Error(ErrorCode::domain, "batchnorm epsilon must be > 0");
  return std::abs(static_cast<double>(bn.gamma)) /
         std::sqrt(static_cast<double>(bn.running_var) + static_cast<double>(bn.epsilon));
}

RealGrid pooling_kernel(int stride) {
  return RealGrid(stride, stride, 1.0 / (static_cast<double>(stride) * stride));
}

std::size_t flat(int r, int c, int side) {
  return static_cast<std::size_t>(r) * static_cast<std::size_t>(side) + static_cast<std::size_t>(c);
}

int wrap(int v, int n) {
  const int m = v % n;
  return m < 0 ? m + n : m;
}

}  // namespace

RealGrid RealGrid::from_kernel(const Kernel& kernel) {
  RealGrid g(kernel.size, kernel.size);
  for (int r = 0; r < kernel.size; ++r) {
    for (int c = 0; c < kernel.size; ++c) g(r, c) = kernel.at(r, c);
  }
  return g;
}

double RealGrid::max() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

RealGrid dft2_magnitudes(const RealGrid& kernel, int n) {
  require_square(kernel, "dft2_magnitudes");
  if (n < 1 || kernel.rows() > n) {
    throw Error(ErrorCode::size, "dft2_magnitudes: kernel size " + std::to_string(kernel.rows()) +
                                     " exceeds image size " + std::to_string(n));
  }
  const auto power = dft2_power(kernel, n, twiddles(n));
  RealGrid out(n, n);
  for (std::size_t i = 0; i < power.size(); ++i) out.data()[i] = std::sqrt(power[i]);
  return out;
}

RealGrid dilate_kernel(const RealGrid& kernel, int dilation) {
  require_square(kernel, "dilate_kernel");
  if (dilation < 1) throw Error(ErrorCode::config, "dilation must be >= 1");
  if (dilation == 1) return kernel;
  const int k = kernel.rows();
  const int extent = (k - 1) * dilation + 1;
  RealGrid out(extent, extent);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) out(r * dilation, c * dilation) = kernel(r, c);
  }
  return out;
}

SubKernelSet split_strided(const RealGrid& kernel, int stride) {
  require_square(kernel, "split_strided");
  if (stride < 1) throw Error(ErrorCode::config, "stride must be >= 1");
  const int k = kernel.rows();
  SubKernelSet set;
  set.stride = stride;
  set.sub_size = (k + stride - 1) / stride;
  set.sub_kernels.assign(static_cast<std::size_t>(stride) * static_cast<std::size_t>(stride),
                         RealGrid(set.sub_size, set.sub_size));
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      auto& sub = set.sub_kernels[static_cast<std::size_t>((r % stride) * stride + (c % stride))];
      sub(r / stride, c / stride) = kernel(r, c);
    }
  }
  return set;
}

double conv_operator_norm(const RealGrid& kernel, int stride, int dilation, int n) {
  require_square(kernel, "conv_operator_norm");
  if (stride < 1 || n < 1 || n % stride != 0) {
    throw Error(ErrorCode::config, "image size n=" + std::to_string(n) + " is not divisible by stride " +
                                       std::to_string(stride));
  }
  const RealGrid embedded = dilate_kernel(kernel, dilation);
  if (embedded.rows() > n) {
    throw Error(ErrorCode::config, "dilated kernel extent " + std::to_string(embedded.rows()) +
                                       " exceeds image size n=" + std::to_string(n));
  }
  if (stride == 1) {
    const auto power = dft2_power(embedded, n, twiddles(n));
    return std::sqrt(*std::max_element(power.begin(), power.end()));
  }

  const int m = n / stride;
  const SubKernelSet parts = split_strided(embedded, stride);
  const auto tw = twiddles(m);
  std::vector<double> total(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0.0);
  for (const auto& sub : parts.sub_kernels) {
    const auto power = dft2_power(sub, m, tw);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += power[i];
  }
  return std::sqrt(*std::max_element(total.begin(), total.end()));
}

double operator_norm(const OperatorDescriptor& op, const NormConfig& cfg) {
  switch (op.kind) {
    case OpKind::conv:
    case OpKind::conv_transposed: {
      // A transposed convolution's matrix is the transpose of the strided one; same norm.
      const auto& c = op.conv();
      return conv_operator_norm(RealGrid::from_kernel(c.kernel), c.stride, c.dilation, cfg.n);
    }
    case OpKind::batchnorm:
      return batchnorm_norm(op.batchnorm());
    case OpKind::avgpool: {
      const int s = op.pool().stride;
      return conv_operator_norm(pooling_kernel(s), s, 1, cfg.n);
    }
    case OpKind::relu:
    case OpKind::identity_skip:
      return 1.0;
  }
  throw Error(ErrorCode::build, "operator " + std::to_string(op.id) + " has an unsupported kind");
}

double l1_filter_norm(const RealGrid& kernel) {
  double sum = 0.0;
  for (double v : kernel.data()) sum += std::abs(v);
  return sum;
}

double l1_filter_norm(const Kernel& kernel) {
  double sum = 0.0;
  for (float v : kernel.values) sum += std::abs(static_cast<double>(v));
  return sum;
}

RealGrid dense_operator_matrix(const OperatorDescriptor& op, int n) {
  if (n < 1) throw Error(ErrorCode::config, "oracle image size must be >= 1");
  const int s = op.stride();
  if (n % s != 0) {
    throw Error(ErrorCode::config, "oracle image size n=" + std::to_string(n) + " is not divisible by stride " +
                                       std::to_string(s));
  }
  const int m = n / s;
  const int big = n * n;
  const int small = m * m;

  switch (op.kind) {
    case OpKind::conv: {
      // y[p,q] = sum_{a,b} h[a,b] x[s p - d a, s q - d b]  (periodic)
      const auto& c = op.conv();
      const int k = c.kernel.size;
      const int d = c.dilation;
      RealGrid mat(small, big);
      for (int p = 0; p < m; ++p) {
        for (int q = 0; q < m; ++q) {
          for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) {
              const int i = wrap(s * p - d * a, n);
              const int j = wrap(s * q - d * b, n);
              mat(static_cast<int>(flat(p, q, m)), static_cast<int>(flat(i, j, n))) += c.kernel.at(a, b);
            }
          }
        }
      }
      return mat;
    }
    case OpKind::conv_transposed: {
      // Scatter form: each coarse pixel x[p,q] spreads h[a,b] x[p,q] to y[s p - a, s q - b].
      const auto& c = op.conv();
      const int k = c.kernel.size;
      RealGrid mat(big, small);
      for (int p = 0; p < m; ++p) {
        for (int q = 0; q < m; ++q) {
          for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) {
              const int i = wrap(s * p - a, n);
              const int j = wrap(s * q - b, n);
              mat(static_cast<int>(flat(i, j, n)), static_cast<int>(flat(p, q, m))) += c.kernel.at(a, b);
            }
          }
        }
      }
      return mat;
    }
    case OpKind::avgpool: {
      RealGrid mat(small, big);
      const double w = 1.0 / (static_cast<double>(s) * s);
      for (int p = 0; p < m; ++p) {
        for (int q = 0; q < m; ++q) {
          for (int a = 0; a < s; ++a) {
            for (int b = 0; b < s; ++b) {
              mat(static_cast<int>(flat(p, q, m)), static_cast<int>(flat(s * p + a, s * q + b, n))) += w;
            }
          }
        }
      }
      return mat;
    }
    case OpKind::batchnorm:
    case OpKind::relu:
    case OpKind::identity_skip: {
      // Batchnorm is a per-image scaling; relu is taken as the identity (weight 1).
      const double scale = op.kind == OpKind::batchnorm ? [&] {
        const auto& bn = op.batchnorm();
        if (bn.running_var < 0.0f) throw Error(ErrorCode::domain, "batchnorm running_var must be >= 0");
        return static_cast<double>(bn.gamma) /
               std::sqrt(static_cast<double>(bn.running_var) + static_cast<double>(bn.epsilon));
      }() : 1.0;
      RealGrid mat(big, big);
      for (int i = 0; i < big; ++i) mat(i, i) = scale;
      return mat;
    }
  }
  throw Error(ErrorCode::build, "operator " + std::to_string(op.id) + " has an unsupported kind");
}

double largest_singular_value(const RealGrid& matrix, int iterations, double tolerance) {
  const int rows = matrix.rows();
  const int cols = matrix.cols();
  if (rows == 0 || cols == 0) return 0.0;

  detail::NormalSource rng(0x5eed);
  std::vector<double> v(static_cast<std::size_t>(cols));
  for (auto& x : v) x = rng.normal();
  const auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0) {
      for (auto& e : x) e /= s;
    }
    return s;
  };
  normalize(v);

  const auto& a = matrix.data();
  std::vector<double> w(static_cast<std::size_t>(rows));
  std::vector<double> u(static_cast<std::size_t>(cols));
  double estimate = -1.0;
  for (int it = 0; it < iterations; ++it) {
    for (int r = 0; r < rows; ++r) {
      const double* row = &a[flat(r, 0, cols)];
      double acc = 0.0;
      for (int c = 0; c < cols; ++c) acc += row[c] * v[static_cast<std::size_t>(c)];
      w[static_cast<std::size_t>(r)] = acc;
    }
    std::fill(u.begin(), u.end(), 0.0);
    for (int r = 0; r < rows; ++r) {
      const double* row = &a[flat(r, 0, cols)];
      const double wr = w[static_cast<std::size_t>(r)];
      if (wr == 0.0) continue;
      for (int c = 0; c < cols; ++c) u[static_cast<std::size_t>(c)] += row[c] * wr;
    }
    // Rayleigh quotient of M^T M at the unit vector v.
    double rayleigh = 0.0;
    for (int c = 0; c < cols; ++c) rayleigh += v[static_cast<std::size_t>(c)] * u[static_cast<std::size_t>(c)];
    const double length = normalize(u);
    if (length == 0.0) return 0.0;
    v.swap(u);
    if (estimate >= 0.0 && std::abs(rayleigh - estimate) <= tolerance * rayleigh) {
      return std::sqrt(rayleigh);
    }
    estimate = rayleigh;
  }
  throw Error(ErrorCode::convergence, "power iteration did not converge in " + std::to_string(iterations) +
                                          " iterations; last estimate " + std::to_string(std::sqrt(std::max(0.0, estimate))));
}

double oracle_norm(const OperatorDescriptor& op, int n, int iterations, double tolerance) {
  if (op.kind == OpKind::batchnorm && op.batchnorm().running_var < 0.0f) {
    throw Error(ErrorCode::domain, "batchnorm running_var must be >= 0");
  }
  return largest_singular_value(dense_operator_matrix(op, n), iterations, tolerance);
}

}  // namespace lean
