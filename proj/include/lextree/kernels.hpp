#pragma once

// Dense inner loops used by the autodiff engine.
//
// Every kernel has a serial reference version and an OpenMP version that
// splits work over independent output coordinates. Each output coordinate is
// accumulated in the same order in both, so the two agree bit for bit; the
// reference stays around for tests and benchmarks.

#include <cstddef>
#include <span>

namespace lextree::kernels {

// Row-major matrix view.
struct MatrixView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
};

namespace reference {
// y += W x
void matvec_acc(MatrixView w, std::span<const double> x, std::span<double> y);
// y += W^T g
void matvec_t_acc(MatrixView w, std::span<const double> g, std::span<double> y);
// G += g x^T  (G has W's shape)
void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> out);
}  // namespace reference

namespace parallel {
void matvec_acc(MatrixView w, std::span<const double> x, std::span<double> y);
void matvec_t_acc(MatrixView w, std::span<const double> g, std::span<double> y);
void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> out);
}  // namespace parallel

// Matrices with fewer elements than this run the reference path; the
// dispatchers also stay serial inside an enclosing parallel region.
inline constexpr std::size_t kParallelThreshold = 1 << 16;

void matvec_acc(MatrixView w, std::span<const double> x, std::span<double> y);
void matvec_t_acc(MatrixView w, std::span<const double> g, std::span<double> y);
void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> out);

}  // namespace lextree::kernels
