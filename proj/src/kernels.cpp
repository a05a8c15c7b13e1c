#include "lextree/kernels.hpp"

#include <omp.h>

namespace lextree::kernels {

namespace reference {

void matvec_acc(MatrixView w, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.data + r * w.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) s += row[c] * x[c];
    y[r] += s;
  }
}

void matvec_t_acc(MatrixView w, std::span<const double> g, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.data + r * w.cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < w.cols; ++c) y[c] += row[c] * gr;
  }
}

void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < g.size(); ++r) {
    double* row = out.data() + r * cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

}  // namespace reference

namespace parallel {

void matvec_acc(MatrixView w, std::span<const double> x, std::span<double> y) {
  const auto rows = static_cast<std::ptrdiff_t>(w.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const double* row = w.data + r * w.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) s += row[c] * x[c];
    y[r] += s;
  }
}

// Each thread owns a block of output columns and sweeps the rows in order, so
// reads stay contiguous and every column sums rows in ascending order.
void matvec_t_acc(MatrixView w, std::span<const double> g, std::span<double> y) {
#pragma omp parallel
  {
    const auto nt = static_cast<std::size_t>(omp_get_num_threads());
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t c0 = w.cols * t / nt, c1 = w.cols * (t + 1) / nt;
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double* row = w.data + r * w.cols;
      const double gr = g[r];
      for (std::size_t c = c0; c < c1; ++c) y[c] += row[c] * gr;
    }
  }
}

void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> out) {
  const std::size_t cols = x.size();
  const auto rows = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

}  // namespace parallel

namespace {
bool go_parallel(std::size_t elements) {
  return elements >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
}
}  // namespace

void matvec_acc(MatrixView w, std::span<const double> x, std::span<double> y) {
  if (go_parallel(w.rows * w.cols))
    parallel::matvec_acc(w, x, y);
  else
    reference::matvec_acc(w, x, y);
}

void matvec_t_acc(MatrixView w, std::span<const double> g, std::span<double> y) {
  if (go_parallel(w.rows * w.cols))
    parallel::matvec_t_acc(w, g, y);
  else
    reference::matvec_t_acc(w, g, y);
}

void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> out) {
  if (go_parallel(out.size()))
    parallel::outer_acc(g, x, out);
  else
    reference::outer_acc(g, x, out);
}

}  // namespace lextree::kernels
