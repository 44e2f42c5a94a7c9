#pragma once

#include <cstddef>
#include <span>

#include "certkit/tensor.hpp"

// Data-parallel inner loops. Every kernel comes in two flavours: a plain
// serial reference (kernels::serial) and an OpenMP version parallelized over
// independent output elements. Reductions run in a fixed sequential order
// inside each element, so the parallel results are bitwise identical to the
// serial ones at any thread count. The dispatching wrappers in
// certkit::kernels pick a flavour based on the CERTKIT_THREADS setting.

namespace certkit::kernels {

// Thread cap taken from the CERTKIT_THREADS environment variable on first
// use; unset means 1 (sequential deterministic mode).
int thread_count();
void set_thread_count(int n);

namespace serial {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
// c[m x n] = a[k x m]^T * b[k x n]
void matmul_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
// z[batch x units]: z[s][u] = max_i |x[s][i] - w[u][i]| + bias[u]
void linf_distance(const double* x, const double* w, const double* bias, double* z,
                   std::size_t batch, std::size_t dim, std::size_t units);
// subgradient w.r.t. x; ties resolved to the lowest coordinate index
void linf_distance_backward_input(const double* x, const double* w, const double* dz, double* dx,
                                  std::size_t batch, std::size_t dim, std::size_t units);
// prototype and bias gradients, accumulated over the batch in index order
void linf_distance_backward_params(const double* x, const double* w, const double* dz, double* gw,
                                   double* gb, std::size_t batch, std::size_t dim,
                                   std::size_t units);

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
void matmul_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
void matmul_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
void linf_distance(const double* x, const double* w, const double* bias, double* z,
                   std::size_t batch, std::size_t dim, std::size_t units);
void linf_distance_backward_input(const double* x, const double* w, const double* dz, double* dx,
                                  std::size_t batch, std::size_t dim, std::size_t units);
void linf_distance_backward_params(const double* x, const double* w, const double* dz, double* gw,
                                   double* gb, std::size_t batch, std::size_t dim,
                                   std::size_t units);

}  // namespace omp

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
void matmul_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
void matmul_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
void linf_distance(const double* x, const double* w, const double* bias, double* z,
                   std::size_t batch, std::size_t dim, std::size_t units);
void linf_distance_backward_input(const double* x, const double* w, const double* dz, double* dx,
                                  std::size_t batch, std::size_t dim, std::size_t units);
void linf_distance_backward_params(const double* x, const double* w, const double* dz, double* gw,
                                   double* gb, std::size_t batch, std::size_t dim,
                                   std::size_t units);

}  // namespace certkit::kernels

namespace certkit {

// Shape-checked matrix product on tensors.
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace certkit
