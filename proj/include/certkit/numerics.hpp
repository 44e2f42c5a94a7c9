#pragma once

#include <cstdint>
#include <functional>

#include "certkit/tensor.hpp"

namespace certkit {

struct SpectralEstimate {
    double sigma = 0.0;     // estimated largest singular value, lower bound
    std::size_t iterations = 0;
    double residual = 0.0;  // relative change of sigma at the last iteration
};

// Power iteration on the Gram matrix of w. Converges when the relative change
// of sigma drops below tol; the returned sigma never exceeds the true largest
// singular value.
SpectralEstimate power_iteration(const Tensor& w, double tol, std::size_t max_iter,
                                 std::uint64_t seed);

// Largest singular value via Jacobi eigen-decomposition of the smaller Gram
// matrix. Used wherever a sound certification-time bound is required.
double exact_spectral_norm(const Tensor& w);

// All eigenvalues (ascending) and eigenvectors (columns) of a symmetric
// matrix, cyclic Jacobi.
void symmetric_eigen(const Tensor& sym, Tensor& eigenvalues, Tensor& eigenvectors);

// Solve a x = rhs for square a, Gaussian elimination with partial pivoting.
Tensor solve_linear(const Tensor& a, const Tensor& rhs);

// W = (I - S)(I + S)^-1 with S the skew-symmetric part of a; W is orthogonal.
Tensor cayley_orthogonalize(const Tensor& a);

// Central-difference gradient of a scalar function, the gradient-check oracle
// every analytic backward pass is tested against.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double h = 1e-5);

}  // namespace certkit
