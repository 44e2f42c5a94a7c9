#include "certkit/numerics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "certkit/kernels.hpp"
#include "certkit/rng.hpp"

namespace certkit {

namespace {

void require_matrix(const Tensor& w, const char* who) {
    if (w.rank() != 2) fail_config(std::string(who) + " expects a matrix, got " + w.shape_string());
}

double frob_norm_sq(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v * v;
    return s;
}

}  // namespace

SpectralEstimate power_iteration(const Tensor& w, double tol, std::size_t max_iter,
                                 std::uint64_t seed) {
    require_matrix(w, "power_iteration");
    if (!(tol > 0.0)) fail_config("power_iteration: tol must be positive");
    if (max_iter < 1) fail_config("power_iteration: max_iter must be >= 1");

    const std::size_t m = w.rows(), n = w.cols();
    if (frob_norm_sq(w) == 0.0) return SpectralEstimate{0.0, 0, 0.0};

    Rng rng(seed);
    std::vector<double> v(n), u(m), g(n);
    double vnorm = 0.0;
    while (vnorm == 0.0) {
        for (auto& x : v) x = rng.normal();
        vnorm = 0.0;
        for (double x : v) vnorm += x * x;
        vnorm = std::sqrt(vnorm);
    }
    for (auto& x : v) x /= vnorm;

    SpectralEstimate est;
    double sigma_prev = 0.0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        // u = W v, g = W^T u; sigma = |u| for unit v never overshoots.
        kernels::matmul(w.data(), v.data(), u.data(), m, n, 1);
        double unorm = 0.0;
        for (double x : u) unorm += x * x;
        unorm = std::sqrt(unorm);
        est.sigma = unorm;
        est.iterations = it;
        if (unorm == 0.0) {
            // v fell in the null space; restart from a fresh direction
            for (auto& x : v) x = rng.normal();
            double nn = 0.0;
            for (double x : v) nn += x * x;
            nn = std::sqrt(nn);
            if (nn == 0.0) continue;
            for (auto& x : v) x /= nn;
            sigma_prev = 0.0;
            continue;
        }
        est.residual = std::abs(est.sigma - sigma_prev) / est.sigma;
        if (it > 1 && est.residual < tol) break;
        sigma_prev = est.sigma;
        kernels::matmul_at(w.data(), u.data(), g.data(), n, m, 1);
        double gnorm = 0.0;
        for (double x : g) gnorm += x * x;
        gnorm = std::sqrt(gnorm);
        if (gnorm == 0.0) break;
        for (std::size_t i = 0; i < n; ++i) v[i] = g[i] / gnorm;
    }
    return est;
}

void symmetric_eigen(const Tensor& sym, Tensor& eigenvalues, Tensor& eigenvectors) {
    require_matrix(sym, "symmetric_eigen");
    const std::size_t n = sym.rows();
    if (sym.cols() != n) fail_config("symmetric_eigen expects a square matrix");

    Tensor a = sym;
    Tensor v = Tensor::identity(n);

    // cyclic Jacobi sweeps until all off-diagonal mass is annihilated
    const std::size_t max_sweeps = 64;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off <= 1e-300) break;
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double small = 1e-18 * (std::abs(app) + std::abs(aqq));
                if (std::abs(apq) <= small || apq == 0.0) continue;
                rotated = true;
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a.at(i, p);
                    const double aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a.at(p, i);
                    const double aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v.at(i, p);
                    const double viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
        }
        if (!rotated) break;
    }

    // sort ascending, carrying eigenvectors along
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (a.at(order[j], order[j]) < a.at(order[i], order[i])) std::swap(order[i], order[j]);

    eigenvalues = Tensor({n});
    eigenvectors = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        eigenvalues[i] = a.at(order[i], order[i]);
        for (std::size_t r = 0; r < n; ++r) eigenvectors.at(r, i) = v.at(r, order[i]);
    }
}

double exact_spectral_norm(const Tensor& w) {
    require_matrix(w, "exact_spectral_norm");
    w.check_finite();
    const std::size_t m = w.rows(), n = w.cols();
    const std::size_t small = std::min(m, n);
    if (small > 4096) fail_config("exact_spectral_norm: min dimension exceeds 4096");

    // Gram matrix over the smaller side
    Tensor gram({small, small});
    if (n <= m)
        kernels::matmul_at(w.data(), w.data(), gram.data(), n, m, n);
    else
        kernels::matmul_bt(w.data(), w.data(), gram.data(), m, n, m);

    Tensor evals, evecs;
    symmetric_eigen(gram, evals, evecs);
    const double top = evals[small - 1];
    return top > 0.0 ? std::sqrt(top) : 0.0;
}

Tensor solve_linear(const Tensor& a, const Tensor& rhs) {
    require_matrix(a, "solve_linear");
    const std::size_t n = a.rows();
    if (a.cols() != n) fail_config("solve_linear expects a square matrix");
    if (rhs.rows() != n) fail_config("solve_linear: rhs row count mismatch");
    const std::size_t k = rhs.cols();

    Tensor lu = a;
    Tensor x = rhs;
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        double best_abs = std::abs(lu.at(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(lu.at(r, col));
            if (v > best_abs) {
                best_abs = v;
                best = r;
            }
        }
        if (best_abs == 0.0) fail_numeric("solve_linear: singular matrix");
        if (best != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(lu.at(col, c), lu.at(best, c));
            for (std::size_t c = 0; c < k; ++c) std::swap(x.at(col, c), x.at(best, c));
        }
        const double pivot = lu.at(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = lu.at(r, col) / pivot;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) lu.at(r, c) -= f * lu.at(col, c);
            for (std::size_t c = 0; c < k; ++c) x.at(r, c) -= f * x.at(col, c);
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        const double pivot = lu.at(col, col);
        for (std::size_t c = 0; c < k; ++c) {
            double acc = x.at(col, c);
            for (std::size_t j = col + 1; j < n; ++j) acc -= lu.at(col, j) * x.at(j, c);
            x.at(col, c) = acc / pivot;
        }
    }
    x.check_finite();
    return x;
}

Tensor cayley_orthogonalize(const Tensor& a) {
    require_matrix(a, "cayley_orthogonalize");
    const std::size_t n = a.rows();
    if (a.cols() != n) fail_config("cayley_orthogonalize expects a square matrix");

    Tensor i_plus_s({n, n});
    Tensor i_minus_s({n, n});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double s = 0.5 * (a.at(r, c) - a.at(c, r));
            i_plus_s.at(r, c) = (r == c ? 1.0 : 0.0) + s;
            i_minus_s.at(r, c) = (r == c ? 1.0 : 0.0) - s;
        }
    }
    // (I-S) and (I+S)^-1 commute, so one solve gives the Cayley transform
    return solve_linear(i_plus_s, i_minus_s);
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double h) {
    if (!(h > 0.0)) fail_config("finite_difference_gradient: h must be positive");
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace certkit
