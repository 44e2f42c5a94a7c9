#include "certkit/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace certkit::kernels {

namespace {

int read_thread_env() {
    const char* env = std::getenv("CERTKIT_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    const int n = std::atoi(env);
    return n >= 1 ? n : 1;
}

int g_threads = -1;

}  // namespace

int thread_count() {
    if (g_threads < 1) g_threads = read_thread_env();
    return g_threads;
}

void set_thread_count(int n) { g_threads = n >= 1 ? n : 1; }

namespace serial {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            c[i * n + j] = acc;
        }
    }
}

void matmul_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void linf_distance(const double* x, const double* w, const double* bias, double* z,
                   std::size_t batch, std::size_t dim, std::size_t units) {
    for (std::size_t s = 0; s < batch; ++s) {
        const double* xs = x + s * dim;
        for (std::size_t u = 0; u < units; ++u) {
            const double* wu = w + u * dim;
            double best = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double d = std::abs(xs[i] - wu[i]);
                if (d > best) best = d;
            }
            z[s * units + u] = best + bias[u];
        }
    }
}

// argmax coordinate of |x - w| with the lowest index winning ties, and the
// sign of (x - w) there; sign 0 when the distance is exactly zero
inline void linf_argmax(const double* xs, const double* wu, std::size_t dim, std::size_t& idx,
                        double& sign) {
    idx = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = std::abs(xs[i] - wu[i]);
        if (d > best) {
            best = d;
            idx = i;
        }
    }
    const double diff = xs[idx] - wu[idx];
    sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
}

void linf_distance_backward_input(const double* x, const double* w, const double* dz, double* dx,
                                  std::size_t batch, std::size_t dim, std::size_t units) {
    for (std::size_t s = 0; s < batch; ++s) {
        const double* xs = x + s * dim;
        double* dxs = dx + s * dim;
        for (std::size_t i = 0; i < dim; ++i) dxs[i] = 0.0;
        for (std::size_t u = 0; u < units; ++u) {
            std::size_t idx;
            double sign;
            linf_argmax(xs, w + u * dim, dim, idx, sign);
            dxs[idx] += dz[s * units + u] * sign;
        }
    }
}

void linf_distance_backward_params(const double* x, const double* w, const double* dz, double* gw,
                                   double* gb, std::size_t batch, std::size_t dim,
                                   std::size_t units) {
    for (std::size_t u = 0; u < units; ++u) {
        const double* wu = w + u * dim;
        double* gwu = gw + u * dim;
        for (std::size_t i = 0; i < dim; ++i) gwu[i] = 0.0;
        double acc_b = 0.0;
        for (std::size_t s = 0; s < batch; ++s) {
            std::size_t idx;
            double sign;
            linf_argmax(x + s * dim, wu, dim, idx, sign);
            const double g = dz[s * units + u];
            gwu[idx] -= g * sign;
            acc_b += g;
        }
        gb[u] = acc_b;
    }
}

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
    const std::int64_t mm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < mm; ++i) {
        double* ci = c + i * static_cast<std::int64_t>(n);
        for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[static_cast<std::size_t>(i) * k + p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    const std::int64_t mm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < mm; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            c[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
}

void matmul_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    const std::int64_t mm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < mm; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc += a[p * m + static_cast<std::size_t>(i)] * b[p * n + j];
            c[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
}

void linf_distance(const double* x, const double* w, const double* bias, double* z,
                   std::size_t batch, std::size_t dim, std::size_t units) {
    const std::int64_t bb = static_cast<std::int64_t>(batch);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t s = 0; s < bb; ++s) {
        const double* xs = x + static_cast<std::size_t>(s) * dim;
        for (std::size_t u = 0; u < units; ++u) {
            const double* wu = w + u * dim;
            double best = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double d = std::abs(xs[i] - wu[i]);
                if (d > best) best = d;
            }
            z[static_cast<std::size_t>(s) * units + u] = best + bias[u];
        }
    }
}

void linf_distance_backward_input(const double* x, const double* w, const double* dz, double* dx,
                                  std::size_t batch, std::size_t dim, std::size_t units) {
    const std::int64_t bb = static_cast<std::int64_t>(batch);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t s = 0; s < bb; ++s) {
        const double* xs = x + static_cast<std::size_t>(s) * dim;
        double* dxs = dx + static_cast<std::size_t>(s) * dim;
        for (std::size_t i = 0; i < dim; ++i) dxs[i] = 0.0;
        for (std::size_t u = 0; u < units; ++u) {
            std::size_t idx;
            double sign;
            serial::linf_argmax(xs, w + u * dim, dim, idx, sign);
            dxs[idx] += dz[static_cast<std::size_t>(s) * units + u] * sign;
        }
    }
}

void linf_distance_backward_params(const double* x, const double* w, const double* dz, double* gw,
                                   double* gb, std::size_t batch, std::size_t dim,
                                   std::size_t units) {
    const std::int64_t uu = static_cast<std::int64_t>(units);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t u = 0; u < uu; ++u) {
        const double* wu = w + static_cast<std::size_t>(u) * dim;
        double* gwu = gw + static_cast<std::size_t>(u) * dim;
        for (std::size_t i = 0; i < dim; ++i) gwu[i] = 0.0;
        double acc_b = 0.0;
        for (std::size_t s = 0; s < batch; ++s) {
            std::size_t idx;
            double sign;
            serial::linf_argmax(x + s * dim, wu, dim, idx, sign);
            const double g = dz[s * units + static_cast<std::size_t>(u)];
            gwu[idx] -= g * sign;
            acc_b += g;
        }
        gb[u] = acc_b;
    }
}

}  // namespace omp

#ifdef _OPENMP
#define CERTKIT_DISPATCH(fn, ...) \
    do { \
        if (thread_count() > 1) \
            omp::fn(__VA_ARGS__); \
        else \
            serial::fn(__VA_ARGS__); \
    } while (0)
#else
#define CERTKIT_DISPATCH(fn, ...) serial::fn(__VA_ARGS__)
#endif

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
    CERTKIT_DISPATCH(matmul, a, b, c, m, k, n);
}

void matmul_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    CERTKIT_DISPATCH(matmul_bt, a, b, c, m, k, n);
}

void matmul_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    CERTKIT_DISPATCH(matmul_at, a, b, c, m, k, n);
}

void linf_distance(const double* x, const double* w, const double* bias, double* z,
                   std::size_t batch, std::size_t dim, std::size_t units) {
    CERTKIT_DISPATCH(linf_distance, x, w, bias, z, batch, dim, units);
}

void linf_distance_backward_input(const double* x, const double* w, const double* dz, double* dx,
                                  std::size_t batch, std::size_t dim, std::size_t units) {
    CERTKIT_DISPATCH(linf_distance_backward_input, x, w, dz, dx, batch, dim, units);
}

void linf_distance_backward_params(const double* x, const double* w, const double* dz, double* gw,
                                   double* gb, std::size_t batch, std::size_t dim,
                                   std::size_t units) {
    CERTKIT_DISPATCH(linf_distance_backward_params, x, w, dz, gw, gb, batch, dim, units);
}

#undef CERTKIT_DISPATCH

}  // namespace certkit::kernels

namespace certkit {

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        fail_config("matmul expects matrices, got " + a.shape_string() + " and " +
                    b.shape_string());
    if (a.cols() != b.rows())
        fail_config("matmul dimension mismatch: " + a.shape_string() + " x " + b.shape_string());
    Tensor c({a.rows(), b.cols()});
    kernels::matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    c.check_finite();
    return c;
}

}  // namespace certkit
