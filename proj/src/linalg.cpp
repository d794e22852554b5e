#include "fpmusic/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

namespace fpmusic {

namespace {

constexpr int max_sweeps = 100;

double dot_cols(const std::vector<std::vector<double>>& cols, std::size_t p, std::size_t q) {
    double s = 0.0;
    for (std::size_t i = 0; i < cols[p].size(); ++i) s += cols[p][i] * cols[q][i];
    return s;
}

/// Replaces column j by a unit vector orthogonal to columns [0, j).
void complete_column(std::vector<std::vector<double>>& cols, std::size_t j) {
    const std::size_t m = cols[j].size();
    for (std::size_t e = 0; e < m; ++e) {
        std::vector<double> v(m, 0.0);
        v[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t k = 0; k < j; ++k) {
                double proj = 0.0;
                for (std::size_t i = 0; i < m; ++i) proj += cols[k][i] * v[i];
                for (std::size_t i = 0; i < m; ++i) v[i] -= proj * cols[k][i];
            }
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n > 0.5) {
            for (double& x : v) x /= n;
            cols[j] = std::move(v);
            return;
        }
    }
    throw ConvergenceError("cannot complete orthonormal basis");
}

std::vector<std::size_t> descending_order(const std::vector<double>& values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return idx;
}

}  // namespace

RealMatrix economy_qr(const RealMatrix& b, RankPolicy policy) {
    const std::size_t m = b.rows();
    const std::size_t k = b.cols();
    if (k < 1 || m < k) throw DimensionError("economy_qr: need M >= K >= 1");
    const double scale = frobenius_norm(b);
    const bool reject = policy == RankPolicy::reject;
    if (scale == 0.0 && reject) throw DegenerateSketch("economy_qr: zero matrix");

    // Work column-major.
    std::vector<std::vector<double>> a(k, std::vector<double>(m));
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < m; ++i) a[j][i] = b(i, j);

    std::vector<std::vector<double>> reflectors(k);
    for (std::size_t j = 0; j < k; ++j) {
        double norm_x = 0.0;
        for (std::size_t i = j; i < m; ++i) norm_x += a[j][i] * a[j][i];
        norm_x = std::sqrt(norm_x);
        if (norm_x <= 1e-12 * scale && reject) throw DegenerateSketch("economy_qr: rank-deficient input");
        if (norm_x == 0.0) continue;  // identity reflector; column j of T completes the basis

        std::vector<double> v(m, 0.0);
        for (std::size_t i = j; i < m; ++i) v[i] = a[j][i];
        const double alpha = a[j][j] >= 0.0 ? -norm_x : norm_x;
        v[j] -= alpha;
        double norm_v = 0.0;
        for (std::size_t i = j; i < m; ++i) norm_v += v[i] * v[i];
        norm_v = std::sqrt(norm_v);
        for (std::size_t i = j; i < m; ++i) v[i] /= norm_v;

        for (std::size_t c = j; c < k; ++c) {
            double d = 0.0;
            for (std::size_t i = j; i < m; ++i) d += v[i] * a[c][i];
            for (std::size_t i = j; i < m; ++i) a[c][i] -= 2.0 * d * v[i];
        }
        reflectors[j] = std::move(v);
    }

    // T = H_0 H_1 ... H_{k-1} [I_k; 0]
    RealMatrix t(m, k);
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> x(m, 0.0);
        x[c] = 1.0;
        for (std::size_t j = k; j-- > 0;) {
            const auto& v = reflectors[j];
            if (v.empty()) continue;
            double d = 0.0;
            for (std::size_t i = j; i < m; ++i) d += v[i] * x[i];
            for (std::size_t i = j; i < m; ++i) x[i] -= 2.0 * d * v[i];
        }
        t.set_column(c, x);
    }
    return t;
}

SvdResult economy_svd(const RealMatrix& d) {
    const std::size_t k = d.rows();
    const std::size_t m = d.cols();
    if (k < 1 || k > m) throw DimensionError("economy_svd: need 1 <= K <= M");

    // Orthogonalize the columns of D^T (M x K); rotations accumulate in V.
    std::vector<std::vector<double>> a(k, std::vector<double>(m));
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < m; ++i) a[j][i] = d(j, i);
    std::vector<std::vector<double>> v(k, std::vector<double>(k, 0.0));
    for (std::size_t j = 0; j < k; ++j) v[j][j] = 1.0;

    constexpr double tol = 4.0 * std::numeric_limits<double>::epsilon();
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < k; ++p)
            for (std::size_t q = p + 1; q < k; ++q) {
                const double alpha = dot_cols(a, p, p);
                const double beta = dot_cols(a, q, q);
                const double gamma = dot_cols(a, p, q);
                if (gamma == 0.0 || std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double ap = a[p][i];
                    const double aq = a[q][i];
                    a[p][i] = c * ap - s * aq;
                    a[q][i] = s * ap + c * aq;
                }
                for (std::size_t i = 0; i < k; ++i) {
                    const double vp = v[p][i];
                    const double vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
    }
    if (!converged) throw ConvergenceError("economy_svd: one-sided Jacobi did not converge");

    std::vector<double> sigma(k);
    for (std::size_t j = 0; j < k; ++j) sigma[j] = std::sqrt(dot_cols(a, j, j));
    const auto order = descending_order(sigma);
    const double cutoff = (sigma.empty() ? 0.0 : sigma[order[0]]) * static_cast<double>(m) *
                          std::numeric_limits<double>::epsilon();

    SvdResult out{RealMatrix(k, k), std::vector<double>(k), RealMatrix(m, k)};
    std::vector<std::vector<double>> right(k);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t j = order[r];
        out.singular[r] = sigma[j];
        right[r] = a[j];
        if (sigma[j] > cutoff && sigma[j] > 0.0) {
            for (double& x : right[r]) x /= sigma[j];
        } else {
            complete_column(right, r);
        }
        for (std::size_t i = 0; i < k; ++i) out.u(i, r) = v[j][i];
    }
    for (std::size_t r = 0; r < k; ++r) out.v.set_column(r, right[r]);
    return out;
}

EigenResult symmetric_eigen(const RealMatrix& input) {
    const std::size_t n = input.rows();
    if (n != input.cols()) throw DimensionError("symmetric_eigen: matrix must be square");
    RealMatrix a = input;
    RealMatrix v = RealMatrix::identity(n);
    const double scale = frobenius_norm(a);

    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-15 * scale || off == 0.0) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i);
                    const double aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
    }
    if (!converged) throw ConvergenceError("symmetric_eigen: Jacobi did not converge");

    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
    const auto order = descending_order(diag);
    EigenResult out{std::vector<double>(n), RealMatrix(n, n)};
    for (std::size_t r = 0; r < n; ++r) {
        out.values[r] = diag[order[r]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, r) = v(i, order[r]);
    }
    return out;
}

HermitianEigenResult hermitian_eigen(const ComplexMatrix& input) {
    const std::size_t n = input.rows();
    if (n != input.cols()) throw DimensionError("hermitian_eigen: matrix must be square");
    ComplexMatrix a = input;
    ComplexMatrix v = ComplexMatrix::identity(n);
    const double scale = frobenius_norm(a);

    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
        if (std::sqrt(off) <= 1e-15 * scale || off == 0.0) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double r = std::abs(a(p, q));
                if (r == 0.0) continue;
                // Phase on index q makes a(p, q) real and positive.
                const Complex phase = std::conj(a(p, q)) / r;
                for (std::size_t i = 0; i < n; ++i) a(i, q) *= phase;
                for (std::size_t i = 0; i < n; ++i) a(q, i) *= std::conj(phase);
                for (std::size_t i = 0; i < n; ++i) v(i, q) *= phase;
                a(q, q) = a(q, q).real();

                const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * r);
                const double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const Complex aip = a(i, p);
                    const Complex aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const Complex api = a(p, i);
                    const Complex aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const Complex vip = v(i, p);
                    const Complex viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
    }
    if (!converged) throw ConvergenceError("hermitian_eigen: Jacobi did not converge");

    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i).real();
    const auto order = descending_order(diag);
    HermitianEigenResult out{std::vector<double>(n), ComplexMatrix(n, n)};
    for (std::size_t r = 0; r < n; ++r) {
        out.values[r] = diag[order[r]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, r) = v(i, order[r]);
    }
    return out;
}

RealMatrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    RealMatrix out(rows, cols);
    for (double& x : out.data()) x = normal(rng);
    return out;
}

RsvdResult randomized_svd_with_sketch(const RealMatrix& c, const RealMatrix& omega, const Scheme& scheme,
                                      CostLedger& ledger) {
    if (c.rows() != c.cols()) throw DimensionError("randomized_svd: C must be square");
    if (omega.rows() != c.rows()) throw DimensionError("randomized_svd: sketch has wrong row count");
    economy_qr(omega);  // throws DegenerateSketch when Omega lacks full column rank

    const RealMatrix sketch = matmul_finite(c, omega, scheme, ledger);      // B = C Omega
    const RealMatrix t = economy_qr(sketch, RankPolicy::complete);           // double
    const RealMatrix projected = matmul_finite(t.transpose(), c, scheme, ledger);  // D = T^T C
    SvdResult svd = economy_svd(projected);                                  // double

    return RsvdResult{t * svd.u, std::move(svd.singular), digest(omega.data())};
}

RsvdResult randomized_svd(const RealMatrix& c, std::size_t k, const Scheme& scheme, CostLedger& ledger, Rng& rng) {
    if (k < 1 || k > c.rows()) throw DimensionError("randomized_svd: need 1 <= K <= M");
    try {
        return randomized_svd_with_sketch(c, gaussian_matrix(c.rows(), k, rng), scheme, ledger);
    } catch (const DegenerateSketch&) {
        return randomized_svd_with_sketch(c, gaussian_matrix(c.rows(), k, rng), scheme, ledger);
    }
}

double max_principal_angle(const RealMatrix& x, const RealMatrix& y) {
    if (x.rows() != y.rows()) throw DimensionError("max_principal_angle: row counts differ");
    if (y.cols() > x.cols()) throw DimensionError("max_principal_angle: y must not have more columns than x");
    // sin of the largest angle = ||(I - X X^T) Y||_2
    const RealMatrix residual = y - x * (x.transpose() * y);
    const SvdResult svd = economy_svd(residual.transpose());
    return std::asin(std::min(1.0, svd.singular.front()));
}

std::uint64_t digest(std::span<const double> values) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace fpmusic
