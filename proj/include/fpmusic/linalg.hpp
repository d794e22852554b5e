#pragma once

// Small dense factorizations in double precision plus the randomized SVD
// whose two O(M^2 K) products run under a finite-precision scheme.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "fpmusic/kernels.hpp"
#include "fpmusic/matrix.hpp"

namespace fpmusic {

class DegenerateSketch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// reject: a diagonal entry of R below 1e-12 ||B||_F throws DegenerateSketch.
/// complete: dependent columns are replaced by orthonormal completions, so
/// range(T) contains range(B) for any rank.
enum class RankPolicy { reject, complete };

/// Householder QR; returns the M x K orthonormal factor.
RealMatrix economy_qr(const RealMatrix& b, RankPolicy policy = RankPolicy::reject);

struct SvdResult {
    RealMatrix u;                  // K x K
    std::vector<double> singular;  // descending, nonnegative
    RealMatrix v;                  // M x K
};

/// Thin SVD of a K x M matrix (K <= M) by one-sided Jacobi: D = U diag(s) V^T.
SvdResult economy_svd(const RealMatrix& d);

struct EigenResult {
    std::vector<double> values;  // descending
    RealMatrix vectors;          // columns
};

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
EigenResult symmetric_eigen(const RealMatrix& a);

struct HermitianEigenResult {
    std::vector<double> values;  // descending
    ComplexMatrix vectors;       // columns
};

/// Complex Jacobi eigendecomposition of a Hermitian matrix.
HermitianEigenResult hermitian_eigen(const ComplexMatrix& a);

struct RsvdResult {
    RealMatrix u;                  // M x K left factor T * U_hat
    std::vector<double> singular;  // K values of the sketch SVD
    std::uint64_t sketch_digest = 0;  // hash of the Gaussian test matrix used
};

/// M x K matrix of i.i.d. standard normal entries.
RealMatrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng);

/// Randomized SVD with a caller-supplied sketch matrix. Throws
/// DegenerateSketch when omega is rank deficient; a rank-deficient C is
/// handled by completing the basis of C * omega.
RsvdResult randomized_svd_with_sketch(const RealMatrix& c, const RealMatrix& omega, const Scheme& scheme,
                                      CostLedger& ledger);

/// Draws the sketch from rng; redraws once when it is degenerate.
RsvdResult randomized_svd(const RealMatrix& c, std::size_t k, const Scheme& scheme, CostLedger& ledger, Rng& rng);

/// Largest principal angle (radians) between the column spans of two
/// matrices with orthonormal columns.
double max_principal_angle(const RealMatrix& x, const RealMatrix& y);

std::uint64_t digest(std::span<const double> values);

}  // namespace fpmusic
