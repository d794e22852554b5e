#pragma once

// Finite-precision inner products and the weighted cost model.
//
// Three schemes share one entry point (dot):
//   uniform  every product and addition rounded to one format
//   mp       contiguous blocks of B terms accumulated in a low format,
//            block sums combined in a high format
//   ap       terms routed to precision levels by |b_i c_i| relative to the
//            threshold gamma * S / u_k (S = |b|^T |c|), partial sums combined
//            in the most precise level
//
// All accumulation is strictly sequential, left to right.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fpmusic/fpemu.hpp"
#include "fpmusic/matrix.hpp"

namespace fpmusic {

enum class SchemeKind { uniform, mp, ap };

struct UniformScheme {
    PrecisionFormat format;
};

struct MpConfig {
    PrecisionFormat low;
    PrecisionFormat high;
    std::size_t block_size = 2;

    /// Requires low.u >= high.u and block_size >= 1.
    static MpConfig make(PrecisionFormat low, PrecisionFormat high, std::size_t block_size);
};

struct ApConfig {
    static constexpr std::size_t max_levels = 16;

    std::vector<PrecisionFormat> levels;  // most precise first
    double gamma = 0.0;

    /// Requires strictly increasing unit roundoffs and gamma >= u_1.
    static ApConfig make(std::vector<PrecisionFormat> levels, double gamma);
};

using Scheme = std::variant<UniformScheme, MpConfig, ApConfig>;

SchemeKind scheme_kind(const Scheme& s);

/// Accepts "fp64" (shorthand for uniform), "uniform:fp16", "mp:fp16:fp64:B=2",
/// "ap:fp64,fp32,fp16:gamma=2^-16". Format names resolve against `formats`.
Scheme parse_scheme(std::string_view text);
Scheme parse_scheme(std::string_view text, const std::map<std::string, PrecisionFormat, std::less<>>& formats);

/// Canonical text form; parse_scheme(scheme_label(s)) reproduces s.
std::string scheme_label(const Scheme& s);

/// Weight used for the AP selection pass (the fp64 weight).
Cost selection_pass_weight();

/// One metered kernel call, recorded when a ledger carries an audit trail.
struct KernelCall {
    SchemeKind kind = SchemeKind::uniform;
    std::size_t length = 0;
    std::vector<std::size_t> group_sizes;  // ap only
    Cost adds{0};
    Cost muls{0};
    Cost overhead{0};
};

struct CostLedger {
    Cost weighted_adds{0};
    Cost weighted_muls{0};
    Cost overhead{0};
    // Non-owning. When set, every kernel call appends its delta.
    std::vector<KernelCall>* audit = nullptr;

    void add(const CostLedger& other) {
        weighted_adds += other.weighted_adds;
        weighted_muls += other.weighted_muls;
        overhead += other.overhead;
    }
};

struct GroupAssignment {
    std::vector<std::size_t> group_of;     // index -> level (0-based)
    std::vector<std::size_t> group_sizes;  // m_k, one per level
    double magnitude_sum = 0.0;            // S = |b|^T |c|
};

class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

double dot_uniform(std::span<const double> b, std::span<const double> c, const PrecisionFormat& fmt, CostLedger& ledger);
double dot_mp(std::span<const double> b, std::span<const double> c, const MpConfig& cfg, CostLedger& ledger);
double dot_ap(std::span<const double> b, std::span<const double> c, const ApConfig& cfg, CostLedger& ledger);
double dot(std::span<const double> b, std::span<const double> c, const Scheme& scheme, CostLedger& ledger);

/// Partition of indices into precision levels. Throws DegenerateInput when S = 0.
GroupAssignment assign_groups(std::span<const double> b, std::span<const double> c, const ApConfig& cfg);

struct ApBound {
    double epsilon = 0.0;    // (p - 1) u_1
    double a_posteriori = 0.0;  // eps + (1+eps) sum m_k u_k (1+u_k)^2 beta_k
    double c_factor = 0.0;   // (1+eps) sum m_k^2 (1+u_k)^2
    double a_priori = 0.0;   // eps + c_factor * gamma
};

/// Relative error certificate for dot_ap. Throws DegenerateInput when S = 0.
ApBound ap_error_bound(const GroupAssignment& assignment, const ApConfig& cfg, std::span<const double> b,
                       std::span<const double> c);

/// Entry (i, j) is the scheme dot of row i of a and column j of b.
RealMatrix matmul_finite(const RealMatrix& a, const RealMatrix& b, const Scheme& scheme, CostLedger& ledger);

struct PredictedCost {
    Cost adds{0};
    Cost muls{0};
    Cost overhead{0};
    // mp only: the single-block multiplication count q_l * B.
    std::optional<Cost> muls_per_block;
};

/// Closed-form weighted counts for one dot of length m. For ap, group_sizes
/// are the observed m_k (one per level; may be empty for an all-zero input).
PredictedCost predicted_costs(std::size_t m, const Scheme& scheme, std::span<const std::size_t> group_sizes = {});

}  // namespace fpmusic
