#include "fpmusic/kernels.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

namespace fpmusic {

namespace {

void check_lengths(std::span<const double> b, std::span<const double> c) {
    if (b.size() != c.size()) throw DimensionError("dot: operand lengths differ");
    if (b.empty()) throw DimensionError("dot: empty operands");
}

Cost count(std::size_t n) { return Cost(static_cast<std::int64_t>(n)); }

bool same_rounding(const PrecisionFormat& a, const PrecisionFormat& b) {
    return a.significand_bits == b.significand_bits && a.range_enforced == b.range_enforced &&
           (a.is_native_double() || (a.emin == b.emin && a.emax == b.emax));
}

void record(CostLedger& ledger, KernelCall call) {
    ledger.weighted_adds += call.adds;
    ledger.weighted_muls += call.muls;
    ledger.overhead += call.overhead;
    if (ledger.audit) ledger.audit->push_back(std::move(call));
}

/// Product of operands converted to fmt.
inline double converted_product(double b, double c, const PrecisionFormat& fmt) {
    return rounded_mul(round_to_format(b, fmt), round_to_format(c, fmt), fmt);
}

/// Level for magnitude x given thresholds[k] = gamma * S / u_k.
inline std::size_t level_of(double x, std::span<const double> thresholds) {
    const std::size_t p = thresholds.size();
    std::size_t k = 0;
    while (k + 1 < p && x <= thresholds[k + 1]) ++k;
    return k;
}

double magnitude_sum(std::span<const double> b, std::span<const double> c) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += std::fabs(b[i]) * std::fabs(c[i]);
    return s;
}

std::array<double, ApConfig::max_levels> thresholds_for(const ApConfig& cfg, double s) {
    std::array<double, ApConfig::max_levels> th{};
    for (std::size_t k = 0; k < cfg.levels.size(); ++k) th[k] = cfg.gamma * s / cfg.levels[k].unit_roundoff();
    return th;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_real(std::string_view s) {
    // "2^-16" or a decimal literal
    if (auto caret = s.find('^'); caret != std::string_view::npos) {
        double base = parse_real(s.substr(0, caret));
        double expo = parse_real(s.substr(caret + 1));
        return std::pow(base, expo);
    }
    std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(str, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != str.size() || str.empty()) throw FormatError("bad number '" + str + "'");
    return v;
}

std::string format_gamma(double gamma) {
    int e = 0;
    double m = std::frexp(gamma, &e);
    if (m == 0.5) return "2^" + std::to_string(e - 1);
    std::ostringstream os;
    os.precision(17);
    os << gamma;
    return os.str();
}

}  // namespace

MpConfig MpConfig::make(PrecisionFormat low, PrecisionFormat high, std::size_t block_size) {
    if (block_size < 1) throw FormatError("mp block size must be >= 1");
    if (low.unit_roundoff() < high.unit_roundoff()) throw FormatError("mp low format must not be more precise than high");
    return MpConfig{std::move(low), std::move(high), block_size};
}

ApConfig ApConfig::make(std::vector<PrecisionFormat> levels, double gamma) {
    if (levels.empty()) throw FormatError("ap needs at least one precision level");
    if (levels.size() > max_levels) throw FormatError("ap supports at most 16 levels");
    for (std::size_t k = 1; k < levels.size(); ++k)
        if (!(levels[k - 1].unit_roundoff() < levels[k].unit_roundoff()))
            throw FormatError("ap levels must have strictly increasing unit roundoff");
    if (!(gamma >= levels.front().unit_roundoff())) throw FormatError("ap target accuracy must be >= u_1");
    return ApConfig{std::move(levels), gamma};
}

SchemeKind scheme_kind(const Scheme& s) { return static_cast<SchemeKind>(s.index()); }

Scheme parse_scheme(std::string_view text) { return parse_scheme(text, builtin_formats()); }

Scheme parse_scheme(std::string_view text, const std::map<std::string, PrecisionFormat, std::less<>>& formats) {
    auto lookup = [&](std::string_view name) -> const PrecisionFormat& {
        auto it = formats.find(name);
        if (it == formats.end()) throw FormatError("unknown format '" + std::string(name) + "'");
        return it->second;
    };
    auto parts = split(text, ':');
    const std::string_view head = parts.front();
    if (parts.size() == 1) return UniformScheme{lookup(head)};
    if (head == "uniform" && parts.size() == 2) return UniformScheme{lookup(parts[1])};
    if (head == "mp" && parts.size() == 4) {
        if (!parts[3].starts_with("B=")) throw FormatError("mp scheme needs B=<block size>");
        double b = parse_real(parts[3].substr(2));
        if (b < 1 || b != std::floor(b)) throw FormatError("mp block size must be a positive integer");
        return MpConfig::make(lookup(parts[1]), lookup(parts[2]), static_cast<std::size_t>(b));
    }
    if (head == "ap" && parts.size() == 3) {
        if (!parts[2].starts_with("gamma=")) throw FormatError("ap scheme needs gamma=<target accuracy>");
        std::vector<PrecisionFormat> levels;
        for (auto name : split(parts[1], ',')) levels.push_back(lookup(name));
        return ApConfig::make(std::move(levels), parse_real(parts[2].substr(6)));
    }
    throw FormatError("unrecognized scheme '" + std::string(text) + "'");
}

std::string scheme_label(const Scheme& s) {
    return std::visit(
        [](const auto& cfg) -> std::string {
            using T = std::decay_t<decltype(cfg)>;
            if constexpr (std::is_same_v<T, UniformScheme>) {
                return "uniform:" + cfg.format.name;
            } else if constexpr (std::is_same_v<T, MpConfig>) {
                return "mp:" + cfg.low.name + ":" + cfg.high.name + ":B=" + std::to_string(cfg.block_size);
            } else {
                std::string out = "ap:";
                for (std::size_t k = 0; k < cfg.levels.size(); ++k) out += (k ? "," : "") + cfg.levels[k].name;
                return out + ":gamma=" + format_gamma(cfg.gamma);
            }
        },
        s);
}

Cost selection_pass_weight() { return builtin_format("fp64").cost_weight; }

double dot_uniform(std::span<const double> b, std::span<const double> c, const PrecisionFormat& fmt, CostLedger& ledger) {
    check_lengths(b, c);
    const std::size_t m = b.size();
    double acc = converted_product(b[0], c[0], fmt);
    for (std::size_t i = 1; i < m; ++i) acc = rounded_add(acc, converted_product(b[i], c[i], fmt), fmt);

    const Cost q = fmt.cost_weight;
    record(ledger, KernelCall{SchemeKind::uniform, m, {}, q * count(m - 1), q * count(m), Cost(0)});
    return acc;
}

double dot_mp(std::span<const double> b, std::span<const double> c, const MpConfig& cfg, CostLedger& ledger) {
    check_lengths(b, c);
    const std::size_t m = b.size();
    const std::size_t bs = cfg.block_size;
    const std::size_t blocks = (m + bs - 1) / bs;

    double y = 0.0;
    if (same_rounding(cfg.low, cfg.high)) {
        // One precision: block boundaries do not change the sequential sum.
        y = converted_product(b[0], c[0], cfg.low);
        for (std::size_t i = 1; i < m; ++i) y = rounded_add(y, converted_product(b[i], c[i], cfg.low), cfg.low);
    } else {
        for (std::size_t k = 0; k < blocks; ++k) {
            const std::size_t first = k * bs;
            const std::size_t last = std::min(first + bs, m);
            double yk = converted_product(b[first], c[first], cfg.low);
            for (std::size_t i = first + 1; i < last; ++i) yk = rounded_add(yk, converted_product(b[i], c[i], cfg.low), cfg.low);
            yk = round_to_format(yk, cfg.high);
            y = (k == 0) ? yk : rounded_add(y, yk, cfg.high);
        }
    }

    const Cost ql = cfg.low.cost_weight;
    const Cost qh = cfg.high.cost_weight;
    record(ledger, KernelCall{SchemeKind::mp, m, {}, ql * count(m - blocks) + qh * count(blocks - 1), ql * count(m), Cost(0)});
    return y;
}

GroupAssignment assign_groups(std::span<const double> b, std::span<const double> c, const ApConfig& cfg) {
    check_lengths(b, c);
    GroupAssignment out;
    out.magnitude_sum = magnitude_sum(b, c);
    if (out.magnitude_sum == 0.0) throw DegenerateInput("assign_groups: |b|^T|c| = 0");
    const auto th = thresholds_for(cfg, out.magnitude_sum);
    const std::span<const double> thresholds(th.data(), cfg.levels.size());

    out.group_of.resize(b.size());
    out.group_sizes.assign(cfg.levels.size(), 0);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const std::size_t k = level_of(std::fabs(b[i] * c[i]), thresholds);
        out.group_of[i] = k;
        ++out.group_sizes[k];
    }
    return out;
}

double dot_ap(std::span<const double> b, std::span<const double> c, const ApConfig& cfg, CostLedger& ledger) {
    check_lengths(b, c);
    const std::size_t m = b.size();
    const std::size_t p = cfg.levels.size();
    const Cost pass_cost = selection_pass_weight() * count(2 * m - 1);

    const double s = magnitude_sum(b, c);
    if (s == 0.0) {
        record(ledger, KernelCall{SchemeKind::ap, m, {}, Cost(0), Cost(0), pass_cost});
        return 0.0;
    }
    const auto th = thresholds_for(cfg, s);
    const std::span<const double> thresholds(th.data(), p);

    std::vector<std::uint8_t> level(m);
    for (std::size_t i = 0; i < m; ++i) level[i] = static_cast<std::uint8_t>(level_of(std::fabs(b[i] * c[i]), thresholds));

    const PrecisionFormat& top = cfg.levels.front();
    double y = 0.0;
    std::size_t nonempty = 0;
    std::vector<std::size_t> sizes(p, 0);
    Cost adds{0};
    Cost muls{0};
    for (std::size_t k = 0; k < p; ++k) {
        const PrecisionFormat& fmt = cfg.levels[k];
        double yk = 0.0;
        std::size_t mk = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (level[i] != k) continue;
            const double prod = converted_product(b[i], c[i], fmt);
            yk = (mk == 0) ? prod : rounded_add(yk, prod, fmt);
            ++mk;
        }
        sizes[k] = mk;
        if (mk == 0) continue;
        adds += fmt.cost_weight * count(mk - 1);
        muls += fmt.cost_weight * count(mk);
        yk = round_to_format(yk, top);
        y = (nonempty == 0) ? yk : rounded_add(y, yk, top);
        ++nonempty;
    }
    adds += top.cost_weight * count(nonempty - 1);

    record(ledger, KernelCall{SchemeKind::ap, m, std::move(sizes), adds, muls, pass_cost});
    return y;
}

double dot(std::span<const double> b, std::span<const double> c, const Scheme& scheme, CostLedger& ledger) {
    return std::visit(
        [&](const auto& cfg) -> double {
            using T = std::decay_t<decltype(cfg)>;
            if constexpr (std::is_same_v<T, UniformScheme>)
                return dot_uniform(b, c, cfg.format, ledger);
            else if constexpr (std::is_same_v<T, MpConfig>)
                return dot_mp(b, c, cfg, ledger);
            else
                return dot_ap(b, c, cfg, ledger);
        },
        scheme);
}

ApBound ap_error_bound(const GroupAssignment& assignment, const ApConfig& cfg, std::span<const double> b,
                       std::span<const double> c) {
    check_lengths(b, c);
    const double s = assignment.magnitude_sum;
    if (s == 0.0) throw DegenerateInput("ap_error_bound: |b|^T|c| = 0");
    const std::size_t p = cfg.levels.size();

    std::vector<double> group_mag(p, 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) group_mag[assignment.group_of[i]] += std::fabs(b[i] * c[i]);

    ApBound out;
    const double u1 = cfg.levels.front().unit_roundoff();
    out.epsilon = static_cast<double>(p - 1) * u1;
    double sum_beta = 0.0;
    double sum_c = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
        const double uk = cfg.levels[k].unit_roundoff();
        const double mk = static_cast<double>(assignment.group_sizes[k]);
        const double conv = (1.0 + uk) * (1.0 + uk);
        sum_beta += mk * uk * conv * (group_mag[k] / s);
        sum_c += mk * mk * conv;
    }
    out.a_posteriori = out.epsilon + (1.0 + out.epsilon) * sum_beta;
    out.c_factor = (1.0 + out.epsilon) * sum_c;
    out.a_priori = out.epsilon + out.c_factor * cfg.gamma;
    return out;
}

RealMatrix matmul_finite(const RealMatrix& a, const RealMatrix& b, const Scheme& scheme, CostLedger& ledger) {
    if (a.cols() != b.rows()) throw DimensionError("matmul_finite: inner dimensions differ");
    const RealMatrix bt = b.transpose();
    RealMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = dot(a.row(i), bt.row(j), scheme, ledger);
    return out;
}

PredictedCost predicted_costs(std::size_t m, const Scheme& scheme, std::span<const std::size_t> group_sizes) {
    if (m == 0) throw DimensionError("predicted_costs: zero length");
    PredictedCost out;
    std::visit(
        [&](const auto& cfg) {
            using T = std::decay_t<decltype(cfg)>;
            if constexpr (std::is_same_v<T, UniformScheme>) {
                const Cost q = cfg.format.cost_weight;
                out.adds = q * count(m - 1);
                out.muls = q * count(m);
            } else if constexpr (std::is_same_v<T, MpConfig>) {
                // p q_l (B - 1) + q_h (p - 1), with the last block possibly short.
                const std::size_t p = (m + cfg.block_size - 1) / cfg.block_size;
                out.adds = cfg.low.cost_weight * count(m - p) + cfg.high.cost_weight * count(p - 1);
                out.muls = cfg.low.cost_weight * count(m);
                out.muls_per_block = cfg.low.cost_weight * count(cfg.block_size);
            } else {
                out.overhead = selection_pass_weight() * count(2 * m - 1);
                if (group_sizes.empty()) return;
                if (group_sizes.size() != cfg.levels.size()) throw DimensionError("predicted_costs: one group size per level");
                std::size_t nonempty = 0;
                std::size_t total = 0;
                for (std::size_t k = 0; k < group_sizes.size(); ++k) {
                    const std::size_t mk = group_sizes[k];
                    total += mk;
                    if (mk == 0) continue;
                    ++nonempty;
                    out.adds += cfg.levels[k].cost_weight * count(mk - 1);
                    out.muls += cfg.levels[k].cost_weight * count(mk);
                }
                if (total != m) throw DimensionError("predicted_costs: group sizes must sum to the length");
                out.adds += cfg.levels.front().cost_weight * count(nonempty - 1);
            }
        },
        scheme);
    return out;
}

}  // namespace fpmusic
