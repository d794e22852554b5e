#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fpmusic/kernels.hpp"
#include "oracles.hpp"

using namespace fpmusic;

namespace {

const PrecisionFormat& fp16() { return builtin_format("fp16"); }
const PrecisionFormat& fp32() { return builtin_format("fp32"); }
const PrecisionFormat& fp64() { return builtin_format("fp64"); }

ApConfig standard_ap(double gamma = std::ldexp(1.0, -16)) { return ApConfig::make({fp64(), fp32(), fp16()}, gamma); }

ApConfig unbounded_ap(double gamma) {
    return ApConfig::make(
        {fp64().with_unbounded_exponent(), fp32().with_unbounded_exponent(), fp16().with_unbounded_exponent()}, gamma);
}

std::vector<double> uniform_vector(std::mt19937_64& gen, std::size_t m, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(m);
    for (auto& x : v) x = d(gen);
    return v;
}

std::vector<double> log_vector(std::mt19937_64& gen, std::size_t m, double lo_decade, double hi_decade) {
    std::vector<double> v(m);
    for (auto& x : v) x = oracle::log_uniform(gen, lo_decade, hi_decade);
    return v;
}

/// Sequential dot with every operation rounded by MPFR.
double mpfr_sequential(const std::vector<double>& b, const std::vector<double>& c, std::size_t first, std::size_t last,
                       oracle::MpfrRounder& r) {
    double acc = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const double prod = *r.mul(*r.round(b[i]), *r.round(c[i]));
        acc = i == first ? prod : *r.add(acc, prod);
    }
    return acc;
}

}  // namespace

// ---- uniform ----

TEST(DotUniform, ZeroVectorCosts) {
    const std::vector<double> z(8, 0.0);
    CostLedger ledger;
    EXPECT_EQ(dot_uniform(z, z, fp16(), ledger), 0.0);
    EXPECT_EQ(ledger.weighted_adds, Cost(7));
    EXPECT_EQ(ledger.weighted_muls, Cost(8));
    EXPECT_EQ(ledger.overhead, Cost(0));
}

TEST(DotUniform, SmallIntegersExact) {
    const std::vector<double> ones(4, 1.0);
    CostLedger ledger;
    EXPECT_EQ(dot_uniform(ones, ones, fp16(), ledger), 4.0);
}

TEST(DotUniform, RejectsMismatchedOrEmpty) {
    CostLedger ledger;
    const std::vector<double> a(3, 1.0), b(4, 1.0), e;
    EXPECT_THROW(dot_uniform(a, b, fp16(), ledger), DimensionError);
    EXPECT_THROW(dot_uniform(e, e, fp16(), ledger), DimensionError);
}

TEST(DotUniform, Fp16WithinSequentialBound) {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 500; ++trial) {
        const auto b = uniform_vector(gen, 64), c = uniform_vector(gen, 64);
        CostLedger ledger;
        const double y = dot_uniform(b, c, fp16(), ledger);
        const double u = fp16().unit_roundoff();
        double s = 0.0;
        for (std::size_t i = 0; i < 64; ++i) s += std::fabs(b[i] * c[i]);
        const double bound = 64 * u * (1 + u) * (1 + u) * s;
        ASSERT_LE(std::fabs(y - oracle::kahan_dot(b, c)), bound);
    }
}

TEST(DotUniform, MatchesMpfrStepByStep) {
    std::mt19937_64 gen(22);
    for (const auto* f : {&fp16(), &fp32()}) {
        oracle::MpfrRounder r(f->significand_bits, f->emin, f->emax);
        for (int trial = 0; trial < 300; ++trial) {
            const auto b = uniform_vector(gen, 37, -4, 4), c = uniform_vector(gen, 37, -4, 4);
            CostLedger ledger;
            ASSERT_EQ(dot_uniform(b, c, *f, ledger), mpfr_sequential(b, c, 0, 37, r));
        }
    }
}

TEST(DotUniform, Fp64IsPlainSequentialDouble) {
    std::mt19937_64 gen(23);
    const auto b = uniform_vector(gen, 50), c = uniform_vector(gen, 50);
    double plain = b[0] * c[0];
    for (std::size_t i = 1; i < 50; ++i) plain += b[i] * c[i];
    CostLedger ledger;
    EXPECT_EQ(dot_uniform(b, c, fp64(), ledger), plain);
}

// ---- mixed precision ----

TEST(DotMp, BlockCostExample) {
    const auto cfg = MpConfig::make(fp16(), fp64(), 2);
    const std::vector<double> v(20, 0.5);
    CostLedger ledger;
    dot_mp(v, v, cfg, ledger);
    EXPECT_EQ(ledger.weighted_adds, Cost(46));
    EXPECT_EQ(ledger.weighted_muls, Cost(20));
    const auto pc = predicted_costs(20, cfg);
    EXPECT_EQ(pc.adds, Cost(46));
    ASSERT_TRUE(pc.muls_per_block.has_value());
    EXPECT_EQ(*pc.muls_per_block, Cost(2));
}

TEST(DotMp, SmallIntegersExact) {
    const std::vector<double> ones(4, 1.0);
    CostLedger ledger;
    EXPECT_EQ(dot_mp(ones, ones, MpConfig::make(fp16(), fp64(), 2), ledger), 4.0);
}

TEST(DotMp, ShortLastBlockCounts) {
    const auto cfg = MpConfig::make(fp16(), fp32(), 4);
    const std::vector<double> v(10, 1.0);
    CostLedger ledger;
    EXPECT_EQ(dot_mp(v, v, cfg, ledger), 10.0);
    // blocks 4, 4, 2: intra-block adds 3 + 3 + 1, three block sums combined
    EXPECT_EQ(ledger.weighted_adds, Cost(7 * 1 + 2 * 2));
    EXPECT_EQ(ledger.weighted_muls, Cost(10));
}

TEST(DotMp, SamePrecisionIsBitIdenticalToUniform) {
    std::mt19937_64 gen(24);
    for (std::size_t bs : {1, 2, 3, 7, 64}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto b = log_vector(gen, 33, -4, 2), c = log_vector(gen, 33, -4, 2);
            CostLedger l1, l2;
            ASSERT_EQ(dot_mp(b, c, MpConfig::make(fp64(), fp64(), bs), l1), dot_uniform(b, c, fp64(), l2));
            ASSERT_EQ(dot_mp(b, c, MpConfig::make(fp16(), fp16(), bs), l1), dot_uniform(b, c, fp16(), l2));
        }
    }
}

TEST(DotMp, MatchesMpfrBlockwise) {
    std::mt19937_64 gen(25);
    oracle::MpfrRounder low(11, -14, 15), high(24, -126, 127);
    const auto cfg = MpConfig::make(fp16(), fp32(), 3);
    for (int trial = 0; trial < 300; ++trial) {
        const auto b = uniform_vector(gen, 20, -3, 3), c = uniform_vector(gen, 20, -3, 3);
        double y = 0.0;
        for (std::size_t first = 0, k = 0; first < 20; first += 3, ++k) {
            const double yk = *high.round(mpfr_sequential(b, c, first, std::min<std::size_t>(first + 3, 20), low));
            y = k == 0 ? yk : *high.add(y, yk);
        }
        CostLedger ledger;
        ASSERT_EQ(dot_mp(b, c, cfg, ledger), y);
    }
}

TEST(MpConfig, RejectsInvertedPrecisions) {
    EXPECT_THROW(MpConfig::make(fp64(), fp16(), 2), FormatError);
    EXPECT_THROW(MpConfig::make(fp16(), fp64(), 0), FormatError);
}

// ---- adaptive precision ----

TEST(AssignGroups, TopLevelUnreachableAtStandardGamma) {
    std::mt19937_64 gen(26);
    const auto cfg = standard_ap();
    for (int trial = 0; trial < 1000; ++trial) {
        const auto b = log_vector(gen, 16, -6, 2), c = log_vector(gen, 16, -6, 2);
        EXPECT_EQ(assign_groups(b, c, cfg).group_sizes[0], 0u);
    }
}

TEST(AssignGroups, SingleNonzeroGoesToMiddleLevel) {
    std::vector<double> e(8, 0.0);
    e[0] = 1.0;
    const auto g = assign_groups(e, e, standard_ap());
    EXPECT_EQ(g.group_of[0], 1u);
    for (std::size_t i = 1; i < 8; ++i) EXPECT_EQ(g.group_of[i], 2u);
    EXPECT_EQ(g.group_sizes, (std::vector<std::size_t>{0, 1, 7}));
}

TEST(AssignGroups, FlatVectorAllMiddleLevel) {
    const std::vector<double> v(20, 1.0 / std::sqrt(20.0));
    const auto g = assign_groups(v, v, standard_ap());
    EXPECT_EQ(g.group_sizes, (std::vector<std::size_t>{0, 20, 0}));
}

TEST(AssignGroups, MatchesDirectThresholds) {
    std::mt19937_64 gen(27);
    for (double gamma : {std::ldexp(1.0, -10), std::ldexp(1.0, -16), std::ldexp(1.0, -20)}) {
        const auto cfg = standard_ap(gamma);
        for (int trial = 0; trial < 300; ++trial) {
            const auto b = log_vector(gen, 32, -6, 2), c = log_vector(gen, 32, -6, 2);
            double s = 0.0;
            for (std::size_t i = 0; i < 32; ++i) s += std::fabs(b[i]) * std::fabs(c[i]);
            const auto g = assign_groups(b, c, cfg);
            for (std::size_t i = 0; i < 32; ++i) {
                const double x = std::fabs(b[i] * c[i]);
                // Deepest level whose threshold still admits x.
                std::size_t want = 0;
                for (std::size_t k = 1; k < 3; ++k)
                    if (x <= gamma * s / cfg.levels[k].unit_roundoff()) want = k;
                ASSERT_EQ(g.group_of[i], want);
            }
        }
    }
}

TEST(AssignGroups, ZeroInputThrows) {
    const std::vector<double> z(5, 0.0);
    EXPECT_THROW(assign_groups(z, z, standard_ap()), DegenerateInput);
}

TEST(DotAp, ZeroVectorsShortCircuit) {
    const std::vector<double> z(6, 0.0);
    CostLedger ledger;
    EXPECT_EQ(dot_ap(z, z, standard_ap(), ledger), 0.0);
    EXPECT_EQ(ledger.weighted_adds, Cost(0));
    EXPECT_EQ(ledger.weighted_muls, Cost(0));
    EXPECT_EQ(ledger.overhead, Cost(4 * 11));
}

TEST(DotAp, SingleLevelIsBitIdenticalToUniform) {
    std::mt19937_64 gen(28);
    const auto cfg = ApConfig::make({fp64()}, std::ldexp(1.0, -16));
    for (int trial = 0; trial < 1000; ++trial) {
        const auto b = log_vector(gen, 40, -5, 3), c = log_vector(gen, 40, -5, 3);
        CostLedger l1, l2;
        ASSERT_EQ(dot_ap(b, c, cfg, l1), dot_uniform(b, c, fp64(), l2));
        ASSERT_EQ(l1.weighted_adds, l2.weighted_adds);
        ASSERT_EQ(l1.weighted_muls, l2.weighted_muls);
    }
}

TEST(DotAp, MatchesMpfrGroupwise) {
    std::mt19937_64 gen(29);
    const auto cfg = standard_ap();
    oracle::MpfrRounder r64(53, -1022, 1023), r32(24, -126, 127), r16(11, -14, 15);
    oracle::MpfrRounder* rounders[] = {&r64, &r32, &r16};
    for (int trial = 0; trial < 300; ++trial) {
        const auto b = log_vector(gen, 24, -2, 1), c = log_vector(gen, 24, -2, 1);
        const auto g = assign_groups(b, c, cfg);
        double y = 0.0;
        bool started = false;
        for (std::size_t k = 0; k < 3; ++k) {
            double yk = 0.0;
            bool any = false;
            for (std::size_t i = 0; i < 24; ++i) {
                if (g.group_of[i] != k) continue;
                const double prod = *rounders[k]->mul(*rounders[k]->round(b[i]), *rounders[k]->round(c[i]));
                yk = any ? *rounders[k]->add(yk, prod) : prod;
                any = true;
            }
            if (!any) continue;
            y = started ? *r64.add(y, yk) : yk;
            started = true;
        }
        CostLedger ledger;
        ASSERT_EQ(dot_ap(b, c, cfg, ledger), y);
    }
}

TEST(DotAp, PosterioriBoundOnWideMagnitudes) {
    std::mt19937_64 gen(30);
    const auto cfg = unbounded_ap(std::ldexp(1.0, -16));
    for (int trial = 0; trial < 500; ++trial) {
        const auto b = log_vector(gen, 100, -5, 5), c = log_vector(gen, 100, -5, 5);
        CostLedger ledger;
        const double y = dot_ap(b, c, cfg, ledger);
        const auto g = assign_groups(b, c, cfg);
        const auto bound = ap_error_bound(g, cfg, b, c);
        ASSERT_LE(std::fabs(y - oracle::dot2(b, c)) / g.magnitude_sum, bound.a_posteriori);
    }
}

TEST(DotAp, LedgerMatchesPredictedCosts) {
    std::mt19937_64 gen(31);
    const auto cfg = standard_ap();
    for (int trial = 0; trial < 200; ++trial) {
        const auto b = log_vector(gen, 30, -3, 1), c = log_vector(gen, 30, -3, 1);
        std::vector<KernelCall> audit;
        CostLedger ledger;
        ledger.audit = &audit;
        dot_ap(b, c, cfg, ledger);
        ASSERT_EQ(audit.size(), 1u);
        const auto pc = predicted_costs(30, cfg, audit[0].group_sizes);
        ASSERT_EQ(audit[0].group_sizes, assign_groups(b, c, cfg).group_sizes);
        ASSERT_EQ(pc.adds, ledger.weighted_adds);
        ASSERT_EQ(pc.muls, ledger.weighted_muls);
        ASSERT_EQ(pc.overhead, ledger.overhead);
    }
}

TEST(ApConfig, Validation) {
    EXPECT_THROW(ApConfig::make({fp16(), fp64()}, 0.5), FormatError);
    EXPECT_THROW(ApConfig::make({fp64(), fp32()}, std::ldexp(1.0, -60)), FormatError);
    EXPECT_THROW(ApConfig::make({}, 0.5), FormatError);
    EXPECT_NO_THROW(ApConfig::make({fp64()}, std::ldexp(1.0, -53)));
}

// ---- error certificate ----

TEST(ApErrorBound, SingleLevelReducesToSequentialBound) {
    const auto cfg = ApConfig::make({fp32()}, 0.5);
    const std::vector<double> b{1.0, -2.0, 0.5, 3.0}, c{0.25, 1.0, 4.0, -1.0};
    const auto bound = ap_error_bound(assign_groups(b, c, cfg), cfg, b, c);
    const double u = fp32().unit_roundoff();
    EXPECT_EQ(bound.epsilon, 0.0);
    EXPECT_DOUBLE_EQ(bound.a_posteriori, 4 * u * (1 + u) * (1 + u));
}

TEST(ApErrorBound, FlatVectorValue) {
    const auto cfg = standard_ap();
    const std::vector<double> v(20, 1.0 / std::sqrt(20.0));
    const auto bound = ap_error_bound(assign_groups(v, v, cfg), cfg, v, v);
    const double u1 = std::ldexp(1.0, -53), u2 = std::ldexp(1.0, -24);
    const double want = 2 * u1 + (1 + 2 * u1) * 20 * u2 * (1 + u2) * (1 + u2);
    EXPECT_NEAR(bound.a_posteriori, want, 1e-15 * want);
    EXPECT_NEAR(bound.a_posteriori, 1.19e-6, 0.01e-6);
}

TEST(ApErrorBound, EmptyGroupsContributeNothing) {
    const auto cfg = standard_ap();
    std::vector<double> e(8, 0.0);
    e[3] = 2.0;
    const auto g = assign_groups(e, e, cfg);
    const auto bound = ap_error_bound(g, cfg, e, e);
    const double u1 = std::ldexp(1.0, -53), u2 = std::ldexp(1.0, -24);
    // The fp16 group holds only zero products, so beta_3 = 0.
    EXPECT_DOUBLE_EQ(bound.a_posteriori, 2 * u1 + (1 + 2 * u1) * u2 * (1 + u2) * (1 + u2));
}

TEST(ApErrorBound, PrioriDominatesPosteriori) {
    std::mt19937_64 gen(32);
    const auto cfg = standard_ap();
    for (int trial = 0; trial < 500; ++trial) {
        const auto b = log_vector(gen, 32, -4, 4), c = log_vector(gen, 32, -4, 4);
        const auto bound = ap_error_bound(assign_groups(b, c, cfg), cfg, b, c);
        ASSERT_LE(bound.a_posteriori, bound.a_priori);
    }
}

// ---- matrix products and cost formulas ----

TEST(MatmulFinite, IdentityIsExact) {
    std::mt19937_64 gen(33);
    RealMatrix b(6, 4);
    for (auto& x : b.data()) x = std::ldexp(std::round(std::uniform_real_distribution<double>(-64, 64)(gen)), -3);
    CostLedger ledger;
    for (const Scheme& s : {Scheme{UniformScheme{fp16()}}, Scheme{MpConfig::make(fp16(), fp32(), 2)},
                            Scheme{standard_ap()}})
        EXPECT_EQ(matmul_finite(RealMatrix::identity(6), b, s, ledger), b);
}

TEST(MatmulFinite, Fp64MatchesSequentialDouble) {
    std::mt19937_64 gen(34);
    RealMatrix a(5, 7), b(7, 3);
    for (auto& x : a.data()) x = std::normal_distribution<double>()(gen);
    for (auto& x : b.data()) x = std::normal_distribution<double>()(gen);
    CostLedger ledger;
    const RealMatrix got = matmul_finite(a, b, UniformScheme{fp64()}, ledger);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = a(i, 0) * b(0, j);
            for (std::size_t l = 1; l < 7; ++l) acc += a(i, l) * b(l, j);
            ASSERT_EQ(got(i, j), acc);
        }
    EXPECT_EQ(ledger.weighted_muls, Cost(4 * 7 * 15));
}

TEST(MatmulFinite, MpEntriesWithinBound) {
    std::mt19937_64 gen(35);
    const auto cfg = MpConfig::make(fp16(), fp64(), 2);
    for (int trial = 0; trial < 100; ++trial) {
        RealMatrix a(4, 4), b(4, 4);
        for (auto& x : a.data()) x = std::uniform_real_distribution<double>(-1, 1)(gen);
        for (auto& x : b.data()) x = std::uniform_real_distribution<double>(-1, 1)(gen);
        CostLedger ledger;
        const RealMatrix got = matmul_finite(a, b, cfg, ledger);
        const double ul = fp16().unit_roundoff(), uh = fp64().unit_roundoff();
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                std::vector<double> row(a.row(i).begin(), a.row(i).end()), col = b.column(j);
                double s = 0.0;
                for (std::size_t l = 0; l < 4; ++l) s += std::fabs(row[l] * col[l]);
                // Block of two in the low format, two block sums in the high one.
                const double bound = ((1 + ul) * (1 + ul) * (1 + 2 * ul) * (1 + 2 * uh) - 1) * s;
                ASSERT_LE(std::fabs(got(i, j) - oracle::dot2(row, col)), bound);
            }
    }
}

TEST(MatmulFinite, DimensionMismatchThrows) {
    CostLedger ledger;
    EXPECT_THROW(matmul_finite(RealMatrix(2, 3), RealMatrix(2, 3), UniformScheme{fp64()}, ledger), DimensionError);
}

TEST(PredictedCosts, Examples) {
    const auto mp = predicted_costs(20, MpConfig::make(fp16(), fp64(), 2));
    EXPECT_EQ(mp.adds, Cost(46));
    EXPECT_EQ(mp.muls, Cost(20));

    const std::vector<std::size_t> sizes{0, 20, 0};
    const auto ap = predicted_costs(20, standard_ap(), sizes);
    EXPECT_EQ(ap.adds, Cost(38));
    EXPECT_EQ(ap.muls, Cost(40));
    EXPECT_EQ(ap.overhead, Cost(4 * 39));

    const auto u = predicted_costs(20, UniformScheme{fp64()});
    EXPECT_EQ(u.adds, Cost(76));
    EXPECT_EQ(u.muls, Cost(80));
}

TEST(PredictedCosts, RationalWeightsStayExact) {
    const auto third = PrecisionFormat::make("tiny", 8, -20, 20, Cost(1, 3));
    const auto pc = predicted_costs(7, UniformScheme{third});
    EXPECT_EQ(pc.adds, Cost(2));
    EXPECT_EQ(pc.muls, Cost(7, 3));
}

TEST(PredictedCosts, RejectsInconsistentGroups) {
    const std::vector<std::size_t> wrong_total{0, 3, 3};
    const std::vector<std::size_t> wrong_levels{10};
    EXPECT_THROW(predicted_costs(10, standard_ap(), wrong_total), DimensionError);
    EXPECT_THROW(predicted_costs(10, standard_ap(), wrong_levels), DimensionError);
    EXPECT_THROW(predicted_costs(0, UniformScheme{fp64()}), DimensionError);
}

// ---- scheme descriptors ----

TEST(SchemeText, ParseAndLabelRoundTrip) {
    for (const char* text : {"uniform:fp16", "mp:fp16:fp64:B=2", "ap:fp64,fp32,fp16:gamma=2^-16", "uniform:fp64"}) {
        const Scheme s = parse_scheme(text);
        EXPECT_EQ(scheme_label(s), text);
        EXPECT_EQ(scheme_label(parse_scheme(scheme_label(s))), text);
    }
    EXPECT_EQ(scheme_label(parse_scheme("fp64")), "uniform:fp64");
    const auto ap = std::get<ApConfig>(parse_scheme("ap:fp64,fp32,fp16:gamma=2^-16"));
    EXPECT_EQ(ap.gamma, std::ldexp(1.0, -16));
    EXPECT_EQ(ap.levels.size(), 3u);
}

TEST(SchemeText, RejectsMalformed) {
    EXPECT_THROW(parse_scheme("mp:fp16:fp64"), FormatError);
    EXPECT_THROW(parse_scheme("mp:fp16:fp64:B=0"), FormatError);
    EXPECT_THROW(parse_scheme("ap:fp64,fp32"), FormatError);
    EXPECT_THROW(parse_scheme("uniform:fp8"), FormatError);
    EXPECT_THROW(parse_scheme("bogus"), FormatError);
}

TEST(SchemeText, CustomFormatTable) {
    auto table = builtin_formats();
    table.emplace("bf16", PrecisionFormat::parse("8:-126:127:1", "bf16"));
    const Scheme s = parse_scheme("mp:bf16:fp32:B=4", table);
    EXPECT_EQ(std::get<MpConfig>(s).low.significand_bits, 8);
    EXPECT_EQ(scheme_kind(s), SchemeKind::mp);
}
