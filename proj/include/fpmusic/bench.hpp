#pragma once

// Monte-Carlo harness: DOA scenario sampling, paired per-trial evaluation of
// every method/scheme variant, RMSE and weighted-cost tables, CSV/JSON output.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fpmusic/doa.hpp"
#include "fpmusic/kernels.hpp"

namespace fpmusic {

class InfeasibleSampling : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Variant {
    Method method = Method::ru_music;
    Scheme scheme = UniformScheme{builtin_format("fp64")};
    std::string label;  // scheme label used in reports
};

struct SweepConfig {
    std::size_t sensors = 20;    // M
    std::size_t sources = 5;     // N
    std::size_t snapshots = 40;  // T
    std::size_t rank = 10;       // K
    std::size_t grid_points = 1500;  // F
    std::vector<double> snr_db{-10, -5, 0, 5, 10, 15, 20};
    std::size_t trials = 200;
    double doa_min_deg = -60.0;
    double doa_max_deg = 60.0;
    double min_separation_deg = 10.0;
    std::vector<Method> methods{Method::music, Method::u_music, Method::ru_music};
    std::vector<Scheme> schemes{UniformScheme{builtin_format("fp64")}};
    std::uint64_t master_seed = 42;
    std::size_t threads = 1;
    bool audit = false;  // keep every kernel call's ledger delta

    /// Throws ParameterError when the invariants do not hold.
    void validate() const;

    /// music and u_music run once (fp64); ru_music once per scheme.
    std::vector<Variant> variants() const;
};

/// Reference sweep parameters: M=20, N=5, T=40, K=10, F=1500, schemes fp64,
/// pure fp16, mp(fp16, fp32, B=2), ap(fp64, fp32, fp16; gamma=2^-16).
SweepConfig default_sweep_config();

struct VariantOutcome {
    std::vector<double> doas_deg;
    CostLedger ledger;
    std::vector<KernelCall> calls;  // filled when SweepConfig::audit is set
    std::uint64_t sketch_digest = 0;
    bool failed = false;
    std::string error;
};

struct TrialResult {
    std::size_t snr_index = 0;
    std::size_t trial_index = 0;
    std::vector<double> true_doas_deg;
    std::uint64_t snapshot_digest = 0;
    std::vector<VariantOutcome> outcomes;  // parallel to SweepConfig::variants()
};

/// Seed for one random stream of one trial; a pure function of its inputs.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t snr_index, std::uint64_t trial_index, std::uint64_t stream);

/// Rejection sampling of n sorted angles in [lo, hi] with adjacent gaps >= min_sep.
std::vector<double> sample_doas(std::size_t n, double lo, double hi, double min_sep, Rng& rng);

struct TrialScenario {
    std::vector<double> true_doas_deg;
    SnapshotMatrix snapshots;
};

/// True DOAs and snapshots of one trial.
TrialScenario make_scenario(const SweepConfig& cfg, std::size_t snr_index, std::size_t trial_index);

/// Sketch stream of one trial; every variant starts from this state.
Rng sketch_rng(const SweepConfig& cfg, std::size_t snr_index, std::size_t trial_index);

TrialResult run_trial(const SweepConfig& cfg, std::size_t snr_index, std::size_t trial_index);

/// Root mean square error over the non-failed trials of one variant.
/// NaN when every trial failed.
double rmse(const std::vector<TrialResult>& results, std::size_t variant_index);

struct SweepRow {
    double snr_db = 0.0;
    std::string method;
    std::string scheme;
    double rmse_deg = 0.0;
    std::size_t failures = 0;
    double weighted_adds = 0.0;  // per-trial means
    double weighted_muls = 0.0;
    double overhead = 0.0;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<TrialResult> trials;  // every trial, in (snr, trial) order
};

SweepResult run_sweep(const SweepConfig& cfg);

/// Summarizes trials of one SNR into one row per variant.
std::vector<SweepRow> summarize(const SweepConfig& cfg, double snr_db, const std::vector<TrialResult>& trials);

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_csv(std::istream& is);

void write_json(std::ostream& os, const SweepConfig& cfg, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_json(std::istream& is);

/// Closed-form per-trial RU-MUSIC counts for uniform and mp schemes:
/// 2MK products of length M (sketch and projection), F(N+1) of length M and
/// F of length N (spectrum). Returns nullopt for ap (data dependent).
std::optional<PredictedCost> pipeline_predicted_costs(std::size_t m, std::size_t k, std::size_t n, std::size_t f,
                                                      const Scheme& scheme);

/// Parses "a:step:b" (inclusive) or a comma list of reals.
std::vector<double> parse_snr_list(std::string_view text);

}  // namespace fpmusic
