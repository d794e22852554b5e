#include "fpmusic/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace fpmusic {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum Stream : std::uint64_t { doa_stream = 0, snapshot_stream = 1, sketch_stream = 2 };

double to_double(const Cost& c) { return boost::rational_cast<double>(c); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

double parse_number(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("bad number '" + s + "' in table");
    return v;
}

constexpr const char* csv_header = "snr_db,method,scheme,rmse_deg,failures,weighted_adds,weighted_muls,overhead";

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void SweepConfig::validate() const {
    if (!(sources < rank && rank < sensors)) throw ParameterError("sweep: need N < K < M");
    if (sensors % 2 != 0) throw ParameterError("sweep: even number of sensors required");
    if (trials < 1) throw ParameterError("sweep: need at least one trial");
    if (grid_points < 3) throw ParameterError("sweep: need F >= 3");
    if (snapshots < 1) throw ParameterError("sweep: need T >= 1");
    if (!(doa_max_deg > doa_min_deg)) throw ParameterError("sweep: empty DOA range");
    if (!(min_separation_deg * static_cast<double>(sources - 1) < doa_max_deg - doa_min_deg))
        throw ParameterError("sweep: DOA separation infeasible for the range");
    if (methods.empty()) throw ParameterError("sweep: no methods");
    if (schemes.empty() && std::count(methods.begin(), methods.end(), Method::ru_music) > 0)
        throw ParameterError("sweep: ru_music needs at least one scheme");
}

std::vector<Variant> SweepConfig::variants() const {
    std::vector<Variant> out;
    const Scheme fp64 = UniformScheme{builtin_format("fp64")};
    for (Method m : methods) {
        if (m == Method::ru_music) {
            for (const Scheme& s : schemes) out.push_back({m, s, scheme_label(s)});
        } else {
            out.push_back({m, fp64, scheme_label(fp64)});
        }
    }
    return out;
}

SweepConfig default_sweep_config() {
    SweepConfig cfg;
    cfg.methods = {Method::music, Method::u_music, Method::ru_music};
    cfg.schemes = {parse_scheme("uniform:fp64"), parse_scheme("uniform:fp16"), parse_scheme("mp:fp16:fp32:B=2"),
                   parse_scheme("ap:fp64,fp32,fp16:gamma=2^-16")};
    return cfg;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t snr_index, std::uint64_t trial_index, std::uint64_t stream) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ snr_index);
    h = splitmix64(h ^ (trial_index + 0x632be59bd9b4e019ULL));
    return splitmix64(h ^ (stream + 0x8cb92ba72f3d8dd7ULL));
}

std::vector<double> sample_doas(std::size_t n, double lo, double hi, double min_sep, Rng& rng) {
    if (n < 1) throw ParameterError("sample_doas: need n >= 1");
    if (!(hi > lo)) throw ParameterError("sample_doas: empty range");
    std::uniform_real_distribution<double> uniform(lo, hi);
    std::vector<double> draw(n);
    for (int attempt = 0; attempt < 1'000'000; ++attempt) {
        for (double& d : draw) d = uniform(rng);
        std::sort(draw.begin(), draw.end());
        bool ok = true;
        for (std::size_t i = 1; i < n && ok; ++i) ok = draw[i] - draw[i - 1] >= min_sep;
        if (ok) return draw;
    }
    throw InfeasibleSampling("sample_doas: 10^6 consecutive rejections");
}

TrialScenario make_scenario(const SweepConfig& cfg, std::size_t snr_index, std::size_t trial_index) {
    Rng doa_rng(derive_seed(cfg.master_seed, snr_index, trial_index, doa_stream));
    TrialScenario out;
    out.true_doas_deg = sample_doas(cfg.sources, cfg.doa_min_deg, cfg.doa_max_deg, cfg.min_separation_deg, doa_rng);
    Rng snapshot_rng(derive_seed(cfg.master_seed, snr_index, trial_index, snapshot_stream));
    out.snapshots = synthesize_snapshots(out.true_doas_deg, cfg.snapshots, cfg.snr_db.at(snr_index),
                                         ArrayConfig::make(cfg.sensors), snapshot_rng);
    return out;
}

Rng sketch_rng(const SweepConfig& cfg, std::size_t snr_index, std::size_t trial_index) {
    return Rng(derive_seed(cfg.master_seed, snr_index, trial_index, sketch_stream));
}

TrialResult run_trial(const SweepConfig& cfg, std::size_t snr_index, std::size_t trial_index) {
    TrialResult out;
    out.snr_index = snr_index;
    out.trial_index = trial_index;
    TrialScenario scenario = make_scenario(cfg, snr_index, trial_index);
    out.true_doas_deg = std::move(scenario.true_doas_deg);
    const SnapshotMatrix& x = scenario.snapshots;
    const auto raw = x.data.data();
    out.snapshot_digest = digest({reinterpret_cast<const double*>(raw.data()), 2 * raw.size()});

    const EstimateOptions opts{cfg.sources, cfg.rank, angle_grid(cfg.grid_points)};
    for (const Variant& v : cfg.variants()) {
        VariantOutcome outcome;
        if (cfg.audit) outcome.ledger.audit = &outcome.calls;
        // Every variant starts from the same sketch stream state.
        Rng sketch = sketch_rng(cfg, snr_index, trial_index);
        try {
            Estimate est = estimate(v.method, x, opts, v.scheme, outcome.ledger, sketch);
            outcome.doas_deg = std::move(est.doas_deg);
            outcome.sketch_digest = est.sketch_digest;
        } catch (const std::exception& e) {
            outcome.failed = true;
            outcome.error = e.what();
        }
        outcome.ledger.audit = nullptr;
        out.outcomes.push_back(std::move(outcome));
    }
    return out;
}

double rmse(const std::vector<TrialResult>& results, std::size_t variant_index) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const TrialResult& r : results) {
        const VariantOutcome& o = r.outcomes.at(variant_index);
        if (o.failed) continue;
        if (o.doas_deg.size() != r.true_doas_deg.size()) throw DimensionError("rmse: estimate count differs from truth");
        for (std::size_t n = 0; n < o.doas_deg.size(); ++n) {
            const double e = o.doas_deg[n] - r.true_doas_deg[n];
            sum += e * e;
            ++count;
        }
    }
    if (count == 0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(sum / static_cast<double>(count));
}

std::vector<SweepRow> summarize(const SweepConfig& cfg, double snr_db, const std::vector<TrialResult>& trials) {
    const auto variants = cfg.variants();
    std::vector<SweepRow> rows;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        SweepRow row;
        row.snr_db = snr_db;
        row.method = std::string(method_name(variants[v].method));
        row.scheme = variants[v].label;
        row.rmse_deg = rmse(trials, v);
        CostLedger total;
        std::size_t ok = 0;
        for (const TrialResult& t : trials) {
            const VariantOutcome& o = t.outcomes.at(v);
            if (o.failed) {
                ++row.failures;
                continue;
            }
            total.add(o.ledger);
            ++ok;
        }
        if (ok > 0) {
            const Cost denom(static_cast<std::int64_t>(ok));
            row.weighted_adds = to_double(total.weighted_adds / denom);
            row.weighted_muls = to_double(total.weighted_muls / denom);
            row.overhead = to_double(total.overhead / denom);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

SweepResult run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    SweepResult result;
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, cfg.trials));
    for (std::size_t s = 0; s < cfg.snr_db.size(); ++s) {
        std::vector<TrialResult> trials(cfg.trials);
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t t = next++; t < cfg.trials; t = next++) trials[t] = run_trial(cfg, s, t);
        };
        if (workers == 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        }
        auto rows = summarize(cfg, cfg.snr_db[s], trials);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
        std::move(trials.begin(), trials.end(), std::back_inserter(result.trials));
    }
    return result;
}

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << csv_header << '\n';
    for (const SweepRow& r : rows) {
        os << r.snr_db << ',' << csv_field(r.method) << ',' << csv_field(r.scheme) << ',';
        if (std::isnan(r.rmse_deg))
            os << "nan";
        else
            os << r.rmse_deg;
        os << ',' << r.failures << ',' << r.weighted_adds << ',' << r.weighted_muls << ',' << r.overhead << '\n';
    }
    os.precision(old_precision);
}

std::vector<SweepRow> read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != csv_header) throw std::runtime_error("read_csv: missing or unexpected header");
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = csv_split(line);
        if (f.size() != 8) throw std::runtime_error("read_csv: expected 8 fields");
        SweepRow r;
        r.snr_db = parse_number(f[0]);
        r.method = f[1];
        r.scheme = f[2];
        r.rmse_deg = parse_number(f[3]);
        r.failures = static_cast<std::size_t>(std::stoull(f[4]));
        r.weighted_adds = parse_number(f[5]);
        r.weighted_muls = parse_number(f[6]);
        r.overhead = parse_number(f[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_json(std::ostream& os, const SweepConfig& cfg, const std::vector<SweepRow>& rows) {
    nlohmann::json doc;
    doc["schema"] = "fpmusic.sweep/1";
    nlohmann::json c;
    c["M"] = cfg.sensors;
    c["N"] = cfg.sources;
    c["T"] = cfg.snapshots;
    c["K"] = cfg.rank;
    c["F"] = cfg.grid_points;
    c["trials"] = cfg.trials;
    c["snr_db"] = cfg.snr_db;
    c["doa_range_deg"] = {cfg.doa_min_deg, cfg.doa_max_deg};
    c["min_separation_deg"] = cfg.min_separation_deg;
    c["master_seed"] = cfg.master_seed;
    std::vector<std::string> methods;
    for (Method m : cfg.methods) methods.emplace_back(method_name(m));
    c["methods"] = methods;
    std::vector<std::string> schemes;
    for (const Scheme& s : cfg.schemes) schemes.push_back(scheme_label(s));
    c["schemes"] = schemes;
    doc["config"] = c;

    doc["rows"] = nlohmann::json::array();
    for (const SweepRow& r : rows) {
        doc["rows"].push_back({{"snr_db", r.snr_db},
                               {"method", r.method},
                               {"scheme", r.scheme},
                               {"rmse_deg", number_or_null(r.rmse_deg)},
                               {"failures", r.failures},
                               {"weighted_adds", r.weighted_adds},
                               {"weighted_muls", r.weighted_muls},
                               {"overhead", r.overhead}});
    }
    os << doc.dump(2) << '\n';
}

std::vector<SweepRow> read_json(std::istream& is) {
    const nlohmann::json doc = nlohmann::json::parse(is);
    if (doc.value("schema", "") != "fpmusic.sweep/1") throw std::runtime_error("read_json: unknown schema");
    std::vector<SweepRow> rows;
    for (const auto& j : doc.at("rows")) {
        SweepRow r;
        r.snr_db = j.at("snr_db").get<double>();
        r.method = j.at("method").get<std::string>();
        r.scheme = j.at("scheme").get<std::string>();
        r.rmse_deg = j.at("rmse_deg").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("rmse_deg").get<double>();
        r.failures = j.at("failures").get<std::size_t>();
        r.weighted_adds = j.at("weighted_adds").get<double>();
        r.weighted_muls = j.at("weighted_muls").get<double>();
        r.overhead = j.at("overhead").get<double>();
        rows.push_back(std::move(r));
    }
    return rows;
}

std::optional<PredictedCost> pipeline_predicted_costs(std::size_t m, std::size_t k, std::size_t n, std::size_t f,
                                                      const Scheme& scheme) {
    if (scheme_kind(scheme) == SchemeKind::ap) return std::nullopt;
    const PredictedCost len_m = predicted_costs(m, scheme);
    const PredictedCost len_n = predicted_costs(n, scheme);
    const Cost dots_m(static_cast<std::int64_t>(2 * m * k + f * (n + 1)));
    const Cost dots_n(static_cast<std::int64_t>(f));
    PredictedCost out;
    out.adds = dots_m * len_m.adds + dots_n * len_n.adds;
    out.muls = dots_m * len_m.muls + dots_n * len_n.muls;
    return out;
}

std::vector<double> parse_snr_list(std::string_view text) {
    auto number = [](std::string_view s) {
        std::string str(s);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(str, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != str.size()) throw ParameterError("bad SNR value '" + str + "'");
        return v;
    };
    std::vector<double> out;
    if (text.find(':') != std::string_view::npos) {
        const auto c1 = text.find(':');
        const auto c2 = text.find(':', c1 + 1);
        if (c2 == std::string_view::npos) throw ParameterError("SNR range must be start:step:stop");
        const double a = number(text.substr(0, c1));
        const double step = number(text.substr(c1 + 1, c2 - c1 - 1));
        const double b = number(text.substr(c2 + 1));
        if (!(step > 0) || b < a) throw ParameterError("SNR range needs step > 0 and stop >= start");
        const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < count; ++i) out.push_back(a + static_cast<double>(i) * step);
        return out;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find(',', start);
        out.push_back(number(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace fpmusic
