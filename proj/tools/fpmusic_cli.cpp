// fpmusic: finite-precision MUSIC experiments.
//
//   fpmusic sweep    --snr=-10:5:20 --trials 200 --out results.csv
//   fpmusic spectrum --snr 20 --seed 7 --out spectrum.csv
//   fpmusic costs    --m 20 --k 10 --f 1500 --n 5

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "fpmusic/bench.hpp"

using namespace fpmusic;

namespace {

using FormatTable = std::map<std::string, PrecisionFormat, std::less<>>;

struct Common {
    std::size_t m = 20, n = 5, t = 40, k = 10, f = 1500;
    std::string methods = "music,u_music,ru_music";
    std::string schemes = "fp64,uniform:fp16,mp:fp16:fp32:B=2,ap:fp64,fp32,fp16:gamma=2^-16";
    std::vector<std::string> format_defs;
    bool unbounded = false;
    std::uint64_t seed = 42;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--m", c.m, "Number of sensors (even)");
    app->add_option("--n", c.n, "Number of sources");
    app->add_option("--t", c.t, "Snapshots per trial");
    app->add_option("--k", c.k, "Randomized SVD rank");
    app->add_option("--f", c.f, "Spectrum grid points over [-90, 90]");
    app->add_option("--methods", c.methods, "Comma list of music,u_music,ru_music");
    app->add_option("--schemes", c.schemes, "Comma list of arithmetic schemes for ru_music");
    app->add_option("--format", c.format_defs, "Extra format name=t:emin:emax:q (repeatable)");
    app->add_flag("--unbounded-exponent", c.unbounded, "Disable exponent range limits in every format");
    app->add_option("--seed", c.seed, "Master seed");
}

FormatTable format_table(const Common& c) {
    FormatTable table(builtin_formats().begin(), builtin_formats().end());
    for (const auto& def : c.format_defs) {
        const auto eq = def.find('=');
        if (eq == std::string::npos) throw FormatError("--format expects name=t:emin:emax:q");
        const std::string name = def.substr(0, eq);
        table.insert_or_assign(name, PrecisionFormat::parse(def.substr(eq + 1), name));
    }
    if (c.unbounded)
        for (auto& [name, fmt] : table) fmt = fmt.with_unbounded_exponent();
    return table;
}

/// Splits on commas, keeping the level list of an ap scheme together.
std::vector<Scheme> parse_scheme_list(const std::string& text, const FormatTable& formats) {
    std::vector<std::string> tokens;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tokens.empty() && tokens.back().starts_with("ap:") && tokens.back().find(":gamma=") == std::string::npos)
            tokens.back() += "," + tok;
        else
            tokens.push_back(tok);
    }
    std::vector<Scheme> out;
    for (const auto& t : tokens) out.push_back(parse_scheme(t, formats));
    return out;
}

std::vector<Method> parse_method_list(const std::string& text) {
    std::vector<Method> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_method(tok));
    return out;
}

SweepConfig make_config(const Common& c) {
    SweepConfig cfg;
    cfg.sensors = c.m;
    cfg.sources = c.n;
    cfg.snapshots = c.t;
    cfg.rank = c.k;
    cfg.grid_points = c.f;
    cfg.methods = parse_method_list(c.methods);
    cfg.schemes = parse_scheme_list(c.schemes, format_table(c));
    cfg.master_seed = c.seed;
    return cfg;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    return os;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-precision MUSIC DOA experiments"};
    app.require_subcommand(1);

    Common sweep_opts;
    std::string sweep_snr = "-10:5:20";
    std::size_t sweep_trials = 200;
    std::size_t sweep_threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    std::string sweep_out = "results.csv";
    auto* sweep = app.add_subcommand("sweep", "Monte-Carlo RMSE and cost sweep over SNR");
    add_common(sweep, sweep_opts);
    sweep->add_option("--snr", sweep_snr, "SNR list: start:step:stop or comma list (dB)");
    sweep->add_option("--trials", sweep_trials, "Monte-Carlo trials per SNR");
    sweep->add_option("--threads", sweep_threads, "Worker threads");
    sweep->add_option("--out", sweep_out, "Output path (.csv or .json)");

    Common spec_opts;
    spec_opts.seed = 7;
    double spec_snr = 20.0;
    std::string spec_out = "spectrum.csv";
    auto* spectrum = app.add_subcommand("spectrum", "Single-trial spectrum dump for every method/scheme");
    add_common(spectrum, spec_opts);
    spectrum->add_option("--snr", spec_snr, "SNR in dB");
    spectrum->add_option("--out", spec_out, "Output CSV path");

    Common cost_opts;
    cost_opts.methods = "ru_music";
    std::size_t cost_ap_trials = 20;
    double cost_snr = 20.0;
    auto* costs = app.add_subcommand("costs", "Weighted operation counts per RU-MUSIC run");
    add_common(costs, cost_opts);
    costs->add_option("--ap-trials", cost_ap_trials, "Trials used to measure data-dependent ap counts");
    costs->add_option("--snr", cost_snr, "SNR for ap measurement trials (dB)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sweep) {
            SweepConfig cfg = make_config(sweep_opts);
            cfg.snr_db = parse_snr_list(sweep_snr);
            cfg.trials = sweep_trials;
            cfg.threads = sweep_threads;
            const SweepResult result = run_sweep(cfg);
            auto os = open_output(sweep_out);
            if (sweep_out.ends_with(".json"))
                write_json(os, cfg, result.rows);
            else
                write_csv(os, result.rows);
            write_csv(std::cout, result.rows);
        } else if (*spectrum) {
            SweepConfig cfg = make_config(spec_opts);
            cfg.snr_db = {spec_snr};
            cfg.trials = 1;
            cfg.validate();
            const TrialScenario scenario = make_scenario(cfg, 0, 0);
            auto os = open_output(spec_out);
            bool header = true;
            const EstimateOptions opts{cfg.sources, cfg.rank, angle_grid(cfg.grid_points)};
            for (const Variant& v : cfg.variants()) {
                CostLedger ledger;
                Rng sketch = sketch_rng(cfg, 0, 0);
                const Estimate est = estimate(v.method, scenario.snapshots, opts, v.scheme, ledger, sketch);
                write_spectrum_csv(os, est.spectrum, method_name(v.method), v.label, header);
                header = false;
                std::cout << std::setw(9) << method_name(v.method) << "  " << std::setw(32) << v.label << "  peaks:";
                for (double d : est.doas_deg) std::cout << ' ' << std::fixed << std::setprecision(2) << d;
                std::cout << '\n';
            }
            std::cout << "true DOAs:";
            for (double d : scenario.true_doas_deg) std::cout << ' ' << std::fixed << std::setprecision(2) << d;
            std::cout << '\n';
        } else if (*costs) {
            SweepConfig cfg = make_config(cost_opts);
            cfg.methods = {Method::ru_music};
            cfg.snr_db = {cost_snr};
            cfg.trials = cost_ap_trials;
            const auto fp64 = pipeline_predicted_costs(cfg.sensors, cfg.rank, cfg.sources, cfg.grid_points,
                                                       UniformScheme{builtin_format("fp64")});
            const double base_adds = boost::rational_cast<double>(fp64->adds);
            const double base_muls = boost::rational_cast<double>(fp64->muls);

            std::cout << "scheme,source,weighted_adds,weighted_muls,adds_reduction_pct,muls_reduction_pct\n";
            std::optional<SweepResult> measured;
            for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
                const Scheme& scheme = cfg.schemes[s];
                double adds = 0.0, muls = 0.0;
                std::string source = "closed-form";
                if (auto pc = pipeline_predicted_costs(cfg.sensors, cfg.rank, cfg.sources, cfg.grid_points, scheme)) {
                    adds = boost::rational_cast<double>(pc->adds);
                    muls = boost::rational_cast<double>(pc->muls);
                } else {
                    if (!measured) measured = run_sweep(cfg);
                    adds = measured->rows[s].weighted_adds;
                    muls = measured->rows[s].weighted_muls;
                    source = "mean of " + std::to_string(cfg.trials) + " trials";
                }
                std::cout << '"' << scheme_label(scheme) << '"' << ',' << source << ',' << std::setprecision(12) << adds
                          << ',' << muls << ',' << std::fixed << std::setprecision(2) << 100.0 * (1.0 - adds / base_adds)
                          << ',' << 100.0 * (1.0 - muls / base_muls) << std::defaultfloat << '\n';
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
