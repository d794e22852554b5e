#include "fpmusic/doa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

namespace fpmusic {

namespace {

constexpr double deg_to_rad = std::numbers::pi / 180.0;

struct Entry {
    std::size_t row;
    Complex value;
};

/// Nonzeros of each column of Q (at most two per column).
std::vector<std::vector<Entry>> q_columns(std::size_t m) {
    const double h = 1.0 / std::numbers::sqrt2;
    const Complex j{0.0, 1.0};
    const std::size_t half = m / 2;
    const std::size_t lower = (m % 2 == 0) ? half : half + 1;  // first row of the J block
    std::vector<std::vector<Entry>> cols(m);
    for (std::size_t i = 0; i < half; ++i) {
        // [I; J] columns
        cols[i].push_back({i, h});
        cols[i].push_back({lower + (half - 1 - i), h});
        // [jI; -jJ] columns
        cols[lower + i].push_back({i, j * h});
        cols[lower + i].push_back({lower + (half - 1 - i), -j * h});
    }
    if (m % 2 == 1) cols[half].push_back({half, Complex{1.0, 0.0}});
    return cols;
}

void check_projector(double defect, const char* who) {
    if (!(defect <= 1e-6)) throw ParameterError(std::string(who) + ": subspace columns are not orthonormal");
}

/// ||G G - G||_F for G = X^H X: zero iff X X^H is an orthogonal projector.
template <typename T>
double projector_defect(const DenseMatrix<T>& x) {
    const DenseMatrix<T> g = x.adjoint() * x;
    return frobenius_norm(g * g - g);
}

}  // namespace

ArrayConfig ArrayConfig::make(std::size_t sensors) {
    if (sensors < 2) throw ParameterError("array needs at least two sensors");
    return ArrayConfig{sensors, 0.5};
}

Method parse_method(std::string_view name) {
    if (name == "music") return Method::music;
    if (name == "u_music") return Method::u_music;
    if (name == "ru_music") return Method::ru_music;
    throw ParameterError("unknown method '" + std::string(name) + "'");
}

std::string_view method_name(Method m) {
    switch (m) {
        case Method::music: return "music";
        case Method::u_music: return "u_music";
        case Method::ru_music: return "ru_music";
    }
    return "?";
}

std::vector<double> angle_grid(std::size_t f) {
    if (f < 2) throw ParameterError("angle grid needs at least two points");
    std::vector<double> grid(f);
    for (std::size_t i = 0; i < f; ++i) grid[i] = -90.0 + 180.0 * static_cast<double>(i) / static_cast<double>(f - 1);
    return grid;
}

std::vector<Complex> steering_complex(double theta_deg, const ArrayConfig& cfg) {
    const double step = 2.0 * std::numbers::pi * cfg.spacing_over_wavelength * std::sin(theta_deg * deg_to_rad);
    std::vector<Complex> a(cfg.sensors);
    a[0] = 1.0;
    for (std::size_t m = 1; m < cfg.sensors; ++m) a[m] = std::polar(1.0, -step * static_cast<double>(m));
    return a;
}

void steering_real_into(double theta_deg, std::size_t sensors, std::span<double> out) {
    if (sensors % 2 != 0) throw ParameterError("real steering vector requires an even number of sensors");
    if (out.size() != sensors) throw DimensionError("steering_real_into: output length");
    const std::size_t half = sensors / 2;
    const double phi = std::numbers::pi * std::sin(theta_deg * deg_to_rad) / 2.0;
    for (std::size_t r = 0; r < half; ++r) {
        const double arg = static_cast<double>(2 * (half - r) - 1) * phi;  // (M-1)phi down to phi
        out[r] = std::numbers::sqrt2 * std::cos(arg);
        out[half + r] = std::numbers::sqrt2 * std::sin(arg);
    }
}

std::vector<double> steering_real(double theta_deg, const ArrayConfig& cfg) {
    std::vector<double> out(cfg.sensors);
    steering_real_into(theta_deg, cfg.sensors, out);
    return out;
}

ComplexMatrix unitary_q(std::size_t m) {
    if (m < 2) throw ParameterError("unitary_q: need M >= 2");
    ComplexMatrix q(m, m);
    const auto cols = q_columns(m);
    for (std::size_t c = 0; c < m; ++c)
        for (const Entry& e : cols[c]) q(e.row, c) = e.value;
    return q;
}

SnapshotMatrix synthesize_snapshots(std::span<const double> doas_deg, std::size_t snapshots, double snr_db,
                                    const ArrayConfig& cfg, Rng& rng) {
    const std::size_t n = doas_deg.size();
    const std::size_t m = cfg.sensors;
    if (n == 0 || n >= m) throw ParameterError("synthesize_snapshots: need 1 <= N < M sources");
    if (snapshots < 1) throw ParameterError("synthesize_snapshots: need T >= 1");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = i + 1; k < n; ++k)
            if (doas_deg[i] == doas_deg[k]) throw ParameterError("synthesize_snapshots: DOAs must be distinct");

    std::vector<std::vector<Complex>> steering;
    for (double theta : doas_deg) steering.push_back(steering_complex(theta, cfg));

    const double noise_var = std::isinf(snr_db) && snr_db > 0 ? 0.0 : std::pow(10.0, -snr_db / 10.0);
    const double noise_sd = std::sqrt(noise_var / 2.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double source_sd = std::sqrt(0.5);

    SnapshotMatrix x{ComplexMatrix(m, snapshots)};
    std::vector<Complex> s(n);
    for (std::size_t t = 0; t < snapshots; ++t) {
        for (auto& sn : s) {
            const double re = normal(rng);
            const double im = normal(rng);
            sn = Complex(source_sd * re, source_sd * im);
        }
        for (std::size_t i = 0; i < m; ++i) {
            Complex acc{};
            for (std::size_t k = 0; k < n; ++k) acc += steering[k][i] * s[k];
            const double re = normal(rng);
            const double im = normal(rng);
            x.data(i, t) = acc + Complex(noise_sd * re, noise_sd * im);
        }
    }
    return x;
}

ComplexMatrix sample_covariance(const SnapshotMatrix& x) {
    const std::size_t m = x.sensors();
    const std::size_t t = x.snapshots();
    if (t < 1) throw ParameterError("sample_covariance: no snapshots");
    ComplexMatrix r(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            Complex acc{};
            for (std::size_t k = 0; k < t; ++k) acc += x.data(i, k) * std::conj(x.data(j, k));
            acc /= static_cast<double>(t);
            r(i, j) = acc;
            r(j, i) = std::conj(acc);
        }
    for (std::size_t i = 0; i < m; ++i) r(i, i) = r(i, i).real();
    return r;
}

RealMatrix unitary_transform(const ComplexMatrix& r) {
    const std::size_t m = r.rows();
    if (m != r.cols()) throw DimensionError("unitary_transform: R must be square");
    if (m < 2) throw ParameterError("unitary_transform: need M >= 2");
    const auto cols = q_columns(m);
    RealMatrix c(m, m);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a; b < m; ++b) {
            Complex acc{};
            for (const Entry& ea : cols[a])
                for (const Entry& eb : cols[b]) acc += std::conj(ea.value) * r(ea.row, eb.row) * eb.value;
            c(a, b) = acc.real();
            c(b, a) = acc.real();
        }
    return c;
}

Spectrum spectrum_classic(const ComplexMatrix& subspace, SubspaceMode mode, std::span<const double> grid_deg) {
    const std::size_t m = subspace.rows();
    check_projector(projector_defect(subspace), "spectrum_classic");
    const ArrayConfig cfg = ArrayConfig::make(m);
    const double floor = denominator_floor_factor * static_cast<double>(m);

    Spectrum out{{grid_deg.begin(), grid_deg.end()}, std::vector<double>(grid_deg.size())};
    for (std::size_t g = 0; g < grid_deg.size(); ++g) {
        const auto a = steering_complex(grid_deg[g], cfg);
        double norm_a = 0.0;
        for (const Complex& v : a) norm_a += std::norm(v);
        double proj = 0.0;
        for (std::size_t k = 0; k < subspace.cols(); ++k) {
            Complex w{};
            for (std::size_t i = 0; i < m; ++i) w += std::conj(subspace(i, k)) * a[i];
            proj += std::norm(w);
        }
        const double denom = mode == SubspaceMode::signal ? norm_a - proj : proj;
        out.values[g] = 1.0 / std::max(denom, floor);
    }
    return out;
}

Spectrum spectrum_real(const RealMatrix& signal_subspace, std::span<const double> grid_deg, const Scheme& scheme,
                       CostLedger& ledger) {
    const std::size_t m = signal_subspace.rows();
    const std::size_t n = signal_subspace.cols();
    if (m % 2 != 0) throw ParameterError("spectrum_real: even number of sensors required");
    check_projector(projector_defect(signal_subspace), "spectrum_real");
    const double floor = denominator_floor_factor * static_cast<double>(m);
    const RealMatrix basis = signal_subspace.transpose();  // rows are subspace vectors

    Spectrum out{{grid_deg.begin(), grid_deg.end()}, std::vector<double>(grid_deg.size())};
    std::vector<double> a(m);
    std::vector<double> v(n);
    for (std::size_t g = 0; g < grid_deg.size(); ++g) {
        steering_real_into(grid_deg[g], m, a);
        for (std::size_t k = 0; k < n; ++k) v[k] = dot(basis.row(k), a, scheme, ledger);
        const double s1 = dot(a, a, scheme, ledger);
        const double s2 = n > 0 ? dot(v, v, scheme, ledger) : 0.0;
        out.values[g] = 1.0 / std::max(s1 - s2, floor);
    }
    return out;
}

std::vector<double> find_peaks(const Spectrum& spectrum, std::size_t n) {
    const auto& p = spectrum.values;
    const std::size_t f = p.size();
    if (n < 1) throw ParameterError("find_peaks: need N >= 1");
    if (f < 3 || spectrum.angles_deg.size() != f) throw ParameterError("find_peaks: need F >= 3 matching angles");

    auto by_value = [&](std::size_t a, std::size_t b) { return p[a] > p[b] || (p[a] == p[b] && a < b); };

    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < f; ++i) {
        const bool left = i == 0 || p[i - 1] < p[i];
        const bool right = i + 1 == f || p[i] > p[i + 1];
        if (left && right) peaks.push_back(i);
    }
    std::sort(peaks.begin(), peaks.end(), by_value);
    if (peaks.size() > n) peaks.resize(n);

    if (peaks.size() < n) {
        std::vector<bool> taken(f, false);
        for (std::size_t i : peaks) taken[i] = true;
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < f; ++i)
            if (!taken[i]) rest.push_back(i);
        std::sort(rest.begin(), rest.end(), by_value);
        for (std::size_t i = 0; i < rest.size() && peaks.size() < n; ++i) peaks.push_back(rest[i]);
    }

    std::vector<double> out;
    for (std::size_t i : peaks) out.push_back(spectrum.angles_deg[i]);
    std::sort(out.begin(), out.end());
    return out;
}

Estimate estimate(Method method, const SnapshotMatrix& x, const EstimateOptions& opts, const Scheme& scheme,
                  CostLedger& ledger, Rng& rng) {
    const std::size_t m = x.sensors();
    const std::size_t n = opts.sources;
    if (n < 1 || n >= m) throw ParameterError("estimate: need 1 <= N < M");
    if (opts.grid_deg.size() < 3) throw ParameterError("estimate: grid needs at least three angles");

    const ComplexMatrix r = sample_covariance(x);
    Estimate out;
    switch (method) {
        case Method::music: {
            const auto eig = hermitian_eigen(r);
            out.spectrum = spectrum_classic(eig.vectors.left_columns(n), SubspaceMode::signal, opts.grid_deg);
            break;
        }
        case Method::u_music: {
            if (m % 2 != 0) throw ParameterError("u_music: even number of sensors required");
            const auto eig = symmetric_eigen(unitary_transform(r));
            out.spectrum = spectrum_real(eig.vectors.left_columns(n), opts.grid_deg,
                                         UniformScheme{builtin_format("fp64")}, ledger);
            break;
        }
        case Method::ru_music: {
            if (m % 2 != 0) throw ParameterError("ru_music: even number of sensors required");
            if (!(n < opts.rank && opts.rank < m)) throw ParameterError("ru_music: need N < K < M");
            const RsvdResult rsvd = randomized_svd(unitary_transform(r), opts.rank, scheme, ledger, rng);
            out.spectrum = spectrum_real(rsvd.u.left_columns(n), opts.grid_deg, scheme, ledger);
            out.sketch_digest = rsvd.sketch_digest;
            break;
        }
    }
    out.doas_deg = find_peaks(out.spectrum, n);
    return out;
}

void write_spectrum_csv(std::ostream& os, const Spectrum& spectrum, std::string_view method, std::string_view scheme,
                        bool header) {
    if (header) os << "angle_deg,value,method,scheme\n";
    if (spectrum.values.empty()) return;
    const double peak = *std::max_element(spectrum.values.begin(), spectrum.values.end());
    const auto old_precision = os.precision(10);
    for (std::size_t i = 0; i < spectrum.values.size(); ++i)
        os << spectrum.angles_deg[i] << ',' << 10.0 * std::log10(spectrum.values[i] / peak) << ',' << method << ','
           << scheme << '\n';
    os.precision(old_precision);
}

}  // namespace fpmusic
