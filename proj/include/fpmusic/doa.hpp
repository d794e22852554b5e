#pragma once

// Uniform linear array model, covariance estimation, the unitary transform to
// a real covariance, MUSIC spectra and the three estimator front-ends.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpmusic/kernels.hpp"
#include "fpmusic/linalg.hpp"
#include "fpmusic/matrix.hpp"

namespace fpmusic {

class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Half-wavelength uniform linear array.
struct ArrayConfig {
    std::size_t sensors = 20;
    double spacing_over_wavelength = 0.5;

    static ArrayConfig make(std::size_t sensors);
};

struct SnapshotMatrix {
    ComplexMatrix data;  // M x T
    std::size_t snapshots() const { return data.cols(); }
    std::size_t sensors() const { return data.rows(); }
};

struct Spectrum {
    std::vector<double> angles_deg;
    std::vector<double> values;
};

enum class SubspaceMode { signal, noise };
enum class Method { music, u_music, ru_music };

Method parse_method(std::string_view name);
std::string_view method_name(Method m);

/// F angles evenly spaced over [-90, 90] degrees, endpoints included.
std::vector<double> angle_grid(std::size_t f);

/// Spectrum denominators are floored at this value times M.
inline constexpr double denominator_floor_factor = 1e-12;

/// a(theta)_m = exp(-j pi m sin(theta)), m = 0..M-1.
std::vector<Complex> steering_complex(double theta_deg, const ArrayConfig& cfg);

/// Real steering vector matching exp(j (M-1) phi) Q^H a(theta), phi = pi sin(theta) / 2:
///   sqrt(2) [cos((M-1)phi), ..., cos(phi), sin((M-1)phi), ..., sin(phi)]
/// Even M only.
std::vector<double> steering_real(double theta_deg, const ArrayConfig& cfg);

/// Writes steering_real into out (size M) without allocating.
void steering_real_into(double theta_deg, std::size_t sensors, std::span<double> out);

/// Dense unitary Q for even (two-block) or odd (three-block) M.
ComplexMatrix unitary_q(std::size_t m);

/// Incoherent unit-power circular Gaussian sources plus CN(0, sigma^2 I) noise,
/// sigma^2 = 10^(-snr_db / 10). snr_db = +inf gives noiseless data.
SnapshotMatrix synthesize_snapshots(std::span<const double> doas_deg, std::size_t snapshots, double snr_db,
                                    const ArrayConfig& cfg, Rng& rng);

/// (1/T) X X^H
ComplexMatrix sample_covariance(const SnapshotMatrix& x);

/// C = Re(Q^H R Q), evaluated from the two nonzeros per column of Q.
RealMatrix unitary_transform(const ComplexMatrix& r);

/// Complex MUSIC spectrum. signal mode: 1 / (a^H (I - U U^H) a); noise mode:
/// 1 / (a^H U U^H a). U U^H must be an orthogonal projector within 1e-6.
Spectrum spectrum_classic(const ComplexMatrix& subspace, SubspaceMode mode, std::span<const double> grid_deg);

/// Real signal-subspace spectrum 1 / (s1 - s2) with v = E^T a~, s1 = a~^T a~,
/// s2 = v^T v, all N + 2 inner products run under the scheme.
Spectrum spectrum_real(const RealMatrix& signal_subspace, std::span<const double> grid_deg, const Scheme& scheme,
                       CostLedger& ledger);

/// N largest local maxima (boundary points count), topped up by the largest
/// remaining values; ties go to the smaller index. Result ascending.
std::vector<double> find_peaks(const Spectrum& spectrum, std::size_t n);

struct EstimateOptions {
    std::size_t sources = 5;  // N
    std::size_t rank = 10;    // K (ru_music only)
    std::vector<double> grid_deg;
};

struct Estimate {
    std::vector<double> doas_deg;  // ascending
    Spectrum spectrum;
    std::uint64_t sketch_digest = 0;  // ru_music only
};

/// music: complex eigendecomposition + complex spectrum;
/// u_music: real covariance, full eigendecomposition, fp64 real spectrum;
/// ru_music: real covariance, randomized SVD and real spectrum under scheme.
Estimate estimate(Method method, const SnapshotMatrix& x, const EstimateOptions& opts, const Scheme& scheme,
                  CostLedger& ledger, Rng& rng);

/// CSV rows "angle_deg,value,method,scheme" with values in dB relative to
/// the spectrum maximum.
void write_spectrum_csv(std::ostream& os, const Spectrum& spectrum, std::string_view method, std::string_view scheme,
                        bool header);

}  // namespace fpmusic
