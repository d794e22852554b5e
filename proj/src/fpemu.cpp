#include "fpmusic/fpemu.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace fpmusic {

namespace {

int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw FormatError("bad " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

Cost parse_cost(std::string_view s) {
    auto slash = s.find('/');
    if (slash == std::string_view::npos) return Cost(parse_int(s, "cost weight"));
    int num = parse_int(s.substr(0, slash), "cost numerator");
    int den = parse_int(s.substr(slash + 1), "cost denominator");
    if (den == 0) throw FormatError("zero cost denominator");
    return Cost(num, den);
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

}  // namespace

PrecisionFormat PrecisionFormat::make(std::string name, int t, int emin, int emax, Cost q) {
    if (t < 2 || t > 53) throw FormatError("significand bits must be in [2, 53]");
    if (emin >= emax) throw FormatError("emin must be below emax");
    if (emin < -1022 || emax > 1023) throw FormatError("exponent range exceeds host double");
    if (q <= 0) throw FormatError("cost weight must be positive");
    PrecisionFormat f;
    f.name = std::move(name);
    f.significand_bits = t;
    f.emin = emin;
    f.emax = emax;
    f.cost_weight = q;
    return f;
}

PrecisionFormat PrecisionFormat::parse(std::string_view text, std::string name) {
    auto parts = split(text, ':');
    if (parts.size() != 4) throw FormatError("format descriptor must be t:emin:emax:q, got '" + std::string(text) + "'");
    if (name.empty()) name = std::string(text);
    return make(std::move(name), parse_int(parts[0], "significand bits"), parse_int(parts[1], "emin"),
                parse_int(parts[2], "emax"), parse_cost(parts[3]));
}

double PrecisionFormat::unit_roundoff() const { return std::ldexp(1.0, -significand_bits); }

double PrecisionFormat::max_finite() const {
    if (!range_enforced) return std::numeric_limits<double>::max();
    return std::ldexp(2.0 - std::ldexp(1.0, 1 - significand_bits), emax);
}

double PrecisionFormat::min_subnormal() const { return std::ldexp(1.0, emin - significand_bits + 1); }

bool PrecisionFormat::is_native_double() const {
    return significand_bits == 53 && (!range_enforced || (emin == -1022 && emax == 1023));
}

PrecisionFormat PrecisionFormat::with_unbounded_exponent() const {
    PrecisionFormat f = *this;
    f.range_enforced = false;
    return f;
}

std::string PrecisionFormat::descriptor() const {
    std::ostringstream os;
    os << significand_bits << ':' << emin << ':' << emax << ':' << cost_weight.numerator();
    if (cost_weight.denominator() != 1) os << '/' << cost_weight.denominator();
    return os.str();
}

const std::map<std::string, PrecisionFormat, std::less<>>& builtin_formats() {
    static const std::map<std::string, PrecisionFormat, std::less<>> formats = {
        {"fp16", PrecisionFormat::make("fp16", 11, -14, 15, Cost(1))},
        {"fp32", PrecisionFormat::make("fp32", 24, -126, 127, Cost(2))},
        {"fp64", PrecisionFormat::make("fp64", 53, -1022, 1023, Cost(4))},
    };
    return formats;
}

const PrecisionFormat& builtin_format(std::string_view name) {
    const auto& formats = builtin_formats();
    auto it = formats.find(name);
    if (it == formats.end()) throw FormatError("unknown format '" + std::string(name) + "'");
    return it->second;
}

double round_exact_pair(double hi, double lo, const PrecisionFormat& fmt) {
    if (!std::isfinite(hi)) throw OverflowError("non-finite value in " + fmt.name);
    if (fmt.is_native_double() || hi == 0.0) return hi;

    const int e = std::ilogb(hi);
    const int eff = fmt.range_enforced ? std::max(e, fmt.emin) : e;
    const int shift = eff - (fmt.significand_bits - 1);

    // q is hi measured in units of the target spacing; scaling is exact.
    const double q = std::ldexp(hi, -shift);
    double r = std::nearbyint(q);
    if (lo != 0.0 && std::fabs(q - r) == 0.5) {
        // hi sits on a midpoint but the exact value does not: lo decides.
        const double toward_zero = std::trunc(q);
        const bool away = (lo > 0.0) == (q > 0.0);
        r = away ? toward_zero + std::copysign(1.0, q) : toward_zero;
    }
    const double y = std::ldexp(r, shift);
    if (fmt.range_enforced && std::fabs(y) > fmt.max_finite()) {
        std::ostringstream os;
        os << "overflow: |" << hi << "| rounds beyond " << fmt.name << " max " << fmt.max_finite();
        throw OverflowError(os.str());
    }
    return y;
}

double round_to_format(double x, const PrecisionFormat& fmt) { return round_exact_pair(x, 0.0, fmt); }

double rounded_add(double a, double b, const PrecisionFormat& fmt) {
    const double s = a + b;
    // TwoSum
    const double bb = s - a;
    const double err = (a - (s - bb)) + (b - bb);
    return round_exact_pair(s, err, fmt);
}

double rounded_mul(double a, double b, const PrecisionFormat& fmt) {
    const double p = a * b;
    // Products of two t <= 26 bit significands are exact in double.
    if (fmt.significand_bits <= 26 || fmt.is_native_double()) return round_exact_pair(p, 0.0, fmt);
    return round_exact_pair(p, std::fma(a, b, -p), fmt);
}

}  // namespace fpmusic
