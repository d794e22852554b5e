#pragma once

// Software emulation of binary floating-point formats with t significand
// bits. Values live in host doubles; every elementary operation is computed
// in double and rounded to the target format (round to nearest, ties to even).

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/rational.hpp>

namespace fpmusic {

/// Exact weighted operation count (cost weights are rational).
using Cost = boost::rational<std::int64_t>;

class OverflowError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

class FormatError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PrecisionFormat {
    std::string name;
    int significand_bits = 53;  // t, including the implicit bit
    int emin = -1022;
    int emax = 1023;
    Cost cost_weight{4};
    bool range_enforced = true;  // false: unlimited exponent, no subnormals

    /// Validates and builds a format; throws FormatError on bad fields.
    static PrecisionFormat make(std::string name, int t, int emin, int emax, Cost q);

    /// Parses "t:emin:emax:q" where q is an integer or "num/den".
    static PrecisionFormat parse(std::string_view text, std::string name = {});

    /// u = 2^-t
    double unit_roundoff() const;
    /// (2 - 2^(1-t)) * 2^emax
    double max_finite() const;
    /// 2^(emin - t + 1)
    double min_subnormal() const;

    /// True when rounding is the identity on host doubles.
    bool is_native_double() const;

    PrecisionFormat with_unbounded_exponent() const;

    std::string descriptor() const;  // "t:emin:emax:q"

    friend bool operator==(const PrecisionFormat&, const PrecisionFormat&) = default;
};

/// fp16 (t=11, q=1), fp32 (t=24, q=2), fp64 (t=53, q=4).
const std::map<std::string, PrecisionFormat, std::less<>>& builtin_formats();

/// Builtin lookup; throws FormatError for unknown names.
const PrecisionFormat& builtin_format(std::string_view name);

/// Nearest representable value, ties to even. Throws OverflowError when the
/// rounded magnitude exceeds max_finite() (range-enforced formats only).
double round_to_format(double x, const PrecisionFormat& fmt);

/// Rounds the exact value hi + lo, where hi = RN_double(hi + lo). Used to
/// round exact sums and products without double-rounding errors.
double round_exact_pair(double hi, double lo, const PrecisionFormat& fmt);

/// round_to_format(a + b) with a + b taken exactly.
double rounded_add(double a, double b, const PrecisionFormat& fmt);

/// round_to_format(a * b) with a * b taken exactly.
double rounded_mul(double a, double b, const PrecisionFormat& fmt);

}  // namespace fpmusic
