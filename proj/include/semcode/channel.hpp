#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "semcode/error.hpp"
#include "semcode/rng.hpp"

namespace semcode {

/// Real-valued channel symbols under a unit average-power constraint.
struct SymbolVector {
    std::vector<double> symbols;

    double mean_square() const {
        if (symbols.empty()) return 0.0;
        double acc = 0.0;
        for (double s : symbols) acc += s * s;
        return acc / static_cast<double>(symbols.size());
    }
};

enum class ChannelKind { Awgn, Rayleigh };

struct ChannelConfig {
    ChannelKind kind = ChannelKind::Awgn;
    double snr_db = 6.0;  // +infinity means noiseless
    std::uint32_t block_len = 64;
    std::uint64_t rng_seed = 0;
};

/// Transmission cost summary. k_effective folds the digital side information
/// into symbols at the configured bits-per-symbol exchange rate.
struct RateReport {
    std::uint64_t m = 0;               // source dimension
    std::uint64_t k_analog = 0;        // analog channel symbols
    std::uint64_t side_info_bits = 0;  // every digitally transmitted bit
    std::uint64_t k_effective = 0;
    double cbr = 0.0;
};

/// Scales to unit mean-square power. Returns the scale for receiver inversion.
inline std::pair<SymbolVector, double> power_normalize(const std::vector<double>& x) {
    if (x.empty()) throw Error(ErrorCode::ZeroSignal, "empty signal");
    double acc = 0.0;
    for (double v : x) acc += v * v;
    const double ms = acc / static_cast<double>(x.size());
    if (ms == 0.0) throw Error(ErrorCode::ZeroSignal, "signal has zero energy");
    const double scale = std::sqrt(ms);
    SymbolVector out;
    out.symbols.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.symbols[i] = x[i] / scale;
    return {std::move(out), scale};
}

inline std::vector<double> power_denormalize(const SymbolVector& s, double scale) {
    std::vector<double> out(s.symbols.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.symbols[i] * scale;
    return out;
}

/// y = s + n with noise variance 10^(-snr_db/10). snr_db = inf is noiseless.
inline SymbolVector awgn(const SymbolVector& s, double snr_db, std::uint64_t seed) {
    SymbolVector y = s;
    if (std::isinf(snr_db)) return y;
    const double sigma = std::sqrt(std::pow(10.0, -snr_db / 10.0));
    Rng rng(seed);
    for (double& v : y.symbols) v += sigma * rng.next_gaussian();
    return y;
}

struct FadedSignal {
    SymbolVector received;
    std::vector<double> gains;  // one per fading block, perfect CSI
};

/// Block fading: per block y = h*s + n with h = |CN(0,1)| (Rayleigh, E[h^2]=1).
inline FadedSignal rayleigh(const SymbolVector& s, double snr_db, std::uint32_t block_len,
                            std::uint64_t seed) {
    if (block_len < 1) throw Error(ErrorCode::InvalidDimensions, "block_len must be >= 1");
    Rng rng(seed);
    const double sigma = std::isinf(snr_db) ? 0.0 : std::sqrt(std::pow(10.0, -snr_db / 10.0));
    FadedSignal out;
    out.received.symbols.resize(s.symbols.size());
    const std::size_t n_blocks = (s.symbols.size() + block_len - 1) / block_len;
    out.gains.resize(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        const double g1 = rng.next_gaussian();
        const double g2 = rng.next_gaussian();
        out.gains[b] = std::sqrt((g1 * g1 + g2 * g2) / 2.0);
    }
    for (std::size_t i = 0; i < s.symbols.size(); ++i) {
        const double h = out.gains[i / block_len];
        const double n = sigma == 0.0 ? 0.0 : sigma * rng.next_gaussian();
        out.received.symbols[i] = h * s.symbols[i] + n;
    }
    return out;
}

/// Perfect-CSI equalization: divides each block by its fading gain.
inline SymbolVector equalize(const SymbolVector& y, const std::vector<double>& gains,
                             std::uint32_t block_len) {
    if (block_len < 1) throw Error(ErrorCode::InvalidDimensions, "block_len must be >= 1");
    SymbolVector out = y;
    for (std::size_t i = 0; i < out.symbols.size(); ++i) {
        const std::size_t b = i / block_len;
        if (b >= gains.size()) throw Error(ErrorCode::InvalidDimensions, "gain vector too short");
        if (gains[b] != 0.0) out.symbols[i] /= gains[b];
    }
    return out;
}

/// Scales the symbols of token i by sqrt(N * score[i]); with equal-length
/// groups and scores summing to 1 the total power is preserved.
inline SymbolVector allocate_power(const SymbolVector& s, const std::vector<double>& scores) {
    if (scores.empty() || s.symbols.size() % scores.size() != 0)
        throw Error(ErrorCode::ScoreMismatch, "groups do not partition the signal");
    double sum = 0.0;
    for (double sc : scores) {
        if (sc < 0.0) throw Error(ErrorCode::ScoreMismatch, "negative score");
        sum += sc;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::ScoreMismatch, "scores must sum to 1");

    const std::size_t group_len = s.symbols.size() / scores.size();
    const double n = static_cast<double>(scores.size());
    SymbolVector out = s;
    for (std::size_t g = 0; g < scores.size(); ++g) {
        const double gain = std::sqrt(n * scores[g]);
        for (std::size_t i = 0; i < group_len; ++i) out.symbols[g * group_len + i] *= gain;
    }
    return out;
}

/// Inverse of allocate_power given the same scores.
inline SymbolVector deallocate_power(const SymbolVector& s, const std::vector<double>& scores) {
    if (scores.empty() || s.symbols.size() % scores.size() != 0)
        throw Error(ErrorCode::ScoreMismatch, "groups do not partition the signal");
    const std::size_t group_len = s.symbols.size() / scores.size();
    const double n = static_cast<double>(scores.size());
    SymbolVector out = s;
    for (std::size_t g = 0; g < scores.size(); ++g) {
        const double gain = std::sqrt(n * scores[g]);
        if (gain == 0.0) continue;
        for (std::size_t i = 0; i < group_len; ++i) out.symbols[g * group_len + i] /= gain;
    }
    return out;
}

/// Empirical SNR in dB of a received signal against the clean reference.
inline double estimate_snr(const SymbolVector& clean, const SymbolVector& received) {
    if (clean.symbols.size() != received.symbols.size())
        throw Error(ErrorCode::InvalidDimensions, "signal length mismatch");
    double sig = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < clean.symbols.size(); ++i) {
        sig += clean.symbols[i] * clean.symbols[i];
        const double d = received.symbols[i] - clean.symbols[i];
        noise += d * d;
    }
    if (noise == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(sig / noise);
}

/// CBR = k_effective / m with k_effective = k_analog + ceil(bits / bps).
/// Integer arithmetic throughout; the division happens once at the end.
inline RateReport compute_cbr(std::uint64_t m, std::uint64_t k_analog, std::uint64_t side_info_bits,
                              std::uint32_t bits_per_symbol) {
    if (m == 0 || bits_per_symbol == 0)
        throw Error(ErrorCode::InvalidDimensions, "m and bits_per_symbol must be positive");
    RateReport r;
    r.m = m;
    r.k_analog = k_analog;
    r.side_info_bits = side_info_bits;
    r.k_effective = k_analog + (side_info_bits + bits_per_symbol - 1) / bits_per_symbol;
    r.cbr = static_cast<double>(r.k_effective) / static_cast<double>(m);
    return r;
}

}  // namespace semcode
