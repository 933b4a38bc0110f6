#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "semcode/bitio.hpp"
#include "semcode/error.hpp"
#include "semcode/rng.hpp"

namespace semcode {

/// Discrete symbol stream; every symbol is < alphabet.
struct QuantizedStream {
    std::uint32_t alphabet = 0;
    std::vector<std::uint32_t> symbols;

    bool operator==(const QuantizedStream& o) const {
        return alphabet == o.alphabet && symbols == o.symbols;
    }
};

// ---- scalar quantization ----------------------------------------------------

/// Round-half-away-from-zero lattice quantizer.
inline std::vector<std::int64_t> scalar_quantize(const Eigen::VectorXd& x, double step) {
    if (!(step > 0.0)) throw Error(ErrorCode::NonpositiveStep, "step must be positive");
    std::vector<std::int64_t> q(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) q[static_cast<std::size_t>(i)] = std::llround(x[i] / step);
    return q;
}

inline Eigen::VectorXd scalar_dequantize(const std::vector<std::int64_t>& q, double step) {
    if (!(step > 0.0)) throw Error(ErrorCode::NonpositiveStep, "step must be positive");
    Eigen::VectorXd x(static_cast<Eigen::Index>(q.size()));
    for (std::size_t i = 0; i < q.size(); ++i) x[static_cast<Eigen::Index>(i)] = static_cast<double>(q[i]) * step;
    return x;
}

// ---- vector quantization ----------------------------------------------------

struct Codebook {
    Eigen::MatrixXd centroids;  // K x d
    std::uint32_t iterations = 0;
    double final_distortion = 0.0;
    std::vector<double> distortion_trace;  // mean squared distortion after each assignment pass

    Eigen::Index size() const { return centroids.rows(); }
    Eigen::Index dim() const { return centroids.cols(); }

    /// Minimum Euclidean distance between any two centroids.
    double min_centroid_distance() const {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < centroids.rows(); ++i)
            for (Eigen::Index j = i + 1; j < centroids.rows(); ++j)
                best = std::min(best, (centroids.row(i) - centroids.row(j)).norm());
        return best;
    }
};

namespace detail {

inline std::uint32_t nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x) {
    std::uint32_t best = 0;
    double best_d = (centroids.row(0) - x).squaredNorm();
    for (Eigen::Index k = 1; k < centroids.rows(); ++k) {
        const double d = (centroids.row(k) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(k);
        }
    }
    return best;
}

}  // namespace detail

/// Lloyd k-means with k-means++ style seeding. Distortion is non-increasing
/// per iteration; collapsed or duplicated centroids are re-seeded to the
/// point currently worst served.
inline Codebook train_codebook(const Eigen::MatrixXd& corpus, std::uint32_t k, std::uint32_t max_iters,
                               std::uint64_t seed) {
    const Eigen::Index n = corpus.rows();
    if (k < 1 || n < static_cast<Eigen::Index>(k))
        throw Error(ErrorCode::InsufficientData, "corpus smaller than codebook size");

    Rng rng(seed);
    Codebook cb;
    cb.centroids.resize(k, corpus.cols());

    // k-means++ seeding
    cb.centroids.row(0) = corpus.row(static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd d2 = (corpus.rowwise() - cb.centroids.row(0)).rowwise().squaredNorm();
    for (std::uint32_t c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick;
        if (total <= 0.0) {
            pick = static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(n)));
        } else {
            double target = rng.next_double() * total;
            pick = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= d2[i];
                if (target <= 0.0) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        }
        cb.centroids.row(c) = corpus.row(pick);
        d2 = d2.cwiseMin((corpus.rowwise() - cb.centroids.row(c)).rowwise().squaredNorm());
    }

    std::vector<std::uint32_t> assign(static_cast<std::size_t>(n), 0);
    double prev = std::numeric_limits<double>::infinity();
    for (std::uint32_t it = 0; it < max_iters; ++it) {
        double distortion = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::uint32_t a = detail::nearest_centroid(cb.centroids, corpus.row(i));
            assign[static_cast<std::size_t>(i)] = a;
            distortion += (corpus.row(i) - cb.centroids.row(a)).squaredNorm();
        }
        distortion /= static_cast<double>(n);
        cb.iterations = it + 1;
        cb.final_distortion = distortion;
        cb.distortion_trace.push_back(distortion);
        if (it > 0 && prev - distortion < 1e-9 * std::max(prev, 1e-30)) break;
        prev = distortion;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, corpus.cols());
        std::vector<std::uint64_t> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += corpus.row(i);
            ++counts[assign[static_cast<std::size_t>(i)]];
        }
        for (std::uint32_t c = 0; c < k; ++c)
            if (counts[c] > 0) cb.centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);

        // Re-seed empty clusters to the worst-served point.
        for (std::uint32_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = (corpus.row(i) - cb.centroids.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            cb.centroids.row(c) = corpus.row(far);
        }
        // Duplicate centroids get the same treatment when the data allows it.
        for (std::uint32_t c1 = 0; c1 < k; ++c1)
            for (std::uint32_t c2 = c1 + 1; c2 < k; ++c2)
                if ((cb.centroids.row(c1).array() == cb.centroids.row(c2).array()).all()) {
                    Eigen::Index far = 0;
                    double far_d = -1.0;
                    for (Eigen::Index i = 0; i < n; ++i) {
                        const double d = (corpus.row(i) - cb.centroids.row(detail::nearest_centroid(cb.centroids, corpus.row(i)))).squaredNorm();
                        if (d > far_d) {
                            far_d = d;
                            far = i;
                        }
                    }
                    if (far_d > 0.0) cb.centroids.row(c2) = corpus.row(far);
                }
    }
    return cb;
}

/// Nearest-centroid assignment, Euclidean, ties to the lower index.
inline QuantizedStream vq_encode(const Eigen::MatrixXd& vectors, const Codebook& cb) {
    if (vectors.cols() != cb.dim()) throw Error(ErrorCode::DimensionMismatch, "vector dim != centroid dim");
    QuantizedStream qs;
    qs.alphabet = static_cast<std::uint32_t>(cb.size());
    qs.symbols.resize(static_cast<std::size_t>(vectors.rows()));
    for (Eigen::Index i = 0; i < vectors.rows(); ++i)
        qs.symbols[static_cast<std::size_t>(i)] = detail::nearest_centroid(cb.centroids, vectors.row(i));
    return qs;
}

inline Eigen::MatrixXd vq_decode(const QuantizedStream& qs, const Codebook& cb) {
    if (qs.alphabet != static_cast<std::uint32_t>(cb.size()))
        throw Error(ErrorCode::DimensionMismatch, "stream alphabet != codebook size");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(qs.symbols.size()), cb.dim());
    for (std::size_t i = 0; i < qs.symbols.size(); ++i) {
        if (qs.symbols[i] >= qs.alphabet) throw Error(ErrorCode::SymbolOutOfRange, "symbol exceeds alphabet");
        out.row(static_cast<Eigen::Index>(i)) = cb.centroids.row(qs.symbols[i]);
    }
    return out;
}

// ---- entropy coding ----------------------------------------------------------

/// Adaptive-per-transmission frequency table. Raw observed counts travel as
/// side info; both ends derive the same coding table: add-one smoothing, then
/// halving until the total fits the coder's 16-bit precision budget.
struct FrequencyModel {
    std::vector<std::uint32_t> raw;     // observed counts
    std::vector<std::uint32_t> coding;  // smoothed, rescaled; all >= 1
    std::vector<std::uint32_t> cum;     // cum[s+1]-cum[s] = coding[s]
    std::uint32_t total = 0;

    static constexpr std::uint32_t kMaxTotal = 1u << 16;
    static constexpr std::uint32_t kMaxAlphabet = 1u << 16;

    static FrequencyModel from_counts(std::vector<std::uint32_t> raw_counts) {
        if (raw_counts.empty() || raw_counts.size() > kMaxAlphabet)
            throw Error(ErrorCode::InvalidDimensions, "alphabet size unsupported");
        FrequencyModel fm;
        fm.raw = std::move(raw_counts);
        fm.coding.resize(fm.raw.size());
        std::uint64_t total = 0;
        for (std::size_t i = 0; i < fm.raw.size(); ++i) {
            fm.coding[i] = fm.raw[i] + 1;
            total += fm.coding[i];
        }
        while (total > kMaxTotal) {
            total = 0;
            for (auto& c : fm.coding) {
                c = std::max<std::uint32_t>(1, c / 2);
                total += c;
            }
        }
        fm.total = static_cast<std::uint32_t>(total);
        fm.cum.resize(fm.coding.size() + 1);
        fm.cum[0] = 0;
        for (std::size_t i = 0; i < fm.coding.size(); ++i) fm.cum[i + 1] = fm.cum[i] + fm.coding[i];
        return fm;
    }

    static FrequencyModel from_stream(const QuantizedStream& qs) {
        if (qs.alphabet == 0) throw Error(ErrorCode::InvalidDimensions, "empty alphabet");
        std::vector<std::uint32_t> counts(qs.alphabet, 0);
        for (std::uint32_t s : qs.symbols) {
            if (s >= qs.alphabet) throw Error(ErrorCode::SymbolOutOfRange, "symbol exceeds alphabet");
            ++counts[s];
        }
        return from_counts(std::move(counts));
    }

    std::uint32_t alphabet() const { return static_cast<std::uint32_t>(coding.size()); }

    /// Cross-entropy of this table against a stream, in bits per stream.
    double cross_entropy_bits(const QuantizedStream& qs) const {
        double bits = 0.0;
        const double log2_total = std::log2(static_cast<double>(total));
        for (std::uint32_t s : qs.symbols) {
            if (s >= coding.size()) throw Error(ErrorCode::SymbolOutOfRange, "symbol exceeds alphabet");
            bits += log2_total - std::log2(static_cast<double>(coding[s]));
        }
        return bits;
    }
};

struct EncodedBits {
    std::vector<std::uint8_t> bytes;  // byte-padded payload, MSB-first
    std::uint64_t bit_count = 0;      // exact bits before padding
};

namespace detail {

inline constexpr std::uint64_t kArithTop = 1ULL << 32;
inline constexpr std::uint64_t kArithHalf = kArithTop >> 1;
inline constexpr std::uint64_t kArithQuarter = kArithTop >> 2;
inline constexpr std::uint64_t kArithThreeQuarter = kArithHalf + kArithQuarter;

}  // namespace detail

/// Arithmetic coding over the model's cumulative table. Payload length stays
/// within a few dozen bits of the model cross-entropy.
inline EncodedBits entropy_encode(const QuantizedStream& qs, const FrequencyModel& fm) {
    if (fm.alphabet() != qs.alphabet) throw Error(ErrorCode::SymbolOutOfRange, "model/stream alphabet mismatch");
    using namespace detail;
    BitWriter bw;
    std::uint64_t low = 0, high = kArithTop - 1, pending = 0;

    auto emit = [&](int bit) {
        bw.put_bit(bit);
        while (pending > 0) {
            bw.put_bit(!bit);
            --pending;
        }
    };

    for (std::uint32_t s : qs.symbols) {
        if (s >= qs.alphabet) throw Error(ErrorCode::SymbolOutOfRange, "symbol exceeds alphabet");
        const std::uint64_t range = high - low + 1;
        high = low + (range * fm.cum[s + 1]) / fm.total - 1;
        low = low + (range * fm.cum[s]) / fm.total;
        for (;;) {
            if (high < kArithHalf) {
                emit(0);
            } else if (low >= kArithHalf) {
                emit(1);
                low -= kArithHalf;
                high -= kArithHalf;
            } else if (low >= kArithQuarter && high < kArithThreeQuarter) {
                ++pending;
                low -= kArithQuarter;
                high -= kArithQuarter;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
        }
    }
    ++pending;
    if (low < kArithQuarter) {
        emit(0);
    } else {
        emit(1);
    }

    EncodedBits out;
    out.bit_count = bw.bit_count();
    out.bytes = bw.take();
    return out;
}

inline QuantizedStream entropy_decode(const std::uint8_t* payload, std::uint64_t payload_bits,
                                      const FrequencyModel& fm, std::uint32_t n_symbols) {
    using namespace detail;
    BitReader br(payload, payload_bits);
    QuantizedStream qs;
    qs.alphabet = fm.alphabet();
    qs.symbols.resize(n_symbols);

    std::uint64_t low = 0, high = kArithTop - 1;
    std::uint64_t value = br.get_bits(32);
    for (std::uint32_t i = 0; i < n_symbols; ++i) {
        const std::uint64_t range = high - low + 1;
        const std::uint64_t scaled = ((value - low + 1) * fm.total - 1) / range;
        const auto it = std::upper_bound(fm.cum.begin() + 1, fm.cum.end(), static_cast<std::uint32_t>(scaled));
        if (it == fm.cum.end()) throw Error(ErrorCode::CorruptBitstream, "decoded value outside model");
        const std::uint32_t s = static_cast<std::uint32_t>(std::distance(fm.cum.begin() + 1, it));
        qs.symbols[i] = s;

        high = low + (range * fm.cum[s + 1]) / fm.total - 1;
        low = low + (range * fm.cum[s]) / fm.total;
        for (;;) {
            if (high < kArithHalf) {
                // nothing
            } else if (low >= kArithHalf) {
                low -= kArithHalf;
                high -= kArithHalf;
                value -= kArithHalf;
            } else if (low >= kArithQuarter && high < kArithThreeQuarter) {
                low -= kArithQuarter;
                high -= kArithQuarter;
                value -= kArithQuarter;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
            value = (value << 1) | static_cast<std::uint64_t>(br.get_bit());
        }
    }
    return qs;
}

inline QuantizedStream entropy_decode(const EncodedBits& enc, const FrequencyModel& fm, std::uint32_t n_symbols) {
    return entropy_decode(enc.bytes.data(), enc.bit_count, fm, n_symbols);
}

// ---- quantized stream container ("SCQZ") -------------------------------------
// magic, alphabet u32, symbol count u32, raw frequency counts (u32 each),
// payload bits MSB-first, byte-padded.

inline constexpr char kStreamMagic[4] = {'S', 'C', 'Q', 'Z'};

inline std::vector<std::uint8_t> write_quantized_container(const QuantizedStream& qs) {
    const FrequencyModel fm = FrequencyModel::from_stream(qs);
    const EncodedBits enc = entropy_encode(qs, fm);
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kStreamMagic, kStreamMagic + 4);
    put_u32(buf, qs.alphabet);
    put_u32(buf, static_cast<std::uint32_t>(qs.symbols.size()));
    for (std::uint32_t c : fm.raw) put_u32(buf, c);
    buf.insert(buf.end(), enc.bytes.begin(), enc.bytes.end());
    return buf;
}

inline QuantizedStream read_quantized_container(const std::uint8_t* data, std::size_t size) {
    try {
        ByteReader r(data, size);
        const std::uint8_t* magic = r.take(4);
        if (std::memcmp(magic, kStreamMagic, 4) != 0)
            throw Error(ErrorCode::CorruptBitstream, "bad stream magic");
        const std::uint32_t alphabet = r.get_u32();
        const std::uint32_t n = r.get_u32();
        if (alphabet == 0 || alphabet > FrequencyModel::kMaxAlphabet)
            throw Error(ErrorCode::CorruptBitstream, "bad alphabet size");
        std::vector<std::uint32_t> counts(alphabet);
        for (auto& c : counts) c = r.get_u32();
        const FrequencyModel fm = FrequencyModel::from_counts(std::move(counts));
        const std::size_t payload_bytes = r.remaining();
        QuantizedStream qs = entropy_decode(r.take(payload_bytes), payload_bytes * 8, fm, n);
        qs.alphabet = alphabet;
        return qs;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Truncated) throw Error(ErrorCode::CorruptBitstream, e.what());
        throw;
    }
}

// ---- codebook persistence ("SCCB") -------------------------------------------

inline constexpr char kCodebookMagic[4] = {'S', 'C', 'C', 'B'};
inline constexpr std::uint16_t kCodebookVersion = 1;

inline void save_codebook(const Codebook& cb, const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kCodebookMagic, kCodebookMagic + 4);
    put_u16(buf, kCodebookVersion);
    put_u32(buf, static_cast<std::uint32_t>(cb.size()));
    put_u32(buf, static_cast<std::uint32_t>(cb.dim()));
    put_u32(buf, cb.iterations);
    put_f64(buf, cb.final_distortion);
    for (Eigen::Index i = 0; i < cb.size(); ++i)
        for (Eigen::Index j = 0; j < cb.dim(); ++j) put_f32(buf, static_cast<float>(cb.centroids(i, j)));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to '" + path + "'");
}

inline Codebook load_codebook(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader r(buf.data(), buf.size());
    const std::uint8_t* magic = r.take(4);
    if (std::memcmp(magic, kCodebookMagic, 4) != 0)
        throw Error(ErrorCode::MalformedHeader, path + ": bad codebook magic");
    if (r.get_u16() != kCodebookVersion) throw Error(ErrorCode::UnsupportedFormat, path + ": codebook version");
    Codebook cb;
    const std::uint32_t k = r.get_u32();
    const std::uint32_t d = r.get_u32();
    cb.iterations = r.get_u32();
    cb.final_distortion = r.get_f64();
    if (k == 0 || d == 0) throw Error(ErrorCode::MalformedHeader, path + ": empty codebook");
    cb.centroids.resize(k, d);
    for (std::uint32_t i = 0; i < k; ++i)
        for (std::uint32_t j = 0; j < d; ++j) cb.centroids(i, j) = r.get_f32();
    return cb;
}

}  // namespace semcode
