#pragma once

#include <Eigen/Dense>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "semcode/attention.hpp"
#include "semcode/bitio.hpp"
#include "semcode/channel.hpp"
#include "semcode/error.hpp"
#include "semcode/image.hpp"
#include "semcode/metrics.hpp"
#include "semcode/quantizer.hpp"
#include "semcode/reorganizer.hpp"
#include "semcode/rng.hpp"
#include "semcode/tokenizer.hpp"

namespace semcode {

enum class QuantizationMode { None, Scalar, Vq };
enum class SimilarityChoice { Auto, Tokens, Keys };

struct PipelineConfig {
    std::uint32_t patch_size = 16;
    std::uint32_t token_dim = 32;
    std::uint32_t token_budget = 30;
    std::uint32_t n_stages = 12;

    bool attention = false;
    std::uint32_t attn_layers = 12;
    std::uint32_t attn_heads = 4;
    SimilarityChoice similarity = SimilarityChoice::Auto;

    QuantizationMode quantization = QuantizationMode::None;
    double scalar_step = 0.05;
    std::uint32_t vq_k = 256;

    ChannelConfig channel;
    std::uint32_t bits_per_symbol = 2;
    bool power_allocation = true;
    std::uint64_t seed = 0;

    std::uint64_t attention_seed() const { return mix64(seed, 2); }
    std::uint64_t channel_seed() const { return channel.rng_seed != 0 ? channel.rng_seed : mix64(seed, 1); }
};

/// Digest over the fields both ends must agree on for a frame to decode.
inline std::uint64_t config_digest(const PipelineConfig& c) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "p%u d%u b%u s%u a%d al%u ah%u sim%d q%d st%.17g k%u bps%u pa%d",
                  c.patch_size, c.token_dim, c.token_budget, c.n_stages, c.attention ? 1 : 0, c.attn_layers,
                  c.attn_heads, static_cast<int>(c.similarity), static_cast<int>(c.quantization),
                  c.scalar_step, c.vq_k, c.bits_per_symbol, c.power_allocation ? 1 : 0);
    return fnv1a64(buf);
}

/// Everything that crosses the air for one image: power-normalized analog
/// symbols plus the losslessly coded digital side information.
struct TransmissionFrame {
    std::uint64_t digest = 0;
    std::uint32_t width = 0, height = 0;
    std::uint8_t channels = 0;
    std::uint8_t mode = 0;  // QuantizationMode
    std::uint32_t n_tokens = 0;
    std::uint32_t token_dim = 0;

    MergePlan plan;
    std::vector<std::uint32_t> sizes;

    double scale = 0.0;                      // continuous mode
    std::int64_t offset = 0;                 // scalar mode symbol offset
    std::uint32_t alphabet = 0;              // scalar/vq
    std::vector<std::uint32_t> freq_counts;  // raw model counts
    EncodedBits payload;                     // entropy coded digital payload

    std::vector<double> symbols;  // analog payload

    RateReport rate;
};

namespace detail {

inline std::vector<std::uint8_t> serialize_side_block(const TransmissionFrame& f) {
    std::vector<std::uint8_t> out;
    put_u32(out, f.width);
    put_u32(out, f.height);
    out.push_back(f.channels);
    put_u16(out, static_cast<std::uint16_t>(f.plan.stages.size()));
    serialize_plan(f.plan, out);
    put_u16(out, static_cast<std::uint16_t>(f.sizes.size()));
    for (std::uint32_t s : f.sizes) put_u16(out, static_cast<std::uint16_t>(s));
    const auto mode = static_cast<QuantizationMode>(f.mode);
    if (mode == QuantizationMode::None) {
        put_f64(out, f.scale);
    } else {
        if (mode == QuantizationMode::Scalar) put_u64(out, static_cast<std::uint64_t>(f.offset));
        put_u32(out, f.alphabet);
        for (std::uint32_t c : f.freq_counts) put_u32(out, c);
        put_u32(out, static_cast<std::uint32_t>(f.payload.bit_count));
        out.insert(out.end(), f.payload.bytes.begin(), f.payload.bytes.end());
    }
    return out;
}

inline void parse_side_block(TransmissionFrame& f, const std::uint8_t* data, std::size_t size) {
    ByteReader r(data, size);
    f.width = r.get_u32();
    f.height = r.get_u32();
    f.channels = r.get_u8();
    const std::uint16_t n_stages = r.get_u16();
    f.plan = parse_plan(r, n_stages);
    const std::uint16_t n_tokens = r.get_u16();
    f.n_tokens = n_tokens;
    f.sizes.resize(n_tokens);
    for (auto& s : f.sizes) s = r.get_u16();
    const auto mode = static_cast<QuantizationMode>(f.mode);
    if (mode == QuantizationMode::None) {
        f.scale = r.get_f64();
    } else {
        if (mode == QuantizationMode::Scalar) f.offset = static_cast<std::int64_t>(r.get_u64());
        f.alphabet = r.get_u32();
        if (f.alphabet == 0 || f.alphabet > FrequencyModel::kMaxAlphabet)
            throw Error(ErrorCode::CorruptFrame, "implausible alphabet in side block");
        f.freq_counts.resize(f.alphabet);
        for (auto& c : f.freq_counts) c = r.get_u32();
        f.payload.bit_count = r.get_u32();
        const std::size_t n_bytes = static_cast<std::size_t>((f.payload.bit_count + 7) / 8);
        const std::uint8_t* p = r.take(n_bytes);
        f.payload.bytes.assign(p, p + n_bytes);
    }
    if (r.remaining() != 0) throw Error(ErrorCode::CorruptFrame, "trailing bytes in side block");
}

inline std::vector<double> flatten_tokens(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()) * static_cast<std::size_t>(m.cols()));
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[k++] = m(i, j);
    return out;
}

inline Eigen::MatrixXd unflatten_tokens(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[k++];
    return m;
}

inline SimilaritySource resolve_similarity(const PipelineConfig& cfg) {
    switch (cfg.similarity) {
        case SimilarityChoice::Tokens: return SimilaritySource::Tokens;
        case SimilarityChoice::Keys: return SimilaritySource::Keys;
        case SimilarityChoice::Auto: break;
    }
    return cfg.attention ? SimilaritySource::Keys : SimilaritySource::Tokens;
}

}  // namespace detail

/// Semantic encode: patchify -> analyze -> reorganize to the token budget ->
/// optional quantization -> power-normalized analog symbols (with
/// significance-weighted allocation) and exact side-info accounting.
inline TransmissionFrame encode_image(const ImageBuffer& img, const PipelineConfig& cfg,
                                      const AnalysisTransform& transform,
                                      const Codebook* codebook = nullptr) {
    if (transform.out_dim != cfg.token_dim)
        throw Error(ErrorCode::ConfigError, "transform out_dim does not match config token_dim");
    if (transform.patch_size != cfg.patch_size)
        throw Error(ErrorCode::ConfigError, "transform patch size does not match config");

    const auto patches = patchify(img, cfg.patch_size);
    if (patches.front().size() != static_cast<Eigen::Index>(transform.in_dim))
        throw Error(ErrorCode::DimensionMismatch, "image channel count does not match transform");
    TokenSequence ts = analyze(patches, transform);
    const auto n0 = static_cast<std::uint32_t>(ts.count());
    if (cfg.token_budget < 1 || cfg.token_budget > n0)
        throw Error(ErrorCode::Infeasible, "token budget infeasible for this geometry");

    const MergeSchedule schedule = build_schedule(n0, cfg.token_budget, cfg.n_stages);
    std::optional<AttentionStage> attn;
    if (cfg.attention) {
        if (cfg.attn_heads == 0 || cfg.token_dim % cfg.attn_heads != 0)
            throw Error(ErrorCode::ConfigError, "token_dim must be divisible by attn_heads");
        attn = make_attention_stage(cfg.attn_layers, cfg.attn_heads, cfg.token_dim / cfg.attn_heads,
                                    cfg.attention_seed());
    }
    ReorganizeResult reorg =
        reorganize(ts, schedule, detail::resolve_similarity(cfg), attn ? &*attn : nullptr);

    TransmissionFrame f;
    f.digest = config_digest(cfg);
    f.width = img.width;
    f.height = img.height;
    f.channels = static_cast<std::uint8_t>(img.channels);
    f.mode = static_cast<std::uint8_t>(cfg.quantization);
    f.n_tokens = static_cast<std::uint32_t>(reorg.seq.count());
    f.token_dim = cfg.token_dim;
    f.plan = std::move(reorg.plan);
    f.sizes = reorg.seq.sizes;

    switch (cfg.quantization) {
        case QuantizationMode::None: {
            std::vector<double> flat = detail::flatten_tokens(reorg.seq.tokens);
            double energy = 0.0;
            for (double v : flat) energy += v * v;
            if (energy == 0.0) {
                // Nothing to normalize; a zero scale tells the receiver the
                // payload carries no information.
                f.scale = 0.0;
                f.symbols.assign(flat.size(), 0.0);
            } else {
                auto [sym, scale] = power_normalize(flat);
                f.scale = scale;
                if (cfg.power_allocation) sym = allocate_power(sym, token_significance(reorg.seq));
                f.symbols = std::move(sym.symbols);
            }
            break;
        }
        case QuantizationMode::Scalar: {
            const std::vector<double> flat = detail::flatten_tokens(reorg.seq.tokens);
            Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
            const std::vector<std::int64_t> q = scalar_quantize(v, cfg.scalar_step);
            std::int64_t lo = q[0], hi = q[0];
            for (std::int64_t x : q) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            const std::uint64_t alphabet = static_cast<std::uint64_t>(hi - lo) + 1;
            if (alphabet > FrequencyModel::kMaxAlphabet)
                throw Error(ErrorCode::InvalidDimensions, "scalar step too fine for the entropy coder");
            QuantizedStream qs;
            qs.alphabet = static_cast<std::uint32_t>(alphabet);
            qs.symbols.reserve(q.size());
            for (std::int64_t x : q) qs.symbols.push_back(static_cast<std::uint32_t>(x - lo));
            const FrequencyModel fm = FrequencyModel::from_stream(qs);
            f.offset = lo;
            f.alphabet = qs.alphabet;
            f.freq_counts = fm.raw;
            f.payload = entropy_encode(qs, fm);
            break;
        }
        case QuantizationMode::Vq: {
            if (codebook == nullptr) throw Error(ErrorCode::ConfigError, "vq mode requires a codebook");
            if (codebook->dim() != static_cast<Eigen::Index>(cfg.token_dim))
                throw Error(ErrorCode::DimensionMismatch, "codebook dim does not match token_dim");
            const QuantizedStream qs = vq_encode(reorg.seq.tokens, *codebook);
            const FrequencyModel fm = FrequencyModel::from_stream(qs);
            f.alphabet = qs.alphabet;
            f.freq_counts = fm.raw;
            f.payload = entropy_encode(qs, fm);
            break;
        }
    }

    const std::vector<std::uint8_t> side = detail::serialize_side_block(f);
    const std::uint64_t m = static_cast<std::uint64_t>(img.width) * img.height * img.channels;
    f.rate = compute_cbr(m, f.symbols.size(), side.size() * 8ULL, cfg.bits_per_symbol);
    return f;
}

/// Recovers the digital symbol stream of a quantized-mode frame.
inline QuantizedStream frame_digital_stream(const TransmissionFrame& f) {
    const auto mode = static_cast<QuantizationMode>(f.mode);
    if (mode == QuantizationMode::None) throw Error(ErrorCode::CorruptFrame, "frame has no digital payload");
    const std::uint32_t n_symbols =
        mode == QuantizationMode::Scalar ? f.n_tokens * f.token_dim : f.n_tokens;
    if (f.freq_counts.size() != f.alphabet) throw Error(ErrorCode::CorruptFrame, "frequency table size mismatch");
    const FrequencyModel fm = FrequencyModel::from_counts(f.freq_counts);
    return entropy_decode(f.payload.bytes.data(), f.payload.bit_count, fm, n_symbols);
}

/// Semantic decode: invert channel scaling (or dequantize), unmerge with the
/// transmitted plan, synthesize, reassemble the image.
inline ImageBuffer decode_image(const TransmissionFrame& f, const PipelineConfig& cfg,
                                const AnalysisTransform& transform, const Codebook* codebook = nullptr) {
    if (f.digest != config_digest(cfg)) throw Error(ErrorCode::CorruptFrame, "config digest mismatch");
    if (transform.out_dim != f.token_dim) throw Error(ErrorCode::CorruptFrame, "token dim mismatch");
    if (f.channels != 1 && f.channels != 3) throw Error(ErrorCode::CorruptFrame, "bad channel count");
    if (cfg.patch_size == 0 || f.width % cfg.patch_size != 0 || f.height % cfg.patch_size != 0)
        throw Error(ErrorCode::CorruptFrame, "geometry not divisible by patch size");
    const std::uint64_t n0 =
        static_cast<std::uint64_t>(f.width / cfg.patch_size) * (f.height / cfg.patch_size);
    std::uint64_t total = 0;
    for (std::uint32_t s : f.sizes) total += s;
    if (total != n0 || f.sizes.size() != f.n_tokens)
        throw Error(ErrorCode::CorruptFrame, "token sizes do not cover the patch grid");

    TokenSequence merged;
    merged.sizes = f.sizes;
    const auto mode = static_cast<QuantizationMode>(f.mode);
    switch (mode) {
        case QuantizationMode::None: {
            if (f.symbols.size() != static_cast<std::size_t>(f.n_tokens) * f.token_dim)
                throw Error(ErrorCode::CorruptFrame, "analog payload length mismatch");
            SymbolVector sym;
            sym.symbols = f.symbols;
            if (cfg.power_allocation && f.scale != 0.0) {
                std::vector<double> scores(f.sizes.size());
                const double tot = static_cast<double>(total);
                for (std::size_t i = 0; i < f.sizes.size(); ++i) scores[i] = static_cast<double>(f.sizes[i]) / tot;
                sym = deallocate_power(sym, scores);
            }
            const std::vector<double> flat = power_denormalize(sym, f.scale);
            merged.tokens = detail::unflatten_tokens(flat, f.n_tokens, f.token_dim);
            break;
        }
        case QuantizationMode::Scalar: {
            const QuantizedStream qs = frame_digital_stream(f);
            std::vector<std::int64_t> q(qs.symbols.size());
            for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<std::int64_t>(qs.symbols[i]) + f.offset;
            const Eigen::VectorXd v = scalar_dequantize(q, cfg.scalar_step);
            merged.tokens = detail::unflatten_tokens(
                std::vector<double>(v.data(), v.data() + v.size()), f.n_tokens, f.token_dim);
            break;
        }
        case QuantizationMode::Vq: {
            if (codebook == nullptr) throw Error(ErrorCode::ConfigError, "vq mode requires a codebook");
            const QuantizedStream qs = frame_digital_stream(f);
            merged.tokens = vq_decode(qs, *codebook);
            break;
        }
        default:
            throw Error(ErrorCode::CorruptFrame, "unknown quantization mode");
    }

    const auto structure = detail::replay_plan_structure(static_cast<std::uint32_t>(n0), f.plan);
    merged.origin = structure.origin;
    const TokenSequence full = unmerge(merged, f.plan);
    const auto patches = synthesize(full, transform);
    return unpatchify(patches, f.width, f.height, f.channels, cfg.patch_size);
}

struct TrialResult {
    RateReport rate;
    QualityReport quality;
    double entropy_bits = 0.0;  // empirical entropy of the digital stream, 0 in continuous mode
    ImageBuffer reconstruction;
};

/// Full encode -> channel -> decode -> metrics pass. Deterministic for a
/// given (image, config, seeds) triple.
inline TrialResult run_trial(const ImageBuffer& img, const PipelineConfig& cfg,
                             const AnalysisTransform& transform, const Codebook* codebook = nullptr) {
    TransmissionFrame frame = encode_image(img, cfg, transform, codebook);

    if (static_cast<QuantizationMode>(frame.mode) == QuantizationMode::None && !frame.symbols.empty()) {
        SymbolVector tx;
        tx.symbols = std::move(frame.symbols);
        if (cfg.channel.kind == ChannelKind::Awgn) {
            frame.symbols = awgn(tx, cfg.channel.snr_db, cfg.channel_seed()).symbols;
        } else {
            FadedSignal fd = rayleigh(tx, cfg.channel.snr_db, cfg.channel.block_len, cfg.channel_seed());
            frame.symbols = equalize(fd.received, fd.gains, cfg.channel.block_len).symbols;
        }
    }

    TrialResult res;
    res.reconstruction = decode_image(frame, cfg, transform, codebook);
    res.rate = frame.rate;
    res.quality = quality_report(img, res.reconstruction);
    if (static_cast<QuantizationMode>(frame.mode) != QuantizationMode::None)
        res.entropy_bits = empirical_entropy(frame_digital_stream(frame));
    return res;
}

// ---- frame persistence ("SCFR") ----------------------------------------------

inline constexpr char kFrameMagic[4] = {'S', 'C', 'F', 'R'};
inline constexpr std::uint16_t kFrameVersion = 1;

inline void save_frame(const TransmissionFrame& f, const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kFrameMagic, kFrameMagic + 4);
    put_u16(buf, kFrameVersion);
    put_u64(buf, f.digest);
    buf.push_back(f.mode);
    put_u32(buf, f.token_dim);
    const std::vector<std::uint8_t> side = detail::serialize_side_block(f);
    put_u32(buf, static_cast<std::uint32_t>(side.size()));
    buf.insert(buf.end(), side.begin(), side.end());
    put_u64(buf, f.symbols.size());
    for (double s : f.symbols) put_f32(buf, static_cast<float>(s));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to '" + path + "'");
}

inline TransmissionFrame load_frame(const std::string& path, std::uint32_t bits_per_symbol) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        ByteReader r(buf.data(), buf.size());
        const std::uint8_t* magic = r.take(4);
        if (std::memcmp(magic, kFrameMagic, 4) != 0) throw Error(ErrorCode::CorruptFrame, path + ": bad frame magic");
        if (r.get_u16() != kFrameVersion) throw Error(ErrorCode::CorruptFrame, path + ": unsupported frame version");
        TransmissionFrame f;
        f.digest = r.get_u64();
        f.mode = r.get_u8();
        f.token_dim = r.get_u32();
        const std::uint32_t side_len = r.get_u32();
        const std::uint8_t* side = r.take(side_len);
        detail::parse_side_block(f, side, side_len);
        const std::uint64_t n_sym = r.get_u64();
        if (n_sym > r.remaining() / 4) throw Error(ErrorCode::CorruptFrame, path + ": analog payload truncated");
        f.symbols.resize(n_sym);
        for (auto& s : f.symbols) s = r.get_f32();
        const std::uint64_t m = static_cast<std::uint64_t>(f.width) * f.height * f.channels;
        f.rate = compute_cbr(m, f.symbols.size(), side_len * 8ULL, bits_per_symbol);
        return f;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Truncated || e.code() == ErrorCode::CorruptBitstream ||
            e.code() == ErrorCode::InvalidDimensions)
            throw Error(ErrorCode::CorruptFrame, e.what());
        throw;
    }
}

}  // namespace semcode
