#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "semcode/bitio.hpp"
#include "semcode/error.hpp"
#include "semcode/image.hpp"

namespace semcode {

/// Token matrix plus the bookkeeping that survives merging: per-token
/// constituent counts and the source patch indices each token stands for.
struct TokenSequence {
    Eigen::MatrixXd tokens;                            // N x d, one row per token
    std::vector<std::uint32_t> sizes;                  // constituent counts
    std::vector<std::vector<std::uint32_t>> origin;    // source patch indices per token

    Eigen::Index count() const { return tokens.rows(); }
    Eigen::Index dim() const { return tokens.cols(); }

    std::uint64_t total_size() const {
        return std::accumulate(sizes.begin(), sizes.end(), std::uint64_t{0});
    }
};

/// Orthonormal linear analysis/synthesis pair learned from a patch corpus.
struct AnalysisTransform {
    std::uint32_t patch_size = 0;
    std::uint32_t in_dim = 0;
    std::uint32_t out_dim = 0;
    Eigen::MatrixXd basis;       // out_dim x in_dim, orthonormal rows
    Eigen::VectorXd mean;        // in_dim
    Eigen::VectorXd eigenvalues; // all in_dim eigenvalues, descending
};

/// Splits an image into non-overlapping patch vectors, raster order, values
/// scaled to [0,1]. Patch elements are ordered row, column, channel.
inline std::vector<Eigen::VectorXd> patchify(const ImageBuffer& img, std::uint32_t patch_size) {
    if (patch_size == 0 || img.width % patch_size != 0 || img.height % patch_size != 0)
        throw Error(ErrorCode::DimensionMismatch,
                    "image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " not divisible by patch size " + std::to_string(patch_size));
    if (img.samples.size() != img.sample_count())
        throw Error(ErrorCode::DimensionMismatch, "sample buffer does not match image dimensions");

    const std::uint32_t px = img.width / patch_size;
    const std::uint32_t py = img.height / patch_size;
    const std::uint32_t in_dim = patch_size * patch_size * img.channels;
    std::vector<Eigen::VectorXd> patches;
    patches.reserve(static_cast<std::size_t>(px) * py);
    for (std::uint32_t gy = 0; gy < py; ++gy) {
        for (std::uint32_t gx = 0; gx < px; ++gx) {
            Eigen::VectorXd v(in_dim);
            std::uint32_t k = 0;
            for (std::uint32_t y = 0; y < patch_size; ++y) {
                const std::size_t row = (static_cast<std::size_t>(gy) * patch_size + y) * img.width;
                for (std::uint32_t x = 0; x < patch_size; ++x) {
                    const std::size_t col = static_cast<std::size_t>(gx) * patch_size + x;
                    const std::size_t base = (row + col) * img.channels;
                    for (std::uint32_t c = 0; c < img.channels; ++c)
                        v[k++] = static_cast<double>(img.samples[base + c]) / 255.0;
                }
            }
            patches.push_back(std::move(v));
        }
    }
    return patches;
}

/// Inverse of patchify: clamps to [0,1], scales to 8 bit, reassembles.
inline ImageBuffer unpatchify(const std::vector<Eigen::VectorXd>& patches, std::uint32_t width,
                              std::uint32_t height, std::uint32_t channels, std::uint32_t patch_size) {
    if (patch_size == 0 || width % patch_size != 0 || height % patch_size != 0)
        throw Error(ErrorCode::DimensionMismatch, "target dimensions not divisible by patch size");
    const std::uint32_t px = width / patch_size;
    const std::uint32_t py = height / patch_size;
    if (patches.size() != static_cast<std::size_t>(px) * py)
        throw Error(ErrorCode::DimensionMismatch, "patch count " + std::to_string(patches.size()) +
                                                      " does not cover " + std::to_string(px * py) + " cells");
    const std::uint32_t in_dim = patch_size * patch_size * channels;

    ImageBuffer img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.samples.resize(img.sample_count());
    for (std::uint32_t gy = 0; gy < py; ++gy) {
        for (std::uint32_t gx = 0; gx < px; ++gx) {
            const Eigen::VectorXd& v = patches[static_cast<std::size_t>(gy) * px + gx];
            if (v.size() != static_cast<Eigen::Index>(in_dim))
                throw Error(ErrorCode::DimensionMismatch, "patch vector length mismatch");
            std::uint32_t k = 0;
            for (std::uint32_t y = 0; y < patch_size; ++y) {
                const std::size_t row = (static_cast<std::size_t>(gy) * patch_size + y) * width;
                for (std::uint32_t x = 0; x < patch_size; ++x) {
                    const std::size_t col = static_cast<std::size_t>(gx) * patch_size + x;
                    const std::size_t base = (row + col) * channels;
                    for (std::uint32_t c = 0; c < channels; ++c) {
                        const double clamped = std::min(1.0, std::max(0.0, v[k++]));
                        img.samples[base + c] = static_cast<std::uint8_t>(std::lround(clamped * 255.0));
                    }
                }
            }
        }
    }
    return img;
}

/// PCA over the patch corpus: mean plus the top out_dim principal directions
/// in descending eigenvalue order. Rows of the basis are orthonormal.
inline AnalysisTransform learn_analysis_transform(const std::vector<Eigen::VectorXd>& corpus,
                                                  std::uint32_t out_dim, std::uint32_t patch_size = 0) {
    if (corpus.empty()) throw Error(ErrorCode::InsufficientData, "empty corpus");
    const Eigen::Index in_dim = corpus.front().size();
    if (out_dim == 0 || static_cast<Eigen::Index>(out_dim) > in_dim)
        throw Error(ErrorCode::InsufficientData,
                    "out_dim " + std::to_string(out_dim) + " exceeds in_dim " + std::to_string(in_dim));
    if (corpus.size() < out_dim)
        throw Error(ErrorCode::InsufficientData, "corpus smaller than out_dim");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(in_dim);
    for (const auto& v : corpus) {
        if (v.size() != in_dim) throw Error(ErrorCode::DimensionMismatch, "ragged corpus");
        mean += v;
    }
    mean /= static_cast<double>(corpus.size());

    // Population covariance (1/N); this makes the discarded-eigenvalue sum
    // equal the exact training-set reconstruction MSE.
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(in_dim, in_dim);
    for (const auto& v : corpus) {
        const Eigen::VectorXd c = v - mean;
        cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(corpus.size());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error(ErrorCode::InsufficientData, "eigendecomposition failed");

    AnalysisTransform t;
    t.patch_size = patch_size;
    t.in_dim = static_cast<std::uint32_t>(in_dim);
    t.out_dim = out_dim;
    t.mean = std::move(mean);
    t.basis.resize(out_dim, in_dim);
    t.eigenvalues.resize(in_dim);
    // Eigen returns ascending order; flip it.
    for (Eigen::Index i = 0; i < in_dim; ++i) t.eigenvalues[i] = eig.eigenvalues()[in_dim - 1 - i];
    for (std::uint32_t r = 0; r < out_dim; ++r) t.basis.row(r) = eig.eigenvectors().col(in_dim - 1 - r).transpose();
    return t;
}

/// Projects patches into token space: token = basis * (patch - mean).
inline TokenSequence analyze(const std::vector<Eigen::VectorXd>& patches, const AnalysisTransform& t) {
    TokenSequence ts;
    ts.tokens.resize(static_cast<Eigen::Index>(patches.size()), t.out_dim);
    ts.sizes.assign(patches.size(), 1);
    ts.origin.resize(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (patches[i].size() != static_cast<Eigen::Index>(t.in_dim))
            throw Error(ErrorCode::DimensionMismatch, "patch length does not match transform in_dim");
        ts.tokens.row(static_cast<Eigen::Index>(i)) = (t.basis * (patches[i] - t.mean)).transpose();
        ts.origin[i] = {static_cast<std::uint32_t>(i)};
    }
    return ts;
}

/// Inverse projection with unmerge-by-broadcast: every patch index in a
/// token's origin list receives that token's reconstruction.
inline std::vector<Eigen::VectorXd> synthesize(const TokenSequence& ts, const AnalysisTransform& t) {
    if (ts.dim() != static_cast<Eigen::Index>(t.out_dim))
        throw Error(ErrorCode::DimensionMismatch, "token dim does not match transform out_dim");
    const std::uint64_t n_patches = ts.total_size();
    std::vector<Eigen::VectorXd> patches(n_patches);
    std::uint64_t covered = 0;
    for (Eigen::Index i = 0; i < ts.count(); ++i) {
        const Eigen::VectorXd rec = t.basis.transpose() * ts.tokens.row(i).transpose() + t.mean;
        for (std::uint32_t j : ts.origin[static_cast<std::size_t>(i)]) {
            if (j >= n_patches || patches[j].size() != 0)
                throw Error(ErrorCode::CoverageGap, "origin lists do not partition the patch index set");
            patches[j] = rec;
            ++covered;
        }
    }
    if (covered != n_patches) throw Error(ErrorCode::CoverageGap, "origin lists leave patches uncovered");
    return patches;
}

// ---- transform persistence ("SCAT") ----------------------------------------

inline constexpr char kTransformMagic[4] = {'S', 'C', 'A', 'T'};
inline constexpr std::uint16_t kTransformVersion = 1;

inline void save_transform(const AnalysisTransform& t, const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kTransformMagic, kTransformMagic + 4);
    put_u16(buf, kTransformVersion);
    put_u16(buf, static_cast<std::uint16_t>(t.patch_size));
    put_u32(buf, t.in_dim);
    put_u32(buf, t.out_dim);
    for (std::uint32_t i = 0; i < t.in_dim; ++i) put_f32(buf, static_cast<float>(t.mean[i]));
    for (std::uint32_t r = 0; r < t.out_dim; ++r)
        for (std::uint32_t c = 0; c < t.in_dim; ++c) put_f32(buf, static_cast<float>(t.basis(r, c)));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to '" + path + "'");
}

inline AnalysisTransform load_transform(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader r(buf.data(), buf.size());
    const std::uint8_t* magic = r.take(4);
    if (std::memcmp(magic, kTransformMagic, 4) != 0)
        throw Error(ErrorCode::MalformedHeader, path + ": bad transform magic");
    const std::uint16_t version = r.get_u16();
    if (version != kTransformVersion)
        throw Error(ErrorCode::UnsupportedFormat, path + ": transform version " + std::to_string(version));
    AnalysisTransform t;
    t.patch_size = r.get_u16();
    t.in_dim = r.get_u32();
    t.out_dim = r.get_u32();
    if (t.out_dim > t.in_dim || t.in_dim == 0)
        throw Error(ErrorCode::MalformedHeader, path + ": inconsistent dimensions");
    t.mean.resize(t.in_dim);
    for (std::uint32_t i = 0; i < t.in_dim; ++i) t.mean[i] = r.get_f32();
    t.basis.resize(t.out_dim, t.in_dim);
    for (std::uint32_t row = 0; row < t.out_dim; ++row)
        for (std::uint32_t col = 0; col < t.in_dim; ++col) t.basis(row, col) = r.get_f32();
    t.eigenvalues.resize(0);
    return t;
}

}  // namespace semcode
