#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "semcode/error.hpp"
#include "semcode/image.hpp"
#include "semcode/quantizer.hpp"

namespace semcode {

struct QualityReport {
    double mse = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

inline constexpr double kPsnrCapDb = 100.0;

/// Mean squared difference over all samples in the 8-bit domain.
inline double mse(const ImageBuffer& a, const ImageBuffer& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw Error(ErrorCode::DimensionMismatch, "image dimensions differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.samples.size());
}

/// 10*log10(255^2 / mse); identical images report the 100 dB cap.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    const double e = mse(a, b);
    if (e == 0.0) return kPsnrCapDb;
    return 10.0 * std::log10(255.0 * 255.0 / e);
}

namespace detail {

// ITU-R BT.601 luma, kept in double precision.
inline std::vector<double> luma_plane(const ImageBuffer& img) {
    std::vector<double> out(static_cast<std::size_t>(img.width) * img.height);
    if (img.channels == 1) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(img.samples[i]);
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const std::size_t b = i * img.channels;
            out[i] = 0.299 * img.samples[b] + 0.587 * img.samples[b + 1] + 0.114 * img.samples[b + 2];
        }
    }
    return out;
}

inline std::vector<double> gaussian_kernel_11() {
    std::vector<double> k(11);
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double x = static_cast<double>(i - 5);
        k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-mode convolution with the 11-tap window.
inline std::vector<double> filter_valid(const std::vector<double>& img, std::uint32_t w, std::uint32_t h,
                                        const std::vector<double>& k) {
    const std::uint32_t ow = w - 10, oh = h - 10;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h, 0.0);
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::uint32_t t = 0; t < 11; ++t) acc += k[t] * img[static_cast<std::size_t>(y) * w + x + t];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh, 0.0);
    for (std::uint32_t y = 0; y < oh; ++y)
        for (std::uint32_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::uint32_t t = 0; t < 11; ++t) acc += k[t] * tmp[static_cast<std::size_t>(y + t) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace detail

/// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), C1=(0.01*255)^2,
/// C2=(0.03*255)^2, computed on BT.601 luma for color images.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw Error(ErrorCode::DimensionMismatch, "image dimensions differ");
    if (a.width < 11 || a.height < 11)
        throw Error(ErrorCode::TooSmall, "images must be at least 11x11 for SSIM");

    const std::vector<double> x = detail::luma_plane(a);
    const std::vector<double> y = detail::luma_plane(b);
    const std::vector<double> kern = detail::gaussian_kernel_11();
    const std::uint32_t w = a.width, h = a.height;

    std::vector<double> xx(x.size()), yy(y.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mu_x = detail::filter_valid(x, w, h, kern);
    const auto mu_y = detail::filter_valid(y, w, h, kern);
    const auto m_xx = detail::filter_valid(xx, w, h, kern);
    const auto m_yy = detail::filter_valid(yy, w, h, kern);
    const auto m_xy = detail::filter_valid(xy, w, h, kern);

    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double var_x = m_xx[i] - mu_x[i] * mu_x[i];
        const double var_y = m_yy[i] - mu_y[i] * mu_y[i];
        const double cov = m_xy[i] - mu_x[i] * mu_y[i];
        const double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
        const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2);
        acc += num / den;
    }
    return acc / static_cast<double>(mu_x.size());
}

/// -sum p log2 p over observed symbol frequencies, in bits per symbol.
inline double empirical_entropy(const QuantizedStream& qs) {
    if (qs.symbols.empty()) throw Error(ErrorCode::EmptyStream, "entropy of an empty stream");
    std::vector<std::uint64_t> counts(qs.alphabet, 0);
    for (std::uint32_t s : qs.symbols) {
        if (s >= qs.alphabet) throw Error(ErrorCode::SymbolOutOfRange, "symbol exceeds alphabet");
        ++counts[s];
    }
    const double n = static_cast<double>(qs.symbols.size());
    double h = 0.0;
    for (std::uint64_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

inline QualityReport quality_report(const ImageBuffer& reference, const ImageBuffer& reconstructed) {
    QualityReport q;
    q.mse = mse(reference, reconstructed);
    q.psnr_db = q.mse == 0.0 ? kPsnrCapDb : 10.0 * std::log10(255.0 * 255.0 / q.mse);
    q.ssim = ssim(reference, reconstructed);
    return q;
}

}  // namespace semcode
