#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "semcode/error.hpp"

namespace semcode {

/// Row-major 8-bit image, channel-interleaved. channels is 1 (gray) or 3 (RGB).
struct ImageBuffer {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 0;
    std::vector<std::uint8_t> samples;

    std::size_t sample_count() const {
        return static_cast<std::size_t>(width) * height * channels;
    }

    bool operator==(const ImageBuffer& o) const {
        return width == o.width && height == o.height && channels == o.channels && samples == o.samples;
    }
};

namespace detail {

// Reads one whitespace-delimited token, skipping '#' comments per the netpbm
// grammar. Returns false on EOF.
inline bool next_pnm_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF) return false;
    while (c != EOF && c != ' ' && c != '\t' && c != '\r' && c != '\n' && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c == '#') in.unget();
    return true;
}

inline std::uint64_t parse_pnm_number(const std::string& tok) {
    if (tok.empty()) throw Error(ErrorCode::MalformedHeader, "empty header field");
    std::uint64_t v = 0;
    for (char ch : tok) {
        if (ch < '0' || ch > '9') throw Error(ErrorCode::MalformedHeader, "non-numeric header field '" + tok + "'");
        v = v * 10 + static_cast<std::uint64_t>(ch - '0');
        if (v > 0xffffffffULL) throw Error(ErrorCode::MalformedHeader, "header field out of range");
    }
    return v;
}

}  // namespace detail

/// Parses binary netpbm: P6 (RGB) or P5 (gray), maxval 255 only.
inline ImageBuffer load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P') throw Error(ErrorCode::MalformedHeader, path + ": not a netpbm file");
    std::uint32_t channels = 0;
    if (m1 == '6') {
        channels = 3;
    } else if (m1 == '5') {
        channels = 1;
    } else if (m1 >= '1' && m1 <= '4') {
        throw Error(ErrorCode::UnsupportedFormat, path + ": only binary P5/P6 supported");
    } else {
        throw Error(ErrorCode::MalformedHeader, path + ": bad magic");
    }

    std::string tok;
    if (!detail::next_pnm_token(in, tok)) throw Error(ErrorCode::MalformedHeader, path + ": missing width");
    const std::uint64_t width = detail::parse_pnm_number(tok);
    if (!detail::next_pnm_token(in, tok)) throw Error(ErrorCode::MalformedHeader, path + ": missing height");
    const std::uint64_t height = detail::parse_pnm_number(tok);
    if (!detail::next_pnm_token(in, tok)) throw Error(ErrorCode::MalformedHeader, path + ": missing maxval");
    const std::uint64_t maxval = detail::parse_pnm_number(tok);
    if (maxval != 255) throw Error(ErrorCode::UnsupportedFormat, path + ": maxval must be 255");
    if (width == 0 || height == 0) throw Error(ErrorCode::MalformedHeader, path + ": zero dimension");

    // Exactly one whitespace byte separates the header from the raster; the
    // token scanner has already consumed it.
    ImageBuffer img;
    img.width = static_cast<std::uint32_t>(width);
    img.height = static_cast<std::uint32_t>(height);
    img.channels = channels;
    img.samples.resize(img.sample_count());
    in.read(reinterpret_cast<char*>(img.samples.data()), static_cast<std::streamsize>(img.samples.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.samples.size())
        throw Error(ErrorCode::Truncated, path + ": raster shorter than header promises");
    return img;
}

inline void save_ppm(const ImageBuffer& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw Error(ErrorCode::UnsupportedFormat, "only 1- or 3-channel images can be written");
    if (img.samples.size() != img.sample_count())
        throw Error(ErrorCode::InvalidDimensions, "sample buffer does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.samples.data()), static_cast<std::streamsize>(img.samples.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to '" + path + "'");
}

}  // namespace semcode
