#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "semcode/error.hpp"

namespace semcode {

/// MSB-first bit sink backed by a byte vector.
class BitWriter {
  public:
    void put_bit(int bit) {
        if (bit_pos_ == 0) bytes_.push_back(0);
        if (bit) bytes_.back() |= static_cast<std::uint8_t>(1u << (7 - bit_pos_));
        bit_pos_ = (bit_pos_ + 1) & 7;
        ++n_bits_;
    }

    void put_bits(std::uint64_t value, int count) {
        for (int i = count - 1; i >= 0; --i) put_bit(static_cast<int>((value >> i) & 1u));
    }

    std::uint64_t bit_count() const { return n_bits_; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

  private:
    std::vector<std::uint8_t> bytes_;
    int bit_pos_ = 0;
    std::uint64_t n_bits_ = 0;
};

/// MSB-first bit source. Reads past the payload yield zeros, up to a fixed
/// slack that covers arithmetic-decoder lookahead; beyond that the stream is
/// treated as corrupt.
class BitReader {
  public:
    BitReader(const std::uint8_t* data, std::uint64_t bit_count, std::uint64_t slack_bits = 64)
        : data_(data), n_bits_(bit_count), slack_(slack_bits) {}

    int get_bit() {
        if (pos_ >= n_bits_) {
            if (pos_ >= n_bits_ + slack_) throw Error(ErrorCode::CorruptBitstream, "bitstream exhausted");
            ++pos_;
            return 0;
        }
        const std::uint64_t byte = pos_ >> 3;
        const int off = static_cast<int>(pos_ & 7);
        ++pos_;
        return (data_[byte] >> (7 - off)) & 1;
    }

    std::uint64_t get_bits(int count) {
        std::uint64_t v = 0;
        for (int i = 0; i < count; ++i) v = (v << 1) | static_cast<std::uint64_t>(get_bit());
        return v;
    }

    std::uint64_t position() const { return pos_; }

  private:
    const std::uint8_t* data_;
    std::uint64_t n_bits_;
    std::uint64_t slack_;
    std::uint64_t pos_ = 0;
};

// Little-endian scalar append/read helpers shared by the file formats.

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

/// Bounds-checked little-endian byte cursor.
class ByteReader {
  public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t get_u8() { return take(1)[0]; }

    std::uint16_t get_u16() {
        const std::uint8_t* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }

    std::uint32_t get_u32() {
        const std::uint8_t* p = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }

    std::uint64_t get_u64() {
        const std::uint8_t* p = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }

    float get_f32() {
        const std::uint32_t bits = get_u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    double get_f64() {
        const std::uint64_t bits = get_u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > size_) throw Error(ErrorCode::Truncated, "unexpected end of data");
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    std::size_t remaining() const { return size_ - pos_; }
    std::size_t position() const { return pos_; }

  private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace semcode
