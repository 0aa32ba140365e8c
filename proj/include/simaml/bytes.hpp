#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "simaml/errors.hpp"

namespace simaml::detail {

// Little-endian byte serialization for the on-disk containers.

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

class ByteReader {
public:
    ByteReader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(byte()); }

    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(byte())) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(byte())) << (8 * i);
        return v;
    }

    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string raw(std::size_t len) {
        if (pos_ + len > data_.size()) throw TruncatedError("truncated file: " + path_);
        std::string s = data_.substr(pos_, len);
        pos_ += len;
        return s;
    }

    bool exhausted() const { return pos_ == data_.size(); }

private:
    char byte() {
        if (pos_ >= data_.size()) throw TruncatedError("truncated file: " + path_);
        return data_[pos_++];
    }

    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace simaml::detail
