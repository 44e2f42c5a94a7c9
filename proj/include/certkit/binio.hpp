#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "certkit/error.hpp"

namespace certkit {

// Little-endian binary readers/writers shared by the checkpoint and dataset
// formats. Offsets are tracked so format errors can name the exact byte.

class BinWriter {
  public:
    explicit BinWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) fail_io("cannot open '" + path + "' for writing");
    }

    void magic(const char tag[4]) { bytes(tag, 4); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

    void f64_array(const double* data, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) f64(data[i]);
    }

    void close() {
        out_.close();
        if (!out_) fail_io("write to '" + path_ + "' failed");
    }

  private:
    template <typename T>
    void put_le(T v) {
        unsigned char buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i)
            buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        bytes(buf, sizeof(T));
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) fail_io("write to '" + path_ + "' failed");
    }

    std::string path_;
    std::ofstream out_;
};

class BinReader {
  public:
    explicit BinReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) fail_io("cannot open '" + path + "' for reading");
    }

    void expect_magic(const char tag[4]) {
        char buf[4];
        bytes(buf, 4);
        if (std::memcmp(buf, tag, 4) != 0)
            fail_io("'" + path_ + "': bad magic at byte 0 (expected " + std::string(tag, 4) + ")");
    }

    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

    void f64_array(double* data, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) data[i] = f64();
    }

    std::size_t offset() const { return offset_; }

    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (!in_.eof())
            fail_io("'" + path_ + "': trailing bytes at offset " + std::to_string(offset_));
    }

  private:
    template <typename T>
    T get_le() {
        unsigned char buf[sizeof(T)];
        bytes(buf, sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
        return v;
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            fail_io("'" + path_ + "': truncated at byte offset " + std::to_string(offset_));
        offset_ += n;
    }

    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

}  // namespace certkit
