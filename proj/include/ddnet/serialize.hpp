#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddnet {

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

/// Reads a whole file; throws with the file name on failure.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

/// Little-endian byte buffer writer. All on-disk formats are
/// endianness-pinned to little-endian.
class ByteWriter {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    template <class T>
    void put(T v) {
        static_assert(std::is_arithmetic_v<T>);
        raw(&v, sizeof(T));  // host is little-endian; pinned by format tests
    }
    void put_string(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    template <class T>
    void put_array(const std::vector<T>& v) {
        raw(v.data(), v.size() * sizeof(T));
    }
    std::vector<std::uint8_t>& bytes() { return buf_; }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* p, std::size_t n, std::string context)
        : p_(p), n_(n), context_(std::move(context)) {}

    void raw(void* out, std::size_t n) {
        if (pos_ + n > n_)
            throw std::runtime_error(context_ + ": truncated file");
        std::memcpy(out, p_ + pos_, n);
        pos_ += n;
    }
    template <class T>
    T get() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    template <class T>
    std::vector<T> get_array(std::size_t count) {
        std::vector<T> v(count);
        raw(v.data(), count * sizeof(T));
        return v;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return n_ - pos_; }
    const std::string& context() const { return context_; }

private:
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
    std::string context_;
};

/// Appends a CRC32 of the current buffer contents.
inline void seal_crc(ByteWriter& w) {
    const std::uint32_t crc = crc32(w.bytes().data(), w.bytes().size());
    w.put<std::uint32_t>(crc);
}

/// Verifies a trailing CRC32 over the whole payload; returns the payload span.
inline std::pair<const std::uint8_t*, std::size_t> check_crc(
    const std::vector<std::uint8_t>& bytes, const std::string& context) {
    if (bytes.size() < 4) throw std::runtime_error(context + ": truncated file");
    const std::size_t n = bytes.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + n, 4);
    if (crc32(bytes.data(), n) != stored)
        throw std::runtime_error(context + ": CRC mismatch");
    return {bytes.data(), n};
}

}  // namespace ddnet
