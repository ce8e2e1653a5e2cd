#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "shotnoise/errors.hpp"
#include "shotnoise/sim/path.hpp"

namespace shotnoise {

// Binary path record, little-endian: f64 t, f64 value, u64 seed, u32 flags (28 bytes).
struct PathRecord {
    double t = 0.0;
    double value = 0.0;
    std::uint64_t seed = 0;
    std::uint32_t flags = 0;
};

inline constexpr std::uint32_t record_truncated = 1u;
inline constexpr std::size_t record_size = 28;

inline PathRecord to_record(const PathSample& p) {
    return {p.t, p.value, p.seed, p.truncated ? record_truncated : 0u};
}

namespace detail {

inline void put_le(std::ostream& os, std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os.write(buf, bytes);
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

} // namespace detail

inline void write_record(std::ostream& os, const PathRecord& r) {
    detail::put_le(os, std::bit_cast<std::uint64_t>(r.t), 8);
    detail::put_le(os, std::bit_cast<std::uint64_t>(r.value), 8);
    detail::put_le(os, r.seed, 8);
    detail::put_le(os, r.flags, 4);
}

inline void write_records(const std::string& path, const std::vector<PathRecord>& records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DomainError("cannot open record file " + path);
    for (const auto& r : records) write_record(os, r);
    if (!os) throw DomainError("write failed for record file " + path);
}

inline std::vector<PathRecord> read_records(std::istream& is) {
    std::vector<PathRecord> out;
    std::array<unsigned char, record_size> buf{};
    while (is.read(reinterpret_cast<char*>(buf.data()), record_size)) {
        PathRecord r;
        r.t = std::bit_cast<double>(detail::get_le(buf.data(), 8));
        r.value = std::bit_cast<double>(detail::get_le(buf.data() + 8, 8));
        r.seed = detail::get_le(buf.data() + 16, 8);
        r.flags = static_cast<std::uint32_t>(detail::get_le(buf.data() + 24, 4));
        out.push_back(r);
    }
    if (is.gcount() != 0) throw DomainError("record file ends with a partial record");
    return out;
}

inline std::vector<PathRecord> read_records(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DomainError("cannot open record file " + path);
    return read_records(is);
}

} // namespace shotnoise
