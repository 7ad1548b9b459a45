#pragma once

#include <cstddef>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "pipematch/errors.hpp"

namespace pipematch {

// Writes to a sibling temp file then renames, so readers never observe a
// partially written file.
void atomic_write_file(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

// Minimal CSV quoting: fields containing comma, quote or newline are quoted.
std::string csv_escape(const std::string& field);
std::string csv_join(const std::vector<std::string>& fields);
std::vector<std::string> csv_split(const std::string& line);

// Runs fn(i) for i in [0, n) on up to `workers` threads. workers <= 1 runs
// inline. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// Little-endian raw value append/read for the binary file formats.
template <typename T>
void append_raw(std::string& s, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    s.append(buf, sizeof(T));
}

template <typename T>
T read_raw(const std::string& s, std::size_t& pos) {
    if (pos + sizeof(T) > s.size()) throw FormatError("truncated binary payload");
    T v;
    std::memcpy(&v, s.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace pipematch
