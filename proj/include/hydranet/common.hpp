#pragma once

#include <charconv>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <system_error>

namespace hydranet {

// Base error. User-facing errors (bad files, bad config) exit the CLI with 1;
// internal invariant violations (shape/contract/domain) exit with 2.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

class user_error : public error {
public:
    using error::error;
};

class internal_error : public error {
public:
    using error::error;
};

class config_error : public user_error {
public:
    using user_error::user_error;
};

class data_error : public user_error {
public:
    using user_error::user_error;
};

class schema_error : public user_error {
public:
    using user_error::user_error;
};

class value_error : public user_error {
public:
    using user_error::user_error;
};

class io_error : public user_error {
public:
    using user_error::user_error;
};

class shape_error : public internal_error {
public:
    using internal_error::internal_error;
};

class domain_error : public internal_error {
public:
    using internal_error::internal_error;
};

class contract_error : public internal_error {
public:
    using internal_error::internal_error;
};

// Shortest round-trip decimal form; parsing it back yields the same bits.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw value_error("cannot parse floating-point value '" + s + "' for " + what);
    }
    return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw value_error("cannot parse integer value '" + s + "' for " + what);
    }
    return v;
}

// All randomness in the project flows from explicit 64-bit seeds; derived
// streams get decorrelated seeds via splitmix64.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed, stream));
}

}  // namespace hydranet
