#pragma once

// Dense row-major tensors over 64-bit floats plus the deterministic RNG
// helpers used everywhere else. Training and verification run in double
// precision; float32 appears only in the checkpoint container.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dialsum {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), 0.0);
    }

    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape)) {
            throw std::invalid_argument("Tensor: data size does not match shape");
        }
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor vector(std::vector<double> d) {
        std::size_t n = d.size();
        return Tensor({n}, std::move(d));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    // Matrix accessors; valid only for 2-d tensors.
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

inline std::string shape_str(const Tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

// --- deterministic RNG -----------------------------------------------------
//
// std::uniform_*_distribution output is implementation-defined, so every
// random draw in the project goes through these helpers. Results are
// bit-identical across standard libraries for a given seed.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // warm up so that small seeds do not yield small first outputs
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform integer in [0, n)
    std::size_t next_index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  private:
    std::uint64_t state_;
};

// Derives an independent stream seed from (seed, salt).
inline std::uint64_t splitmix_of(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t s = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    return splitmix64(s);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seeded Fisher-Yates; deterministic regardless of platform.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = rng.next_index(i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace dialsum
