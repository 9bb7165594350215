#pragma once

// Basic vector/matrix types, error hierarchy, and a deterministic RNG shared
// by all modules.  Everything is header-only; nothing here owns resources.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stripes {

inline constexpr double pi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double c) const { return {c * x, c * y}; }
    Vec2 operator/(double c) const { return {x / c, y / c}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    Vec2 normalized() const { double n = norm(); return {x / n, y / n}; }
    // Rotate by -90 degrees: maps a counterclockwise tangent to the outward normal.
    Vec2 perp_cw() const { return {y, -x}; }
    // Rotate by +90 degrees.
    Vec2 perp_ccw() const { return {-y, x}; }
};

inline Vec2 operator*(double c, const Vec2& v) { return {c * v.x, c * v.y}; }

// Symmetric 2x2 matrices appear as projections P; full 2x2 kept for generality.
struct Mat2 {
    // [[a, b], [c, d]]
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 zero() { return {}; }

    Vec2 apply(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 mul(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
    double trace() const { return a + d; }
    double frobenius() const { return std::sqrt(a * a + b * b + c * c + d * d); }
};

// Base class for all library errors; subclasses name the specific contract
// violation so callers can catch precisely.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define STRIPES_DEFINE_ERROR(Name)                                  \
    struct Name : Error {                                           \
        explicit Name(const std::string& what) : Error(what) {}     \
    }

// Deterministic 64-bit generator (splitmix64-seeded xoshiro-style mixing via
// std::mt19937_64 would be platform-stable too, but distributions are not;
// we therefore generate doubles directly from raw bits).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(splitmix(seed + 0x9E3779B97F4A7C15ULL)) {}

    std::uint64_t next_u64() {
        // xorshift64* — tiny, fast, and identical on every platform.
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  private:
    static std::uint64_t splitmix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    std::uint64_t state_;
};

// Wrap an angle-like coordinate into [0, period).
inline double wrap(double s, double period) {
    double r = std::fmod(s, period);
    return r < 0 ? r + period : r;
}

}  // namespace stripes
