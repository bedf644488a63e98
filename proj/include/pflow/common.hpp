#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pflow {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Planar state / velocity vector, in abstract data units.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
inline bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
inline double norm(Vec2 a) { return std::sqrt(norm2(a)); }

inline std::string to_string(Vec2 v) {
  return "(" + std::to_string(v.x) + ", " + std::to_string(v.y) + ")";
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid static configuration (architecture, integrator spec, shape spec).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A call that violates an operation's preconditions.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite values: bad numeric inputs, diverged integrations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed content inside a file; the message names the line.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A file whose overall schema or header is wrong.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pflow
