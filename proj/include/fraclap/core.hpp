#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fraclap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Point of R^n with n in {1, 2}; unused trailing coordinates are zero.
struct Point {
    std::array<double, 2> c{0.0, 0.0};

    Point() = default;
    Point(double x) : c{x, 0.0} {}
    Point(double x, double y) : c{x, y} {}

    double operator[](std::size_t i) const { return c[i]; }
    double& operator[](std::size_t i) { return c[i]; }

    friend Point operator+(Point a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
    friend Point operator-(Point a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
    friend Point operator*(double s, const Point& a) { return {s * a[0], s * a[1]}; }
    friend Point operator-(const Point& a) { return {-a[0], -a[1]}; }

    double norm() const { return std::hypot(c[0], c[1]); }
    double dot(const Point& o) const { return c[0] * o[0] + c[1] * o[1]; }
};

inline double cross(const Point& a, const Point& b) { return a[0] * b[1] - a[1] * b[0]; }

// Error hierarchy. Each subclass corresponds to one failure family that the
// CLI maps onto an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent user configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Numerical procedure failed to converge or produced non-finite values.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Element-pair quadrature could not reach its error target.
class AssemblyError : public NumericError {
public:
    using NumericError::NumericError;
};

/// A hypothesis required by the requested mode does not hold.
class HypothesisError : public Error {
public:
    using Error::Error;
};

/// Output files could not be written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Outcome of a numerical check. `Inconclusive` is used for equality within
/// round-off where a strict inequality is required.
enum class Verdict { Pass, Fail, Inconclusive, NotApplicable };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    case Verdict::NotApplicable: return "not-applicable";
    }
    return "?";
}

inline Verdict verdict_of(bool ok) { return ok ? Verdict::Pass : Verdict::Fail; }

}  // namespace fraclap
