#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <string>

namespace jumplab {

inline constexpr int kMaxDimension = 3;

/// A point (or displacement) in R^d for d <= 3. Fixed storage, no allocation.
class Point {
 public:
  Point() = default;
  explicit Point(int dim) : dim_(dim) {}
  Point(std::initializer_list<double> coords) : dim_(static_cast<int>(coords.size())) {
    int i = 0;
    for (double c : coords) c_[i++] = c;
  }

  static Point filled(int dim, double value) {
    Point p(dim);
    for (int i = 0; i < dim; ++i) p.c_[i] = value;
    return p;
  }

  int dim() const noexcept { return dim_; }
  double operator[](int i) const noexcept { return c_[i]; }
  double& operator[](int i) noexcept { return c_[i]; }

  double norm() const noexcept {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += c_[i] * c_[i];
    return std::sqrt(s);
  }

  double sup_norm() const noexcept {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s = std::fmax(s, std::fabs(c_[i]));
    return s;
  }

  bool finite() const noexcept {
    for (int i = 0; i < dim_; ++i)
      if (!std::isfinite(c_[i])) return false;
    return true;
  }

  Point& operator+=(const Point& o) noexcept {
    for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Point& operator-=(const Point& o) noexcept {
    for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Point& operator*=(double s) noexcept {
    for (int i = 0; i < dim_; ++i) c_[i] *= s;
    return *this;
  }

  friend Point operator+(Point a, const Point& b) noexcept { return a += b; }
  friend Point operator-(Point a, const Point& b) noexcept { return a -= b; }
  friend Point operator*(Point a, double s) noexcept { return a *= s; }
  friend Point operator*(double s, Point a) noexcept { return a *= s; }

  friend bool operator==(const Point& a, const Point& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i)
      if (a.c_[i] != b.c_[i]) return false;
    return true;
  }

  std::string to_string() const;

 private:
  std::array<double, kMaxDimension> c_{};
  int dim_ = 0;
};

inline double distance(const Point& a, const Point& b) noexcept { return (a - b).norm(); }

inline std::string Point::to_string() const {
  std::string out = "(";
  for (int i = 0; i < dim_; ++i) {
    if (i) out += ", ";
    out += std::to_string(c_[i]);
  }
  return out + ")";
}

/// Surface measure of the unit sphere S^{d-1}: 2, 2*pi, 4*pi.
inline double unit_sphere_area(int dim) {
  constexpr double pi = 3.14159265358979323846;
  switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * pi;
    case 3: return 4.0 * pi;
    default: return 0.0;
  }
}

}  // namespace jumplab
