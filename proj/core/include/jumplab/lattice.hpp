#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "jumplab/point.hpp"

namespace jumplab {

/// Integer coordinates k of a site x = k / n.
using SiteIndex = std::array<long, kMaxDimension>;

/// Sites of n^{-1} Z^d inside a box, indexed row-major (last axis fastest).
/// Every site carries mass nu = n^{-d} and owns the cell |x - xi|_inf < 1/(2n).
class Lattice {
 public:
  Lattice() = default;

  /// An arbitrary set of lattice sites (distinct integer coordinates). The
  /// box is the bounding box of the sites.
  static Lattice from_points(int dim, int n, std::vector<SiteIndex> coords);

  int dimension() const noexcept { return dim_; }
  int n() const noexcept { return n_; }
  double spacing() const noexcept { return 1.0 / n_; }
  double nu() const noexcept { return nu_; }
  std::size_t size() const noexcept { return coords_.size(); }
  const Point& lo() const noexcept { return lo_; }
  const Point& hi() const noexcept { return hi_; }

  const SiteIndex& coords(std::size_t i) const { return coords_[i]; }
  const Point& site(std::size_t i) const { return sites_[i]; }
  const std::vector<Point>& sites() const noexcept { return sites_; }

  /// Lower and upper corners of the union of cells.
  Point cell_box_lo() const;
  Point cell_box_hi() const;

  /// Sup-norm distance between the integer coordinates of two sites.
  long grid_distance(std::size_t i, std::size_t j) const;

  /// Index of the site closest to x.
  std::size_t nearest(const Point& x) const;

  /// "n=..;box=[..]x[..]".
  std::string describe() const;

 private:
  friend Lattice build_lattice(int dim, int n, const Point& lo, const Point& hi);

  int dim_ = 0;
  int n_ = 1;
  double nu_ = 1.0;
  Point lo_, hi_;
  std::vector<SiteIndex> coords_;
  std::vector<Point> sites_;
};

/// All points of n^{-1} Z^d in [lo, hi]. Requires n >= 2, dimension 1 or 2,
/// and every side at least 2 / n (three sites per axis); otherwise ConfigError.
Lattice build_lattice(int dim, int n, const Point& lo, const Point& hi);

}  // namespace jumplab
