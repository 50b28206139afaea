#include "jumplab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>

#include "jumplab/errors.hpp"

namespace jumplab {

Lattice build_lattice(int dim, int n, const Point& lo, const Point& hi) {
  if (dim < 1 || dim > 2) throw ConfigError("build_lattice: dimension must be 1 or 2");
  if (n < 2) throw ConfigError("build_lattice: n must be at least 2");
  if (lo.dim() != dim || hi.dim() != dim) throw ConfigError("build_lattice: box dimension mismatch");
  std::array<long, kMaxDimension> first{}, count{};
  for (int i = 0; i < dim; ++i) {
    const double side = hi[i] - lo[i];
    if (!(side >= 2.0 / n - 1e-12)) {
      std::ostringstream os;
      os << "build_lattice: box side " << side << " is smaller than 2/n = " << 2.0 / n;
      throw ConfigError(os.str());
    }
    // tolerate round-off in box corners given as decimals
    first[i] = static_cast<long>(std::ceil(lo[i] * n - 1e-9));
    const long last = static_cast<long>(std::floor(hi[i] * n + 1e-9));
    count[i] = last - first[i] + 1;
  }
  Lattice lat;
  lat.dim_ = dim;
  lat.n_ = n;
  lat.nu_ = std::pow(static_cast<double>(n), -dim);
  lat.lo_ = lo;
  lat.hi_ = hi;
  const long total = dim == 1 ? count[0] : count[0] * count[1];
  lat.coords_.reserve(total);
  lat.sites_.reserve(total);
  for (long t = 0; t < total; ++t) {
    SiteIndex k{};
    if (dim == 1) {
      k[0] = first[0] + t;
    } else {
      k[0] = first[0] + t / count[1];
      k[1] = first[1] + t % count[1];
    }
    Point p(dim);
    for (int i = 0; i < dim; ++i) p[i] = static_cast<double>(k[i]) / n;
    lat.coords_.push_back(k);
    lat.sites_.push_back(p);
  }
  return lat;
}

Lattice Lattice::from_points(int dim, int n, std::vector<SiteIndex> coords) {
  if (dim < 1 || dim > kMaxDimension) throw ConfigError("Lattice::from_points: bad dimension");
  if (n < 1) throw ConfigError("Lattice::from_points: n must be positive");
  if (coords.empty()) throw ConfigError("Lattice::from_points: no sites");
  std::set<SiteIndex> seen;
  Lattice lat;
  lat.dim_ = dim;
  lat.n_ = n;
  lat.nu_ = std::pow(static_cast<double>(n), -dim);
  lat.lo_ = Point::filled(dim, std::numeric_limits<double>::infinity());
  lat.hi_ = Point::filled(dim, -std::numeric_limits<double>::infinity());
  for (SiteIndex k : coords) {
    for (int i = dim; i < kMaxDimension; ++i) k[i] = 0;
    if (!seen.insert(k).second) throw ConfigError("Lattice::from_points: duplicate site");
    Point p(dim);
    for (int i = 0; i < dim; ++i) {
      p[i] = static_cast<double>(k[i]) / n;
      lat.lo_[i] = std::fmin(lat.lo_[i], p[i]);
      lat.hi_[i] = std::fmax(lat.hi_[i], p[i]);
    }
    lat.coords_.push_back(k);
    lat.sites_.push_back(p);
  }
  return lat;
}

Point Lattice::cell_box_lo() const {
  Point p = Point::filled(dim_, std::numeric_limits<double>::infinity());
  for (const Point& s : sites_)
    for (int i = 0; i < dim_; ++i) p[i] = std::fmin(p[i], s[i]);
  for (int i = 0; i < dim_; ++i) p[i] -= 0.5 * spacing();
  return p;
}

Point Lattice::cell_box_hi() const {
  Point p = Point::filled(dim_, -std::numeric_limits<double>::infinity());
  for (const Point& s : sites_)
    for (int i = 0; i < dim_; ++i) p[i] = std::fmax(p[i], s[i]);
  for (int i = 0; i < dim_; ++i) p[i] += 0.5 * spacing();
  return p;
}

long Lattice::grid_distance(std::size_t i, std::size_t j) const {
  long d = 0;
  for (int a = 0; a < dim_; ++a) d = std::max(d, std::labs(coords_[i][a] - coords_[j][a]));
  return d;
}

std::size_t Lattice::nearest(const Point& x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const double d = distance(sites_[i], x);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::string Lattice::describe() const {
  std::ostringstream os;
  os << "n=" << n_ << ";box=";
  for (int i = 0; i < dim_; ++i) os << (i ? "x" : "") << "[" << lo_[i] << "," << hi_[i] << "]";
  return os.str();
}

}  // namespace jumplab
