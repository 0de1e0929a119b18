#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rdw/error.hpp"

namespace rdw::geom {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// ---- heatmap -----------------------------------------------------------------

/// Dwell counts over the unit viewport, row-major: counts[iy * bins_x + ix].
struct HeatmapGrid {
  std::size_t bins_x = 64;
  std::size_t bins_y = 64;
  std::vector<std::uint64_t> counts;
  std::size_t rejected = 0;

  HeatmapGrid() : HeatmapGrid(64, 64) {}
  HeatmapGrid(std::size_t bx, std::size_t by) : bins_x(bx), bins_y(by), counts(bx * by, 0) {
    require(bx >= 1 && by >= 1, "heatmap needs at least one bin per axis");
  }

  std::uint64_t at(std::size_t ix, std::size_t iy) const { return counts[iy * bins_x + ix]; }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

inline std::size_t bin_of(double v, std::size_t bins) {
  return std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
}

/// Adds points in [0,1]^2 (1.0 falls in the last cell); anything else is counted as rejected.
inline void accumulate(HeatmapGrid& grid, std::span<const Point> points) {
  for (const auto& p : points) {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
      ++grid.rejected;
      continue;
    }
    ++grid.counts[bin_of(p.y, grid.bins_y) * grid.bins_x + bin_of(p.x, grid.bins_x)];
  }
}

inline HeatmapGrid accumulate(std::span<const Point> points, std::size_t bins_x = 64, std::size_t bins_y = 64) {
  HeatmapGrid g(bins_x, bins_y);
  accumulate(g, points);
  return g;
}

/// Nearest-rank percentile of the nonzero cells; nullopt for an empty grid.
inline std::optional<double> dwell_threshold(const HeatmapGrid& grid, double quantile = 0.95) {
  require(quantile > 0.0 && quantile <= 1.0, "dwell quantile must lie in (0,1]");
  std::vector<std::uint64_t> nz;
  for (auto c : grid.counts)
    if (c > 0) nz.push_back(c);
  if (nz.empty()) return std::nullopt;
  std::sort(nz.begin(), nz.end());
  const auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(nz.size())));
  return static_cast<double>(nz[std::max<std::size_t>(rank, 1) - 1]);
}

/// Axis-aligned box in viewport coordinates.
struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  std::size_t cells = 0;

  std::array<Point, 4> corners() const { return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}}; }
};

/// Tight boxes around 4-connected components of cells with count >= threshold,
/// ordered by each component's first cell in row-major order.
inline std::vector<Box> bounding_boxes(const HeatmapGrid& grid, double threshold) {
  require(threshold > 0.0, "bounding_boxes: threshold must be positive");
  const std::size_t w = grid.bins_x, h = grid.bins_y;
  std::vector<char> seen(w * h, 0);
  std::vector<std::size_t> stack;
  std::vector<Box> boxes;
  auto hot = [&](std::size_t i) { return static_cast<double>(grid.counts[i]) >= threshold; };
  for (std::size_t start = 0; start < w * h; ++start) {
    if (seen[start] || !hot(start)) continue;
    std::size_t minx = w, miny = h, maxx = 0, maxy = 0, cells = 0;
    seen[start] = 1;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t ix = i % w, iy = i / w;
      minx = std::min(minx, ix); maxx = std::max(maxx, ix);
      miny = std::min(miny, iy); maxy = std::max(maxy, iy);
      ++cells;
      auto visit = [&](std::size_t j) {
        if (!seen[j] && hot(j)) {
          seen[j] = 1;
          stack.push_back(j);
        }
      };
      if (ix > 0) visit(i - 1);
      if (ix + 1 < w) visit(i + 1);
      if (iy > 0) visit(i - w);
      if (iy + 1 < h) visit(i + w);
    }
    const double sx = 1.0 / static_cast<double>(w), sy = 1.0 / static_cast<double>(h);
    boxes.push_back({static_cast<double>(minx) * sx, static_cast<double>(miny) * sy,
                     static_cast<double>(maxx + 1) * sx, static_cast<double>(maxy + 1) * sy, cells});
  }
  return boxes;
}

// ---- minimum enclosing ellipse ----------------------------------------------------

/// {p : (p - c)^T M (p - c) <= 1}. Degenerate results (a point or a segment) carry the
/// covering segment instead and leave M zero.
struct Ellipse {
  Point center;
  Eigen::Matrix2d shape = Eigen::Matrix2d::Zero();
  bool degenerate = false;
  std::array<Point, 2> segment{};
  std::size_t iterations = 0;

  /// Semi-axes (major, minor) and the major axis angle in degrees, in (-90, 90].
  struct Axes {
    double a = 0.0, b = 0.0, angle_deg = 0.0;
  };

  Axes axes() const {
    if (degenerate) {
      const double dx = segment[1].x - segment[0].x, dy = segment[1].y - segment[0].y;
      return {0.5 * std::hypot(dx, dy), 0.0, normalize_angle(std::atan2(dy, dx) * 180.0 / std::numbers::pi)};
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(shape);
    const auto ev = es.eigenvalues();  // ascending: smallest eigenvalue is the major axis
    const Eigen::Vector2d major = es.eigenvectors().col(0);
    return {1.0 / std::sqrt(ev(0)), 1.0 / std::sqrt(ev(1)),
            normalize_angle(std::atan2(major.y(), major.x()) * 180.0 / std::numbers::pi)};
  }

  double area() const {
    if (degenerate) return 0.0;
    return std::numbers::pi / std::sqrt(shape.determinant());
  }

  /// (p - c)^T M (p - c); for degenerate results, 0 on the segment and +inf elsewhere.
  double level(Point p) const {
    if (degenerate) return on_segment(p) ? 0.0 : std::numeric_limits<double>::infinity();
    const Eigen::Vector2d d(p.x - center.x, p.y - center.y);
    return d.dot(shape * d);
  }

  static Ellipse from_axes(Point c, double a, double b, double angle_deg) {
    require(a > 0.0 && b > 0.0, "ellipse semi-axes must be positive");
    const double t = angle_deg * std::numbers::pi / 180.0;
    Eigen::Matrix2d r;
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    Eigen::Matrix2d d = Eigen::Vector2d(1.0 / (a * a), 1.0 / (b * b)).asDiagonal();
    Ellipse e;
    e.center = c;
    e.shape = r * d * r.transpose();
    return e;
  }

 private:
  static double normalize_angle(double deg) {
    while (deg <= -90.0) deg += 180.0;
    while (deg > 90.0) deg -= 180.0;
    return deg;
  }

  bool on_segment(Point p) const {
    const double dx = segment[1].x - segment[0].x, dy = segment[1].y - segment[0].y;
    const double len2 = dx * dx + dy * dy;
    const double scale = std::max({1.0, std::abs(p.x), std::abs(p.y)});
    if (len2 == 0.0) return std::hypot(p.x - segment[0].x, p.y - segment[0].y) <= 1e-12 * scale;
    const double s = std::clamp(((p.x - segment[0].x) * dx + (p.y - segment[0].y) * dy) / len2, 0.0, 1.0);
    return std::hypot(segment[0].x + s * dx - p.x, segment[0].y + s * dy - p.y) <= 1e-9 * scale;
  }
};

struct EllipseOptions {
  double tolerance = 1e-7;
  std::size_t max_iterations = 1'000'000;
  /// Points within this relative distance of a line count as collinear.
  double collinear_tolerance = 1e-12;
};

namespace detail {

/// Covering segment when all points lie on one line (or coincide); nullopt otherwise.
inline std::optional<std::array<Point, 2>> collinear_cover(std::span<const Point> pts, double tol) {
  std::size_t far_i = 0, far_j = 0;
  double best = -1.0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double d = std::hypot(pts[j].x - pts[0].x, pts[j].y - pts[0].y);
    if (d > best) { best = d; far_j = j; }
  }
  best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = std::hypot(pts[i].x - pts[far_j].x, pts[i].y - pts[far_j].y);
    if (d > best) { best = d; far_i = i; }
  }
  const Point a = pts[far_j], b = pts[far_i];
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  if (len == 0.0) return std::array<Point, 2>{a, a};
  const double ux = (b.x - a.x) / len, uy = (b.y - a.y) / len;
  double lo = 0.0, hi = 0.0;
  for (const auto& p : pts) {
    const double rx = p.x - a.x, ry = p.y - a.y;
    if (std::abs(rx * uy - ry * ux) > tol * len) return std::nullopt;
    const double s = rx * ux + ry * uy;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return std::array<Point, 2>{Point{a.x + lo * ux, a.y + lo * uy}, Point{a.x + hi * ux, a.y + hi * uy}};
}

}  // namespace detail

/// Minimum-area enclosing ellipse by Khachiyan's barycentric iteration with
/// Todd-Yildirim away steps, then rescaled so the farthest input point lies on the boundary.
inline Ellipse min_enclosing_ellipse(std::span<const Point> pts, const EllipseOptions& opt = {}) {
  require(!pts.empty(), "min_enclosing_ellipse needs at least one point");
  for (const auto& p : pts) require(std::isfinite(p.x) && std::isfinite(p.y), "ellipse points must be finite");

  if (auto seg = detail::collinear_cover(pts, opt.collinear_tolerance)) {
    Ellipse e;
    e.degenerate = true;
    e.segment = *seg;
    e.center = {0.5 * ((*seg)[0].x + (*seg)[1].x), 0.5 * ((*seg)[0].y + (*seg)[1].y)};
    return e;
  }

  // Work in coordinates centred on the centroid and scaled to unit spread.
  const std::size_t n = pts.size();
  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) { mx += p.x; my += p.y; }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max({scale, std::abs(p.x - mx), std::abs(p.y - my)});
  Eigen::Matrix<double, 3, Eigen::Dynamic> q(3, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    q.col(static_cast<Eigen::Index>(i)) << (pts[i].x - mx) / scale, (pts[i].y - my) / scale, 1.0;

  constexpr double dim = 3.0;  // lifted dimension
  Eigen::VectorXd u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  Eigen::VectorXd m(static_cast<Eigen::Index>(n));
  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    const Eigen::Matrix3d x = q * u.asDiagonal() * q.transpose();
    const Eigen::Matrix3d xi = x.inverse();
    m = (q.transpose() * xi * q).diagonal();

    Eigen::Index up = 0;
    const double kmax = m.maxCoeff(&up);
    Eigen::Index down = -1;
    double kmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m.size(); ++i)
      if (u(i) > 0.0 && m(i) < kmin) { kmin = m(i); down = i; }

    const double eps_up = kmax / dim - 1.0;
    const double eps_down = 1.0 - kmin / dim;
    if (eps_up <= opt.tolerance && eps_down <= opt.tolerance) break;

    if (eps_up >= eps_down) {
      const double a = (kmax - dim) / (dim * (kmax - 1.0));
      u *= 1.0 - a;
      u(up) += a;
    } else {
      double a = (kmin - dim) / (dim * (kmin - 1.0));  // negative
      a = std::max(a, -u(down) / (1.0 - u(down)));
      u *= 1.0 - a;
      u(down) += a;
      if (u(down) < 0.0) u(down) = 0.0;
    }
  }

  const Eigen::Matrix<double, 2, Eigen::Dynamic> p = q.topRows<2>();
  const Eigen::Vector2d c = p * u;
  const Eigen::Matrix2d cov = p * u.asDiagonal() * p.transpose() - c * c.transpose();
  Eigen::Matrix2d shape = cov.inverse() / 2.0;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    const Eigen::Vector2d d = p.col(i) - c;
    worst = std::max(worst, d.dot(shape * d));
  }
  shape /= worst;

  Ellipse e;
  e.center = {c.x() * scale + mx, c.y() * scale + my};
  e.shape = shape / (scale * scale);
  e.shape = 0.5 * (e.shape + e.shape.transpose()).eval();
  e.iterations = it;
  return e;
}

}  // namespace rdw::geom
