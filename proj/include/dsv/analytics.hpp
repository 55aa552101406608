#pragma once

// Evaluation and analysis: voxel-occupancy profiles of frustum vs metric
// volumes, foreground depth error by distance, rotated-box IoU, and average
// precision at 40 recall positions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "dsv/dualview.hpp"
#include "dsv/geom.hpp"
#include "dsv/grid.hpp"
#include "dsv/scene.hpp"

namespace dsv {

/// Voxel centers falling inside the rotated box.
inline std::int64_t occupancy_voxel(const Box3D& box, const VoxelGridSpec& spec) {
  const auto corners = box_corners(box);
  Vec3 lo = corners[0], hi = corners[0];
  for (const Vec3& c : corners) {
    lo = {std::min(lo.x, c.x), std::min(lo.y, c.y), std::min(lo.z, c.z)};
    hi = {std::max(hi.x, c.x), std::max(hi.y, c.y), std::max(hi.z, c.z)};
  }
  const Vec3 flo = voxel_fractional_index(spec, lo);
  const Vec3 fhi = voxel_fractional_index(spec, hi);
  const auto lo_i = [](double f) { return int(std::floor(f)) - 1; };
  const auto hi_i = [](double f) { return int(std::ceil(f)) + 1; };
  const int x0 = std::max(lo_i(flo.x), 0), x1 = std::min(hi_i(fhi.x), spec.dims[0] - 1);
  const int y0 = std::max(lo_i(flo.y), 0), y1 = std::min(hi_i(fhi.y), spec.dims[1] - 1);
  const int z0 = std::max(lo_i(flo.z), 0), z1 = std::min(hi_i(fhi.z), spec.dims[2] - 1);
  std::int64_t count = 0;
  for (int ix = x0; ix <= x1; ++ix)
    for (int iy = y0; iy <= y1; ++iy)
      for (int iz = z0; iz <= z1; ++iz)
        if (box_contains(box, voxel_center(spec, ix, iy, iz))) ++count;
  return count;
}

/// Frustum cells whose unprojected center — pixel (u + 0.5, v + 0.5) at
/// feature resolution, depth d_k — lies inside the rotated box.
inline std::int64_t occupancy_frustum(const Box3D& box, const FrustumSpec& spec,
                                      const CameraModel& cam) {
  const auto corners = box_corners(box);
  double zlo = corners[0].z, zhi = corners[0].z;
  bool front = true;
  for (const Vec3& c : corners) {
    zlo = std::min(zlo, c.z);
    zhi = std::max(zhi, c.z);
    front = front && c.z > 0.0;
  }
  if (!(zhi > 0.0)) return 0;

  int u0 = 0, u1 = spec.cols - 1, v0 = 0, v1 = spec.rows - 1;
  if (front) {
    // Restrict the search window to the projected hull; a cell center inside
    // the box projects inside the hull.
    double hx0 = 0, hx1 = 0, hy0 = 0, hy1 = 0;
    for (int i = 0; i < 8; ++i) {
      const Projection p = project(cam, corners[i]);
      const double fu = p.u / spec.stride, fv = p.v / spec.stride;
      if (i == 0) {
        hx0 = hx1 = fu;
        hy0 = hy1 = fv;
      } else {
        hx0 = std::min(hx0, fu);
        hx1 = std::max(hx1, fu);
        hy0 = std::min(hy0, fv);
        hy1 = std::max(hy1, fv);
      }
    }
    u0 = std::max(int(std::floor(hx0)) - 1, 0);
    u1 = std::min(int(std::ceil(hx1)) + 1, spec.cols - 1);
    v0 = std::max(int(std::floor(hy0)) - 1, 0);
    v1 = std::min(int(std::ceil(hy1)) + 1, spec.rows - 1);
  }
  std::int64_t count = 0;
  for (int k = 0; k < spec.planes(); ++k) {
    const double d = spec.depth_planes[k];
    if (d < zlo || d > zhi) continue;
    for (int v = v0; v <= v1; ++v)
      for (int u = u0; u <= u1; ++u)
        if (box_contains(box, unproject(cam, (u + 0.5) * spec.stride, (v + 0.5) * spec.stride, d)))
          ++count;
  }
  return count;
}

/// One labeled box's occupancy in both volume types; counts are capped for
/// profile output.
struct OccupancyRecord {
  int class_id = 0;
  double depth_m = 0.0;  // box center z
  std::int64_t psv_count = 0;
  std::int64_t tdgv_count = 0;
};

inline std::vector<OccupancyRecord> occupancy_profile(std::span<const Scene> scenes,
                                                      const FrustumSpec& fspec,
                                                      const VoxelGridSpec& vspec,
                                                      std::int64_t cap = 600) {
  std::vector<OccupancyRecord> records;
  for (const Scene& scene : scenes) {
    for (const Box3D& box : scene.boxes) {
      OccupancyRecord rec;
      rec.class_id = box.class_id;
      rec.depth_m = box.center.z;
      rec.psv_count = std::min(occupancy_frustum(box, fspec, scene.rig.left), cap);
      rec.tdgv_count = std::min(occupancy_voxel(box, vspec), cap);
      records.push_back(rec);
    }
  }
  return records;
}

/// Per-class depth-bin means over profile records.
struct OccupancyBin {
  int class_id = 0;
  double depth_lo = 0.0, depth_hi = 0.0;
  double mean_psv = 0.0, mean_tdgv = 0.0;
  std::int64_t boxes = 0;
};

inline std::vector<OccupancyBin> aggregate_occupancy(std::span<const OccupancyRecord> records,
                                                     double bin_width = 5.0) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("aggregate_occupancy: bin width");
  std::map<std::pair<int, int>, OccupancyBin> bins;
  for (const auto& rec : records) {
    const int b = int(std::floor(rec.depth_m / bin_width));
    auto& bin = bins[{rec.class_id, b}];
    if (bin.boxes == 0) {
      bin.class_id = rec.class_id;
      bin.depth_lo = b * bin_width;
      bin.depth_hi = (b + 1) * bin_width;
    }
    bin.mean_psv += double(rec.psv_count);
    bin.mean_tdgv += double(rec.tdgv_count);
    bin.boxes += 1;
  }
  std::vector<OccupancyBin> out;
  out.reserve(bins.size());
  for (auto& [key, bin] : bins) {
    bin.mean_psv /= double(bin.boxes);
    bin.mean_tdgv /= double(bin.boxes);
    out.push_back(bin);
  }
  return out;
}

struct DepthErrorBin {
  double lo = 0.0, hi = 0.0;
  double mae_m = 0.0;
  std::int64_t pixels = 0;
};

struct DepthErrorReport {
  std::vector<DepthErrorBin> bins;  // populated bins only
  double overall_mae = 0.0;
  std::int64_t overall_pixels = 0;
};

/// Mean absolute depth error restricted to pixels whose ground-truth point
/// unprojects inside one of the boxes, bucketed by ground-truth depth.
inline DepthErrorReport foreground_depth_error(const DepthMap& pred, const DepthMap& gt,
                                               std::span<const Box3D> boxes,
                                               const CameraModel& cam,
                                               std::span<const double> bin_edges) {
  if (pred.rows != gt.rows || pred.cols != gt.cols)
    throw std::invalid_argument("foreground_depth_error: shape mismatch");
  for (std::size_t i = 1; i < bin_edges.size(); ++i)
    if (!(bin_edges[i] > bin_edges[i - 1]))
      throw std::invalid_argument("foreground_depth_error: bin edges must increase");

  const int nbins = bin_edges.size() < 2 ? 0 : int(bin_edges.size()) - 1;
  std::vector<double> acc(nbins, 0.0);
  std::vector<std::int64_t> cnt(nbins, 0);
  DepthErrorReport report;
  double overall = 0.0;
  for (int r = 0; r < gt.rows; ++r) {
    for (int c = 0; c < gt.cols; ++c) {
      const float d = gt.at(r, c);
      if (d <= 0.0f) continue;
      const Vec3 p = unproject(cam, double(c), double(r), double(d));
      bool fg = false;
      for (const Box3D& box : boxes)
        if (box_contains(box, p)) {
          fg = true;
          break;
        }
      if (!fg) continue;
      const double err = std::abs(double(pred.at(r, c)) - double(d));
      overall += err;
      report.overall_pixels += 1;
      if (nbins > 0 && d >= bin_edges.front() && d < bin_edges.back()) {
        const int b = int(std::upper_bound(bin_edges.begin(), bin_edges.end(), double(d)) -
                          bin_edges.begin()) - 1;
        acc[b] += err;
        cnt[b] += 1;
      }
    }
  }
  if (report.overall_pixels > 0) report.overall_mae = overall / double(report.overall_pixels);
  for (int b = 0; b < nbins; ++b)
    if (cnt[b] > 0)
      report.bins.push_back({bin_edges[b], bin_edges[b + 1], acc[b] / double(cnt[b]), cnt[b]});
  return report;
}

namespace detail {

using Poly = std::vector<Vec2>;

// Bottom-face footprint in the x-z plane, counter-clockwise.
inline Poly bev_rect(const Box3D& box) {
  const auto corners = box_corners(box);
  Poly p(4);
  for (int i = 0; i < 4; ++i) p[i] = {corners[i].x, corners[i].z};
  return p;
}

inline double polygon_area(const Poly& poly) {
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(acc);
}

// Sutherland-Hodgman clip of a convex subject by a convex CCW clipper.
inline Poly clip_convex(const Poly& subject, const Poly& clipper) {
  Poly poly = subject;
  for (std::size_t i = 0; i < clipper.size() && !poly.empty(); ++i) {
    const Vec2 a = clipper[i];
    const Vec2 b = clipper[(i + 1) % clipper.size()];
    const double ex = b.x - a.x, ey = b.y - a.y;
    auto side = [&](const Vec2& p) { return ex * (p.y - a.y) - ey * (p.x - a.x); };
    Poly next;
    next.reserve(poly.size() + 1);
    for (std::size_t j = 0; j < poly.size(); ++j) {
      const Vec2 cur = poly[j];
      const Vec2 prev = poly[(j + poly.size() - 1) % poly.size()];
      const double sc = side(cur), sp = side(prev);
      if (sp >= 0.0) {
        if (sc >= 0.0) {
          next.push_back(cur);
        } else {
          const double t = sp / (sp - sc);
          next.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
        }
      } else if (sc >= 0.0) {
        const double t = sp / (sp - sc);
        next.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
        next.push_back(cur);
      }
    }
    poly = std::move(next);
  }
  return poly;
}

inline double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const Poly clipped = clip_convex(bev_rect(a), bev_rect(b));
  return clipped.size() < 3 ? 0.0 : polygon_area(clipped);
}

}  // namespace detail

/// Area IoU of the yaw-rotated footprints in the x-z plane.
inline double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = detail::bev_intersection_area(a, b);
  if (!(inter > 0.0)) return 0.0;
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

/// Volume IoU: footprint intersection times vertical overlap.
inline double iou_3d(const Box3D& a, const Box3D& b) {
  const double ya0 = a.center.y - 0.5 * a.height, ya1 = a.center.y + 0.5 * a.height;
  const double yb0 = b.center.y - 0.5 * b.height, yb1 = b.center.y + 0.5 * b.height;
  const double overlap = std::min(ya1, yb1) - std::max(ya0, yb0);
  if (!(overlap > 0.0)) return 0.0;
  const double inter = detail::bev_intersection_area(a, b) * overlap;
  if (!(inter > 0.0)) return 0.0;
  const double vol_a = a.length * a.width * a.height;
  const double vol_b = b.length * b.width * b.height;
  return std::clamp(inter / (vol_a + vol_b - inter), 0.0, 1.0);
}

struct Detection {
  Box3D box;  // box.score must be set
  int class_id = 0;
};

/// Average precision over 40 evenly spaced recall positions with
/// right-interpolated precision. Matching is greedy in descending score;
/// each ground truth matches at most once and a match requires
/// iou >= threshold.
template <class IouFn>
double ap_r40(std::span<const Detection> dets, std::span<const Box3D> gts, IouFn&& iou,
              double threshold) {
  if (gts.empty()) throw std::domain_error("ap_r40: no ground-truth boxes");
  for (const Detection& d : dets)
    if (!d.box.score) throw std::invalid_argument("ap_r40: detection without score");

  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *dets[a].box.score > *dets[b].box.score;
  });

  std::vector<char> gt_used(gts.size(), 0);
  std::vector<double> precision, recall;
  precision.reserve(dets.size());
  recall.reserve(dets.size());
  std::int64_t tp = 0, fp = 0;
  for (const std::size_t di : order) {
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_used[gi]) continue;
      const double v = iou(dets[di].box, gts[gi]);
      if (v > best) {
        best = v;
        best_gt = gi;
      }
    }
    if (best >= threshold) {
      gt_used[best_gt] = 1;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(double(tp) / double(tp + fp));
    recall.push_back(double(tp) / double(gts.size()));
  }

  double ap = 0.0;
  for (int i = 1; i <= 40; ++i) {
    const double r = double(i) / 40.0;
    double p = 0.0;
    for (std::size_t j = 0; j < precision.size(); ++j)
      if (recall[j] >= r) p = std::max(p, precision[j]);
    ap += p;
  }
  return ap / 40.0;
}

inline double ap_r40_bev(std::span<const Detection> dets, std::span<const Box3D> gts,
                         double threshold) {
  return ap_r40(dets, gts, [](const Box3D& a, const Box3D& b) { return iou_bev(a, b); },
                threshold);
}

inline double ap_r40_3d(std::span<const Detection> dets, std::span<const Box3D> gts,
                        double threshold) {
  return ap_r40(dets, gts, [](const Box3D& a, const Box3D& b) { return iou_3d(a, b); },
                threshold);
}

}  // namespace dsv
