#pragma once

// Independent oracles used by the test suites. These deliberately avoid the
// library's production code paths: full enumerations instead of windowed
// loops, point sampling instead of polygon clipping, a per-threshold sweep
// instead of a cumulative PR pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "dsv/analytics.hpp"
#include "dsv/geom.hpp"
#include "dsv/grid.hpp"

namespace oracles {

// Full-grid enumeration of voxel centers inside the box.
inline std::int64_t occupancy_voxel_bruteforce(const dsv::Box3D& box,
                                               const dsv::VoxelGridSpec& spec) {
  std::int64_t count = 0;
  for (int ix = 0; ix < spec.dims[0]; ++ix)
    for (int iy = 0; iy < spec.dims[1]; ++iy)
      for (int iz = 0; iz < spec.dims[2]; ++iz)
        if (dsv::box_contains(box, dsv::voxel_center(spec, ix, iy, iz))) ++count;
  return count;
}

// Full enumeration of frustum cell centers inside the box.
inline std::int64_t occupancy_frustum_bruteforce(const dsv::Box3D& box,
                                                 const dsv::FrustumSpec& spec,
                                                 const dsv::CameraModel& cam) {
  std::int64_t count = 0;
  for (int k = 0; k < spec.planes(); ++k)
    for (int v = 0; v < spec.rows; ++v)
      for (int u = 0; u < spec.cols; ++u)
        if (dsv::box_contains(box, dsv::unproject(cam, (u + 0.5) * spec.stride,
                                                  (v + 0.5) * spec.stride,
                                                  spec.depth_planes[k])))
          ++count;
  return count;
}

// Deterministic low-discrepancy point set over box a's footprint; the
// intersection fraction estimates the overlap area.
inline double iou_bev_sampling(const dsv::Box3D& a, const dsv::Box3D& b,
                               std::int64_t samples = 1000000) {
  auto halton = [](std::int64_t i, int base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
      f /= base;
      r += f * double(i % base);
      i /= base;
    }
    return r;
  };
  const double ca = std::cos(a.yaw), sa = std::sin(a.yaw);
  std::int64_t hits = 0;
  for (std::int64_t i = 1; i <= samples; ++i) {
    const double lx = (halton(i, 2) - 0.5) * a.length;
    const double lz = (halton(i, 3) - 0.5) * a.width;
    const dsv::Vec3 p = {a.center.x + ca * lx + sa * lz, b.center.y,
                         a.center.z - sa * lx + ca * lz};
    const double dx = p.x - b.center.x, dz = p.z - b.center.z;
    const double cb = std::cos(b.yaw), sb = std::sin(b.yaw);
    const double bx = cb * dx - sb * dz;
    const double bz = sb * dx + cb * dz;
    if (std::abs(bx) <= 0.5 * b.length && std::abs(bz) <= 0.5 * b.width) ++hits;
  }
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  const double inter = area_a * double(hits) / double(samples);
  return inter <= 0.0 ? 0.0 : inter / (area_a + area_b - inter);
}

// AP|R40 by enumerating every score threshold from scratch: at each
// threshold the retained detections are matched greedily, giving one PR
// point; precision is right-interpolated over the same 40 recall positions.
template <class IouFn>
double ap_r40_threshold_sweep(std::span<const dsv::Detection> dets,
                              std::span<const dsv::Box3D> gts, IouFn&& iou, double threshold) {
  std::vector<double> scores;
  for (const auto& d : dets) scores.push_back(*d.box.score);
  std::sort(scores.begin(), scores.end(), std::greater<>());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<double> precision, recall;
  for (const double t : scores) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < dets.size(); ++i)
      if (*dets[i].box.score >= t) keep.push_back(i);
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t x, std::size_t y) {
      return *dets[x].box.score > *dets[y].box.score;
    });
    std::vector<char> used(gts.size(), 0);
    std::int64_t tp = 0, fp = 0;
    for (const std::size_t di : keep) {
      double best = -1.0;
      std::size_t best_gt = 0;
      for (std::size_t gi = 0; gi < gts.size(); ++gi) {
        if (used[gi]) continue;
        const double v = iou(dets[di].box, gts[gi]);
        if (v > best) {
          best = v;
          best_gt = gi;
        }
      }
      if (best >= threshold) {
        used[best_gt] = 1;
        ++tp;
      } else {
        ++fp;
      }
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

}  // namespace oracles
