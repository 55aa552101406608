#pragma once

// Cross-space resampling between camera-frustum and voxel volumes, channel
// concatenation of co-registered volumes, and soft-argmin depth regression
// from a single-channel frustum cost volume.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dsv/geom.hpp"
#include "dsv/grid.hpp"

namespace dsv {

/// Per-pixel metric depth at image resolution. 0 marks an invalid pixel;
/// all valid values are positive and finite.
struct DepthMap {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int rows_, int cols_) : rows(rows_), cols(cols_) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("DepthMap: bad dimensions");
    values.assign(std::size_t(rows) * cols, 0.0f);
  }

  float& at(int r, int c) { return values[std::size_t(r) * cols + c]; }
  float at(int r, int c) const { return values[std::size_t(r) * cols + c]; }
};

/// Resamples a frustum volume onto a voxel lattice: each voxel center
/// projects to (u, v, z) and trilinearly samples the volume at
/// (v/stride, u/stride, plane_position(z)). Voxels behind the camera or
/// outside the frustum are zero.
inline VoxelVolume frustum_to_voxel(const FrustumVolume& fv, const CameraModel& cam,
                                    const VoxelGridSpec& vspec) {
  VoxelVolume out(vspec, fv.channels);
  std::vector<int> channels(fv.channels);
  std::iota(channels.begin(), channels.end(), 0);
  const double stride = fv.spec.stride;
  for (int ix = 0; ix < vspec.dims[0]; ++ix) {
    for (int iy = 0; iy < vspec.dims[1]; ++iy) {
      for (int iz = 0; iz < vspec.dims[2]; ++iz) {
        const Vec3 center = voxel_center(vspec, ix, iy, iz);
        if (!(center.z > 0.0)) continue;
        const Projection p = project(cam, center);
        trilinear_gather(fv, p.v / stride, p.u / stride, fv.spec.plane_position(p.depth),
                         channels, &out.data[out.offset(ix, iy, iz)]);
      }
    }
  }
  return out;
}

/// Resamples a voxel volume into frustum shape: cell (v, u, k) unprojects
/// (u*stride, v*stride, d_k) to 3D and trilinearly samples the voxel grid at
/// the fractional voxel index. Cells mapping outside the grid are zero.
inline FrustumVolume voxel_to_frustum(const VoxelVolume& vv, const CameraModel& cam,
                                      const FrustumSpec& fspec) {
  FrustumVolume out(fspec, vv.channels);
  std::vector<int> channels(vv.channels);
  std::iota(channels.begin(), channels.end(), 0);
  for (int r = 0; r < fspec.rows; ++r) {
    for (int c = 0; c < fspec.cols; ++c) {
      float* cell = &out.data[out.offset(r, c, 0)];
      for (int k = 0; k < fspec.planes(); ++k, cell += vv.channels) {
        const Vec3 p =
            unproject(cam, c * fspec.stride, r * fspec.stride, fspec.depth_planes[k]);
        const Vec3 idx = voxel_fractional_index(vv.spec, p);
        trilinear_gather(vv, idx.x, idx.y, idx.z, channels, cell);
      }
    }
  }
  return out;
}

/// Channel-wise concatenation of two volumes on the same lattice; `a` first.
inline VoxelVolume integrate(const VoxelVolume& a, const VoxelVolume& b) {
  if (!(a.spec == b.spec)) throw std::domain_error("integrate: voxel grid specs differ");
  VoxelVolume out(a.spec, a.channels + b.channels);
  const std::size_t cells = std::size_t(a.spec.dims[0]) * a.spec.dims[1] * a.spec.dims[2];
  for (std::size_t i = 0; i < cells; ++i) {
    float* dst = &out.data[i * out.channels];
    std::copy_n(&a.data[i * a.channels], a.channels, dst);
    std::copy_n(&b.data[i * b.channels], b.channels, dst + a.channels);
  }
  return out;
}

/// Per-cell channel reduction to a single-channel volume.
template <class Reducer>
FrustumVolume reduce_channels(const FrustumVolume& vol, Reducer&& reduce) {
  FrustumVolume out(vol.spec, 1);
  const std::size_t cells = vol.data.size() / vol.channels;
  for (std::size_t i = 0; i < cells; ++i)
    out.data[i] = reduce(std::span<const float>(&vol.data[i * vol.channels],
                                                std::size_t(vol.channels)));
  return out;
}

/// Default reducer: mean over channels.
inline FrustumVolume mean_channels(const FrustumVolume& vol) {
  return reduce_channels(vol, [](std::span<const float> ch) {
    double acc = 0.0;
    for (float v : ch) acc += v;
    return float(acc / double(ch.size()));
  });
}

namespace detail {

// Bilinear resize with edge clamping; used for upsampling regressed depth,
// where zero-fill would drag border values below the plane range.
inline void resize_bilinear_clamped(const float* src, int in_rows, int in_cols, float* dst,
                                    int out_rows, int out_cols) {
  for (int r = 0; r < out_rows; ++r) {
    double sv = (r + 0.5) * double(in_rows) / double(out_rows) - 0.5;
    sv = std::min(std::max(sv, 0.0), double(in_rows - 1));
    const int y0 = int(std::floor(sv));
    const int y1 = std::min(y0 + 1, in_rows - 1);
    const double wy = sv - y0;
    for (int c = 0; c < out_cols; ++c) {
      double su = (c + 0.5) * double(in_cols) / double(out_cols) - 0.5;
      su = std::min(std::max(su, 0.0), double(in_cols - 1));
      const int x0 = int(std::floor(su));
      const int x1 = std::min(x0 + 1, in_cols - 1);
      const double wx = su - x0;
      const double top = (1.0 - wx) * src[std::size_t(y0) * in_cols + x0] +
                         wx * src[std::size_t(y0) * in_cols + x1];
      const double bot = (1.0 - wx) * src[std::size_t(y1) * in_cols + x0] +
                         wx * src[std::size_t(y1) * in_cols + x1];
      dst[std::size_t(r) * out_cols + c] = float((1.0 - wy) * top + wy * bot);
    }
  }
}

}  // namespace detail

/// Soft-argmin depth from a single-channel cost volume: per pixel the
/// normalized exponentials of the plane logits weight the plane depths, and
/// the result is bilinearly upsampled to the requested resolution. Output
/// always lies within [min plane depth, max plane depth].
inline DepthMap cost_to_depth(const FrustumVolume& logits, int out_rows, int out_cols) {
  if (logits.channels != 1) throw std::invalid_argument("cost_to_depth: expected 1 channel");
  if (out_rows < 1 || out_cols < 1) throw std::invalid_argument("cost_to_depth: bad output size");
  const FrustumSpec& spec = logits.spec;
  const int planes = spec.planes();
  std::vector<float> depth_lowres(std::size_t(spec.rows) * spec.cols);
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const float* cell = &logits.data[logits.offset(r, c, 0)];
      double peak = cell[0];
      for (int k = 1; k < planes; ++k) peak = std::max(peak, double(cell[k]));
      double norm = 0.0, acc = 0.0;
      for (int k = 0; k < planes; ++k) {
        const double w = std::exp(double(cell[k]) - peak);
        norm += w;
        acc += w * spec.depth_planes[k];
      }
      depth_lowres[std::size_t(r) * spec.cols + c] = float(acc / norm);
    }
  }
  DepthMap out(out_rows, out_cols);
  if (out_rows == spec.rows && out_cols == spec.cols)
    out.values = std::move(depth_lowres);
  else
    detail::resize_bilinear_clamped(depth_lowres.data(), spec.rows, spec.cols,
                                    out.values.data(), out_rows, out_cols);
  return out;
}

/// Mean absolute error over pixels where the ground truth is valid and the
/// optional mask is nonzero. Throws if no pixel qualifies.
inline double depth_l1(const DepthMap& pred, const DepthMap& gt,
                       std::span<const std::uint8_t> mask = {}) {
  if (pred.rows != gt.rows || pred.cols != gt.cols)
    throw std::invalid_argument("depth_l1: shape mismatch");
  if (!mask.empty() && mask.size() != gt.values.size())
    throw std::invalid_argument("depth_l1: mask size mismatch");
  double acc = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (gt.values[i] <= 0.0f) continue;
    if (!mask.empty() && !mask[i]) continue;
    acc += std::abs(double(pred.values[i]) - double(gt.values[i]));
    ++n;
  }
  if (n == 0) throw std::domain_error("depth_l1: no valid pixels");
  return acc / double(n);
}

}  // namespace dsv
