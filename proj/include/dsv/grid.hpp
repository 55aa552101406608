#pragma once

// Dense real-valued grids: 2D feature maps, camera-frustum volumes and
// metric voxel volumes, plus the bilinear/trilinear samplers they share.
//
// Storage is 32-bit float with the channel index innermost, so a per-cell
// channel window is one contiguous run. Sampling accumulates in double.
// Out-of-bounds neighbors contribute zero (zero-fill, not clamp): a cell
// that projects outside its source must receive no feature.

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dsv/geom.hpp"

namespace dsv {

/// Dense (rows, cols, channels) grid, row-major, channel innermost.
struct FeatureMap2D {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<float> data;

  FeatureMap2D() = default;
  FeatureMap2D(int rows_, int cols_, int channels_)
      : rows(rows_), cols(cols_), channels(channels_) {
    if (rows < 1 || cols < 1 || channels < 1)
      throw std::invalid_argument("FeatureMap2D: dimensions must be positive");
    data.assign(std::size_t(rows) * cols * channels, 0.0f);
  }

  std::size_t offset(int r, int c) const { return (std::size_t(r) * cols + c) * channels; }
  float& at(int r, int c, int ch) { return data[offset(r, c) + ch]; }
  float at(int r, int c, int ch) const { return data[offset(r, c) + ch]; }
};

/// Geometry of a camera-frustum volume: feature-resolution image plane plus
/// an ordered set of depth planes. `stride` is the image-pixel extent of one
/// feature cell (4 for quarter-resolution features).
struct FrustumSpec {
  int rows = 0;
  int cols = 0;
  double stride = 1.0;
  std::vector<double> depth_planes;  // meters, strictly increasing, all > 0

  FrustumSpec() = default;
  FrustumSpec(int rows_, int cols_, double stride_, std::vector<double> planes)
      : rows(rows_), cols(cols_), stride(stride_), depth_planes(std::move(planes)) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("FrustumSpec: bad image dims");
    if (!(stride >= 1.0)) throw std::invalid_argument("FrustumSpec: stride must be >= 1");
    if (depth_planes.empty()) throw std::invalid_argument("FrustumSpec: no depth planes");
    for (std::size_t i = 0; i < depth_planes.size(); ++i) {
      if (!(depth_planes[i] > 0.0)) throw std::invalid_argument("FrustumSpec: planes must be > 0");
      if (i > 0 && !(depth_planes[i] > depth_planes[i - 1]))
        throw std::invalid_argument("FrustumSpec: planes must be strictly increasing");
    }
  }

  int planes() const { return int(depth_planes.size()); }

  /// Fractional plane index of a metric depth; linear within a plane
  /// interval and linearly extrapolated beyond the ends, so values outside
  /// the swept range land outside [0, planes-1].
  double plane_position(double depth) const {
    const auto& d = depth_planes;
    const int n = planes();
    if (n == 1) return depth - d[0];
    int lo = 0;
    if (depth >= d[n - 2]) {
      lo = n - 2;
    } else if (depth > d[0]) {
      int hi = n - 2;
      while (lo < hi) {  // largest lo with d[lo] <= depth
        const int mid = (lo + hi + 1) / 2;
        if (d[mid] <= depth) lo = mid; else hi = mid - 1;
      }
    }
    return lo + (depth - d[lo]) / (d[lo + 1] - d[lo]);
  }
};

inline std::vector<double> uniform_depth_planes(int count, double z_min, double z_max) {
  if (count < 1 || !(z_min > 0.0) || !(z_max > z_min))
    throw std::invalid_argument("uniform_depth_planes: bad range");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = z_min;
    return out;
  }
  for (int i = 0; i < count; ++i)
    out[i] = z_min + (z_max - z_min) * double(i) / double(count - 1);
  return out;
}

/// Planes evenly spaced in disparity between z_min and z_max.
/// `focal_baseline` is f_u * baseline of the rig the volume belongs to.
inline std::vector<double> uniform_disparity_planes(int count, double z_min, double z_max,
                                                    double focal_baseline) {
  if (count < 1 || !(z_min > 0.0) || !(z_max > z_min) || !(focal_baseline > 0.0))
    throw std::invalid_argument("uniform_disparity_planes: bad range");
  const double d_near = focal_baseline / z_min;
  const double d_far = focal_baseline / z_max;
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = z_min;
    return out;
  }
  for (int i = 0; i < count; ++i) {
    const double disp = d_near + (d_far - d_near) * double(i) / double(count - 1);
    out[i] = focal_baseline / disp;
  }
  out.front() = z_min;  // cancel roundoff at the exact endpoints
  out.back() = z_max;
  return out;
}

/// (row, col, plane, channel) grid over a FrustumSpec.
struct FrustumVolume {
  FrustumSpec spec;
  int channels = 0;
  std::vector<float> data;

  FrustumVolume() = default;
  FrustumVolume(FrustumSpec spec_, int channels_) : spec(std::move(spec_)), channels(channels_) {
    if (channels < 1) throw std::invalid_argument("FrustumVolume: channels must be positive");
    data.assign(std::size_t(spec.rows) * spec.cols * spec.planes() * channels, 0.0f);
  }

  int planes() const { return spec.planes(); }
  std::size_t offset(int r, int c, int k) const {
    return ((std::size_t(r) * spec.cols + c) * spec.planes() + k) * channels;
  }
  float& at(int r, int c, int k, int ch) { return data[offset(r, c, k) + ch]; }
  float at(int r, int c, int k, int ch) const { return data[offset(r, c, k) + ch]; }
};

/// Axis-aligned voxel lattice in metric camera space. `origin` is the
/// minimum corner of voxel (0,0,0); centers sit at origin + (i + 0.5) * size.
struct VoxelGridSpec {
  Vec3 origin;
  Vec3 voxel_size = {1.0, 1.0, 1.0};
  std::array<int, 3> dims = {1, 1, 1};  // (nx, ny, nz)

  VoxelGridSpec() = default;
  VoxelGridSpec(Vec3 origin_, Vec3 size_, std::array<int, 3> dims_)
      : origin(origin_), voxel_size(size_), dims(dims_) {
    if (!(voxel_size.x > 0.0) || !(voxel_size.y > 0.0) || !(voxel_size.z > 0.0))
      throw std::invalid_argument("VoxelGridSpec: voxel size must be positive");
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
      throw std::invalid_argument("VoxelGridSpec: dims must be >= 1");
  }

  bool operator==(const VoxelGridSpec& o) const {
    return origin.x == o.origin.x && origin.y == o.origin.y && origin.z == o.origin.z &&
           voxel_size.x == o.voxel_size.x && voxel_size.y == o.voxel_size.y &&
           voxel_size.z == o.voxel_size.z && dims == o.dims;
  }
};

inline Vec3 voxel_center(const VoxelGridSpec& spec, int ix, int iy, int iz) {
  if (ix < 0 || iy < 0 || iz < 0 || ix >= spec.dims[0] || iy >= spec.dims[1] ||
      iz >= spec.dims[2])
    throw std::domain_error("voxel_center: index out of range");
  return {spec.origin.x + (ix + 0.5) * spec.voxel_size.x,
          spec.origin.y + (iy + 0.5) * spec.voxel_size.y,
          spec.origin.z + (iz + 0.5) * spec.voxel_size.z};
}

/// Continuous voxel index of a metric point on the center lattice; integer
/// values coincide with voxel centers. May fall outside the grid.
inline Vec3 voxel_fractional_index(const VoxelGridSpec& spec, Vec3 p) {
  return {(p.x - spec.origin.x) / spec.voxel_size.x - 0.5,
          (p.y - spec.origin.y) / spec.voxel_size.y - 0.5,
          (p.z - spec.origin.z) / spec.voxel_size.z - 0.5};
}

/// (ix, iy, iz, channel) grid over a VoxelGridSpec.
struct VoxelVolume {
  VoxelGridSpec spec;
  int channels = 0;
  std::vector<float> data;

  VoxelVolume() = default;
  VoxelVolume(VoxelGridSpec spec_, int channels_) : spec(spec_), channels(channels_) {
    if (channels < 1) throw std::invalid_argument("VoxelVolume: channels must be positive");
    data.assign(std::size_t(spec.dims[0]) * spec.dims[1] * spec.dims[2] * channels, 0.0f);
  }

  std::size_t offset(int ix, int iy, int iz) const {
    return ((std::size_t(ix) * spec.dims[1] + iy) * spec.dims[2] + iz) * channels;
  }
  float& at(int ix, int iy, int iz, int ch) { return data[offset(ix, iy, iz) + ch]; }
  float at(int ix, int iy, int iz, int ch) const { return data[offset(ix, iy, iz) + ch]; }
};

namespace detail {

// One interpolation axis: floor cell, fractional weight, in-bounds flags.
struct Axis {
  int i0 = 0, i1 = 0;
  double w1 = 0.0;  // weight of i1; i0 gets 1 - w1
  bool in0 = false, in1 = false;
};

inline Axis make_axis(double x, int n) {
  Axis a;
  const double f = std::floor(x);
  a.i0 = int(f);
  a.i1 = a.i0 + 1;
  a.w1 = x - f;
  a.in0 = a.i0 >= 0 && a.i0 < n;
  a.in1 = a.i1 >= 0 && a.i1 < n;
  return a;
}

}  // namespace detail

/// Bilinear sample of a channel subset at continuous (u, v) = (col, row).
/// Neighbors outside the map contribute zero; `out` receives channels.size()
/// values.
inline void bilinear_gather(const FeatureMap2D& map, double u, double v,
                            std::span<const int> channels, float* out) {
  const detail::Axis ax = detail::make_axis(u, map.cols);
  const detail::Axis ay = detail::make_axis(v, map.rows);
  const double w00 = (1.0 - ay.w1) * (1.0 - ax.w1);
  const double w01 = (1.0 - ay.w1) * ax.w1;
  const double w10 = ay.w1 * (1.0 - ax.w1);
  const double w11 = ay.w1 * ax.w1;
  const bool b00 = ay.in0 && ax.in0, b01 = ay.in0 && ax.in1;
  const bool b10 = ay.in1 && ax.in0, b11 = ay.in1 && ax.in1;
  const float* p00 = b00 ? &map.data[map.offset(ay.i0, ax.i0)] : nullptr;
  const float* p01 = b01 ? &map.data[map.offset(ay.i0, ax.i1)] : nullptr;
  const float* p10 = b10 ? &map.data[map.offset(ay.i1, ax.i0)] : nullptr;
  const float* p11 = b11 ? &map.data[map.offset(ay.i1, ax.i1)] : nullptr;
  for (std::size_t j = 0; j < channels.size(); ++j) {
    const int ch = channels[j];
    double acc = 0.0;
    if (p00) acc += w00 * p00[ch];
    if (p01) acc += w01 * p01[ch];
    if (p10) acc += w10 * p10[ch];
    if (p11) acc += w11 * p11[ch];
    out[j] = float(acc);
  }
}

inline std::vector<float> bilinear_sample(const FeatureMap2D& map, double u, double v,
                                          int first_channel, int count) {
  if (first_channel < 0 || count < 0 || first_channel + count > map.channels)
    throw std::invalid_argument("bilinear_sample: channel range out of bounds");
  std::vector<int> idx(count);
  std::iota(idx.begin(), idx.end(), first_channel);
  std::vector<float> out(count);
  bilinear_gather(map, u, v, idx, out.data());
  return out;
}

inline std::vector<float> bilinear_sample(const FeatureMap2D& map, double u, double v) {
  return bilinear_sample(map, u, v, 0, map.channels);
}

namespace detail {

// Shared trilinear kernel over a channel-innermost block with the given
// element strides for the three interpolated axes.
inline void trilinear_gather_impl(const float* data, Axis a0, Axis a1, Axis a2,
                                  std::size_t s0, std::size_t s1, std::size_t s2,
                                  std::span<const int> channels, float* out) {
  const Axis* ax[3] = {&a0, &a1, &a2};
  const std::size_t strides[3] = {s0, s1, s2};
  for (std::size_t j = 0; j < channels.size(); ++j) {
    const int ch = channels[j];
    double acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      double w = 1.0;
      std::size_t off = 0;
      bool inside = true;
      for (int d = 0; d < 3; ++d) {
        const bool hi = (corner >> d) & 1;
        const Axis& a = *ax[d];
        inside = inside && (hi ? a.in1 : a.in0);
        w *= hi ? a.w1 : 1.0 - a.w1;
        off += std::size_t(hi ? a.i1 : a.i0) * strides[d];
      }
      if (inside) acc += w * data[off + ch];
    }
    out[j] = float(acc);
  }
}

}  // namespace detail

/// Trilinear sample at continuous (row, col, plane) indices.
inline void trilinear_gather(const FrustumVolume& vol, double row, double col, double plane,
                             std::span<const int> channels, float* out) {
  const auto a0 = detail::make_axis(row, vol.spec.rows);
  const auto a1 = detail::make_axis(col, vol.spec.cols);
  const auto a2 = detail::make_axis(plane, vol.planes());
  const std::size_t s2 = vol.channels;
  const std::size_t s1 = s2 * vol.planes();
  const std::size_t s0 = s1 * vol.spec.cols;
  detail::trilinear_gather_impl(vol.data.data(), a0, a1, a2, s0, s1, s2, channels, out);
}

/// Trilinear sample at continuous (ix, iy, iz) voxel indices.
inline void trilinear_gather(const VoxelVolume& vol, double ix, double iy, double iz,
                             std::span<const int> channels, float* out) {
  const auto a0 = detail::make_axis(ix, vol.spec.dims[0]);
  const auto a1 = detail::make_axis(iy, vol.spec.dims[1]);
  const auto a2 = detail::make_axis(iz, vol.spec.dims[2]);
  const std::size_t s2 = vol.channels;
  const std::size_t s1 = s2 * vol.spec.dims[2];
  const std::size_t s0 = s1 * vol.spec.dims[1];
  detail::trilinear_gather_impl(vol.data.data(), a0, a1, a2, s0, s1, s2, channels, out);
}

template <class Volume>
std::vector<float> trilinear_sample(const Volume& vol, double i0, double i1, double i2) {
  std::vector<int> idx(vol.channels);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<float> out(vol.channels);
  trilinear_gather(vol, i0, i1, i2, idx, out.data());
  return out;
}

}  // namespace dsv
