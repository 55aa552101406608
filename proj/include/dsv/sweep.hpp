#pragma once

// Volume construction from 2D feature maps: classic plane sweeping,
// depth-wise plane sweeping with cyclic slicing, the grouped-channel
// baseline, and direct voxel-grid unprojection.
//
// Depth-wise sweeping keeps the full C_I source channels and selects a
// depth-dependent window of C_V of them per plane instead of using a fixed
// compressed set. Cyclic slicing reorders the window so that source channel
// c always lands in output slot c mod C_V, which keeps channels comparable
// across nearby depth planes. Per output cell the work is identical to
// classic sweeping: C_V reads per view.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dsv/geom.hpp"
#include "dsv/grid.hpp"

namespace dsv {

enum class SweepMode { classic, depthwise, grouped };

struct SweepConfig {
  SweepMode mode = SweepMode::depthwise;
  int c_in = 96;        // source 2D feature channels (C_I)
  int c_v = 32;         // output channels per view (C_V)
  double alpha = 0.1;   // smoothness exponent on the floored disparity
  double s = 96.0 / 288.0;  // channel-shift ratio, default C_I / D_V
};

/// Config with the shift ratio tied to the plane count: s = c_in / planes.
inline SweepConfig make_sweep_config(SweepMode mode, int c_in, int c_v, double alpha,
                                     int depth_planes) {
  if (depth_planes < 1) throw std::invalid_argument("make_sweep_config: plane count");
  return {mode, c_in, c_v, alpha, double(c_in) / double(depth_planes)};
}

namespace detail {

inline void validate_sweep_config(const SweepConfig& cfg) {
  if (cfg.c_in < 1 || cfg.c_v < 1 || cfg.c_v > cfg.c_in)
    throw std::invalid_argument("SweepConfig: need 1 <= C_V <= C_I");
  if (!(cfg.alpha >= 0.0)) throw std::invalid_argument("SweepConfig: alpha must be >= 0");
  if (!(cfg.s > 0.0)) throw std::invalid_argument("SweepConfig: s must be > 0");
}

}  // namespace detail

/// Channel-window offset for a depth plane:
/// clamp(floor(floor(disparity)^alpha * s), 0, C_I - C_V).
/// Non-increasing in depth for any alpha >= 0.
inline int shift_of_depth(const StereoRig& rig, double depth, const SweepConfig& cfg) {
  detail::validate_sweep_config(cfg);
  if (!(depth > 0.0)) throw std::domain_error("shift_of_depth: depth must be positive");
  const double disp = std::floor(rig.left.f_u * rig.baseline / depth);
  const double raw = std::floor(std::pow(disp, cfg.alpha) * cfg.s);
  const int hi = cfg.c_in - cfg.c_v;
  if (!(raw < double(hi))) return hi;
  if (raw <= 0.0) return 0;
  return int(raw);
}

/// Source channels of the sliding window at `shift`, reordered cyclically:
/// the ordered union [ceil(shift/C_V)*C_V, shift+C_V) then
/// [shift, ceil(shift/C_V)*C_V). Output slot j always receives a source
/// channel congruent to j mod C_V drawn from [shift, shift+C_V).
inline std::vector<int> cyclic_slice(int shift, int c_in, int c_v) {
  if (c_v < 1 || c_v > c_in) throw std::invalid_argument("cyclic_slice: need 1 <= C_V <= C_I");
  if (shift < 0 || shift > c_in - c_v)
    throw std::domain_error("cyclic_slice: shift out of [0, C_I - C_V]");
  const int pivot = (shift + c_v - 1) / c_v * c_v;
  std::vector<int> out;
  out.reserve(c_v);
  for (int c = pivot; c < shift + c_v; ++c) out.push_back(c);
  for (int c = shift; c < pivot; ++c) out.push_back(c);
  return out;
}

/// Construction counters; one "sample" is one (map, position, channel) fetch.
struct SweepStats {
  std::uint64_t cells = 0;
  std::uint64_t map_samples = 0;

  double samples_per_cell() const { return cells ? double(map_samples) / double(cells) : 0.0; }
};

namespace detail {

// Flat planes x c_v table of source-channel windows.
inline std::vector<int> plane_windows_classic(int planes, int c_v) {
  std::vector<int> w(std::size_t(planes) * c_v);
  for (int k = 0; k < planes; ++k) std::iota(w.begin() + std::size_t(k) * c_v,
                                             w.begin() + std::size_t(k + 1) * c_v, 0);
  return w;
}

inline std::vector<int> plane_windows_depthwise(const FrustumSpec& spec, const StereoRig& rig,
                                                const SweepConfig& cfg) {
  std::vector<int> w;
  w.reserve(std::size_t(spec.planes()) * cfg.c_v);
  for (int k = 0; k < spec.planes(); ++k) {
    const auto slice = cyclic_slice(shift_of_depth(rig, spec.depth_planes[k], cfg), cfg.c_in,
                                    cfg.c_v);
    w.insert(w.end(), slice.begin(), slice.end());
  }
  return w;
}

inline void sweep_frustum_into(FrustumVolume& vol, const FeatureMap2D& left,
                               const FeatureMap2D& right, const StereoRig& rig,
                               const std::vector<int>& windows, int c_v, SweepStats* stats) {
  const FrustumSpec& spec = vol.spec;
  if (left.rows != right.rows || left.cols != right.cols || left.channels != right.channels)
    throw std::domain_error("plane sweep: left/right feature shapes differ");
  if (left.rows != spec.rows || left.cols != spec.cols)
    throw std::domain_error("plane sweep: feature shape does not match the frustum spec");
  if (vol.channels != 2 * c_v)
    throw std::domain_error("plane sweep: output volume channel count mismatch");

  const int planes = spec.planes();
  std::vector<double> disp_feat(planes);
  for (int k = 0; k < planes; ++k)
    disp_feat[k] = disparity(rig, spec.depth_planes[k]) / spec.stride;

  std::uint64_t samples = 0;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const float* lp = &left.data[left.offset(r, c)];
      float* out = &vol.data[vol.offset(r, c, 0)];
      for (int k = 0; k < planes; ++k, out += 2 * c_v) {
        const int* win = &windows[std::size_t(k) * c_v];
        for (int j = 0; j < c_v; ++j) out[j] = lp[win[j]];
        bilinear_gather(right, double(c) - disp_feat[k], double(r),
                        std::span<const int>(win, std::size_t(c_v)), out + c_v);
        samples += 2 * std::uint64_t(c_v);
      }
    }
  }
  if (stats) {
    stats->cells += std::uint64_t(spec.rows) * spec.cols * planes;
    stats->map_samples += samples;
  }
}

inline FrustumVolume sweep_frustum(const FeatureMap2D& left, const FeatureMap2D& right,
                                   const StereoRig& rig, const FrustumSpec& spec,
                                   const std::vector<int>& windows, int c_v,
                                   SweepStats* stats) {
  FrustumVolume vol(spec, 2 * c_v);
  sweep_frustum_into(vol, left, right, rig, windows, c_v, stats);
  return vol;
}

}  // namespace detail

/// Plane-sweep volume: per cell (v, u, k), the left features at (u, v)
/// concatenated with the right features bilinearly sampled at
/// (u - disparity(d_k)/stride, v). Classic mode reads channels [0, C_V);
/// depth-wise mode reads the cyclic slice of the plane's shift for both
/// views. Output has 2 * C_V channels, left half first.
inline void build_psv_into(FrustumVolume& out, const FeatureMap2D& left,
                           const FeatureMap2D& right, const StereoRig& rig,
                           const SweepConfig& cfg, SweepStats* stats = nullptr) {
  detail::validate_sweep_config(cfg);
  if (cfg.c_in != left.channels)
    throw std::domain_error("build_psv: C_I does not match the feature maps");
  std::vector<int> windows;
  switch (cfg.mode) {
    case SweepMode::classic:
      windows = detail::plane_windows_classic(out.spec.planes(), cfg.c_v);
      break;
    case SweepMode::depthwise:
      windows = detail::plane_windows_depthwise(out.spec, rig, cfg);
      break;
    case SweepMode::grouped:
      throw std::invalid_argument("build_psv: grouped mode is built by build_group_ps");
  }
  detail::sweep_frustum_into(out, left, right, rig, windows, cfg.c_v, stats);
}

inline FrustumVolume build_psv(const FeatureMap2D& left, const FeatureMap2D& right,
                               const StereoRig& rig, const FrustumSpec& spec,
                               const SweepConfig& cfg, SweepStats* stats = nullptr) {
  FrustumVolume vol(spec, 2 * cfg.c_v);
  build_psv_into(vol, left, right, rig, cfg, stats);
  return vol;
}

/// Grouped-channel baseline: depth planes are split into C_I / group_size
/// contiguous groups and plane k in group g reads source channels
/// [g * group_size, (g+1) * group_size) with no reordering.
inline void build_group_ps_into(FrustumVolume& out, const FeatureMap2D& left,
                                const FeatureMap2D& right, const StereoRig& rig,
                                int group_size, SweepStats* stats = nullptr) {
  if (group_size < 1 || left.channels % group_size != 0)
    throw std::domain_error("build_group_ps: C_I must be divisible by group_size");
  const int groups = left.channels / group_size;
  const int planes = out.spec.planes();
  std::vector<int> windows(std::size_t(planes) * group_size);
  for (int k = 0; k < planes; ++k) {
    const int g = std::min(int(std::int64_t(k) * groups / planes), groups - 1);
    std::iota(windows.begin() + std::size_t(k) * group_size,
              windows.begin() + std::size_t(k + 1) * group_size, g * group_size);
  }
  detail::sweep_frustum_into(out, left, right, rig, windows, group_size, stats);
}

inline FrustumVolume build_group_ps(const FeatureMap2D& left, const FeatureMap2D& right,
                                    const StereoRig& rig, const FrustumSpec& spec,
                                    int group_size, SweepStats* stats = nullptr) {
  FrustumVolume vol(spec, 2 * group_size);
  build_group_ps_into(vol, left, right, rig, group_size, stats);
  return vol;
}

/// One camera's contribution to a voxel volume. `camera_offset` is the
/// camera position in the reference (left) frame; points are shifted by
/// -offset before projection. The reference view uses offset zero, the
/// right view of a rectified rig (baseline, 0, 0).
struct SweepView {
  const FeatureMap2D* features = nullptr;
  const CameraModel* camera = nullptr;
  Vec3 camera_offset;
};

/// 3D-geometry volume: each voxel center projects into every view and
/// gathers its features bilinearly at image/stride coordinates. Depth-wise
/// mode uses the cyclic slice of the voxel's z shift for all views. A voxel
/// at z <= 0 for any view is zero; a voxel projecting outside one image
/// receives zeros for that view only. Output channels: views * C_V.
inline VoxelVolume build_3dgv(std::span<const SweepView> views, const StereoRig& rig,
                              const VoxelGridSpec& vspec, double stride,
                              const SweepConfig& cfg, SweepStats* stats = nullptr) {
  detail::validate_sweep_config(cfg);
  if (cfg.mode == SweepMode::grouped)
    throw std::invalid_argument("build_3dgv: grouped mode applies to plane sweeping only");
  if (views.empty() || views.size() > 2)
    throw std::invalid_argument("build_3dgv: expected one or two views");
  if (!(stride >= 1.0)) throw std::invalid_argument("build_3dgv: stride must be >= 1");
  for (const auto& v : views) {
    if (!v.features || !v.camera) throw std::invalid_argument("build_3dgv: null view");
    if (v.features->channels != cfg.c_in)
      throw std::domain_error("build_3dgv: C_I does not match the feature maps");
  }

  const int nx = vspec.dims[0], ny = vspec.dims[1], nz = vspec.dims[2];
  VoxelVolume vol(vspec, int(views.size()) * cfg.c_v);

  // The window depends only on the voxel z slab.
  std::vector<int> windows(std::size_t(nz) * cfg.c_v);
  for (int iz = 0; iz < nz; ++iz) {
    const double z = vspec.origin.z + (iz + 0.5) * vspec.voxel_size.z;
    std::vector<int> slice =
        cfg.mode == SweepMode::depthwise && z > 0.0
            ? cyclic_slice(shift_of_depth(rig, z, cfg), cfg.c_in, cfg.c_v)
            : cyclic_slice(0, cfg.c_in, cfg.c_v);
    std::copy(slice.begin(), slice.end(), windows.begin() + std::size_t(iz) * cfg.c_v);
  }

  std::uint64_t samples = 0;
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      float* out_base = &vol.data[vol.offset(ix, iy, 0)];
      for (int iz = 0; iz < nz; ++iz) {
        const Vec3 center = {vspec.origin.x + (ix + 0.5) * vspec.voxel_size.x,
                             vspec.origin.y + (iy + 0.5) * vspec.voxel_size.y,
                             vspec.origin.z + (iz + 0.5) * vspec.voxel_size.z};
        float* out = out_base + std::size_t(iz) * vol.channels;
        bool behind = false;
        for (const auto& view : views)
          behind = behind || !(center.z - view.camera_offset.z > 0.0);
        if (behind) continue;  // volume is zero-initialized
        const int* win = &windows[std::size_t(iz) * cfg.c_v];
        for (std::size_t vi = 0; vi < views.size(); ++vi) {
          const auto& view = views[vi];
          const Vec3 p = center - view.camera_offset;
          const Projection proj = project(*view.camera, p);
          bilinear_gather(*view.features, proj.u / stride, proj.v / stride,
                          std::span<const int>(win, std::size_t(cfg.c_v)),
                          out + vi * std::size_t(cfg.c_v));
          samples += std::uint64_t(cfg.c_v);
        }
      }
    }
  }
  if (stats) {
    stats->cells += std::uint64_t(nx) * ny * nz;
    stats->map_samples += samples;
  }
  return vol;
}

inline VoxelVolume build_3dgv_stereo(const FeatureMap2D& left, const FeatureMap2D& right,
                                     const StereoRig& rig, const VoxelGridSpec& vspec,
                                     double stride, const SweepConfig& cfg,
                                     SweepStats* stats = nullptr) {
  const SweepView views[2] = {{&left, &rig.left, {0.0, 0.0, 0.0}},
                              {&right, &rig.right, {rig.baseline, 0.0, 0.0}}};
  return build_3dgv(views, rig, vspec, stride, cfg, stats);
}

inline VoxelVolume build_3dgv_mono(const FeatureMap2D& features, const StereoRig& rig,
                                   const VoxelGridSpec& vspec, double stride,
                                   const SweepConfig& cfg, SweepStats* stats = nullptr) {
  const SweepView views[1] = {{&features, &rig.left, {0.0, 0.0, 0.0}}};
  return build_3dgv(views, rig, vspec, stride, cfg, stats);
}

}  // namespace dsv
