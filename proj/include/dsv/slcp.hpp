#pragma once

// Stereo-LiDAR copy-paste: sample labeled objects from source scenes and
// paste them into a target scene so that image patches, 3D box and object
// points stay aligned across both views at sub-pixel precision.
//
// The 3D location of a source object is preserved verbatim; its 2D target
// boxes come from reprojecting the same 3D box with the target calibration,
// so the epipolar relation u_L - u_R = f_u * baseline / z holds for every
// pasted corner by construction. Points already in the scene that project
// into a pasted box are dropped before the object's own points are added,
// keeping one depth source per pixel inside pasted regions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "dsv/analytics.hpp"
#include "dsv/geom.hpp"
#include "dsv/rng.hpp"
#include "dsv/scene.hpp"

namespace dsv {

/// A bank entry: the source box, the image crops under its projections in
/// both views, and the LiDAR points inside the box (left camera frame).
struct ObjectSample {
  Box3D box;
  Image left_patch;
  Image right_patch;
  Rect2 left_box;   // B_S in the left source image
  Rect2 right_box;  // B_S in the right source image
  int left_origin_x = 0, left_origin_y = 0;    // integer pixel origin of left_patch
  int right_origin_x = 0, right_origin_y = 0;  // integer pixel origin of right_patch
  std::vector<PointXYZI> object_points;
  StereoRig source_rig;
};

struct ObjectBank {
  std::map<int, std::vector<ObjectSample>> by_class;
  std::int64_t scanned = 0;
  std::int64_t skipped = 0;  // boxes not fully visible in both views

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [cls, samples] : by_class) n += samples.size();
    return n;
  }
};

namespace detail {

inline bool corners_visible(const CameraModel& cam, const std::array<Vec3, 8>& corners,
                            Vec3 cam_offset) {
  for (const Vec3& c : corners) {
    const Vec3 p = c - cam_offset;
    if (!(p.z > 0.0)) return false;
    const Projection proj = project(cam, p);
    if (proj.u < 0.0 || proj.u > cam.image_width - 1 || proj.v < 0.0 ||
        proj.v > cam.image_height - 1)
      return false;
  }
  return true;
}

inline Rect2 corner_hull(const CameraModel& cam, const std::array<Vec3, 8>& corners,
                         Vec3 cam_offset) {
  Rect2 hull;
  for (int i = 0; i < 8; ++i) {
    const Projection p = project(cam, corners[i] - cam_offset);
    if (i == 0) {
      hull = {p.u, p.v, p.u, p.v};
    } else {
      hull.x0 = std::min(hull.x0, p.u);
      hull.x1 = std::max(hull.x1, p.u);
      hull.y0 = std::min(hull.y0, p.v);
      hull.y1 = std::max(hull.y1, p.v);
    }
  }
  return hull;
}

inline Image crop(const Image& img, const Rect2& box, int& origin_x, int& origin_y) {
  const int x0 = std::max(int(std::floor(box.x0)), 0);
  const int y0 = std::max(int(std::floor(box.y0)), 0);
  const int x1 = std::min(int(std::ceil(box.x1)), img.cols - 1);
  const int y1 = std::min(int(std::ceil(box.y1)), img.rows - 1);
  origin_x = x0;
  origin_y = y0;
  Image patch(y1 - y0 + 1, x1 - x0 + 1, img.channels);
  for (int r = y0; r <= y1; ++r)
    std::copy_n(&img.data[img.offset(r, x0)], std::size_t(patch.cols) * img.channels,
                &patch.data[patch.offset(r - y0, 0)]);
  return patch;
}

// Warp the patch into the target rectangle: the axis-aligned affine mapping
// dst_box -> src_box, sampled bilinearly, written over the pixels of
// dst_box that survive clipping.
inline void paste_patch(Image& dst, const Image& patch, int origin_x, int origin_y,
                        const Rect2& src_box, const Rect2& dst_box, const Rect2& dst_clip) {
  if (dst_clip.empty() || !(dst_box.width() > 1e-9) || !(dst_box.height() > 1e-9)) return;
  const double sx = src_box.width() / dst_box.width();
  const double sy = src_box.height() / dst_box.height();
  const int c0 = int(std::ceil(dst_clip.x0)), c1 = int(std::floor(dst_clip.x1));
  const int r0 = int(std::ceil(dst_clip.y0)), r1 = int(std::floor(dst_clip.y1));
  std::vector<int> channels(dst.channels);
  for (int ch = 0; ch < dst.channels; ++ch) channels[ch] = ch;
  std::vector<float> texel(dst.channels);
  for (int r = r0; r <= r1; ++r) {
    const double src_v = src_box.y0 + (double(r) - dst_box.y0) * sy - origin_y;
    const double v = std::clamp(src_v, 0.0, double(patch.rows - 1));
    for (int c = c0; c <= c1; ++c) {
      const double src_u = src_box.x0 + (double(c) - dst_box.x0) * sx - origin_x;
      const double u = std::clamp(src_u, 0.0, double(patch.cols - 1));
      bilinear_gather(patch, u, v, channels, texel.data());
      std::copy(texel.begin(), texel.end(), &dst.data[dst.offset(r, c)]);
    }
  }
}

}  // namespace detail

/// Collects one sample per labeled box whose 8 corners project inside both
/// source images; anything else is counted and skipped.
inline ObjectBank build_bank(std::span<const Scene> scenes) {
  ObjectBank bank;
  for (const Scene& scene : scenes) {
    const Vec3 right_offset = {scene.rig.baseline, 0.0, 0.0};
    for (const Box3D& box : scene.boxes) {
      bank.scanned += 1;
      const auto corners = box_corners(box);
      if (!detail::corners_visible(scene.rig.left, corners, {0, 0, 0}) ||
          !detail::corners_visible(scene.rig.right, corners, right_offset)) {
        bank.skipped += 1;
        continue;
      }
      ObjectSample sample;
      sample.box = box;
      sample.source_rig = scene.rig;
      sample.left_box = detail::corner_hull(scene.rig.left, corners, {0, 0, 0});
      sample.right_box = detail::corner_hull(scene.rig.right, corners, right_offset);
      sample.left_patch = detail::crop(scene.left_image, sample.left_box,
                                       sample.left_origin_x, sample.left_origin_y);
      sample.right_patch = detail::crop(scene.right_image, sample.right_box,
                                        sample.right_origin_x, sample.right_origin_y);
      for (const PointXYZI& p : scene.points)
        if (box_contains(box, {p.x, p.y, p.z}, 1e-6)) sample.object_points.push_back(p);
      bank.by_class[box.class_id].push_back(std::move(sample));
    }
  }
  return bank;
}

/// Draws up to counts[class] samples per class without replacement,
/// deterministically for a given seed. Classes with fewer samples are capped.
inline std::vector<ObjectSample> sample_objects(const ObjectBank& bank,
                                                const std::map<int, int>& counts,
                                                std::uint64_t seed) {
  std::vector<ObjectSample> out;
  for (const auto& [cls, want] : counts) {
    if (want <= 0) continue;
    const auto it = bank.by_class.find(cls);
    if (it == bank.by_class.end()) continue;
    const auto& pool = it->second;
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(seed, std::uint64_t(cls)));
    rng.shuffle(idx);
    const std::size_t take = std::min(std::size_t(want), pool.size());
    for (std::size_t i = 0; i < take; ++i) out.push_back(pool[idx[i]]);
  }
  return out;
}

struct PasteOutcome {
  bool applied = false;
  std::map<int, int> pasted;
  std::map<int, int> rejected_overlap;
  std::map<int, int> rejected_projection;
  std::int64_t points_removed = 0;
  std::vector<std::size_t> pasted_samples;  // indices into the input list, paste order
  std::vector<Rect2> left_footprints;       // clipped B_T per pasted sample
  std::vector<Rect2> right_footprints;
};

/// Pastes the samples into a copy of the target scene. With probability
/// apply_prob (one seeded draw) the edit happens at all. Samples go in
/// far-to-near so nearer patches overpaint farther ones; a sample whose BEV
/// box overlaps any retained box is rejected. Every paste removes the points
/// currently projecting inside its target boxes before adding its own.
inline Scene paste(const Scene& target, std::span<const ObjectSample> samples,
                   std::uint64_t seed, double apply_prob = 0.6,
                   PasteOutcome* outcome = nullptr) {
  if (!(apply_prob >= 0.0 && apply_prob <= 1.0))
    throw std::invalid_argument("paste: apply_prob must lie in [0, 1]");
  Scene out = target;
  PasteOutcome local;
  Rng rng(seed);
  if (rng.uniform01() >= apply_prob) {
    if (outcome) *outcome = local;
    return out;
  }
  local.applied = true;

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].box.center.z > samples[b].box.center.z;
  });

  const Vec3 right_offset = {out.rig.baseline, 0.0, 0.0};
  for (const std::size_t si : order) {
    const ObjectSample& sample = samples[si];
    const auto corners = box_corners(sample.box);

    bool in_front = true;
    for (const Vec3& c : corners) in_front = in_front && c.z > 0.0;
    if (!in_front) {
      local.rejected_projection[sample.box.class_id] += 1;
      continue;
    }

    bool collides = false;
    for (const Box3D& existing : out.boxes)
      if (iou_bev(sample.box, existing) > 0.0) {
        collides = true;
        break;
      }
    if (collides) {
      local.rejected_overlap[sample.box.class_id] += 1;
      continue;
    }

    const Rect2 left_t = detail::corner_hull(out.rig.left, corners, {0, 0, 0});
    const Rect2 right_t = detail::corner_hull(out.rig.right, corners, right_offset);
    const Rect2 left_clip = {std::max(left_t.x0, 0.0), std::max(left_t.y0, 0.0),
                             std::min(left_t.x1, double(out.rig.left.image_width - 1)),
                             std::min(left_t.y1, double(out.rig.left.image_height - 1))};
    const Rect2 right_clip = {std::max(right_t.x0, 0.0), std::max(right_t.y0, 0.0),
                              std::min(right_t.x1, double(out.rig.right.image_width - 1)),
                              std::min(right_t.y1, double(out.rig.right.image_height - 1))};

    detail::paste_patch(out.left_image, sample.left_patch, sample.left_origin_x,
                        sample.left_origin_y, sample.left_box, left_t, left_clip);
    detail::paste_patch(out.right_image, sample.right_patch, sample.right_origin_x,
                        sample.right_origin_y, sample.right_box, right_t, right_clip);

    std::vector<PointXYZI> kept;
    kept.reserve(out.points.size());
    for (const PointXYZI& p : out.points) {
      bool occluded = false;
      if (p.z > 0.0) {
        const Projection pl = project(out.rig.left, {p.x, p.y, p.z});
        occluded = left_clip.contains(pl.u, pl.v);
        if (!occluded) {
          const Projection pr = project(out.rig.right, {p.x - out.rig.baseline, p.y, p.z});
          occluded = right_clip.contains(pr.u, pr.v);
        }
      }
      if (occluded)
        local.points_removed += 1;
      else
        kept.push_back(p);
    }
    out.points = std::move(kept);
    out.points.insert(out.points.end(), sample.object_points.begin(),
                      sample.object_points.end());
    out.boxes.push_back(sample.box);
    local.pasted[sample.box.class_id] += 1;
    local.pasted_samples.push_back(si);
    local.left_footprints.push_back(left_clip);
    local.right_footprints.push_back(right_clip);
  }
  if (outcome) *outcome = local;
  return out;
}

/// Horizontal flip of the whole sample: views swap and mirror, the world
/// mirrors about the stereo midplane x = baseline / 2, so the flipped pair
/// is again rectified and every cross-modal alignment is preserved.
/// Self-inverse.
inline Scene hflip(const Scene& scene) {
  Scene out;
  const int w = scene.left_image.cols;

  auto mirror_image = [](const Image& img) {
    Image m(img.rows, img.cols, img.channels);
    for (int r = 0; r < img.rows; ++r)
      for (int c = 0; c < img.cols; ++c)
        std::copy_n(&img.data[img.offset(r, img.cols - 1 - c)], img.channels,
                    &m.data[m.offset(r, c)]);
    return m;
  };
  out.left_image = mirror_image(scene.right_image);
  out.right_image = mirror_image(scene.left_image);

  auto mirror_cam = [w](const CameraModel& cam) {
    return CameraModel(cam.f_u, cam.f_v, double(w - 1) - cam.c_u, cam.c_v, cam.image_width,
                       cam.image_height);
  };
  out.rig = StereoRig(mirror_cam(scene.rig.right), mirror_cam(scene.rig.left),
                      scene.rig.baseline);

  const double b = scene.rig.baseline;
  out.points.reserve(scene.points.size());
  for (const PointXYZI& p : scene.points)
    out.points.push_back({b - p.x, p.y, p.z, p.intensity});
  out.boxes.reserve(scene.boxes.size());
  for (const Box3D& box : scene.boxes)
    out.boxes.emplace_back(Vec3{b - box.center.x, box.center.y, box.center.z}, box.length,
                           box.width, box.height, mirror_yaw(box.yaw), box.class_id, box.score);
  return out;
}

}  // namespace dsv
