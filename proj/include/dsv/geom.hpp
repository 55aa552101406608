#pragma once

// Rectified pinhole camera models, stereo rig and 3D box geometry.
//
// Coordinate convention (used throughout the library): camera frame is
// x-right, y-down, z-forward. Depth always means the z coordinate of a
// point in the camera frame. Pixel (u, v) = (column, row), with integer
// coordinates at pixel centers.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace dsv {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }

/// Wraps an angle to (-pi, pi]. Angles already in range pass through unchanged.
inline double normalize_yaw(double yaw) {
  constexpr double pi = std::numbers::pi;
  if (yaw > -pi && yaw <= pi) return yaw;
  double r = std::fmod(yaw + pi, 2.0 * pi);
  if (r <= 0.0) r += 2.0 * pi;
  return r - pi;
}

/// Mirror of a heading about the x = const plane: yaw -> pi - yaw, kept in
/// (-pi, pi] without a wrap pass. Self-inverse (bit-exact whenever the
/// subtraction from pi is exact, e.g. for yaws on the 2^-51 grid).
inline double mirror_yaw(double yaw) {
  constexpr double pi = std::numbers::pi;
  if (yaw > 0.0) return pi - yaw;
  if (yaw == 0.0) return pi;
  return -pi - yaw;
}

/// Rectified pinhole intrinsics. Invariants: positive focal lengths,
/// principal point inside the image.
struct CameraModel {
  double f_u = 1.0;  // horizontal focal length, pixels
  double f_v = 1.0;  // vertical focal length, pixels
  double c_u = 0.0;  // principal point column
  double c_v = 0.0;  // principal point row
  int image_width = 1;
  int image_height = 1;

  CameraModel() = default;
  CameraModel(double fu, double fv, double cu, double cv, int width, int height)
      : f_u(fu), f_v(fv), c_u(cu), c_v(cv), image_width(width), image_height(height) {
    if (!(f_u > 0.0) || !(f_v > 0.0))
      throw std::invalid_argument("CameraModel: focal lengths must be positive");
    if (image_width < 1 || image_height < 1)
      throw std::invalid_argument("CameraModel: image size must be positive");
    if (!(c_u >= 0.0) || !(c_u < image_width) || !(c_v >= 0.0) || !(c_v < image_height))
      throw std::invalid_argument("CameraModel: principal point outside image");
  }
};

/// Rectified pair: identical row geometry, right camera displaced by
/// `baseline` meters along +x of the left camera frame.
struct StereoRig {
  CameraModel left;
  CameraModel right;
  double baseline = 1.0;  // meters

  StereoRig() = default;
  StereoRig(CameraModel l, CameraModel r, double b) : left(l), right(r), baseline(b) {
    if (!(baseline > 0.0)) throw std::invalid_argument("StereoRig: baseline must be positive");
    auto close = [](double a, double b2) {
      return std::abs(a - b2) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b2)});
    };
    if (!close(left.f_u, right.f_u) || !close(left.f_v, right.f_v) || !close(left.c_v, right.c_v))
      throw std::invalid_argument("StereoRig: cameras are not a rectified pair");
  }
};

/// A point expressed in the right camera frame of a rectified rig.
inline Vec3 right_frame(const StereoRig& rig, Vec3 p_left) {
  return {p_left.x - rig.baseline, p_left.y, p_left.z};
}

/// Yaw-rotated 3D box in the camera frame. `yaw` rotates about the vertical
/// (y) axis; at yaw 0 `length` runs along x, `width` along z, `height` along y.
struct Box3D {
  Vec3 center;          // geometric center, meters
  double length = 1.0;  // meters
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;  // radians, (-pi, pi]
  int class_id = 0;
  std::optional<double> score;

  Box3D() = default;
  Box3D(Vec3 c, double l, double w, double h, double yaw_, int cls = 0,
        std::optional<double> score_ = std::nullopt)
      : center(c), length(l), width(w), height(h), yaw(normalize_yaw(yaw_)), class_id(cls),
        score(score_) {
    if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0))
      throw std::invalid_argument("Box3D: all size components must be positive");
    if (score && (!(*score >= 0.0) || !(*score <= 1.0)))
      throw std::invalid_argument("Box3D: score must lie in [0, 1]");
  }
};

/// Rotation about the vertical axis applied to a local box offset.
inline Vec3 rotate_yaw(double yaw, Vec3 v) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

/// Canonical corner order: bottom face (larger y, i.e. nearer the ground)
/// counter-clockwise in the x-z plane starting at (+x, +z), then the top
/// face in the same x-z order.
inline std::array<Vec3, 8> box_corners(const Box3D& box) {
  const double dx = 0.5 * box.length, dy = 0.5 * box.height, dz = 0.5 * box.width;
  const std::array<Vec3, 8> local = {{{+dx, +dy, +dz},
                                      {-dx, +dy, +dz},
                                      {-dx, +dy, -dz},
                                      {+dx, +dy, -dz},
                                      {+dx, -dy, +dz},
                                      {-dx, -dy, +dz},
                                      {-dx, -dy, -dz},
                                      {+dx, -dy, -dz}}};
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) out[i] = box.center + rotate_yaw(box.yaw, local[i]);
  return out;
}

/// Point-in-rotated-box test; boundary points count as inside.
inline bool box_contains(const Box3D& box, Vec3 p, double eps = 0.0) {
  const Vec3 d = p - box.center;
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double lx = c * d.x - s * d.z;
  const double lz = s * d.x + c * d.z;
  return std::abs(lx) <= 0.5 * box.length + eps && std::abs(d.y) <= 0.5 * box.height + eps &&
         std::abs(lz) <= 0.5 * box.width + eps;
}

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // z of the projected point, meters
};

/// Pinhole projection. The result may lie outside the image bounds; callers
/// decide how to treat that.
inline Projection project(const CameraModel& cam, Vec3 p) {
  if (!(p.z > 0.0)) throw std::domain_error("project: point depth must be positive");
  return {cam.f_u * p.x / p.z + cam.c_u, cam.f_v * p.y / p.z + cam.c_v, p.z};
}

/// Inverse of project: pixel + depth back to the camera frame.
inline Vec3 unproject(const CameraModel& cam, double u, double v, double depth) {
  if (!(depth > 0.0)) throw std::domain_error("unproject: depth must be positive");
  return {(u - cam.c_u) / cam.f_u * depth, (v - cam.c_v) / cam.f_v * depth, depth};
}

/// Horizontal pixel offset between the rectified views: f_u * baseline / depth.
inline double disparity(const StereoRig& rig, double depth) {
  if (!(depth > 0.0)) throw std::domain_error("disparity: depth must be positive");
  return rig.left.f_u * rig.baseline / depth;
}

inline double depth_of_disparity(const StereoRig& rig, double disp) {
  if (!(disp > 0.0)) throw std::domain_error("depth_of_disparity: disparity must be positive");
  return rig.left.f_u * rig.baseline / disp;
}

/// Axis-aligned pixel rectangle, inclusive on all edges.
struct Rect2 {
  double x0 = 0.0, y0 = 0.0, x1 = -1.0, y1 = -1.0;

  bool empty() const { return !(x1 >= x0) || !(y1 >= y0); }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(double u, double v) const { return u >= x0 && u <= x1 && v >= y0 && v <= y1; }
};

struct BoxProjection {
  std::array<Vec2, 8> corners;  // projected pixels, canonical corner order
  Rect2 hull;                   // tight axis-aligned hull of the corners
  Rect2 bbox;                   // hull clipped to image bounds (may be empty)
};

/// Projects all 8 corners. Throws if any corner lies at or behind the camera.
inline BoxProjection project_box(const CameraModel& cam, const Box3D& box) {
  const auto corners = box_corners(box);
  BoxProjection out;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  for (int i = 0; i < 8; ++i) {
    if (!(corners[i].z > 0.0)) throw std::domain_error("project_box: corner behind camera");
    const Projection p = project(cam, corners[i]);
    out.corners[i] = {p.u, p.v};
    if (i == 0) {
      x0 = x1 = p.u;
      y0 = y1 = p.v;
    } else {
      x0 = std::min(x0, p.u);
      x1 = std::max(x1, p.u);
      y0 = std::min(y0, p.v);
      y1 = std::max(y1, p.v);
    }
  }
  out.hull = {x0, y0, x1, y1};
  out.bbox = {std::max(x0, 0.0), std::max(y0, 0.0),
              std::min(x1, double(cam.image_width - 1)),
              std::min(y1, double(cam.image_height - 1))};
  return out;
}

/// Rigid motion p -> R p + t, row-major rotation. Composed ahead of
/// projection when calibrations carry extrinsics; identity by default.
struct RigidTransform {
  std::array<double, 9> rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 translation;

  Vec3 operator()(Vec3 p) const {
    const auto& r = rotation;
    return {r[0] * p.x + r[1] * p.y + r[2] * p.z + translation.x,
            r[3] * p.x + r[4] * p.y + r[5] * p.z + translation.y,
            r[6] * p.x + r[7] * p.y + r[8] * p.z + translation.z};
  }
};

/// outer after inner: (outer * inner)(p) == outer(inner(p)).
inline RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
  RigidTransform out;
  const auto& a = outer.rotation;
  const auto& b = inner.rotation;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      out.rotation[3 * i + j] =
          a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j];
  out.translation = outer(inner.translation);
  return out;
}

}  // namespace dsv
