#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "dsv/geom.hpp"

using namespace dsv;

namespace {

CameraModel test_cam() { return CameraModel(720.0, 720.0, 621.0, 187.0, 1242, 375); }

StereoRig test_rig() { return StereoRig(test_cam(), test_cam(), 0.5); }

}  // namespace

TEST_CASE("project maps the principal ray to the principal point") {
  const auto p = project(test_cam(), {0.0, 0.0, 10.0});
  CHECK(p.u == Approx(621.0));
  CHECK(p.v == Approx(187.0));
  CHECK(p.depth == 10.0);
}

TEST_CASE("project applies the pinhole model") {
  const auto p = project(test_cam(), {1.0, 0.0, 10.0});
  CHECK(p.u == Approx(693.0));  // 720 * 0.1 + 621
  CHECK(p.v == Approx(187.0));
}

TEST_CASE("project rejects points behind the camera") {
  CHECK_THROWS_AS(project(test_cam(), {0.0, 0.0, -1.0}), std::domain_error);
  CHECK_THROWS_AS(project(test_cam(), {0.0, 0.0, 0.0}), std::domain_error);
}

TEST_CASE("unproject inverts project") {
  CHECK(unproject(test_cam(), 621.0, 187.0, 10.0).x == Approx(0.0));
  const Vec3 p = unproject(test_cam(), 693.0, 187.0, 10.0);
  CHECK(p.x == Approx(1.0));
  CHECK(p.y == Approx(0.0));
  CHECK(p.z == 10.0);
  CHECK_THROWS_AS(unproject(test_cam(), 100.0, 100.0, 0.0), std::domain_error);
}

TEST_CASE("projection roundtrip is tight over the working range") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> uz(1.0, 100.0), ux(-30.0, 30.0), uy(-5.0, 5.0);
  const CameraModel cam = test_cam();
  for (int i = 0; i < 20000; ++i) {
    const Vec3 p = {ux(gen), uy(gen), uz(gen)};
    const auto proj = project(cam, p);
    const Vec3 q = unproject(cam, proj.u, proj.v, proj.depth);
    CHECK(norm(q - p) < 1e-9 * norm(p));
  }
}

TEST_CASE("rectified pair shares rows and satisfies the epipolar relation") {
  const StereoRig rig = test_rig();
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> uz(1.0, 80.0), ux(-20.0, 20.0), uy(-4.0, 4.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p = {ux(gen), uy(gen), uz(gen)};
    const auto pl = project(rig.left, p);
    const auto pr = project(rig.right, right_frame(rig, p));
    CHECK(pl.v == pr.v);
    CHECK(pl.u - pr.u == Approx(rig.left.f_u * rig.baseline / p.z).epsilon(1e-9));
  }
}

TEST_CASE("disparity follows f_u * baseline / depth and decreases with depth") {
  const StereoRig rig = test_rig();
  CHECK(disparity(rig, 9.0) == Approx(40.0));
  CHECK(disparity(rig, 360.0) == Approx(1.0));
  CHECK_THROWS_AS(disparity(rig, 0.0), std::domain_error);
  CHECK(depth_of_disparity(rig, disparity(rig, 13.7)) == Approx(13.7));
  double prev = disparity(rig, 0.5);
  for (double z = 1.0; z < 90.0; z += 0.7) {
    const double d = disparity(rig, z);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("project_box gives perspective-scaled extents around the principal point") {
  const CameraModel cam = test_cam();
  const Box3D cube({0.0, 0.0, 10.0}, 1.0, 1.0, 1.0, 0.0);
  const auto proj = project_box(cam, cube);
  // Near face at z=9.5 dominates the hull: half extent 0.5 * 720 / 9.5.
  const double near_half = 0.5 * 720.0 / 9.5;
  CHECK(proj.hull.x0 == Approx(621.0 - near_half));
  CHECK(proj.hull.x1 == Approx(621.0 + near_half));
  CHECK(proj.hull.y0 == Approx(187.0 - near_half));
  CHECK(proj.hull.y1 == Approx(187.0 + near_half));

  const auto far_proj = project_box(cam, Box3D({0.0, 0.0, 20.0}, 1.0, 1.0, 1.0, 0.0));
  CHECK(far_proj.hull.width() == Approx(0.5 * proj.hull.width()).epsilon(0.06));
}

TEST_CASE("project_box rejects boxes crossing the image plane") {
  CHECK_THROWS_AS(project_box(test_cam(), Box3D({0.0, 0.0, 0.3}, 1.0, 1.0, 1.0, 0.0)),
                  std::domain_error);
}

TEST_CASE("box corners honor the canonical order") {
  const Box3D box({1.0, 2.0, 3.0}, 2.0, 1.0, 4.0, 0.0);
  const auto c = box_corners(box);
  // bottom face (y = center + h/2), counter-clockwise from (+x, +z)
  CHECK(c[0].x == Approx(2.0));
  CHECK(c[0].y == Approx(4.0));
  CHECK(c[0].z == Approx(3.5));
  CHECK(c[1].x == Approx(0.0));
  CHECK(c[2].z == Approx(2.5));
  CHECK(c[4].y == Approx(0.0));
}

TEST_CASE("box_contains matches the rotated frame test") {
  const Box3D box({0.0, 0.0, 10.0}, 4.0, 2.0, 1.0, 0.7);
  CHECK(box_contains(box, box.center));
  const auto corners = box_corners(box);
  for (const Vec3& c : corners) CHECK(box_contains(box, c, 1e-9));
  CHECK_FALSE(box_contains(box, {0.0, 0.6, 10.0}));
  CHECK(box_contains(box, {0.0, 0.5, 10.0}));  // boundary counts as inside
}

TEST_CASE("yaw normalization and mirroring") {
  constexpr double pi = std::numbers::pi;
  CHECK(normalize_yaw(0.3) == 0.3);
  CHECK(normalize_yaw(pi) == pi);
  CHECK(normalize_yaw(-pi) == pi);
  CHECK(normalize_yaw(2.5 * pi) == Approx(0.5 * pi));
  CHECK(mirror_yaw(0.0) == pi);
  CHECK(mirror_yaw(pi) == 0.0);
  CHECK(mirror_yaw(0.25) == Approx(pi - 0.25));
  // involution on the exact-grid domain
  for (int k = -999; k <= 1000; ++k) {
    const double raw = double(k) * pi / 1000.0;
    const double snapped = std::ldexp(std::round(std::ldexp(raw, 51)), -51);
    if (snapped <= -pi || snapped > pi) continue;
    CHECK(mirror_yaw(mirror_yaw(snapped)) == snapped);
  }
}

TEST_CASE("rigid transforms compose and default to identity") {
  RigidTransform id;
  CHECK(norm(id({1.0, 2.0, 3.0}) - Vec3{1.0, 2.0, 3.0}) == 0.0);
  RigidTransform rot;  // 90 degrees about y
  rot.rotation = {0, 0, 1, 0, 1, 0, -1, 0, 0};
  rot.translation = {1.0, 0.0, 0.0};
  RigidTransform shift;
  shift.translation = {0.0, 0.0, 2.0};
  const Vec3 direct = rot(shift({1.0, 0.0, 0.0}));
  const Vec3 composed = compose(rot, shift)({1.0, 0.0, 0.0});
  CHECK(norm(direct - composed) < 1e-15);
}

TEST_CASE("camera and rig invariants are enforced") {
  CHECK_THROWS_AS(CameraModel(0.0, 720.0, 621.0, 187.0, 1242, 375), std::invalid_argument);
  CHECK_THROWS_AS(CameraModel(720.0, 720.0, 1300.0, 187.0, 1242, 375), std::invalid_argument);
  CHECK_THROWS_AS(StereoRig(test_cam(), test_cam(), 0.0), std::invalid_argument);
  const CameraModel other(700.0, 720.0, 621.0, 187.0, 1242, 375);
  CHECK_THROWS_AS(StereoRig(test_cam(), other, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(Box3D({0, 0, 5}, 0.0, 1.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Box3D({0, 0, 5}, 1.0, 1.0, 1.0, 0.0, 0, 1.5), std::invalid_argument);
}
