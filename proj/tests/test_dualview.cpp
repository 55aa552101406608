#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "dsv/dualview.hpp"

using namespace dsv;

namespace {

CameraModel mid_cam(int width = 128, int height = 64, double f = 160.0) {
  return CameraModel(f, f, (width - 1) * 0.5, (height - 1) * 0.5, width, height);
}

}  // namespace

TEST_CASE("frustum_to_voxel carries constants onto covered voxels") {
  const CameraModel cam = mid_cam();
  const FrustumSpec fspec(64, 128, 1.0, uniform_depth_planes(16, 2.0, 17.0));
  FrustumVolume fv(fspec, 2);
  std::fill(fv.data.begin(), fv.data.end(), 5.0f);
  const VoxelGridSpec vspec({-1.5, -1.0, 5.0}, {0.25, 0.25, 0.25}, {12, 8, 16});
  const VoxelVolume vv = frustum_to_voxel(fv, cam, vspec);
  // interior voxel well inside image and plane range
  CHECK(vv.at(6, 4, 8, 0) == Approx(5.0));
  CHECK(vv.at(6, 4, 8, 1) == Approx(5.0));
}

TEST_CASE("frustum_to_voxel zeroes voxels outside the frustum or behind the camera") {
  const CameraModel cam = mid_cam();
  const FrustumSpec fspec(64, 128, 1.0, uniform_depth_planes(8, 2.0, 9.0));
  FrustumVolume fv(fspec, 1);
  std::fill(fv.data.begin(), fv.data.end(), 4.0f);
  const VoxelGridSpec behind({-1.0, -1.0, -5.0}, {0.5, 0.5, 0.5}, {4, 4, 4});
  for (float v : frustum_to_voxel(fv, cam, behind).data) CHECK(v == 0.0f);
  const VoxelGridSpec beyond({-1.0, -1.0, 30.0}, {0.5, 0.5, 0.5}, {4, 4, 4});
  for (float v : frustum_to_voxel(fv, cam, beyond).data) CHECK(v == 0.0f);
}

TEST_CASE("plane-depth ramps survive the frustum-to-voxel resampling") {
  const CameraModel cam = mid_cam();
  const FrustumSpec fspec(64, 128, 1.0, uniform_depth_planes(21, 2.0, 22.0));
  FrustumVolume fv(fspec, 1);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 128; ++c)
      for (int k = 0; k < 21; ++k) fv.at(r, c, k, 0) = float(fspec.depth_planes[k]);
  const VoxelGridSpec vspec({-2.0, -1.5, 6.0}, {0.25, 0.25, 0.25}, {16, 12, 24});
  const VoxelVolume vv = frustum_to_voxel(fv, cam, vspec);
  for (int ix = 2; ix < 14; ix += 3)
    for (int iy = 2; iy < 10; iy += 3)
      for (int iz = 2; iz < 22; iz += 3) {
        const Vec3 c = voxel_center(vspec, ix, iy, iz);
        CHECK(vv.at(ix, iy, iz, 0) == Approx(c.z).margin(1e-4));
      }
}

TEST_CASE("voxel_to_frustum reproduces constants and z ramps on covered cells") {
  const CameraModel cam = mid_cam();
  const VoxelGridSpec vspec({-4.0, -2.0, 2.0}, {0.25, 0.25, 0.25}, {32, 16, 64});
  VoxelVolume vv(vspec, 2);
  for (int ix = 0; ix < 32; ++ix)
    for (int iy = 0; iy < 16; ++iy)
      for (int iz = 0; iz < 64; ++iz) {
        vv.at(ix, iy, iz, 0) = 2.0f;
        vv.at(ix, iy, iz, 1) = float(voxel_center(vspec, ix, iy, iz).z);
      }
  const FrustumSpec fspec(32, 64, 2.0, uniform_depth_planes(12, 4.0, 15.0));
  const FrustumVolume fv = voxel_to_frustum(vv, cam, fspec);
  REQUIRE(fv.channels == 2);
  for (int r = 12; r < 22; r += 3)
    for (int c = 24; c < 42; c += 4)
      for (int k = 1; k < 11; k += 3) {
        CHECK(fv.at(r, c, k, 0) == Approx(2.0).margin(1e-5));
        CHECK(fv.at(r, c, k, 1) == Approx(fspec.depth_planes[k]).margin(1e-4));
      }
  // frustum cell whose 3D point lies outside the grid
  CHECK(fv.at(0, 0, 11, 0) == 0.0f);
}

TEST_CASE("integrate concatenates channels over a shared lattice") {
  const VoxelGridSpec spec({0, 0, 0}, {0.5, 0.5, 0.5}, {3, 3, 3});
  VoxelVolume a(spec, 2), b(spec, 3);
  std::fill(a.data.begin(), a.data.end(), 1.0f);
  const VoxelVolume ab = integrate(a, b);
  CHECK(ab.channels == 5);
  CHECK(ab.spec == spec);
  CHECK(ab.at(1, 1, 1, 0) == 1.0f);
  CHECK(ab.at(1, 1, 1, 2) == 0.0f);

  const VoxelGridSpec other({0, 0, 0}, {0.5, 0.5, 0.5}, {3, 3, 4});
  CHECK_THROWS_AS(integrate(a, VoxelVolume(other, 2)), std::domain_error);
}

TEST_CASE("cost_to_depth implements soft-argmin over planes") {
  FrustumSpec two(1, 1, 1.0, {4.0, 8.0});
  FrustumVolume eq(two, 1);
  CHECK(cost_to_depth(eq, 1, 1).at(0, 0) == Approx(6.0));

  FrustumSpec three(1, 1, 1.0, {5.0, 10.0, 15.0});
  FrustumVolume peaked(three, 1);
  peaked.at(0, 0, 1, 0) = 50.0f;
  CHECK(cost_to_depth(peaked, 1, 1).at(0, 0) == Approx(10.0).margin(1e-6));

  FrustumVolume weighted(three, 1);
  weighted.at(0, 0, 0, 0) = std::log(1.0f);
  weighted.at(0, 0, 1, 0) = std::log(1.0f);
  weighted.at(0, 0, 2, 0) = std::log(2.0f);
  CHECK(cost_to_depth(weighted, 1, 1).at(0, 0) == Approx(11.25));
}

TEST_CASE("cost_to_depth stays within the plane range and ignores logit offsets") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  const FrustumSpec spec(6, 9, 4.0, uniform_depth_planes(7, 3.0, 21.0));
  FrustumVolume logits(spec, 1);
  for (float& v : logits.data) v = u(gen);
  const DepthMap low = cost_to_depth(logits, 6, 9);
  for (float v : low.values) {
    CHECK(v >= 3.0f);
    CHECK(v <= 21.0f);
  }
  // adding a per-pixel constant leaves the distribution unchanged
  FrustumVolume shifted = logits;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 9; ++c)
      for (int k = 0; k < 7; ++k) shifted.at(r, c, k, 0) += float(10.0 + r - c);
  const DepthMap low2 = cost_to_depth(shifted, 6, 9);
  for (std::size_t i = 0; i < low.values.size(); ++i)
    CHECK(low2.values[i] == Approx(low.values[i]).margin(1e-4));

  // upsampling keeps the range
  const DepthMap up = cost_to_depth(logits, 24, 36);
  for (float v : up.values) {
    CHECK(v >= 3.0f);
    CHECK(v <= 21.0f);
  }
}

TEST_CASE("mean_channels reduces to a single channel") {
  FrustumSpec spec(2, 2, 1.0, {1.0, 2.0});
  FrustumVolume vol(spec, 4);
  for (int ch = 0; ch < 4; ++ch) vol.at(1, 1, 0, ch) = float(ch);
  const FrustumVolume reduced = mean_channels(vol);
  CHECK(reduced.channels == 1);
  CHECK(reduced.at(1, 1, 0, 0) == Approx(1.5));
}

TEST_CASE("depth_l1 averages valid masked pixels") {
  DepthMap pred(2, 3), gt(2, 3);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) {
      gt.at(r, c) = 5.0f;
      pred.at(r, c) = 5.5f;
    }
  CHECK(depth_l1(pred, gt) == Approx(0.5));
  CHECK(depth_l1(gt, gt) == 0.0);
  gt.at(0, 0) = 0.0f;  // invalid
  CHECK(depth_l1(pred, gt) == Approx(0.5));
  DepthMap empty(2, 3);
  CHECK_THROWS_AS(depth_l1(pred, empty), std::domain_error);
  DepthMap small(1, 3);
  CHECK_THROWS_AS(depth_l1(small, gt), std::invalid_argument);
}

TEST_CASE("voxel-frustum roundtrip reproduces depth-linear fields in the interior") {
  const CameraModel cam = mid_cam();
  const FrustumSpec fspec(48, 96, 1.5, uniform_depth_planes(25, 4.0, 16.0));
  const VoxelGridSpec vspec({-3.0, -1.5, 4.5}, {0.25, 0.25, 0.25}, {24, 12, 44});
  FrustumVolume fv(fspec, 1);
  const double a = 0.7, e = 0.11;
  for (int r = 0; r < fspec.rows; ++r)
    for (int c = 0; c < fspec.cols; ++c)
      for (int k = 0; k < fspec.planes(); ++k)
        fv.at(r, c, k, 0) = float(a + e * fspec.depth_planes[k]);
  const FrustumVolume back = voxel_to_frustum(frustum_to_voxel(fv, cam, vspec), cam, fspec);

  // Mutually covered interior: the frustum cell's 3D point sits a full cell
  // inside the voxel grid and each voxel it interpolates from projects a
  // full cell inside the frustum volume, so no zero-fill leaks in.
  auto voxel_interior = [&](int ix, int iy, int iz) {
    const Vec3 vc = voxel_center(vspec, ix, iy, iz);
    if (!(vc.z > 0.0)) return false;
    const Projection proj = project(cam, vc);
    const double fu = proj.u / fspec.stride, fvr = proj.v / fspec.stride;
    const double pp = fspec.plane_position(proj.depth);
    return fu >= 1.0 && fu <= fspec.cols - 2.0 && fvr >= 1.0 && fvr <= fspec.rows - 2.0 &&
           pp >= 1.0 && pp <= fspec.planes() - 2.0;
  };
  double max_err = 0.0;
  int checked = 0;
  for (int r = 0; r < fspec.rows; ++r) {
    for (int c = 0; c < fspec.cols; ++c) {
      for (int k = 1; k + 1 < fspec.planes(); ++k) {
        const Vec3 p = unproject(cam, c * fspec.stride, r * fspec.stride,
                                 fspec.depth_planes[k]);
        const Vec3 fi = voxel_fractional_index(vspec, p);
        if (fi.x < 1.0 || fi.x > vspec.dims[0] - 2.0 || fi.y < 1.0 ||
            fi.y > vspec.dims[1] - 2.0 || fi.z < 1.0 || fi.z > vspec.dims[2] - 2.0)
          continue;
        bool interior = true;
        for (int corner = 0; corner < 8 && interior; ++corner)
          interior = voxel_interior(int(std::floor(fi.x)) + (corner & 1),
                                    int(std::floor(fi.y)) + ((corner >> 1) & 1),
                                    int(std::floor(fi.z)) + ((corner >> 2) & 1));
        if (!interior) continue;
        max_err = std::max(max_err, std::abs(double(back.at(r, c, k, 0)) -
                                             (a + e * fspec.depth_planes[k])));
        ++checked;
      }
    }
  }
  REQUIRE(checked > 1000);
  CHECK(max_err < 1e-5);
}
