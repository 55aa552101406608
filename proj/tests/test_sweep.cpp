#include <catch2/catch.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "dsv/sweep.hpp"

using namespace dsv;

namespace {

StereoRig small_rig(int width = 64, int height = 32, double focal = 720.0) {
  const CameraModel cam(focal, focal, (width - 1) * 0.5, (height - 1) * 0.5, width, height);
  return StereoRig(cam, cam, 0.5);
}

FeatureMap2D random_map(std::mt19937_64& gen, int rows, int cols, int channels) {
  FeatureMap2D map(rows, cols, channels);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (float& v : map.data) v = u(gen);
  return map;
}

}  // namespace

TEST_CASE("shift_of_depth follows the floored-disparity power rule") {
  const StereoRig rig = small_rig();
  SweepConfig cfg{SweepMode::depthwise, 96, 32, 1.0, 1.0 / 3.0};
  CHECK(shift_of_depth(rig, 9.0, cfg) == 13);  // floor(40 / 3)
  cfg.alpha = 0.5;
  CHECK(shift_of_depth(rig, 9.0, cfg) == 2);  // floor(sqrt(40) / 3)
  cfg.alpha = 0.0;
  CHECK(shift_of_depth(rig, 9.0, cfg) == 0);   // x^0 == 1, floor(1/3)
  CHECK(shift_of_depth(rig, 77.3, cfg) == 0);  // any depth at alpha 0
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(shift_of_depth(rig, 0.0, cfg), std::domain_error);
  CHECK_THROWS_AS(shift_of_depth(rig, -2.0, cfg), std::domain_error);
}

TEST_CASE("shift_of_depth clamps to the window range and decreases with depth") {
  const StereoRig rig = small_rig();
  const SweepConfig cfg{SweepMode::depthwise, 96, 32, 1.0, 1.0};
  CHECK(shift_of_depth(rig, 0.1, cfg) == 64);  // disparity 3600, clamped to C_I - C_V
  int prev = shift_of_depth(rig, 0.05, cfg);
  for (double z = 0.1; z < 500.0; z *= 1.07) {
    const int s = shift_of_depth(rig, z, cfg);
    CHECK(s <= prev);
    prev = s;
  }
  CHECK(prev == 0);  // disparity < 1 once z > f_u * baseline
}

TEST_CASE("cyclic_slice enumerates the two ordered intervals") {
  CHECK(cyclic_slice(0, 96, 32) == std::vector<int>{0,  1,  2,  3,  4,  5,  6,  7,  8,  9,  10,
                                                    11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21,
                                                    22, 23, 24, 25, 26, 27, 28, 29, 30, 31});
  std::vector<int> expected;
  for (int c = 64; c < 72; ++c) expected.push_back(c);
  for (int c = 40; c < 64; ++c) expected.push_back(c);
  CHECK(cyclic_slice(40, 96, 32) == expected);

  std::vector<int> tail;
  for (int c = 64; c < 96; ++c) tail.push_back(c);
  CHECK(cyclic_slice(64, 96, 32) == tail);

  CHECK_THROWS_AS(cyclic_slice(-1, 96, 32), std::domain_error);
  CHECK_THROWS_AS(cyclic_slice(65, 96, 32), std::domain_error);
}

TEST_CASE("cyclic_slice satisfies the slot-congruence law for every shift") {
  const int c_in = 96, c_v = 32;
  for (int shift = 0; shift <= c_in - c_v; ++shift) {
    const auto slice = cyclic_slice(shift, c_in, c_v);
    REQUIRE(int(slice.size()) == c_v);
    std::set<int> seen(slice.begin(), slice.end());
    CHECK(int(seen.size()) == c_v);  // distinct
    CHECK(*seen.begin() == shift);
    CHECK(*seen.rbegin() == shift + c_v - 1);
    for (int j = 0; j < c_v; ++j) CHECK(slice[j] % c_v == j);
  }
}

TEST_CASE("channel consistency: shared channels keep their output slot across shifts") {
  const int c_in = 96, c_v = 32;
  for (int s1 = 0; s1 <= c_in - c_v; ++s1) {
    const auto a = cyclic_slice(s1, c_in, c_v);
    for (int s2 = s1; s2 <= c_in - c_v; ++s2) {
      const auto b = cyclic_slice(s2, c_in, c_v);
      for (int j = 0; j < c_v; ++j)
        for (int k = 0; k < c_v; ++k)
          if (a[j] == b[k]) CHECK(j == k);
    }
  }
}

TEST_CASE("constant maps fill the volume with view-tagged features") {
  const StereoRig rig = small_rig(32, 8);
  FeatureMap2D left(8, 32, 4), right(8, 32, 4);
  std::fill(left.data.begin(), left.data.end(), 1.0f);
  std::fill(right.data.begin(), right.data.end(), 2.0f);
  const FrustumSpec spec(8, 32, 4.0, uniform_depth_planes(5, 10.0, 30.0));
  const SweepConfig cfg{SweepMode::classic, 4, 4, 0.0, 1.0};
  const FrustumVolume vol = build_psv(left, right, rig, spec, cfg);
  REQUIRE(vol.channels == 8);

  // pick a cell where the right sample is safely in bounds
  const double max_disp_feat = disparity(rig, 10.0) / 4.0;
  const int c = int(max_disp_feat) + 2;
  REQUIRE(c < 32);
  for (int k = 0; k < 5; ++k) {
    for (int ch = 0; ch < 4; ++ch) {
      CHECK(vol.at(4, c, k, ch) == 1.0f);
      CHECK(vol.at(4, c, k, 4 + ch) == 2.0f);
    }
  }
}

TEST_CASE("right half zero-fills when the disparity-shifted sample leaves the map") {
  const StereoRig rig = small_rig(32, 8);
  FeatureMap2D left(8, 32, 2), right(8, 32, 2);
  std::fill(left.data.begin(), left.data.end(), 1.0f);
  std::fill(right.data.begin(), right.data.end(), 2.0f);
  const FrustumSpec spec(8, 32, 4.0, {2.0});  // disparity 180 -> 45 feature px
  const SweepConfig cfg{SweepMode::classic, 2, 2, 0.0, 1.0};
  const FrustumVolume vol = build_psv(left, right, rig, spec, cfg);
  for (int ch = 0; ch < 2; ++ch) {
    CHECK(vol.at(4, 0, 0, ch) == 1.0f);      // left always present
    CHECK(vol.at(4, 0, 0, 2 + ch) == 0.0f);  // right fully out of bounds
  }
}

TEST_CASE("depthwise collapses to classic when the window cannot move") {
  std::mt19937_64 gen(5);
  const StereoRig rig = small_rig(24, 10);
  const FrustumSpec spec(10, 24, 4.0, uniform_depth_planes(7, 5.0, 35.0));
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap2D left = random_map(gen, 10, 24, 8);
    const FeatureMap2D right = random_map(gen, 10, 24, 8);
    // C_I == C_V forces shift 0
    const SweepConfig classic{SweepMode::classic, 8, 8, 0.0, 1.0};
    const SweepConfig depthwise{SweepMode::depthwise, 8, 8, 1.0, 8.0 / 7.0};
    CHECK(build_psv(left, right, rig, spec, classic).data ==
          build_psv(left, right, rig, spec, depthwise).data);
    // alpha == 0 with s < 1 floors every shift to 0
    const SweepConfig cl2{SweepMode::classic, 8, 4, 0.0, 0.5};
    const SweepConfig dw2{SweepMode::depthwise, 8, 4, 0.0, 0.5};
    CHECK(build_psv(left, right, rig, spec, cl2).data ==
          build_psv(left, right, rig, spec, dw2).data);
  }
}

TEST_CASE("group sweeping propagates contiguous channel groups per plane band") {
  std::mt19937_64 gen(9);
  const StereoRig rig = small_rig(24, 10);
  const FeatureMap2D left = random_map(gen, 10, 24, 6);
  const FeatureMap2D right = random_map(gen, 10, 24, 6);
  const FrustumSpec spec(10, 24, 4.0, uniform_depth_planes(9, 5.0, 35.0));
  const FrustumVolume vol = build_group_ps(left, right, rig, spec, 2);
  REQUIRE(vol.channels == 4);
  // 3 groups over 9 planes: planes 0-2 use channels {0,1}, 3-5 {2,3}, 6-8 {4,5}
  for (int k = 0; k < 9; ++k) {
    const int g = k / 3;
    for (int ch = 0; ch < 2; ++ch)
      CHECK(vol.at(3, 7, k, ch) == left.at(3, 7, 2 * g + ch));
  }
  CHECK_THROWS_AS(build_group_ps(left, right, rig, spec, 4), std::domain_error);
}

TEST_CASE("one group is exactly classic plane sweeping") {
  std::mt19937_64 gen(13);
  const StereoRig rig = small_rig(24, 10);
  const FeatureMap2D left = random_map(gen, 10, 24, 4);
  const FeatureMap2D right = random_map(gen, 10, 24, 4);
  const FrustumSpec spec(10, 24, 4.0, uniform_depth_planes(6, 5.0, 35.0));
  const SweepConfig classic{SweepMode::classic, 4, 4, 0.0, 1.0};
  CHECK(build_group_ps(left, right, rig, spec, 4).data ==
        build_psv(left, right, rig, spec, classic).data);
}

TEST_CASE("per-cell sample counts are identical across sweep modes") {
  std::mt19937_64 gen(21);
  const StereoRig rig = small_rig(24, 10);
  const FeatureMap2D left = random_map(gen, 10, 24, 8);
  const FeatureMap2D right = random_map(gen, 10, 24, 8);
  const FrustumSpec spec(10, 24, 4.0, uniform_depth_planes(8, 5.0, 35.0));

  SweepStats classic_stats, depthwise_stats, grouped_stats;
  build_psv(left, right, rig, spec, {SweepMode::classic, 8, 4, 0.0, 1.0}, &classic_stats);
  build_psv(left, right, rig, spec, make_sweep_config(SweepMode::depthwise, 8, 4, 0.3, 8),
            &depthwise_stats);
  build_group_ps(left, right, rig, spec, 4, &grouped_stats);

  CHECK(classic_stats.cells == depthwise_stats.cells);
  CHECK(classic_stats.cells == grouped_stats.cells);
  CHECK(classic_stats.samples_per_cell() == depthwise_stats.samples_per_cell());
  CHECK(classic_stats.samples_per_cell() == grouped_stats.samples_per_cell());
  CHECK(classic_stats.samples_per_cell() == 8.0);  // 2 views x C_V
}

TEST_CASE("3dgv gathers projected features and zero-fills out-of-view voxels") {
  const StereoRig rig = small_rig(64, 32, 60.0);
  FeatureMap2D left(32, 64, 3), right(32, 64, 3);
  std::fill(left.data.begin(), left.data.end(), 3.0f);
  std::fill(right.data.begin(), right.data.end(), 5.0f);
  const VoxelGridSpec vspec({-2.0, -1.0, 4.0}, {0.5, 0.5, 0.5}, {8, 4, 8});
  const SweepConfig cfg{SweepMode::classic, 3, 3, 0.0, 1.0};
  const VoxelVolume vol = build_3dgv_stereo(left, right, rig, vspec, 1.0, cfg);
  REQUIRE(vol.channels == 6);
  // central voxel projects inside both views
  CHECK(vol.at(4, 2, 4, 0) == 3.0f);
  CHECK(vol.at(4, 2, 4, 3) == 5.0f);

  // a voxel grid behind the camera is all zeros
  const VoxelGridSpec behind({-1.0, -1.0, -6.0}, {0.5, 0.5, 0.5}, {4, 4, 4});
  const VoxelVolume zvol = build_3dgv_stereo(left, right, rig, behind, 1.0, cfg);
  for (float v : zvol.data) CHECK(v == 0.0f);

  // monocular: single view, C_V channels
  const VoxelVolume mono = build_3dgv_mono(left, rig, vspec, 1.0, cfg);
  CHECK(mono.channels == 3);
}

TEST_CASE("3dgv zero-fills voxels that project outside the image") {
  const StereoRig rig = small_rig(64, 32, 60.0);
  FeatureMap2D left(32, 64, 2), right(32, 64, 2);
  std::fill(left.data.begin(), left.data.end(), 1.0f);
  std::fill(right.data.begin(), right.data.end(), 1.0f);
  // grid far off to the side at close range: u = f*x/z way outside
  const VoxelGridSpec vspec({40.0, -1.0, 1.0}, {0.5, 0.5, 0.5}, {4, 4, 4});
  const SweepConfig cfg{SweepMode::classic, 2, 2, 0.0, 1.0};
  const VoxelVolume vol = build_3dgv_stereo(left, right, rig, vspec, 1.0, cfg);
  for (float v : vol.data) CHECK(v == 0.0f);
}

TEST_CASE("sweep configuration is validated") {
  const StereoRig rig = small_rig(24, 10);
  FeatureMap2D left(10, 24, 4), right(10, 24, 4);
  const FrustumSpec spec(10, 24, 4.0, uniform_depth_planes(4, 5.0, 20.0));
  CHECK_THROWS_AS(build_psv(left, right, rig, spec, {SweepMode::classic, 4, 8, 0.0, 1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_psv(left, right, rig, spec, {SweepMode::classic, 8, 4, 0.0, 1.0}),
                  std::domain_error);  // C_I mismatch with the actual maps
  FeatureMap2D tall(12, 24, 4);
  CHECK_THROWS_AS(build_psv(tall, right, rig, spec, {SweepMode::classic, 4, 4, 0.0, 1.0}),
                  std::domain_error);
}
