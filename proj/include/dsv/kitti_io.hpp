#pragma once

// Data ingestion/egress: KITTI calibration, label and velodyne parsing,
// ground-truth depth generation, the DVOL volume container, depth/image
// PNGs, the KITTI directory layout, and a synthetic scene generator so the
// whole pipeline runs without a dataset.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dsv/analytics.hpp"
#include "dsv/dualview.hpp"
#include "dsv/errors.hpp"
#include "dsv/geom.hpp"
#include "dsv/grid.hpp"
#include "dsv/png_io.hpp"
#include "dsv/rng.hpp"
#include "dsv/scene.hpp"

namespace dsv {

// ---------------------------------------------------------------------------
// Files

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("read failed for " + path.string());
  return bytes;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

/// Writes through a temp file and renames into place.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw io_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("rename failed for " + path.string() + ": " + ec.message());
}

inline void write_text_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace detail {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char probe[64];
      std::snprintf(probe, sizeof probe, "%.*g", prec, v);
      std::sscanf(probe, "%lf", &back);
      if (back == v) return probe;
    }
  }
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Calibration

/// Rectified projection matrices and the velodyne-to-camera chain, as found
/// in KITTI object calibration files.
struct Calibration {
  std::array<double, 12> p_left{};          // P2, row-major 3x4
  std::array<double, 12> p_right{};         // P3
  std::array<double, 9> r0_rect{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 12> tr_velo_to_cam{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

  double baseline() const {
    const double f = p_left[0];
    return (p_left[3] - p_right[3]) / f;
  }

  StereoRig rig(int image_width, int image_height) const {
    const CameraModel left(p_left[0], p_left[5], p_left[2], p_left[6], image_width,
                           image_height);
    const CameraModel right(p_right[0], p_right[5], p_right[2], p_right[6], image_width,
                            image_height);
    return StereoRig(left, right, baseline());
  }

  /// Camera translation hidden in a projection matrix: t = K^-1 P[:,3].
  static Vec3 camera_translation(const std::array<double, 12>& p) {
    return {(p[3] - p[2] * p[11]) / p[0], (p[7] - p[6] * p[11]) / p[5], p[11]};
  }

  /// Velodyne frame to the left camera frame (R0_rect after Tr_velo_to_cam,
  /// then the left camera's own offset from the rectified origin).
  RigidTransform cam_from_velo() const {
    RigidTransform tr;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) tr.rotation[3 * i + j] = tr_velo_to_cam[4 * i + j];
    }
    tr.translation = {tr_velo_to_cam[3], tr_velo_to_cam[7], tr_velo_to_cam[11]};
    RigidTransform rect;
    rect.rotation = r0_rect;
    RigidTransform out = compose(rect, tr);
    out.translation = out.translation + camera_translation(p_left);
    return out;
  }
};

namespace detail {

inline bool parse_numbers(std::string_view text, std::string_view key, double* out,
                          std::size_t count) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string_view k = line.substr(0, colon);
    while (!k.empty() && (k.back() == ' ' || k.back() == '\t')) k.remove_suffix(1);
    if (k != key) continue;
    std::istringstream vals{std::string(line.substr(colon + 1))};
    for (std::size_t i = 0; i < count; ++i)
      if (!(vals >> out[i])) return false;
    double extra;
    if (vals >> extra) return false;  // wrong value count
    return true;
  }
  return false;
}

}  // namespace detail

/// Parses "KEY: v1 v2 ..." lines; requires P2, P3, R0_rect (or R_rect) and
/// Tr_velo_to_cam with exact value counts.
inline Calibration parse_calib(std::string_view text) {
  Calibration calib;
  if (!detail::parse_numbers(text, "P2", calib.p_left.data(), 12))
    throw format_error("calib: missing or malformed P2");
  if (!detail::parse_numbers(text, "P3", calib.p_right.data(), 12))
    throw format_error("calib: missing or malformed P3");
  if (!detail::parse_numbers(text, "R0_rect", calib.r0_rect.data(), 9) &&
      !detail::parse_numbers(text, "R_rect", calib.r0_rect.data(), 9))
    throw format_error("calib: missing or malformed R0_rect");
  if (!detail::parse_numbers(text, "Tr_velo_to_cam", calib.tr_velo_to_cam.data(), 12))
    throw format_error("calib: missing or malformed Tr_velo_to_cam");
  if (!(calib.p_left[0] > 0.0) || !(calib.p_left[5] > 0.0) || !(calib.p_right[0] > 0.0))
    throw format_error("calib: projection matrices need positive focal lengths");
  if (!(calib.baseline() > 0.0)) throw format_error("calib: non-positive derived baseline");
  return calib;
}

inline std::string serialize_calib(const Calibration& calib) {
  std::string out;
  auto line = [&out](const char* key, const double* vals, std::size_t n) {
    out += key;
    out += ':';
    for (std::size_t i = 0; i < n; ++i) {
      out += ' ';
      out += detail::format_double(vals[i]);
    }
    out += '\n';
  };
  line("P2", calib.p_left.data(), 12);
  line("P3", calib.p_right.data(), 12);
  line("R0_rect", calib.r0_rect.data(), 9);
  line("Tr_velo_to_cam", calib.tr_velo_to_cam.data(), 12);
  return out;
}

// ---------------------------------------------------------------------------
// Labels

inline constexpr int kClassCar = 0;
inline constexpr int kClassPedestrian = 1;
inline constexpr int kClassCyclist = 2;

inline int class_id_of(std::string_view name) {
  static constexpr std::string_view names[] = {"Car",   "Pedestrian",     "Cyclist", "Van",
                                               "Truck", "Person_sitting", "Tram",    "Misc"};
  for (std::size_t i = 0; i < std::size(names); ++i)
    if (name == names[i]) return int(i);
  return int(std::size(names)) - 1;  // fold unknown types into Misc
}

inline std::string_view class_name_of(int class_id) {
  static constexpr std::string_view names[] = {"Car",   "Pedestrian",     "Cyclist", "Van",
                                               "Truck", "Person_sitting", "Tram",    "Misc"};
  if (class_id < 0 || class_id >= int(std::size(names))) return "Misc";
  return names[class_id];
}

/// One KITTI label row. `location` is the box bottom-center in the camera
/// frame as stored in the file.
struct KittiLabel {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox{};  // x1 y1 x2 y2, pixels
  double height = 0.0, width = 0.0, length = 0.0;
  Vec3 location;
  double yaw = 0.0;
  std::optional<double> score;

  /// Geometric-center Box3D (bottom-center y shifted up by height/2).
  Box3D to_box() const {
    return Box3D({location.x, location.y - 0.5 * height, location.z}, length, width, height,
                 yaw, class_id_of(type), score);
  }
};

/// Parses label rows; "DontCare" rows are skipped. Malformed rows raise a
/// format_error carrying the 1-based line number.
inline std::vector<KittiLabel> parse_labels(std::string_view text) {
  std::vector<KittiLabel> labels;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream in(line);
    KittiLabel label;
    double occl = 0.0;
    in >> label.type >> label.truncation >> occl >> label.alpha >> label.bbox[0] >>
        label.bbox[1] >> label.bbox[2] >> label.bbox[3] >> label.height >> label.width >>
        label.length >> label.location.x >> label.location.y >> label.location.z >> label.yaw;
    if (!in) throw format_error("labels: malformed line " + std::to_string(line_no));
    double score = 0.0;
    if (in >> score) label.score = score;
    label.occlusion = int(occl);
    if (label.type == "DontCare") continue;
    labels.push_back(std::move(label));
  }
  return labels;
}

inline std::string serialize_labels(std::span<const KittiLabel> labels) {
  std::string out;
  for (const KittiLabel& l : labels) {
    out += l.type;
    const double fields[] = {l.truncation, double(l.occlusion), l.alpha,     l.bbox[0],
                             l.bbox[1],    l.bbox[2],           l.bbox[3],   l.height,
                             l.width,      l.length,            l.location.x, l.location.y,
                             l.location.z, l.yaw};
    for (double f : fields) {
      out += ' ';
      out += detail::format_double(f);
    }
    if (l.score) {
      out += ' ';
      out += detail::format_double(*l.score);
    }
    out += '\n';
  }
  return out;
}

/// Builds a label row for a box: bottom-center location, observation angle,
/// and the projected 2D bbox (zeros when a corner sits behind the camera).
inline KittiLabel make_label(const Box3D& box, const CameraModel& cam) {
  KittiLabel label;
  label.type = std::string(class_name_of(box.class_id));
  label.height = box.height;
  label.width = box.width;
  label.length = box.length;
  label.location = {box.center.x, box.center.y + 0.5 * box.height, box.center.z};
  label.yaw = box.yaw;
  label.alpha = normalize_yaw(box.yaw - std::atan2(box.center.x, box.center.z));
  label.score = box.score;
  try {
    const BoxProjection proj = project_box(cam, box);
    if (!proj.bbox.empty()) label.bbox = {proj.bbox.x0, proj.bbox.y0, proj.bbox.x1, proj.bbox.y1};
  } catch (const std::domain_error&) {
    // corner behind the camera; leave the 2D bbox empty
  }
  return label;
}

enum class Difficulty { easy, moderate, hard, other };

/// KITTI difficulty regime from occlusion/truncation/2D height.
inline Difficulty difficulty_of(const KittiLabel& label) {
  const double h = label.bbox[3] - label.bbox[1];
  if (h >= 40.0 && label.occlusion <= 0 && label.truncation <= 0.15) return Difficulty::easy;
  if (h >= 25.0 && label.occlusion <= 1 && label.truncation <= 0.30) return Difficulty::moderate;
  if (h >= 25.0 && label.occlusion <= 2 && label.truncation <= 0.50) return Difficulty::hard;
  return Difficulty::other;
}

// ---------------------------------------------------------------------------
// Velodyne

/// Little-endian f32 quadruples (x, y, z, intensity).
inline std::vector<PointXYZI> read_velodyne(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 16 != 0)
    throw format_error("velodyne: byte length not divisible by 16");
  std::vector<PointXYZI> points(bytes.size() / 16);
  for (std::size_t i = 0; i < points.size(); ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + 16 * i, 16);
    points[i] = {double(v[0]), double(v[1]), double(v[2]), double(v[3])};
  }
  return points;
}

inline std::vector<std::uint8_t> write_velodyne(std::span<const PointXYZI> points) {
  std::vector<std::uint8_t> bytes(points.size() * 16);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const float v[4] = {float(points[i].x), float(points[i].y), float(points[i].z),
                        float(points[i].intensity)};
    std::memcpy(bytes.data() + 16 * i, v, 16);
  }
  return bytes;
}

inline std::vector<PointXYZI> transform_points(std::span<const PointXYZI> points,
                                               const RigidTransform& tf) {
  std::vector<PointXYZI> out;
  out.reserve(points.size());
  for (const PointXYZI& p : points) {
    const Vec3 q = tf({p.x, p.y, p.z});
    out.push_back({q.x, q.y, q.z, p.intensity});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground-truth depth

/// Projects points into the camera with round-to-nearest pixel assignment;
/// collisions keep the smaller depth. Untouched pixels stay invalid.
inline DepthMap gt_depth(std::span<const PointXYZI> points, const CameraModel& cam) {
  DepthMap depth(cam.image_height, cam.image_width);
  for (const PointXYZI& p : points) {
    if (!(p.z > 0.0)) continue;
    const Projection proj = project(cam, {p.x, p.y, p.z});
    const long u = std::lround(proj.u);
    const long v = std::lround(proj.v);
    if (u < 0 || v < 0 || u >= cam.image_width || v >= cam.image_height) continue;
    float& cell = depth.at(int(v), int(u));
    if (cell <= 0.0f || float(p.z) < cell) cell = float(p.z);
  }
  return depth;
}

// ---------------------------------------------------------------------------
// Depth and image PNGs

/// KITTI depth convention: 16-bit grayscale, meters * 256, 0 = invalid.
inline std::vector<std::uint8_t> encode_depth_png(const DepthMap& depth) {
  PngImage img;
  img.width = depth.cols;
  img.height = depth.rows;
  img.channels = 1;
  img.bit_depth = 16;
  img.samples.resize(depth.values.size());
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    const double v = depth.values[i] <= 0.0f ? 0.0 : double(depth.values[i]) * 256.0;
    img.samples[i] = std::uint16_t(std::clamp(std::llround(v), 0ll, 65535ll));
  }
  return encode_png(img);
}

inline DepthMap decode_depth_png(std::span<const std::uint8_t> bytes) {
  const PngImage img = decode_png(bytes);
  if (img.channels != 1 || img.bit_depth != 16)
    throw format_error("depth png: expected 16-bit grayscale");
  DepthMap depth(img.height, img.width);
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    depth.values[i] = img.samples[i] == 0 ? 0.0f : float(double(img.samples[i]) / 256.0);
  return depth;
}

/// 8-bit PNG for [0,1] float images (1 or 3 channels).
inline std::vector<std::uint8_t> encode_image_png(const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw format_error("image png: expected 1 or 3 channels");
  PngImage img;
  img.width = image.cols;
  img.height = image.rows;
  img.channels = image.channels;
  img.bit_depth = 8;
  img.samples.resize(image.data.size());
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const double v = std::clamp(double(image.data[i]), 0.0, 1.0);
    img.samples[i] = std::uint16_t(std::llround(v * 255.0));
  }
  return encode_png(img);
}

inline Image decode_image_png(std::span<const std::uint8_t> bytes) {
  const PngImage img = decode_png(bytes);
  if (img.bit_depth != 8) throw format_error("image png: expected 8-bit samples");
  Image out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    out.data[i] = float(double(img.samples[i]) / 255.0);
  return out;
}

// ---------------------------------------------------------------------------
// DVOL container

using DvolAny = std::variant<FeatureMap2D, FrustumVolume, VoxelVolume>;

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 24));
}

inline void put_f64le(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(bits >> (8 * i)));
}

inline void put_f32le(std::vector<std::uint8_t>& out, const float* data, std::size_t n) {
  const std::size_t at = out.size();
  out.resize(at + 4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, data + i, 4);
    out[at + 4 * i + 0] = std::uint8_t(bits);
    out[at + 4 * i + 1] = std::uint8_t(bits >> 8);
    out[at + 4 * i + 2] = std::uint8_t(bits >> 16);
    out[at + 4 * i + 3] = std::uint8_t(bits >> 24);
  }
}

struct DvolReader {
  std::span<const std::uint8_t> bytes;
  std::size_t at = 0;

  std::uint8_t u8() {
    if (at + 1 > bytes.size()) throw format_error("dvol: truncated payload");
    return bytes[at++];
  }
  std::uint32_t u32le() {
    if (at + 4 > bytes.size()) throw format_error("dvol: truncated payload");
    const std::uint32_t v = std::uint32_t(bytes[at]) | (std::uint32_t(bytes[at + 1]) << 8) |
                            (std::uint32_t(bytes[at + 2]) << 16) |
                            (std::uint32_t(bytes[at + 3]) << 24);
    at += 4;
    return v;
  }
  double f64le() {
    if (at + 8 > bytes.size()) throw format_error("dvol: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(bytes[at + i]) << (8 * i);
    at += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void f32le(float* out, std::size_t n) {
    if (at + 4 * n > bytes.size()) throw format_error("dvol: truncated payload");
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = std::uint32_t(bytes[at]) | (std::uint32_t(bytes[at + 1]) << 8) |
                           (std::uint32_t(bytes[at + 2]) << 16) |
                           (std::uint32_t(bytes[at + 3]) << 24);
      at += 4;
      std::memcpy(out + i, &bits, 4);
    }
  }
};

inline void dvol_header(std::vector<std::uint8_t>& out, std::span<const std::uint32_t> dims,
                        std::uint8_t space_tag) {
  out.insert(out.end(), {'D', 'V', 'O', 'L'});
  out.push_back(1);  // version
  put_u32le(out, std::uint32_t(dims.size()));
  for (const std::uint32_t d : dims) put_u32le(out, d);
  out.push_back(space_tag);
}

}  // namespace detail

inline std::vector<std::uint8_t> write_dvol(const FrustumVolume& vol) {
  std::vector<std::uint8_t> out;
  const std::uint32_t dims[4] = {std::uint32_t(vol.spec.rows), std::uint32_t(vol.spec.cols),
                                 std::uint32_t(vol.planes()), std::uint32_t(vol.channels)};
  detail::dvol_header(out, dims, 0);
  detail::put_f64le(out, vol.spec.stride);
  detail::put_f64le(out, double(vol.planes()));
  for (const double d : vol.spec.depth_planes) detail::put_f64le(out, d);
  detail::put_f32le(out, vol.data.data(), vol.data.size());
  return out;
}

inline std::vector<std::uint8_t> write_dvol(const VoxelVolume& vol) {
  std::vector<std::uint8_t> out;
  const std::uint32_t dims[4] = {std::uint32_t(vol.spec.dims[0]), std::uint32_t(vol.spec.dims[1]),
                                 std::uint32_t(vol.spec.dims[2]), std::uint32_t(vol.channels)};
  detail::dvol_header(out, dims, 1);
  detail::put_f64le(out, vol.spec.origin.x);
  detail::put_f64le(out, vol.spec.origin.y);
  detail::put_f64le(out, vol.spec.origin.z);
  detail::put_f64le(out, vol.spec.voxel_size.x);
  detail::put_f64le(out, vol.spec.voxel_size.y);
  detail::put_f64le(out, vol.spec.voxel_size.z);
  for (int i = 0; i < 3; ++i) detail::put_f64le(out, double(vol.spec.dims[i]));
  detail::put_f32le(out, vol.data.data(), vol.data.size());
  return out;
}

inline std::vector<std::uint8_t> write_dvol(const FeatureMap2D& map) {
  std::vector<std::uint8_t> out;
  const std::uint32_t dims[3] = {std::uint32_t(map.rows), std::uint32_t(map.cols),
                                 std::uint32_t(map.channels)};
  detail::dvol_header(out, dims, 2);
  detail::put_f32le(out, map.data.data(), map.data.size());
  return out;
}

inline DvolAny read_dvol(std::span<const std::uint8_t> bytes) {
  detail::DvolReader in{bytes};
  if (bytes.size() < 5 || std::memcmp(bytes.data(), "DVOL", 4) != 0)
    throw format_error("dvol: bad magic");
  in.at = 4;
  if (in.u8() != 1) throw format_error("dvol: unsupported version");
  const std::uint32_t rank = in.u32le();
  if (rank != 3 && rank != 4) throw format_error("dvol: unsupported rank");
  std::vector<std::uint32_t> dims(rank);
  std::size_t count = 1;
  for (auto& d : dims) {
    d = in.u32le();
    if (d < 1 || d > (1u << 24)) throw format_error("dvol: bad dimension");
    count *= d;
    if (count > (std::size_t(1) << 34)) throw format_error("dvol: volume too large");
  }
  const std::uint8_t tag = in.u8();

  auto read_payload = [&in, count](std::vector<float>& data) {
    data.resize(count);
    in.f32le(data.data(), count);
    if (in.at != in.bytes.size()) throw format_error("dvol: trailing bytes");
    for (const float v : data)
      if (!std::isfinite(v)) throw format_error("dvol: non-finite payload value");
  };

  if (tag == 0) {
    if (rank != 4) throw format_error("dvol: frustum volumes are rank 4");
    const double stride = in.f64le();
    const double plane_count = in.f64le();
    if (plane_count != double(dims[2])) throw format_error("dvol: plane count mismatch");
    std::vector<double> planes(dims[2]);
    for (auto& d : planes) d = in.f64le();
    FrustumVolume vol{FrustumSpec{int(dims[0]), int(dims[1]), stride, std::move(planes)},
                      int(dims[3])};
    read_payload(vol.data);
    return vol;
  }
  if (tag == 1) {
    if (rank != 4) throw format_error("dvol: voxel volumes are rank 4");
    const Vec3 origin = {in.f64le(), in.f64le(), in.f64le()};
    const Vec3 size = {in.f64le(), in.f64le(), in.f64le()};
    const std::array<int, 3> d3 = {int(in.f64le()), int(in.f64le()), int(in.f64le())};
    if (d3[0] != int(dims[0]) || d3[1] != int(dims[1]) || d3[2] != int(dims[2]))
      throw format_error("dvol: voxel dims mismatch");
    VoxelVolume vol{VoxelGridSpec{origin, size, d3}, int(dims[3])};
    read_payload(vol.data);
    return vol;
  }
  if (tag == 2) {
    if (rank != 3) throw format_error("dvol: 2D maps are rank 3");
    FeatureMap2D map{int(dims[0]), int(dims[1]), int(dims[2])};
    read_payload(map.data);
    return map;
  }
  throw format_error("dvol: unknown space tag");
}

inline void write_dvol_file(const std::filesystem::path& path, const DvolAny& vol) {
  std::visit([&path](const auto& v) { write_file_atomic(path, write_dvol(v)); }, vol);
}

inline DvolAny read_dvol_file(const std::filesystem::path& path) {
  return read_dvol(read_file(path));
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthConfig {
  int image_width = 1248;
  int image_height = 384;
  double focal = 720.0;
  double baseline = 0.5;
  std::map<int, int> objects = {{kClassCar, 3}, {kClassPedestrian, 2}, {kClassCyclist, 2}};
  double z_min = 8.0;
  double z_max = 45.0;
  double ground_y = 1.65;  // camera height above the ground plane
};

namespace detail {

// Coordinates are kept on the float grid so that the baseline mirror
// x -> b - x used by hflip is exact in double arithmetic.
inline double snap(double v) {
  if (std::abs(v) < 1e-6) return 0.0;
  return double(float(v));
}

// Yaw on the 2^-51 grid inside (-pi, pi]; pi - yaw is then exact.
inline double snap_yaw(double v) {
  constexpr double pi = std::numbers::pi;
  double y = std::ldexp(double(std::llround(std::ldexp(v, 51))), -51);
  if (y > pi) y = pi;
  if (y <= -pi) y = pi;
  return y;
}

inline void object_dimensions(int class_id, double& l, double& w, double& h) {
  switch (class_id) {
    case kClassCar: l = 4.0; w = 1.75; h = 1.5; break;
    case kClassPedestrian: l = 0.75; w = 0.75; h = 1.75; break;
    case kClassCyclist: l = 1.75; w = 0.625; h = 1.75; break;
    default: l = 1.0; w = 1.0; h = 1.0; break;
  }
}

inline float quantize_u8(double v) {
  const long q = std::clamp(std::lround(std::clamp(v, 0.0, 1.0) * 255.0), 0l, 255l);
  return float(double(q) / 255.0);
}

inline void fill_rect(Image& img, const Rect2& rect, const float rgb[3]) {
  const int c0 = std::max(int(std::ceil(rect.x0)), 0);
  const int c1 = std::min(int(std::floor(rect.x1)), img.cols - 1);
  const int r0 = std::max(int(std::ceil(rect.y0)), 0);
  const int r1 = std::min(int(std::floor(rect.y1)), img.rows - 1);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = rgb[ch];
}

}  // namespace detail

/// Deterministic synthetic scene: a ground-plane point grid, box-surface
/// point samples on the camera-facing faces, and procedural gradient images
/// with per-object flat patches painted at the projected boxes in both
/// views. Boxes never overlap in BEV and project fully inside both images.
inline Scene synth_scene(std::uint64_t seed, const SynthConfig& cfg = {}) {
  Scene scene;
  const CameraModel cam(cfg.focal, cfg.focal, 0.5 * (cfg.image_width - 1),
                        0.5 * (cfg.image_height - 1), cfg.image_width, cfg.image_height);
  scene.rig = StereoRig(cam, cam, cfg.baseline);
  Rng rng(derive_seed(seed, 0x5ce9e));

  // Labeled boxes, rejection-sampled for visibility and BEV separation.
  const Vec3 right_offset = {cfg.baseline, 0.0, 0.0};
  for (const auto& [cls, count] : cfg.objects) {
    for (int i = 0; i < count; ++i) {
      double l, w, h;
      detail::object_dimensions(cls, l, w, h);
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double x = detail::snap(rng.uniform(-14.0, 14.0));
        const double z = detail::snap(rng.uniform(cfg.z_min, cfg.z_max));
        const double yaw = detail::snap_yaw(rng.uniform(-std::numbers::pi, std::numbers::pi));
        const double cy = double(float(cfg.ground_y)) - 0.5 * h;
        Box3D box({x, cy, z}, l, w, h, yaw, cls);
        const auto corners = box_corners(box);
        bool ok = true;
        for (const Vec3& c : corners) ok = ok && c.z > 0.5;
        if (ok) {
          auto visible = [&](const CameraModel& view_cam, Vec3 off) {
            for (const Vec3& c : corners) {
              const Projection p = project(view_cam, c - off);
              if (p.u < 2.0 || p.u > view_cam.image_width - 3 || p.v < 2.0 ||
                  p.v > view_cam.image_height - 3)
                return false;
            }
            return true;
          };
          ok = visible(scene.rig.left, {0, 0, 0}) && visible(scene.rig.right, right_offset);
        }
        if (ok) {
          for (const Box3D& other : scene.boxes)
            if (iou_bev(box, other) > 0.0) {
              ok = false;
              break;
            }
        }
        if (!ok) continue;
        scene.boxes.push_back(box);
        break;
      }
    }
  }

  // Ground-plane grid outside the boxes.
  const double ground_y = double(float(cfg.ground_y));
  for (double gx = -18.0; gx <= 18.0; gx += 0.6) {
    for (double gz = 4.0; gz <= 58.0; gz += 0.45) {
      const Vec3 p = {detail::snap(gx), ground_y, detail::snap(gz)};
      bool inside = false;
      for (const Box3D& box : scene.boxes)
        if (box_contains(box, p, 0.05)) {
          inside = true;
          break;
        }
      if (!inside) scene.points.push_back({p.x, p.y, p.z, 0.25});
    }
  }

  // Box-surface samples on the camera-facing faces, kept strictly inside the
  // box so bank extraction picks up exactly these points.
  for (std::size_t bi = 0; bi < scene.boxes.size(); ++bi) {
    const Box3D& box = scene.boxes[bi];
    const double intensity = 0.5 + double(bi + 1) / 128.0;
    const double ext[3] = {0.5 * box.length, 0.5 * box.height, 0.5 * box.width};
    for (int axis = 0; axis < 3; ++axis) {
      for (int sign = -1; sign <= 1; sign += 2) {
        Vec3 n_local = {0, 0, 0};
        (axis == 0 ? n_local.x : axis == 1 ? n_local.y : n_local.z) = double(sign);
        const Vec3 n_world = rotate_yaw(box.yaw, n_local);
        const Vec3 face_center = box.center + (ext[axis] * double(sign)) * n_world;
        if (dot(n_world, face_center) >= 0.0) continue;  // back face
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        for (int i = 0; i < 7; ++i) {
          for (int j = 0; j < 7; ++j) {
            Vec3 local = {0, 0, 0};
            const double t1 = (-0.96 + i * 0.32) * ext[a1];
            const double t2 = (-0.96 + j * 0.32) * ext[a2];
            (a1 == 0 ? local.x : a1 == 1 ? local.y : local.z) = t1;
            (a2 == 0 ? local.x : a2 == 1 ? local.y : local.z) = t2;
            (axis == 0 ? local.x : axis == 1 ? local.y : local.z) =
                double(sign) * (ext[axis] - 0.001);
            const Vec3 p = box.center + rotate_yaw(box.yaw, local);
            scene.points.push_back(
                {detail::snap(p.x), detail::snap(p.y), detail::snap(p.z), intensity});
          }
        }
      }
    }
  }

  // Images: a shared gradient background (consistent across views for
  // far-field content) plus per-object flat patches at the projected boxes.
  scene.left_image = Image(cfg.image_height, cfg.image_width, 3);
  scene.right_image = Image(cfg.image_height, cfg.image_width, 3);
  for (int r = 0; r < cfg.image_height; ++r) {
    for (int c = 0; c < cfg.image_width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const double phase = 2.0 * std::numbers::pi *
                             ((3.0 + ch) * c / cfg.image_width + (2.0 - ch) * r / cfg.image_height);
        const float v = detail::quantize_u8(0.55 + 0.25 * std::sin(phase) +
                                            0.1 * std::cos(0.5 * phase + ch));
        scene.left_image.at(r, c, ch) = v;
        scene.right_image.at(r, c, ch) = v;
      }
    }
  }
  std::vector<std::size_t> order(scene.boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scene.boxes[a].center.z > scene.boxes[b].center.z;
  });
  for (const std::size_t bi : order) {
    const Box3D& box = scene.boxes[bi];
    const float rgb[3] = {detail::quantize_u8(0.2 + 0.75 * rng.uniform01()),
                          detail::quantize_u8(0.2 + 0.75 * rng.uniform01()),
                          detail::quantize_u8(0.2 + 0.75 * rng.uniform01())};
    const auto corners = box_corners(box);
    Rect2 left_rect, right_rect;
    for (int i = 0; i < 8; ++i) {
      const Projection pl = project(scene.rig.left, corners[i]);
      const Projection pr = project(scene.rig.right, corners[i] - right_offset);
      if (i == 0) {
        left_rect = {pl.u, pl.v, pl.u, pl.v};
        right_rect = {pr.u, pr.v, pr.u, pr.v};
      } else {
        left_rect.x0 = std::min(left_rect.x0, pl.u);
        left_rect.x1 = std::max(left_rect.x1, pl.u);
        left_rect.y0 = std::min(left_rect.y0, pl.v);
        left_rect.y1 = std::max(left_rect.y1, pl.v);
        right_rect.x0 = std::min(right_rect.x0, pr.u);
        right_rect.x1 = std::max(right_rect.x1, pr.u);
        right_rect.y0 = std::min(right_rect.y0, pr.v);
        right_rect.y1 = std::max(right_rect.y1, pr.v);
      }
    }
    detail::fill_rect(scene.left_image, left_rect, rgb);
    detail::fill_rect(scene.right_image, right_rect, rgb);
  }
  return scene;
}

// ---------------------------------------------------------------------------
// KITTI directory layout

/// calib/, label_2/, velodyne/, image_2/, image_3/ under one root.
inline void write_scene(const std::filesystem::path& root, const std::string& frame,
                        const Scene& scene) {
  namespace fs = std::filesystem;
  for (const char* dir : {"calib", "label_2", "velodyne", "image_2", "image_3"})
    fs::create_directories(root / dir);

  Calibration calib;
  const CameraModel& l = scene.rig.left;
  const CameraModel& r = scene.rig.right;
  calib.p_left = {l.f_u, 0, l.c_u, 0, 0, l.f_v, l.c_v, 0, 0, 0, 1, 0};
  calib.p_right = {r.f_u, 0, r.c_u, -r.f_u * scene.rig.baseline, 0, r.f_v, r.c_v, 0, 0, 0, 1, 0};
  write_text_file_atomic(root / "calib" / (frame + ".txt"), serialize_calib(calib));

  std::vector<KittiLabel> labels;
  labels.reserve(scene.boxes.size());
  for (const Box3D& box : scene.boxes) labels.push_back(make_label(box, scene.rig.left));
  write_text_file_atomic(root / "label_2" / (frame + ".txt"), serialize_labels(labels));

  write_file_atomic(root / "velodyne" / (frame + ".bin"), write_velodyne(scene.points));
  write_file_atomic(root / "image_2" / (frame + ".png"), encode_image_png(scene.left_image));
  write_file_atomic(root / "image_3" / (frame + ".png"), encode_image_png(scene.right_image));
}

inline Scene read_scene(const std::filesystem::path& root, const std::string& frame) {
  namespace fs = std::filesystem;
  Scene scene;
  scene.left_image = decode_image_png(read_file(root / "image_2" / (frame + ".png")));
  scene.right_image = decode_image_png(read_file(root / "image_3" / (frame + ".png")));
  const Calibration calib = parse_calib(read_text_file(root / "calib" / (frame + ".txt")));
  scene.rig = calib.rig(scene.left_image.cols, scene.left_image.rows);

  const fs::path label_path = root / "label_2" / (frame + ".txt");
  if (fs::exists(label_path)) {
    for (const KittiLabel& label : parse_labels(read_text_file(label_path)))
      scene.boxes.push_back(label.to_box());
  }
  const fs::path velo_path = root / "velodyne" / (frame + ".bin");
  if (fs::exists(velo_path))
    scene.points = transform_points(read_velodyne(read_file(velo_path)), calib.cam_from_velo());
  return scene;
}

/// Frame ids present under root (stems of calib/*.txt), sorted.
inline std::vector<std::string> list_frames(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<std::string> frames;
  const fs::path calib_dir = root / "calib";
  if (!fs::exists(calib_dir)) throw io_error("no calib directory under " + root.string());
  for (const auto& entry : fs::directory_iterator(calib_dir))
    if (entry.path().extension() == ".txt") frames.push_back(entry.path().stem().string());
  std::sort(frames.begin(), frames.end());
  return frames;
}

}  // namespace dsv
