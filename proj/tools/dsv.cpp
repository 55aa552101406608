// dsv: stereo-volume construction, augmentation and evaluation pipeline.
//
// Subcommands: synth, volgen, occupancy, gtdepth, deptherr, evalap, slcp,
// bench. Every run is deterministic given --seed; all randomness flows from
// one seeded generator per run. Exit codes: 0 success, 2 usage, 3 I/O,
// 4 domain error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dsv/analytics.hpp"
#include "dsv/dualview.hpp"
#include "dsv/errors.hpp"
#include "dsv/geom.hpp"
#include "dsv/grid.hpp"
#include "dsv/kitti_io.hpp"
#include "dsv/rng.hpp"
#include "dsv/scene.hpp"
#include "dsv/slcp.hpp"
#include "dsv/sweep.hpp"

namespace fs = std::filesystem;
using namespace dsv;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDomain = 4;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::size_t at = 0;
  while (at < text.size()) {
    std::size_t comma = text.find(',', at);
    if (comma == std::string::npos) comma = text.size();
    out.push_back(std::stod(text.substr(at, comma - at)));
    at = comma + 1;
  }
  return out;
}

std::vector<int> parse_csv_ints(const std::string& text) {
  std::vector<int> out;
  for (const double v : parse_csv_doubles(text)) out.push_back(int(v));
  return out;
}

std::string data_root_or(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("DSV_DATA_ROOT")) return env;
  return flag_value;
}

std::vector<std::string> resolve_frames(const std::string& root, const std::string& frames_flag) {
  if (!frames_flag.empty()) {
    std::vector<std::string> out;
    std::size_t at = 0;
    while (at < frames_flag.size()) {
      std::size_t comma = frames_flag.find(',', at);
      if (comma == std::string::npos) comma = frames_flag.size();
      out.push_back(frames_flag.substr(at, comma - at));
      at = comma + 1;
    }
    return out;
  }
  return list_frames(root);
}

void parallel_frames(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

// --- shared sweep/grid flag bundles -----------------------------------------

struct GridFlags {
  int cin = 96;
  int cv = 32;
  double alpha = 0.1;
  bool alpha_set = false;  // frustum and voxel sweeps default differently
  int planes = 288;
  double z_min = 2.0;
  double z_max = 59.6;
  std::string spacing = "depth";
  double stride = 4.0;
  int group_size = 32;
  std::string vox_origin = "-30.4,-1.0,2.0";
  std::string vox_size = "0.2,0.2,0.2";
  std::string vox_dims = "304,20,288";

  void attach(CLI::App* cmd, bool sweep_flags = true) {
    if (sweep_flags) {
      cmd->add_option("--cin", cin, "2D feature channels C_I");
      cmd->add_option("--cv", cv, "volume channels per view C_V");
      cmd->add_option("--alpha", alpha,
                      "depth-wise shift smoothness exponent (default 0.1, 0.5 for voxel modes)");
      cmd->add_option("--group-size", group_size, "channels per group for group-ps");
    }
    cmd->add_option("--planes", planes, "number of depth planes");
    cmd->add_option("--zmin", z_min, "nearest plane depth, meters");
    cmd->add_option("--zmax", z_max, "farthest plane depth, meters");
    cmd->add_option("--plane-spacing", spacing, "plane spacing: depth|disparity");
    cmd->add_option("--stride", stride, "image pixels per feature cell");
    cmd->add_option("--vox-origin", vox_origin, "voxel grid origin x,y,z");
    cmd->add_option("--vox-size", vox_size, "voxel size sx,sy,sz");
    cmd->add_option("--vox-dims", vox_dims, "voxel counts nx,ny,nz");
  }

  FrustumSpec frustum_spec(int rows, int cols, double focal_baseline) const {
    const auto planes_list = spacing == "disparity"
                                 ? uniform_disparity_planes(planes, z_min, z_max, focal_baseline)
                                 : uniform_depth_planes(planes, z_min, z_max);
    return FrustumSpec(rows, cols, stride, planes_list);
  }

  VoxelGridSpec voxel_spec() const {
    const auto o = parse_csv_doubles(vox_origin);
    const auto s = parse_csv_doubles(vox_size);
    const auto d = parse_csv_ints(vox_dims);
    if (o.size() != 3 || s.size() != 3 || d.size() != 3)
      throw CLI::ValidationError("--vox-*", "expected 3 comma-separated values");
    return VoxelGridSpec({o[0], o[1], o[2]}, {s[0], s[1], s[2]}, {d[0], d[1], d[2]});
  }
};

// RGB tiled to C_I channels with a fixed per-channel mixing, after an
// average-pool down to feature resolution.
FeatureMap2D image_to_features(const Image& img, double stride, int c_in) {
  const int rows = std::max(1, int(img.rows / stride));
  const int cols = std::max(1, int(img.cols / stride));
  const int block = std::max(1, int(stride));
  FeatureMap2D pooled(rows, cols, 3);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        int n = 0;
        for (int dr = 0; dr < block; ++dr) {
          for (int dc = 0; dc < block; ++dc) {
            const int rr = r * block + dr, cc = c * block + dc;
            if (rr < img.rows && cc < img.cols) {
              acc += img.at(rr, cc, ch % img.channels);
              ++n;
            }
          }
        }
        pooled.at(r, c, ch) = float(acc / std::max(1, n));
      }
    }
  }
  FeatureMap2D out(rows, cols, c_in);
  for (int ch = 0; ch < c_in; ++ch) {
    const double t = 2.0 * std::numbers::pi * double(ch) / double(c_in);
    const double w0 = 0.5 + 0.5 * std::sin(t);
    const double w1 = 0.5 + 0.5 * std::sin(t + 2.0943951023931953);
    const double w2 = 0.5 + 0.5 * std::sin(t + 4.1887902047863905);
    const double norm = w0 + w1 + w2;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        out.at(r, c, ch) = float((w0 * pooled.at(r, c, 0) + w1 * pooled.at(r, c, 1) +
                                  w2 * pooled.at(r, c, 2)) /
                                 norm);
  }
  return out;
}

FeatureMap2D load_feature_dvol(const fs::path& path) {
  DvolAny any = read_dvol_file(path);
  if (!std::holds_alternative<FeatureMap2D>(any))
    throw format_error(path.string() + ": expected a 2D feature map DVOL");
  return std::get<FeatureMap2D>(std::move(any));
}

std::string describe_dims(const DvolAny& vol) {
  char buf[128];
  if (const auto* f = std::get_if<FrustumVolume>(&vol)) {
    std::snprintf(buf, sizeof buf, "%dx%dx%dx%d", f->spec.rows, f->spec.cols, f->planes(),
                  f->channels);
  } else if (const auto* v = std::get_if<VoxelVolume>(&vol)) {
    std::snprintf(buf, sizeof buf, "%dx%dx%dx%d", v->spec.dims[0], v->spec.dims[1],
                  v->spec.dims[2], v->channels);
  } else {
    const auto& m = std::get<FeatureMap2D>(vol);
    std::snprintf(buf, sizeof buf, "%dx%dx%d", m.rows, m.cols, m.channels);
  }
  return buf;
}

SynthConfig synth_config_from(int width, int height, const std::string& objects,
                              double z_min, double z_max) {
  SynthConfig cfg;
  cfg.image_width = width;
  cfg.image_height = height;
  if (!objects.empty()) {
    const auto counts = parse_csv_ints(objects);
    cfg.objects.clear();
    for (std::size_t i = 0; i < counts.size(); ++i) cfg.objects[int(i)] = counts[i];
  }
  cfg.z_min = z_min;
  cfg.z_max = z_max;
  return cfg;
}

// --- subcommand configs ------------------------------------------------------

struct SynthCmd {
  std::string out;
  int frames = 4;
  std::uint64_t seed = 0;
  int width = 1248, height = 384;
  std::string objects;
  double z_min = 8.0, z_max = 45.0;
  int jobs = 1;
};

struct VolgenCmd {
  std::string mode = "d-ps";
  std::string out = "volume.dvol";
  std::string root, frame;
  std::optional<std::uint64_t> synth_seed;
  std::string features_left, features_right, calib;
  int width = 0, height = 0;
  GridFlags grid;
};

struct OccupancyCmd {
  std::string root, frames, out, bins_out;
  int synth_count = 0;
  std::uint64_t seed = 0;
  double bin_width = 5.0;
  GridFlags grid;
};

struct GtDepthCmd {
  std::string root, frames, out_dir;
  int jobs = 1;
};

struct DepthErrCmd {
  std::string root, frames, pred_dir, out;
  std::string bin_edges = "0,10,20,30,40,50,60,70";
};

struct EvalApCmd {
  std::string dets, gts, frames, out;
  std::string iou = "3d";
  double thr_car = 0.7, thr_other = 0.5;
  std::string difficulty = "all";
};

struct SlcpCmd {
  std::string bank_root, bank_frames, root, frames, out;
  std::string samples = "5,5,5";
  double prob = 0.6;
  std::uint64_t seed = 0;
  bool flip = false;
  int jobs = 1;
};

struct BenchCmd {
  int rows = 96, cols = 312, planes = 288, cin = 96, cv = 32;
  int repeats = 5;
  std::uint64_t seed = 0;
  std::string modes = "ps,d-ps,group-ps";
};

// --- subcommand bodies -------------------------------------------------------

int run_synth(const SynthCmd& cmd) {
  const SynthConfig base = synth_config_from(cmd.width, cmd.height, cmd.objects, cmd.z_min,
                                             cmd.z_max);
  std::vector<std::string> names(std::size_t(cmd.frames));
  parallel_frames(names.size(), cmd.jobs, [&](std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    names[i] = buf;
    write_scene(cmd.out, names[i], synth_scene(derive_seed(cmd.seed, i), base));
  });
  std::printf("synth: wrote %d frames under %s\n", cmd.frames, cmd.out.c_str());
  return 0;
}

int run_volgen(const VolgenCmd& cmd) {
  if (cmd.grid.cv > cmd.grid.cin) {
    std::fprintf(stderr, "volgen: --cv must not exceed --cin\n");
    return kExitUsage;
  }
  const bool is_voxel = cmd.mode == "3dgv" || cmd.mode == "d-3dgv";
  const bool depthwise = cmd.mode == "d-ps" || cmd.mode == "d-3dgv";
  if (!is_voxel && cmd.mode != "ps" && cmd.mode != "d-ps" && cmd.mode != "group-ps") {
    std::fprintf(stderr, "volgen: unknown --mode %s\n", cmd.mode.c_str());
    return kExitUsage;
  }

  StereoRig rig;
  FeatureMap2D left, right;
  if (!cmd.features_left.empty() || !cmd.features_right.empty()) {
    if (cmd.features_left.empty() || cmd.features_right.empty() || cmd.calib.empty() ||
        cmd.width <= 0 || cmd.height <= 0) {
      std::fprintf(stderr,
                   "volgen: --features-left/--features-right need each other, --calib, "
                   "--width and --height\n");
      return kExitUsage;
    }
    rig = parse_calib(read_text_file(cmd.calib)).rig(cmd.width, cmd.height);
    left = load_feature_dvol(cmd.features_left);
    right = load_feature_dvol(cmd.features_right);
  } else {
    Scene scene;
    if (cmd.synth_seed) {
      scene = synth_scene(*cmd.synth_seed);
    } else {
      const std::string root = data_root_or(cmd.root);
      if (root.empty() || cmd.frame.empty()) {
        std::fprintf(stderr, "volgen: provide --root/--frame, --synth, or --features-*\n");
        return kExitUsage;
      }
      scene = read_scene(root, cmd.frame);
    }
    rig = scene.rig;
    left = image_to_features(scene.left_image, cmd.grid.stride, cmd.grid.cin);
    right = image_to_features(scene.right_image, cmd.grid.stride, cmd.grid.cin);
  }

  const double fb = rig.left.f_u * rig.baseline;
  const double alpha = cmd.grid.alpha_set ? cmd.grid.alpha : (is_voxel ? 0.5 : 0.1);
  const SweepConfig cfg = make_sweep_config(depthwise ? SweepMode::depthwise : SweepMode::classic,
                                            cmd.grid.cin, cmd.grid.cv, alpha, cmd.grid.planes);

  DvolAny vol;
  if (is_voxel) {
    vol = build_3dgv_stereo(left, right, rig, cmd.grid.voxel_spec(), cmd.grid.stride, cfg);
  } else {
    const FrustumSpec spec = cmd.grid.frustum_spec(left.rows, left.cols, fb);
    if (cmd.mode == "group-ps")
      vol = build_group_ps(left, right, rig, spec, cmd.grid.group_size);
    else
      vol = build_psv(left, right, rig, spec, cfg);
  }

  const std::vector<std::uint8_t> bytes =
      std::visit([](const auto& v) { return write_dvol(v); }, vol);
  write_file_atomic(cmd.out, bytes);
  std::printf("volgen: mode=%s dims=%s checksum=0x%016llx\n", cmd.mode.c_str(),
              describe_dims(vol).c_str(), (unsigned long long)fnv1a(bytes));
  return 0;
}

std::vector<Scene> load_or_synth_scenes(const std::string& root, const std::string& frames_flag,
                                        int synth_count, std::uint64_t seed) {
  std::vector<Scene> scenes;
  if (synth_count > 0) {
    for (int i = 0; i < synth_count; ++i) scenes.push_back(synth_scene(derive_seed(seed, i)));
    return scenes;
  }
  const std::string resolved = data_root_or(root);
  if (resolved.empty()) throw io_error("no input: provide --root or --synth-count");
  for (const std::string& frame : resolve_frames(resolved, frames_flag))
    scenes.push_back(read_scene(resolved, frame));
  return scenes;
}

int run_occupancy(const OccupancyCmd& cmd) {
  const std::vector<Scene> scenes =
      load_or_synth_scenes(cmd.root, cmd.frames, cmd.synth_count, cmd.seed);
  if (scenes.empty()) {
    std::fprintf(stderr, "occupancy: no scenes\n");
    return kExitUsage;
  }
  const double fb = scenes.front().rig.left.f_u * scenes.front().rig.baseline;
  const int rows = std::max(1, int(scenes.front().left_image.rows / cmd.grid.stride));
  const int cols = std::max(1, int(scenes.front().left_image.cols / cmd.grid.stride));
  const FrustumSpec fspec = cmd.grid.frustum_spec(rows, cols, fb);
  const VoxelGridSpec vspec = cmd.grid.voxel_spec();

  const auto records = occupancy_profile(scenes, fspec, vspec);
  std::string csv = "class,depth_m,psv_count,tdgv_count\n";
  for (const auto& rec : records) {
    csv += std::string(class_name_of(rec.class_id)) + "," +
           detail::format_double(rec.depth_m) + "," + std::to_string(rec.psv_count) + "," +
           std::to_string(rec.tdgv_count) + "\n";
  }
  write_text_file_atomic(cmd.out, csv);
  std::printf("occupancy: %zu boxes over %zu scenes -> %s\n", records.size(), scenes.size(),
              cmd.out.c_str());

  if (!cmd.bins_out.empty()) {
    std::string bcsv = "class,depth_m,psv_count,tdgv_count\n";
    for (const auto& bin : aggregate_occupancy(records, cmd.bin_width)) {
      bcsv += std::string(class_name_of(bin.class_id)) + "," +
              detail::format_double(0.5 * (bin.depth_lo + bin.depth_hi)) + "," +
              detail::format_double(bin.mean_psv) + "," + detail::format_double(bin.mean_tdgv) +
              "\n";
    }
    write_text_file_atomic(cmd.bins_out, bcsv);
  }
  return 0;
}

int run_gtdepth(const GtDepthCmd& cmd) {
  const std::string root = data_root_or(cmd.root);
  const auto frames = resolve_frames(root, cmd.frames);
  fs::create_directories(cmd.out_dir);
  parallel_frames(frames.size(), cmd.jobs, [&](std::size_t i) {
    const Scene scene = read_scene(root, frames[i]);
    const DepthMap depth = gt_depth(scene.points, scene.rig.left);
    write_file_atomic(fs::path(cmd.out_dir) / (frames[i] + ".png"), encode_depth_png(depth));
  });
  std::printf("gtdepth: wrote %zu depth maps under %s\n", frames.size(), cmd.out_dir.c_str());
  return 0;
}

int run_deptherr(const DepthErrCmd& cmd) {
  const std::string root = data_root_or(cmd.root);
  const auto frames = resolve_frames(root, cmd.frames);
  const auto edges = parse_csv_doubles(cmd.bin_edges);

  std::vector<double> acc(edges.empty() ? 0 : edges.size() - 1, 0.0);
  std::vector<std::int64_t> cnt(acc.size(), 0);
  double overall = 0.0;
  std::int64_t overall_n = 0;
  for (const std::string& frame : frames) {
    const Scene scene = read_scene(root, frame);
    // The reference passes through the 16-bit depth encoding so it carries
    // the same quantization as the PNG predictions it is compared against.
    const DepthMap gt = decode_depth_png(encode_depth_png(gt_depth(scene.points, scene.rig.left)));
    const DepthMap pred =
        decode_depth_png(read_file(fs::path(cmd.pred_dir) / (frame + ".png")));
    const auto report = foreground_depth_error(pred, gt, scene.boxes, scene.rig.left, edges);
    overall += report.overall_mae * double(report.overall_pixels);
    overall_n += report.overall_pixels;
    for (const auto& bin : report.bins) {
      for (std::size_t b = 0; b + 1 < edges.size(); ++b)
        if (edges[b] == bin.lo) {
          acc[b] += bin.mae_m * double(bin.pixels);
          cnt[b] += bin.pixels;
        }
    }
  }
  std::string csv = "bin_lo,bin_hi,mae_m,pixels\n";
  for (std::size_t b = 0; b < acc.size(); ++b) {
    if (cnt[b] == 0) continue;  // absent bins are omitted, not zero
    csv += detail::format_double(edges[b]) + "," + detail::format_double(edges[b + 1]) + "," +
           detail::format_double(acc[b] / double(cnt[b])) + "," + std::to_string(cnt[b]) + "\n";
  }
  write_text_file_atomic(cmd.out, csv);
  std::printf("deptherr: overall_mae=%s pixels=%lld -> %s\n",
              overall_n ? detail::format_double(overall / double(overall_n)).c_str() : "n/a",
              (long long)overall_n, cmd.out.c_str());
  return 0;
}

int run_evalap(const EvalApCmd& cmd) {
  const auto frames = resolve_frames(cmd.gts, cmd.frames);
  // Frames are kept apart by a large per-frame offset so greedy matching
  // never crosses frame boundaries.
  std::map<int, std::vector<Box3D>> dets_by_class;
  std::map<int, std::vector<Box3D>> gts_by_class;
  const auto want_difficulty = [&cmd](const KittiLabel& label) {
    if (cmd.difficulty == "all") return true;
    const Difficulty d = difficulty_of(label);
    if (cmd.difficulty == "easy") return d == Difficulty::easy;
    if (cmd.difficulty == "moderate")
      return d == Difficulty::easy || d == Difficulty::moderate;
    return d != Difficulty::other;  // hard includes everything up to hard
  };
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const double offset = 1e5 * double(fi + 1);
    const fs::path gt_path = fs::path(cmd.gts) / "label_2" / (frames[fi] + ".txt");
    const fs::path det_path = fs::path(cmd.dets) / (frames[fi] + ".txt");
    for (const KittiLabel& label : parse_labels(read_text_file(gt_path))) {
      if (!want_difficulty(label)) continue;
      Box3D box = label.to_box();
      box.center.x += offset;
      gts_by_class[box.class_id].push_back(box);
    }
    if (fs::exists(det_path)) {
      for (const KittiLabel& label : parse_labels(read_text_file(det_path))) {
        Box3D box = label.to_box();
        box.center.x += offset;
        if (!box.score) box.score = 1.0;
        dets_by_class[box.class_id].push_back(box);
      }
    }
  }

  const bool use_3d = cmd.iou == "3d";
  std::string csv = "class,ap\n";
  for (const auto& [cls, gts] : gts_by_class) {
    const auto it = dets_by_class.find(cls);
    std::vector<Detection> dets;
    if (it != dets_by_class.end())
      for (const Box3D& b : it->second) dets.push_back({b, cls});
    const double thr = cls == kClassCar ? cmd.thr_car : cmd.thr_other;
    const double ap = use_3d ? ap_r40_3d(dets, gts, thr) : ap_r40_bev(dets, gts, thr);
    csv += std::string(class_name_of(cls)) + "," + detail::format_double(ap) + "\n";
    std::printf("evalap: %s AP|R40=%s (n_gt=%zu, n_det=%zu)\n",
                std::string(class_name_of(cls)).c_str(), detail::format_double(ap).c_str(),
                gts.size(), dets.size());
  }
  write_text_file_atomic(cmd.out, csv);
  return 0;
}

int run_slcp(const SlcpCmd& cmd) {
  const auto sample_counts = parse_csv_ints(cmd.samples);
  std::map<int, int> counts;
  for (std::size_t i = 0; i < sample_counts.size(); ++i) counts[int(i)] = sample_counts[i];

  const std::string bank_root = cmd.bank_root.empty() ? data_root_or(cmd.root) : cmd.bank_root;
  const std::string root = data_root_or(cmd.root);
  std::vector<Scene> bank_scenes;
  for (const std::string& frame : resolve_frames(bank_root, cmd.bank_frames))
    bank_scenes.push_back(read_scene(bank_root, frame));
  const ObjectBank bank = build_bank(bank_scenes);

  const auto frames = resolve_frames(root, cmd.frames);
  std::vector<PasteOutcome> outcomes(frames.size());
  parallel_frames(frames.size(), cmd.jobs, [&](std::size_t i) {
    const Scene target = read_scene(root, frames[i]);
    const std::uint64_t frame_seed = derive_seed(cmd.seed, i);
    const auto samples = sample_objects(bank, counts, derive_seed(frame_seed, 1));
    Scene edited = paste(target, samples, derive_seed(frame_seed, 2), cmd.prob, &outcomes[i]);
    if (cmd.flip) edited = hflip(edited);
    write_scene(cmd.out, frames[i], edited);
  });

  std::map<int, int> pasted, rej_overlap, rej_proj;
  int applied = 0;
  for (const auto& o : outcomes) {
    applied += o.applied ? 1 : 0;
    for (const auto& [cls, n] : o.pasted) pasted[cls] += n;
    for (const auto& [cls, n] : o.rejected_overlap) rej_overlap[cls] += n;
    for (const auto& [cls, n] : o.rejected_projection) rej_proj[cls] += n;
  }
  std::printf("slcp: %zu frames, %d with paste applied -> %s\n", frames.size(), applied,
              cmd.out.c_str());
  std::set<int> classes;
  for (const auto& [cls, n] : pasted) classes.insert(cls);
  for (const auto& [cls, n] : rej_overlap) classes.insert(cls);
  for (const auto& [cls, n] : rej_proj) classes.insert(cls);
  for (const int cls : classes)
    std::printf("slcp: class=%s pasted=%d rejected_overlap=%d rejected_projection=%d\n",
                std::string(class_name_of(cls)).c_str(), pasted[cls], rej_overlap[cls],
                rej_proj[cls]);
  return 0;
}

int run_bench(const BenchCmd& cmd) {
  if (cmd.repeats < 1) {
    std::fprintf(stderr, "bench: --repeats must be >= 1\n");
    return kExitUsage;
  }
  Rng rng(derive_seed(cmd.seed, 0xb1c));
  FeatureMap2D left(cmd.rows, cmd.cols, cmd.cin), right(cmd.rows, cmd.cols, cmd.cin);
  for (float& v : left.data) v = float(rng.uniform(-1.0, 1.0));
  for (float& v : right.data) v = float(rng.uniform(-1.0, 1.0));
  const CameraModel cam(720.0, 720.0, 0.5 * (cmd.cols * 4 - 1), 0.5 * (cmd.rows * 4 - 1),
                        cmd.cols * 4, cmd.rows * 4);
  const StereoRig rig(cam, cam, 0.54);
  const FrustumSpec spec(cmd.rows, cmd.cols, 4.0,
                         uniform_depth_planes(cmd.planes, 2.0, 59.6));

  std::printf("mode,median_ms,samples_per_cell,bytes_moved\n");
  std::size_t at = 0;
  std::string modes = cmd.modes;
  while (at < modes.size()) {
    std::size_t comma = modes.find(',', at);
    if (comma == std::string::npos) comma = modes.size();
    const std::string mode = modes.substr(at, comma - at);
    at = comma + 1;

    // One output buffer per mode; an untimed warmup touches every page so
    // the timed repetitions measure construction, not allocation.
    FrustumVolume vol(spec, 2 * cmd.cv);
    const SweepConfig cfg = make_sweep_config(
        mode == "d-ps" ? SweepMode::depthwise : SweepMode::classic, cmd.cin, cmd.cv, 0.1,
        cmd.planes);
    auto build = [&](SweepStats* stats) {
      if (mode == "group-ps")
        build_group_ps_into(vol, left, right, rig, cmd.cv, stats);
      else
        build_psv_into(vol, left, right, rig, cfg, stats);
    };
    build(nullptr);  // warmup

    std::vector<double> times;
    SweepStats stats;
    for (int rep = 0; rep < cmd.repeats; ++rep) {
      stats = SweepStats{};
      const auto t0 = std::chrono::steady_clock::now();
      build(&stats);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];
    const std::uint64_t bytes_moved = stats.map_samples * 4 + vol.data.size() * 4;
    std::printf("%s,%.3f,%s,%llu\n", mode.c_str(), median,
                detail::format_double(stats.samples_per_cell()).c_str(),
                (unsigned long long)bytes_moved);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stereo volume construction, augmentation and evaluation"};
  app.require_subcommand(1);

  SynthCmd synth_cmd;
  auto* synth = app.add_subcommand("synth", "generate a synthetic KITTI-layout split");
  synth->add_option("--out", synth_cmd.out, "output root directory")->required();
  synth->add_option("--frames", synth_cmd.frames, "number of frames");
  synth->add_option("--seed", synth_cmd.seed, "master seed");
  synth->add_option("--width", synth_cmd.width, "image width");
  synth->add_option("--height", synth_cmd.height, "image height");
  synth->add_option("--objects", synth_cmd.objects, "per-class counts car,ped,cyc");
  synth->add_option("--zmin", synth_cmd.z_min, "nearest object depth");
  synth->add_option("--zmax", synth_cmd.z_max, "farthest object depth");
  synth->add_option("--jobs", synth_cmd.jobs, "parallel frame jobs");

  VolgenCmd volgen_cmd;
  auto* volgen = app.add_subcommand("volgen", "build a stereo volume and write it as DVOL");
  volgen->add_option("--mode", volgen_cmd.mode, "ps|d-ps|group-ps|3dgv|d-3dgv");
  volgen->add_option("--out", volgen_cmd.out, "output DVOL path");
  volgen->add_option("--root", volgen_cmd.root, "KITTI-layout root (or DSV_DATA_ROOT)");
  volgen->add_option("--frame", volgen_cmd.frame, "frame id");
  std::uint64_t synth_seed_val = 0;
  auto* synth_opt = volgen->add_option("--synth", synth_seed_val, "build from a synthetic scene");
  volgen->add_option("--features-left", volgen_cmd.features_left, "left feature-map DVOL");
  volgen->add_option("--features-right", volgen_cmd.features_right, "right feature-map DVOL");
  volgen->add_option("--calib", volgen_cmd.calib, "calibration file for --features-*");
  volgen->add_option("--width", volgen_cmd.width, "image width for --features-*");
  volgen->add_option("--height", volgen_cmd.height, "image height for --features-*");
  volgen_cmd.grid.attach(volgen);

  OccupancyCmd occ_cmd;
  auto* occ = app.add_subcommand("occupancy", "per-box volume occupancy profile CSV");
  occ->add_option("--root", occ_cmd.root, "KITTI-layout root");
  occ->add_option("--frames", occ_cmd.frames, "comma-separated frame ids");
  occ->add_option("--synth-count", occ_cmd.synth_count, "use N synthetic scenes instead");
  occ->add_option("--seed", occ_cmd.seed, "seed for synthetic scenes");
  occ->add_option("--out", occ_cmd.out, "output CSV")->required();
  occ->add_option("--bins-out", occ_cmd.bins_out, "aggregated per-class depth-bin CSV");
  occ->add_option("--bin-width", occ_cmd.bin_width, "depth bin width, meters");
  occ_cmd.grid.attach(occ);

  GtDepthCmd gtd_cmd;
  auto* gtd = app.add_subcommand("gtdepth", "project point clouds into depth PNGs");
  gtd->add_option("--root", gtd_cmd.root, "KITTI-layout root");
  gtd->add_option("--frames", gtd_cmd.frames, "comma-separated frame ids");
  gtd->add_option("--out-dir", gtd_cmd.out_dir, "output directory")->required();
  gtd->add_option("--jobs", gtd_cmd.jobs, "parallel frame jobs");

  DepthErrCmd derr_cmd;
  auto* derr = app.add_subcommand("deptherr", "foreground depth error by depth bin");
  derr->add_option("--root", derr_cmd.root, "KITTI-layout root");
  derr->add_option("--frames", derr_cmd.frames, "comma-separated frame ids");
  derr->add_option("--pred-dir", derr_cmd.pred_dir, "directory of predicted depth PNGs")
      ->required();
  derr->add_option("--out", derr_cmd.out, "output CSV")->required();
  derr->add_option("--bin-edges", derr_cmd.bin_edges, "comma-separated depth bin edges");

  EvalApCmd eval_cmd;
  auto* eval = app.add_subcommand("evalap", "AP|R40 of detections against labels");
  eval->add_option("--dets", eval_cmd.dets, "directory of detection label files")->required();
  eval->add_option("--gts", eval_cmd.gts, "KITTI-layout root with label_2/")->required();
  eval->add_option("--frames", eval_cmd.frames, "comma-separated frame ids");
  eval->add_option("--iou", eval_cmd.iou, "bev|3d");
  eval->add_option("--thr-car", eval_cmd.thr_car, "IoU threshold for Car");
  eval->add_option("--thr-other", eval_cmd.thr_other, "IoU threshold for other classes");
  eval->add_option("--difficulty", eval_cmd.difficulty, "easy|moderate|hard|all");
  eval->add_option("--out", eval_cmd.out, "output CSV")->required();

  SlcpCmd slcp_cmd;
  auto* slcp = app.add_subcommand("slcp", "stereo-LiDAR copy-paste augmentation");
  slcp->add_option("--bank-root", slcp_cmd.bank_root, "source scenes root (default --root)");
  slcp->add_option("--bank-frames", slcp_cmd.bank_frames, "bank frame ids");
  slcp->add_option("--root", slcp_cmd.root, "target scenes root");
  slcp->add_option("--frames", slcp_cmd.frames, "target frame ids");
  slcp->add_option("--out", slcp_cmd.out, "output root")->required();
  slcp->add_option("--samples", slcp_cmd.samples, "per-class sample counts car,ped,cyc");
  slcp->add_option("--prob", slcp_cmd.prob, "per-scene apply probability");
  slcp->add_option("--seed", slcp_cmd.seed, "master seed");
  slcp->add_flag("--flip", slcp_cmd.flip, "horizontally flip the augmented scenes");
  slcp->add_option("--jobs", slcp_cmd.jobs, "parallel frame jobs");

  BenchCmd bench_cmd;
  auto* bench = app.add_subcommand("bench", "plane-sweep construction benchmark");
  bench->add_option("--rows", bench_cmd.rows, "feature rows");
  bench->add_option("--cols", bench_cmd.cols, "feature cols");
  bench->add_option("--planes", bench_cmd.planes, "depth planes");
  bench->add_option("--cin", bench_cmd.cin, "input channels");
  bench->add_option("--cv", bench_cmd.cv, "output channels per view");
  bench->add_option("--repeats", bench_cmd.repeats, "timed repetitions (median reported)");
  bench->add_option("--seed", bench_cmd.seed, "input seed");
  bench->add_option("--modes", bench_cmd.modes, "comma-separated modes to run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) return run_synth(synth_cmd);
    if (*volgen) {
      if (*synth_opt) volgen_cmd.synth_seed = synth_seed_val;
      volgen_cmd.grid.alpha_set = volgen->count("--alpha") > 0;
      return run_volgen(volgen_cmd);
    }
    if (*occ) return run_occupancy(occ_cmd);
    if (*gtd) return run_gtdepth(gtd_cmd);
    if (*derr) return run_deptherr(derr_cmd);
    if (*eval) return run_evalap(eval_cmd);
    if (*slcp) return run_slcp(slcp_cmd);
    if (*bench) return run_bench(bench_cmd);
  } catch (const io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const format_error& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kExitIo;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return kExitDomain;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return kExitDomain;
  }
  return 0;
}
