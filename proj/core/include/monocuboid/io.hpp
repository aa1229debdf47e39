#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "monocuboid/annotation.hpp"
#include "monocuboid/camera.hpp"
#include "monocuboid/metrics.hpp"
#include "monocuboid/pose.hpp"
#include "monocuboid/synth.hpp"

namespace monocuboid {

// Every number written by the io layer is rounded to this many significant
// digits so repeated runs produce byte-identical files.
inline constexpr int kOutputDigits = 9;

double round_significant(double x, int digits = kOutputDigits);

struct VehicleEntry {
  VehicleAnnotations vehicle;
  std::optional<CuboidPose> gt;      // synthetic scenes carry their ground truth
  std::optional<double> elapsed_s;   // labelling time recorded by the UI
  std::optional<std::string> status;  // "accepted" or "failed" from the UI
};

struct AnnotationDocument {
  std::string image;
  CameraIntrinsics camera;
  // When the document referenced its camera by path, the path as written.
  // Saving writes the reference back instead of the inline intrinsics.
  std::optional<std::string> camera_ref;
  std::vector<VehicleEntry> vehicles;
};

// Camera JSON: {fx, fy, cx, cy, skew?, distortion?}. Errors name the JSON
// pointer of the offending field relative to `where`.
CameraIntrinsics parse_camera(std::string_view json_text, std::string_view where = "");
CameraIntrinsics load_camera(const std::filesystem::path& path);

// A camera reference ending in .txt is read as a KITTI calibration file,
// anything else as camera JSON. Relative references resolve against base_dir.
CameraIntrinsics resolve_camera_ref(const std::string& ref, const std::filesystem::path& base_dir);

AnnotationDocument parse_annotation_document(std::string_view json_text,
                                             const std::filesystem::path& base_dir = {});
AnnotationDocument load_annotations(const std::filesystem::path& path);
std::string to_json(const AnnotationDocument& doc);
void save_annotations(const AnnotationDocument& doc, const std::filesystem::path& path);

// Parses the P2 row of a KITTI calibration file. Baseline terms (column 3)
// are ignored. Throws InvalidInput when P2 is missing or malformed.
CameraIntrinsics parse_kitti_calib(std::string_view text);
CameraIntrinsics load_kitti_calib(const std::filesystem::path& path);

struct KittiObject {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  double bbox[4] = {0.0, 0.0, 0.0, 0.0};
  double h = 0.0, w = 0.0, l = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;  // bottom centre, KITTI camera frame (y down)
  double ry = 0.0;
};

KittiObject parse_kitti_label_line(std::string_view line);
std::vector<KittiObject> parse_kitti_labels(std::string_view text);

// KITTI boxes rotate by ry about the camera's downward y axis with the
// object's length along (cos ry, 0, -sin ry). The location is already the
// bottom centre, so only the axes change: vehicle X, Y, Z map to
// (c, 0, -s), (s, 0, c), (0, -1, 0) and d = (l, w, h).
CuboidPose kitti_to_pose(const KittiObject& obj);

struct PoseRecord {
  std::string id;
  std::optional<CuboidPose> pose;
  bool converged = false;
  double cost_pixel = 0.0;
  int iterations = 0;
  std::string gauge;
  std::string error;  // non-empty for a failed vehicle
  std::optional<double> solve_ms;
};

// {"vehicles": [{id, pose?: {rotation, translation, dimensions}, ...}]}
// with sorted keys and kOutputDigits significant digits.
std::string poses_to_json(const std::vector<PoseRecord>& records);
std::vector<PoseRecord> parse_poses(std::string_view json_text);
std::vector<PoseRecord> load_poses(const std::filesystem::path& path);
void save_poses(const std::vector<PoseRecord>& records, const std::filesystem::path& path);

// Columns vehicle_id, iou, siou, e_rot_deg, e_trans, e_dim, e_comb, solve_ms,
// converged with a final "mean" row.
std::string metrics_to_csv(const MetricsReport& report);
std::string metrics_to_json(const MetricsReport& report);

// CSV with header class,length,width,height. Rows are grouped by class in
// order of first appearance.
std::vector<std::pair<std::string, std::vector<Vec3>>> parse_dimension_csv(std::string_view text);

// Pose JSON object used by the poses file, the gt block and the service.
std::string pose_to_json(const CuboidPose& pose);

// One-vehicle document for a synthetic scene, gt block included.
AnnotationDocument scene_to_document(const SyntheticScene& scene, const std::string& vehicle_id,
                                     const std::string& prototype_class);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace monocuboid
