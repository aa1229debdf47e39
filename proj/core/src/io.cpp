#include "monocuboid/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_codec.hpp"
#include "monocuboid/error.hpp"

namespace monocuboid {

namespace codec {

void fail(const std::string& pointer, const std::string& message) {
  throw InvalidInput((pointer.empty() ? std::string("/") : pointer) + ": " + message);
}

const json& require(const json& obj, const std::string& pointer, const char* key) {
  if (!obj.is_object()) fail(pointer, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(pointer + "/" + key, "missing required field");
  return *it;
}

double number(const json& v, const std::string& pointer) {
  if (!v.is_number()) fail(pointer, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) fail(pointer, "expected a finite number");
  return x;
}

std::string string(const json& v, const std::string& pointer) {
  if (!v.is_string()) fail(pointer, "expected a string");
  return v.get<std::string>();
}

json num(double x) { return round_significant(x); }

json vec(const Vec3& v) { return {num(v.x()), num(v.y()), num(v.z())}; }

namespace {

Vec3 vec3_from_json(const json& v, const std::string& pointer) {
  if (!v.is_array() || v.size() != 3) fail(pointer, "expected an array of 3 numbers");
  Vec3 out;
  for (int i = 0; i < 3; ++i) out(i) = number(v[i], pointer + "/" + std::to_string(i));
  return out;
}

Vec2 pixel_from_json(const json& v, const std::string& pointer) {
  if (!v.is_array() || v.size() != 2) fail(pointer, "expected [x, y]");
  return {number(v[0], pointer + "/0"), number(v[1], pointer + "/1")};
}

AnnotationLabel label_from_json(const json& v, const std::string& pointer) {
  std::string name = string(v, pointer);
  auto label = parse_label(name);
  if (!label) fail(pointer, "unknown label '" + name + "'");
  return *label;
}

}  // namespace

CameraIntrinsics camera_from_json(const json& v, const std::string& pointer) {
  CameraIntrinsics cam;
  cam.fx = number(require(v, pointer, "fx"), pointer + "/fx");
  cam.fy = number(require(v, pointer, "fy"), pointer + "/fy");
  cam.cx = number(require(v, pointer, "cx"), pointer + "/cx");
  cam.cy = number(require(v, pointer, "cy"), pointer + "/cy");
  if (v.contains("skew")) cam.skew = number(v["skew"], pointer + "/skew");
  if (v.contains("distortion")) {
    const auto& d = v["distortion"];
    if (!d.is_array() || d.size() > 5) fail(pointer + "/distortion", "expected at most 5 numbers");
    for (std::size_t i = 0; i < d.size(); ++i) {
      cam.distortion.push_back(number(d[i], pointer + "/distortion/" + std::to_string(i)));
    }
  }
  try {
    cam.validate();
  } catch (const InvalidInput& e) {
    fail(pointer, e.what());
  }
  return cam;
}

json camera_to_json(const CameraIntrinsics& cam) {
  json out = {{"fx", num(cam.fx)}, {"fy", num(cam.fy)}, {"cx", num(cam.cx)}, {"cy", num(cam.cy)}};
  if (cam.skew != 0.0) out["skew"] = num(cam.skew);
  if (!cam.distortion.empty()) {
    json d = json::array();
    for (double k : cam.distortion) d.push_back(num(k));
    out["distortion"] = d;
  }
  return out;
}

CuboidPose pose_from_json(const json& v, const std::string& pointer) {
  const auto& r = require(v, pointer, "rotation");
  const std::string rp = pointer + "/rotation";
  if (!r.is_array() || r.size() != 3) fail(rp, "expected a 3x3 array");
  Mat3 m;
  for (int i = 0; i < 3; ++i) m.row(i) = vec3_from_json(r[i], rp + "/" + std::to_string(i));
  CuboidPose pose;
  // Stored values carry kOutputDigits significant digits. Keeping them as
  // read makes save(load(x)) byte-identical to x.
  if (!is_rotation(m, 1e-7)) fail(rp, "not a rotation matrix");
  pose.rotation = Rotation3::approximate(m, 1e-7);
  pose.translation = vec3_from_json(require(v, pointer, "translation"), pointer + "/translation");
  pose.dimensions = vec3_from_json(require(v, pointer, "dimensions"), pointer + "/dimensions");
  try {
    pose.validate();
  } catch (const InvalidInput& e) {
    fail(pointer, e.what());
  }
  return pose;
}

json pose_to_json(const CuboidPose& pose) {
  json r = json::array();
  const Mat3& m = pose.rotation.matrix();
  for (int i = 0; i < 3; ++i) r.push_back(vec(m.row(i).transpose()));
  return {{"rotation", r}, {"translation", vec(pose.translation)}, {"dimensions", vec(pose.dimensions)}};
}

Annotation annotation_from_json(const json& v, const std::string& pointer) {
  Annotation a;
  a.label = label_from_json(require(v, pointer, "label"), pointer + "/label");
  const auto& pts = require(v, pointer, "points");
  const std::string pp = pointer + "/points";
  if (!pts.is_array()) fail(pp, "expected an array of [x, y]");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a.points.push_back(pixel_from_json(pts[i], pp + "/" + std::to_string(i)));
  }
  if (static_cast<int>(a.points.size()) != arity_of(a.label)) {
    fail(pp, "label '" + std::string(to_string(a.label)) + "' needs " +
                 std::to_string(arity_of(a.label)) + " point(s), got " +
                 std::to_string(a.points.size()));
  }
  return a;
}

json annotation_to_json(const Annotation& a) {
  json pts = json::array();
  for (const auto& p : a.points) pts.push_back({num(p.x()), num(p.y())});
  return {{"label", std::string(to_string(a.label))}, {"points", pts}};
}

VehicleEntry vehicle_from_json(const json& v, const std::string& pointer) {
  VehicleEntry e;
  if (!v.is_object()) fail(pointer, "expected an object");
  if (v.contains("id")) {
    const auto& id = v["id"];
    if (id.is_number_integer()) {
      e.vehicle.id = std::to_string(id.get<long long>());
    } else {
      e.vehicle.id = string(id, pointer + "/id");
    }
  }
  if (v.contains("prototype_class")) {
    e.vehicle.prototype_class = string(v["prototype_class"], pointer + "/prototype_class");
  }
  const auto& anns = require(v, pointer, "annotations");
  const std::string ap = pointer + "/annotations";
  if (!anns.is_array()) fail(ap, "expected an array");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    e.vehicle.annotations.push_back(annotation_from_json(anns[i], ap + "/" + std::to_string(i)));
  }
  if (v.contains("feature_scale") && !v["feature_scale"].is_null()) {
    const auto& fs = v["feature_scale"];
    const std::string fp = pointer + "/feature_scale";
    const auto& pair = require(fs, fp, "label_pair");
    if (!pair.is_array() || pair.size() != 2) fail(fp + "/label_pair", "expected two labels");
    FeatureScale scale;
    scale.first = label_from_json(pair[0], fp + "/label_pair/0");
    scale.second = label_from_json(pair[1], fp + "/label_pair/1");
    scale.length_m = number(require(fs, fp, "length_m"), fp + "/length_m");
    if (scale.length_m <= 0.0) fail(fp + "/length_m", "must be positive");
    e.vehicle.feature_scale = scale;
  }
  if (v.contains("gt")) e.gt = pose_from_json(v["gt"], pointer + "/gt");
  if (v.contains("elapsed_s")) e.elapsed_s = number(v["elapsed_s"], pointer + "/elapsed_s");
  if (v.contains("status")) e.status = string(v["status"], pointer + "/status");
  return e;
}

json vehicle_to_json(const VehicleEntry& e) {
  json anns = json::array();
  for (const auto& a : e.vehicle.annotations) anns.push_back(annotation_to_json(a));
  json out = {{"id", e.vehicle.id},
              {"prototype_class", e.vehicle.prototype_class},
              {"annotations", anns}};
  if (e.vehicle.feature_scale) {
    const auto& fs = *e.vehicle.feature_scale;
    out["feature_scale"] = {
        {"label_pair", {std::string(to_string(fs.first)), std::string(to_string(fs.second))}},
        {"length_m", num(fs.length_m)}};
  }
  if (e.gt) out["gt"] = codec::pose_to_json(*e.gt);
  if (e.elapsed_s) out["elapsed_s"] = num(*e.elapsed_s);
  if (e.status) out["status"] = *e.status;
  return out;
}

json dof_to_json(const DofReport& dof) {
  return {{"dof_available", dof.dof_available},
          {"dof_needed", dof.dof_needed},
          {"status", std::string(to_string(dof.status))}};
}

json parse(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(what + ": " + e.what());
  }
}

}  // namespace codec

using codec::json;

double round_significant(double x, int digits) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  double r = std::strtod(buf, nullptr);
  return r == 0.0 ? 0.0 : r;  // no "-0"
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
}

CameraIntrinsics parse_camera(std::string_view json_text, std::string_view where) {
  return codec::camera_from_json(codec::parse(json_text, "camera"), std::string(where));
}

CameraIntrinsics load_camera(const std::filesystem::path& path) {
  return parse_camera(read_text_file(path));
}

CameraIntrinsics resolve_camera_ref(const std::string& ref, const std::filesystem::path& base_dir) {
  std::filesystem::path p(ref);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  if (p.extension() == ".txt") return load_kitti_calib(p);
  return load_camera(p);
}

AnnotationDocument parse_annotation_document(std::string_view json_text,
                                             const std::filesystem::path& base_dir) {
  json doc = codec::parse(json_text, "annotation document");
  if (!doc.is_object()) codec::fail("", "expected an object");
  AnnotationDocument out;
  if (doc.contains("image") && !doc["image"].is_null()) out.image = codec::string(doc["image"], "/image");
  const auto& cam = codec::require(doc, "", "camera");
  if (cam.is_string()) {
    out.camera_ref = cam.get<std::string>();
    try {
      out.camera = resolve_camera_ref(*out.camera_ref, base_dir);
    } catch (const InvalidInput& e) {
      codec::fail("/camera", e.what());
    }
  } else {
    out.camera = codec::camera_from_json(cam, "/camera");
  }
  const auto& vehicles = codec::require(doc, "", "vehicles");
  if (!vehicles.is_array()) codec::fail("/vehicles", "expected an array");
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    out.vehicles.push_back(codec::vehicle_from_json(vehicles[i], "/vehicles/" + std::to_string(i)));
    if (out.vehicles.back().vehicle.id.empty()) out.vehicles.back().vehicle.id = std::to_string(i);
  }
  return out;
}

AnnotationDocument load_annotations(const std::filesystem::path& path) {
  return parse_annotation_document(read_text_file(path), path.parent_path());
}

std::string to_json(const AnnotationDocument& doc) {
  json vehicles = json::array();
  for (const auto& v : doc.vehicles) vehicles.push_back(codec::vehicle_to_json(v));
  json out = {{"image", doc.image}, {"vehicles", vehicles}};
  if (doc.camera_ref) {
    out["camera"] = *doc.camera_ref;
  } else {
    out["camera"] = codec::camera_to_json(doc.camera);
  }
  return out.dump(2) + "\n";
}

void save_annotations(const AnnotationDocument& doc, const std::filesystem::path& path) {
  write_text_file(path, to_json(doc));
}

CameraIntrinsics parse_kitti_calib(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("P2:", 0) != 0) continue;
    std::istringstream row(line.substr(3));
    double v[12];
    for (int i = 0; i < 12; ++i) {
      if (!(row >> v[i]) || !std::isfinite(v[i])) {
        throw InvalidInput("KITTI calib: P2 needs 12 numbers, entry " + std::to_string(i) + " is malformed");
      }
    }
    std::string extra;
    if (row >> extra) throw InvalidInput("KITTI calib: trailing data after P2");
    CameraIntrinsics cam;
    cam.fx = v[0];
    cam.skew = v[1];
    cam.cx = v[2];
    cam.fy = v[5];
    cam.cy = v[6];
    if (v[4] != 0.0 || v[8] != 0.0 || v[9] != 0.0 || v[10] != 1.0) {
      throw InvalidInput("KITTI calib: P2 is not of the form K [I | b]");
    }
    cam.validate();
    return cam;
  }
  throw InvalidInput("KITTI calib: missing key P2");
}

CameraIntrinsics load_kitti_calib(const std::filesystem::path& path) {
  return parse_kitti_calib(read_text_file(path));
}

KittiObject parse_kitti_label_line(std::string_view line) {
  std::istringstream in{std::string(line)};
  KittiObject o;
  if (!(in >> o.type >> o.truncated >> o.occluded >> o.alpha >> o.bbox[0] >> o.bbox[1] >> o.bbox[2] >>
        o.bbox[3] >> o.h >> o.w >> o.l >> o.x >> o.y >> o.z >> o.ry)) {
    throw InvalidInput("KITTI label: expected 15 fields in '" + std::string(line) + "'");
  }
  return o;
}

std::vector<KittiObject> parse_kitti_labels(std::string_view text) {
  std::vector<KittiObject> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_kitti_label_line(line));
  }
  return out;
}

CuboidPose kitti_to_pose(const KittiObject& obj) {
  const double c = std::cos(obj.ry), s = std::sin(obj.ry);
  Mat3 R;
  R.col(0) = Vec3(c, 0.0, -s);
  R.col(1) = Vec3(s, 0.0, c);
  R.col(2) = Vec3(0.0, -1.0, 0.0);
  CuboidPose pose;
  pose.rotation = Rotation3(R);
  pose.translation = Vec3(obj.x, obj.y, obj.z);
  pose.dimensions = Vec3(obj.l, obj.w, obj.h);
  pose.validate();
  return pose;
}

namespace {

json record_to_json(const PoseRecord& r) {
  json out = {{"id", r.id}, {"converged", r.converged}, {"cost_pixel", codec::num(r.cost_pixel)},
              {"iterations", r.iterations}};
  if (!r.gauge.empty()) out["gauge"] = r.gauge;
  if (r.pose) out["pose"] = codec::pose_to_json(*r.pose);
  if (!r.error.empty()) out["error"] = r.error;
  if (r.solve_ms) out["solve_ms"] = codec::num(*r.solve_ms);
  return out;
}

}  // namespace

std::string poses_to_json(const std::vector<PoseRecord>& records) {
  json vehicles = json::array();
  for (const auto& r : records) vehicles.push_back(record_to_json(r));
  return json{{"vehicles", vehicles}}.dump(2) + "\n";
}

std::vector<PoseRecord> parse_poses(std::string_view json_text) {
  json doc = codec::parse(json_text, "poses");
  const auto& vehicles = codec::require(doc, "", "vehicles");
  if (!vehicles.is_array()) codec::fail("/vehicles", "expected an array");
  std::vector<PoseRecord> out;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const std::string p = "/vehicles/" + std::to_string(i);
    const auto& v = vehicles[i];
    PoseRecord r;
    r.id = codec::string(codec::require(v, p, "id"), p + "/id");
    if (v.contains("pose")) r.pose = codec::pose_from_json(v["pose"], p + "/pose");
    if (v.contains("converged")) {
      if (!v["converged"].is_boolean()) codec::fail(p + "/converged", "expected a boolean");
      r.converged = v["converged"].get<bool>();
    }
    if (v.contains("cost_pixel")) r.cost_pixel = codec::number(v["cost_pixel"], p + "/cost_pixel");
    if (v.contains("iterations")) r.iterations = static_cast<int>(codec::number(v["iterations"], p + "/iterations"));
    if (v.contains("gauge")) r.gauge = codec::string(v["gauge"], p + "/gauge");
    if (v.contains("error")) r.error = codec::string(v["error"], p + "/error");
    if (v.contains("solve_ms")) r.solve_ms = codec::number(v["solve_ms"], p + "/solve_ms");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PoseRecord> load_poses(const std::filesystem::path& path) {
  return parse_poses(read_text_file(path));
}

void save_poses(const std::vector<PoseRecord>& records, const std::filesystem::path& path) {
  write_text_file(path, poses_to_json(records));
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", kOutputDigits, x);
  return buf;
}

std::string csv_row(const MetricsRow& r) {
  return r.vehicle_id + "," + fmt(r.iou) + "," + fmt(r.siou) + "," + fmt(r.e_rot_deg) + "," +
         fmt(r.e_trans) + "," + fmt(r.e_dim) + "," + fmt(r.e_comb) + "," + fmt(r.solve_ms) + "," +
         (r.converged ? "true" : "false") + "\n";
}

json row_to_json(const MetricsRow& r) {
  return {{"vehicle_id", r.vehicle_id}, {"iou", codec::num(r.iou)},
          {"siou", codec::num(r.siou)}, {"e_rot_deg", codec::num(r.e_rot_deg)},
          {"e_trans", codec::num(r.e_trans)}, {"e_dim", codec::num(r.e_dim)},
          {"e_comb", codec::num(r.e_comb)}, {"solve_ms", codec::num(r.solve_ms)},
          {"converged", r.converged}};
}

}  // namespace

std::string metrics_to_csv(const MetricsReport& report) {
  std::string out = "vehicle_id,iou,siou,e_rot_deg,e_trans,e_dim,e_comb,solve_ms,converged\n";
  for (const auto& r : report.rows) out += csv_row(r);
  if (!report.rows.empty()) {
    MetricsRow m = report.mean();
    m.vehicle_id = "mean";
    out += csv_row(m);
  }
  return out;
}

std::string metrics_to_json(const MetricsReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(row_to_json(r));
  json out = {{"rows", rows}};
  if (!report.rows.empty()) {
    MetricsRow m = report.mean();
    m.vehicle_id = "mean";
    out["mean"] = row_to_json(m);
  }
  return out.dump(2) + "\n";
}

std::vector<std::pair<std::string, std::vector<Vec3>>> parse_dimension_csv(std::string_view text) {
  std::vector<std::pair<std::string, std::vector<Vec3>>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      if (cells != std::vector<std::string>{"class", "length", "width", "height"}) {
        throw InvalidInput("dimension CSV: header must be class,length,width,height");
      }
      header = true;
      continue;
    }
    if (cells.size() != 4) {
      throw InvalidInput("dimension CSV line " + std::to_string(lineno) + ": expected 4 columns");
    }
    Vec3 d;
    for (int i = 0; i < 3; ++i) {
      char* end = nullptr;
      d(i) = std::strtod(cells[i + 1].c_str(), &end);
      if (end == cells[i + 1].c_str() || *end != '\0' || !std::isfinite(d(i)) || d(i) <= 0.0) {
        throw InvalidInput("dimension CSV line " + std::to_string(lineno) + ": bad value '" +
                           cells[i + 1] + "'");
      }
    }
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& g) { return g.first == cells[0]; });
    if (it == out.end()) {
      out.emplace_back(cells[0], std::vector<Vec3>{});
      it = std::prev(out.end());
    }
    it->second.push_back(d);
  }
  if (!header) throw InvalidInput("dimension CSV: empty file");
  return out;
}

std::string pose_to_json(const CuboidPose& pose) { return codec::pose_to_json(pose).dump(); }

AnnotationDocument scene_to_document(const SyntheticScene& scene, const std::string& vehicle_id,
                                     const std::string& prototype_class) {
  AnnotationDocument doc;
  doc.camera = scene.camera;
  VehicleEntry e;
  e.vehicle.id = vehicle_id;
  e.vehicle.prototype_class = prototype_class;
  e.vehicle.annotations = scene.annotations;
  e.gt = scene.gt_pose;
  doc.vehicles.push_back(std::move(e));
  return doc;
}

}  // namespace monocuboid
