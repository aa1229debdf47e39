#pragma once

// JSON conversions shared by io.cpp and service.cpp. Not installed.

#include <json.hpp>
#include <string>

#include "monocuboid/constraints.hpp"
#include "monocuboid/io.hpp"

namespace monocuboid::codec {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& message);

const json& require(const json& obj, const std::string& pointer, const char* key);
double number(const json& v, const std::string& pointer);
std::string string(const json& v, const std::string& pointer);

json num(double x);
json vec(const Vec3& v);

CameraIntrinsics camera_from_json(const json& v, const std::string& pointer);
json camera_to_json(const CameraIntrinsics& cam);

CuboidPose pose_from_json(const json& v, const std::string& pointer);
json pose_to_json(const CuboidPose& pose);

Annotation annotation_from_json(const json& v, const std::string& pointer);
json annotation_to_json(const Annotation& a);

// Reads id, prototype_class, annotations and feature_scale; gt, elapsed_s
// and status when present.
VehicleEntry vehicle_from_json(const json& v, const std::string& pointer);
json vehicle_to_json(const VehicleEntry& v);

json dof_to_json(const DofReport& dof);

json parse(std::string_view text, const std::string& what);

}  // namespace monocuboid::codec
