#include "gridfuse/camera_io.hpp"

#include "gridfuse/errors.hpp"
#include "gridfuse/npy.hpp"

#include <json.hpp>

#include <numbers>
#include <set>

namespace gridfuse {

namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

double number(const json& rec, const std::string& where, const char* key) {
  const auto it = rec.find(key);
  if (it == rec.end()) throw DataError(where + ": missing field '" + key + "'");
  if (!it->is_number()) throw DataError(where + ": field '" + key + "' must be a number");
  return it->get<double>();
}

int integer(const json& rec, const std::string& where, const char* key) {
  const auto it = rec.find(key);
  if (it == rec.end()) throw DataError(where + ": missing field '" + key + "'");
  if (!it->is_number_integer()) throw DataError(where + ": field '" + key + "' must be an integer");
  return it->get<int>();
}

}  // namespace

std::vector<Camera> parse_cameras(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("camera file is not valid JSON: ") + e.what());
  }
  const json* list = &doc;
  if (doc.is_object()) {
    const auto it = doc.find("cameras");
    if (it == doc.end()) throw DataError("camera file: missing 'cameras' array");
    list = &*it;
  }
  if (!list->is_array()) throw DataError("camera file: 'cameras' must be an array");

  std::vector<Camera> cameras;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json& rec = (*list)[i];
    std::string where = "camera record " + std::to_string(i);
    if (!rec.is_object()) throw DataError(where + ": not an object");
    const auto id = rec.find("id");
    if (id == rec.end() || !id->is_string()) throw DataError(where + ": missing string field 'id'");
    Camera cam;
    cam.id = id->get<std::string>();
    where += " ('" + cam.id + "')";
    if (!seen.insert(cam.id).second) throw DataError(where + ": duplicate id");

    auto& in = cam.intrinsics;
    in.width = integer(rec, where, "width");
    in.height = integer(rec, where, "height");
    in.f = number(rec, where, "f");
    in.cx = number(rec, where, "cx");
    in.cy = number(rec, where, "cy");
    in.b1 = number(rec, where, "b1");
    in.b2 = number(rec, where, "b2");
    const char* kk[] = {"k1", "k2", "k3", "k4", "k5"};
    for (int j = 0; j < 5; ++j) in.k[j] = number(rec, where, kk[j]);
    const char* pp[] = {"p1", "p2", "p3", "p4"};
    for (int j = 0; j < 4; ++j) in.p[j] = number(rec, where, pp[j]);
    try {
      in.validate();
      const Vec3 s(number(rec, where, "x"), number(rec, where, "y"), number(rec, where, "z"));
      cam.pose = CameraPose(s, number(rec, where, "omega") * kDegToRad, number(rec, where, "phi") * kDegToRad,
                            number(rec, where, "kappa") * kDegToRad);
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    cameras.push_back(std::move(cam));
  }
  return cameras;
}

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
  try {
    return parse_cameras(npy::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_cameras(const std::vector<Camera>& cameras) {
  json list = json::array();
  for (const auto& c : cameras) {
    const auto& in = c.intrinsics;
    json rec = {{"id", c.id},       {"width", in.width}, {"height", in.height}, {"f", in.f},
                {"cx", in.cx},      {"cy", in.cy},       {"b1", in.b1},         {"b2", in.b2},
                {"k1", in.k[0]},    {"k2", in.k[1]},     {"k3", in.k[2]},       {"k4", in.k[3]},
                {"k5", in.k[4]},    {"p1", in.p[0]},     {"p2", in.p[1]},       {"p3", in.p[2]},
                {"p4", in.p[3]},    {"x", c.pose.position().x()}, {"y", c.pose.position().y()},
                {"z", c.pose.position().z()},
                {"omega", c.pose.omega() / kDegToRad}, {"phi", c.pose.phi() / kDegToRad},
                {"kappa", c.pose.kappa() / kDegToRad}};
    list.push_back(std::move(rec));
  }
  return json{{"cameras", list}}.dump(2) + "\n";
}

void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cameras) {
  npy::write_file(path, serialize_cameras(cameras));
}

}  // namespace gridfuse
