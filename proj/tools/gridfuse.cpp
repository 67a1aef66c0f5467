#include "manifest.hpp"

#include "gridfuse/camera_io.hpp"
#include "gridfuse/cloud_distance.hpp"
#include "gridfuse/depth_raster.hpp"
#include "gridfuse/errors.hpp"
#include "gridfuse/flight_plan.hpp"
#include "gridfuse/fusion_mlp.hpp"
#include "gridfuse/label_transfer.hpp"
#include "gridfuse/metrics.hpp"
#include "gridfuse/npy.hpp"
#include "gridfuse/parallel.hpp"
#include "gridfuse/point_cloud.hpp"
#include "gridfuse/submission.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>

namespace fs = std::filesystem;
using namespace gridfuse;
using gridfuse::cli::Manifest;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct Global {
  unsigned threads = 0;
};

// ---- file helpers ---------------------------------------------------------

std::string safe_name(const std::string& id) {
  std::string s = id;
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  return s;
}

// <dir>/<id>.npy, falling back to the id without its image extension.
fs::path per_camera_file(const fs::path& dir, const std::string& id) {
  const fs::path full = dir / (safe_name(id) + ".npy");
  if (fs::exists(full)) return full;
  const fs::path stem = dir / (fs::path(safe_name(id)).stem().string() + ".npy");
  if (fs::exists(stem)) return stem;
  throw DataError("no file for camera '" + id + "' in " + dir.string() + " (expected " + full.filename().string() +
                  ")");
}

std::vector<std::uint8_t> load_labels(const fs::path& path) {
  const auto a = npy::load(path);
  if (a.shape.size() != 1) throw DataError(path.string() + ": label array must be 1-D");
  try {
    return npy::convert<std::uint8_t>(a);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<float> load_matrix_f32(const fs::path& path, std::size_t& rows, std::size_t& cols) {
  const auto a = npy::load(path);
  if (a.shape.size() != 2) throw DataError(path.string() + ": expected a 2-D (N, K) array");
  rows = a.shape[0];
  cols = a.shape[1];
  return npy::convert<float>(a);
}

// Zone name -> file, for every "<zone><ext>" directly inside `dir`.
std::map<std::string, fs::path> zone_files(const fs::path& dir, const std::string& ext) {
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out[e.path().stem().string()] = e.path();
  return out;
}

std::vector<std::uint64_t> load_counts(const fs::path& path) {
  std::istringstream in(npy::read_file(path));
  std::vector<std::uint64_t> v;
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::getline(in, tok);
      continue;
    }
    try {
      std::size_t used = 0;
      v.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": '" + tok + "' is not a count");
    }
  }
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- project --------------------------------------------------------------

struct ProjectOpts {
  fs::path cameras, cloud, out;
};

int run_project(const ProjectOpts& o, const Global& g) {
  const auto cams = load_cameras(o.cameras);
  const auto cloud = read_ply(o.cloud);
  const std::size_t n = cloud.size();
  std::vector<double> out(cams.size() * n * 4);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t c = 0; c < cams.size(); ++c) {
    parallel_chunks(n, g.threads, [&](std::size_t b, std::size_t e, unsigned) {
      for (std::size_t i = b; i < e; ++i) {
        const auto r = project(cams[c], cloud.positions[i]);
        double* row = out.data() + (c * n + i) * 4;
        const bool behind = r.status == ProjectionStatus::BehindCamera;
        row[0] = behind ? NAN : r.pixel.x();
        row[1] = behind ? NAN : r.pixel.y();
        row[2] = r.depth;
        row[3] = static_cast<double>(static_cast<int>(r.status));
      }
    });
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  npy::save(o.out, npy::make_array<double>(out, {cams.size(), n, 4}));
  Manifest m("project");
  m.parameters()["columns"] = "fx, fy, depth, status (0 in frame, 1 out of frame, 2 behind)";
  for (std::size_t c = 0; c < cams.size(); ++c) {
    std::size_t in = 0;
    for (std::size_t i = 0; i < n; ++i) in += out[(c * n + i) * 4 + 3] == 0.0;
    std::cout << cams[c].id << ": " << in << " of " << n << " points in frame\n";
    m.results()["in_frame"][cams[c].id] = in;
  }
  if (secs > 0) std::cout << "throughput: " << fmt("%.0f", double(n * cams.size()) / secs) << " projections/s\n";
  m.input(o.cameras);
  m.input(o.cloud);
  m.output(o.out);
  m.write(o.out);
  return 0;
}

// ---- depthmap -------------------------------------------------------------

struct DepthOpts {
  fs::path cameras, cloud, out_dir;
  int buffer = 2;
};

int run_depthmap(const DepthOpts& o, const Global& g) {
  const auto cams = load_cameras(o.cameras);
  const auto cloud = read_ply(o.cloud);
  fs::create_directories(o.out_dir);
  Manifest m("depthmap");
  m.parameters()["buffer_radius"] = o.buffer;
  for (const auto& cam : cams) {
    const auto d = render_depth_map(cam.intrinsics, cam.pose, cloud.positions, o.buffer, g.threads);
    const fs::path p = o.out_dir / (safe_name(cam.id) + ".npy");
    npy::save(p, d.to_npy());
    std::size_t filled = 0;
    for (float v : d.cells()) filled += !std::isinf(v);
    std::cout << cam.id << ": " << filled << " of " << d.cells().size() << " cells filled\n";
    m.output(p);
  }
  m.input(o.cameras);
  m.input(o.cloud);
  m.write(o.out_dir);
  return 0;
}

// ---- transfer -------------------------------------------------------------

struct TransferOpts {
  fs::path cameras, cloud, logits, depthmaps, out, logits_out, weights;
  double tau = 0.15;
  int buffer = 2;
  std::string weighting = "uniform";
  std::string sampling = "nearest";
};

int run_transfer(const TransferOpts& o, const Global& g) {
  const auto cams = load_cameras(o.cameras);
  const auto cloud = read_ply(o.cloud);
  TransferConfig cfg;
  cfg.visibility.depth_tolerance = o.tau;
  cfg.visibility.buffer_radius = o.buffer;
  cfg.threads = g.threads;
  cfg.sampling = o.sampling == "bilinear" ? PixelSampling::Bilinear : PixelSampling::Nearest;
  if (o.weighting == "inverse-distance") {
    cfg.weighting = ViewWeighting::inverse_distance();
  } else if (o.weighting == "custom") {
    if (o.weights.empty()) throw CLI::ValidationError("--weights", "required with --weighting custom");
    std::map<std::string, double> by_id;
    std::istringstream in(npy::read_file(o.weights));
    for (std::string line; std::getline(in, line);) {
      if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
      std::istringstream ls(line);
      std::string id;
      double w;
      if (!(ls >> id)) continue;
      if (!(ls >> w)) throw DataError(o.weights.string() + ": expected 'camera_id weight'");
      by_id[id] = w;
    }
    std::vector<double> w;
    for (const auto& c : cams) {
      const auto it = by_id.find(c.id);
      if (it == by_id.end()) throw DataError(o.weights.string() + ": no weight for camera '" + c.id + "'");
      w.push_back(it->second);
    }
    cfg.weighting = ViewWeighting::per_view(std::move(w));
  }

  Manifest m("transfer");
  std::vector<LogitImage> logits;
  std::vector<DepthMap> maps;
  for (const auto& cam : cams) {
    const fs::path lp = per_camera_file(o.logits, cam.id);
    try {
      logits.push_back(LogitImage::from_npy(npy::load(lp)));
    } catch (const DataError& e) {
      throw DataError(lp.string() + ": " + e.what());
    }
    m.input(lp);
    if (!o.depthmaps.empty()) {
      const fs::path dp = per_camera_file(o.depthmaps, cam.id);
      maps.push_back(DepthMap::from_npy(npy::load(dp), o.buffer));
      m.input(dp);
    } else {
      maps.push_back(render_depth_map(cam.intrinsics, cam.pose, cloud.positions, o.buffer, g.threads));
    }
  }
  const auto r = transfer_labels(cloud.positions, cams, maps, logits, cfg);
  npy::save(o.out, npy::make_array<std::uint8_t>(r.labels, {r.labels.size()}));
  m.output(o.out);
  if (!o.logits_out.empty()) {
    npy::save(o.logits_out, npy::make_array<float>(r.logits, {r.labels.size(), std::size_t(r.classes)}));
    m.output(o.logits_out);
  }
  std::size_t none = 0;
  for (auto v : r.view_count) none += v == 0;
  std::cout << r.labels.size() << " points, " << none << " without a visible view (label 255)\n";
  m.parameters()["tau"] = o.tau;
  m.parameters()["buffer_radius"] = o.buffer;
  m.parameters()["weighting"] = o.weighting;
  m.parameters()["sampling"] = o.sampling;
  m.parameters()["depthmaps"] = o.depthmaps.empty() ? "rendered" : o.depthmaps.string();
  m.results()["points"] = r.labels.size();
  m.results()["no_evidence"] = none;
  m.input(o.cameras);
  m.input(o.cloud);
  if (!o.weights.empty()) m.input(o.weights);
  m.write(o.out);
  return 0;
}

// ---- fuse-train / fuse-predict ---------------------------------------------

FusionBatch load_fusion_inputs(const fs::path& image, const fs::path& point, std::vector<std::uint8_t> labels,
                               int& classes) {
  std::size_t ni, ki, np, kp;
  const auto a = load_matrix_f32(image, ni, ki);
  const auto b = load_matrix_f32(point, np, kp);
  if (ni != np || ki != kp)
    throw DataError("image logits " + std::to_string(ni) + "x" + std::to_string(ki) + " and point logits " +
                    std::to_string(np) + "x" + std::to_string(kp) + " differ in shape");
  if (classes == 0) classes = int(ki);
  if (ki != std::size_t(classes))
    throw DataError("logit width " + std::to_string(ki) + " does not match --classes " + std::to_string(classes));
  if (labels.empty()) labels.assign(ni, 0);
  if (labels.size() != ni)
    throw DataError("labels have " + std::to_string(labels.size()) + " entries, logits have " + std::to_string(ni));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= classes && labels[i] != kIgnoreLabel)
      throw DataError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) + " is not a class");
  return FusionBatch::from_logits(a, b, labels, classes);
}

struct TrainOpts {
  fs::path image_logits, point_logits, labels, out;
  int classes = 0;
  TrainConfig cfg;
};

int run_fuse_train(TrainOpts o, const Global&) {
  const auto batch = load_fusion_inputs(o.image_logits, o.point_logits, load_labels(o.labels), o.classes);
  const auto r = train_fusion(batch, o.classes, o.cfg);
  save_model(o.out, r.model);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "parameters: " << r.model.parameter_count() << "\n"
            << "loss: " << fmt("%.6f", r.loss_history.front()) << " -> " << fmt("%.6f", r.loss_history.back())
            << "\n"
            << "training accuracy: " << fmt("%.4f", r.train_accuracy) << "\n";
  Manifest m("fuse-train");
  auto& p = m.parameters();
  p["classes"] = o.classes;
  p["hidden"] = o.cfg.hidden;
  p["learning_rate"] = o.cfg.learning_rate;
  p["momentum"] = o.cfg.momentum;
  p["epochs"] = o.cfg.epochs;
  p["batch_size"] = o.cfg.batch_size;
  p["seed"] = o.cfg.seed;
  p["class_weighting"] = o.cfg.class_weighting;
  m.results()["parameter_count"] = r.model.parameter_count();
  m.results()["final_loss"] = r.loss_history.back();
  m.results()["train_accuracy"] = r.train_accuracy;
  m.results()["warnings"] = r.warnings;
  m.input(o.image_logits);
  m.input(o.point_logits);
  m.input(o.labels);
  m.output(o.out);
  m.write(o.out);
  return 0;
}

struct PredictOpts {
  fs::path model, image_logits, point_logits, out;
};

int run_fuse_predict(const PredictOpts& o, const Global& g) {
  const auto model = load_model(o.model);
  int classes = model.classes();
  const auto batch = load_fusion_inputs(o.image_logits, o.point_logits, {}, classes);
  std::vector<std::uint8_t> labels(batch.size());
  parallel_chunks(batch.size(), g.threads, [&](std::size_t b, std::size_t e, unsigned) {
    if (b == e) return;
    const auto part = predict_labels(model, batch.inputs.middleRows(Eigen::Index(b), Eigen::Index(e - b)));
    std::copy(part.begin(), part.end(), labels.begin() + std::ptrdiff_t(b));
  });
  npy::save(o.out, npy::make_array<std::uint8_t>(labels, {labels.size()}));
  std::cout << labels.size() << " points labelled\n";
  Manifest m("fuse-predict");
  m.input(o.model);
  m.input(o.image_logits);
  m.input(o.point_logits);
  m.output(o.out);
  m.write(o.out);
  return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalOpts {
  fs::path pred, gt, report, mapping;
  int classes = 11;
  bool remap_gt = false;
};

ZoneLabels load_zone_labels(const fs::path& path, const std::vector<std::string>& zones, int classes) {
  if (fs::is_directory(path)) {
    ZoneLabels out;
    for (const auto& [zone, file] : zone_files(path, ".npy")) out[zone] = load_labels(file);
    return out;
  }
  const auto ext = path.extension().string();
  if (ext == ".zip" || ext == ".npz") return load_submission(path, zones, classes);
  return {{"", load_labels(path)}};
}

int run_eval(const EvalOpts& o, const Global& g) {
  auto gt = load_zone_labels(o.gt, {}, o.classes);
  std::vector<std::string> zones;
  for (const auto& [z, _] : gt) zones.push_back(z);
  const auto pred = load_zone_labels(o.pred, zones, o.classes);
  if (o.remap_gt) {
    const auto mapping = o.mapping.empty() ? ClassMapping::gridnet() : ClassMapping::load(o.mapping);
    for (auto& [z, v] : gt) v = remap_labels(v, mapping);
  }
  ConfusionMatrix cm(o.classes);
  for (const auto& [zone, gv] : gt) {
    const auto it = pred.find(zone);
    if (it == pred.end())
      throw DataError("prediction has no labels for zone '" + (zone.empty() ? o.gt.string() : zone) + "'");
    try {
      cm.merge(confusion(it->second, gv, o.classes, kIgnoreLabel, g.threads));
    } catch (const DataError& e) {
      throw DataError((zone.empty() ? std::string("labels") : "zone '" + zone + "'") + ": " + e.what());
    }
  }
  for (const auto& [zone, _] : pred)
    if (!gt.count(zone)) throw DataError("ground truth has no labels for zone '" + zone + "'");
  const auto r = miou(cm);
  std::cout << "class      IoU     TP          FP          FN\n";
  for (int k = 0; k < o.classes; ++k) {
    char line[128];
    if (r.included[k])
      std::snprintf(line, sizeof line, "%-6d %8.4f %11llu %11llu %11llu\n", k, r.iou[k],
                    (unsigned long long)cm.true_positives(k), (unsigned long long)cm.false_positives(k),
                    (unsigned long long)cm.false_negatives(k));
    else
      std::snprintf(line, sizeof line, "%-6d %8s\n", k, "-");
    std::cout << line;
  }
  std::cout << "mIoU " << fmt("%.4f", r.mean) << "\n" << r.note << "\n";
  if (!o.report.empty()) {
    Manifest m("eval");
    m.parameters()["classes"] = o.classes;
    m.parameters()["remap_gt"] = o.remap_gt;
    nlohmann::ordered_json iou = nlohmann::ordered_json::array();
    for (int k = 0; k < o.classes; ++k) iou.push_back(r.included[k] ? nlohmann::ordered_json(r.iou[k]) : nullptr);
    m.results()["iou"] = iou;
    m.results()["miou"] = r.mean;
    m.results()["excluded"] = r.excluded;
    m.results()["note"] = r.note;
    nlohmann::ordered_json report;
    report["iou"] = iou;
    report["miou"] = r.mean;
    report["excluded"] = r.excluded;
    npy::write_file(o.report, report.dump(2) + "\n");
    m.input(o.pred);
    m.input(o.gt);
    m.output(o.report);
    m.write(o.report);
  }
  return 0;
}

// ---- stats ----------------------------------------------------------------

struct StatsOpts {
  fs::path splits, labels, out;
  int classes = 11;
};

int run_stats(const StatsOpts& o, const Global&) {
  const auto assignment = o.splits.empty() ? ZoneAssignment::gridnet() : ZoneAssignment::load(o.splits);
  std::map<std::string, std::vector<std::uint64_t>> counts;
  for (const auto& [zone, file] : zone_files(o.labels, ".counts")) counts[zone] = load_counts(file);
  std::map<std::string, std::vector<std::uint8_t>> labels;
  for (const auto& [zone, file] : zone_files(o.labels, ".npy")) {
    if (counts.count(zone)) throw DataError("zone '" + zone + "' has both a .npy and a .counts file");
    labels[zone] = load_labels(file);
  }
  auto file_of = [&](const std::string& zone) { return (o.labels / (zone + ".npy")).string(); };
  if (counts.empty() && labels.empty())
    throw DataError(o.labels.string() + ": no <zone>.npy or <zone>.counts files found");
  // label arrays become histograms so both sources merge
  for (const auto& [zone, v] : labels) {
    std::vector<std::uint64_t> h(std::size_t(o.classes) + 1, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == kIgnoreLabel)
        ++h.back();
      else if (v[i] < o.classes)
        ++h[v[i]];
      else
        throw DataError(file_of(zone) + ": label " + std::to_string(v[i]) + " at index " + std::to_string(i) +
                        " is not a class");
    }
    counts[zone] = std::move(h);
  }
  const auto table = split_statistics_from_counts(counts, assignment, o.classes);
  const auto text = table.to_text();
  std::cout << text;
  if (!o.out.empty()) {
    npy::write_file(o.out, text);
    Manifest m("stats");
    m.parameters()["classes"] = o.classes;
    m.parameters()["splits"] = o.splits.empty() ? "built-in" : o.splits.string();
    m.results()["grand_total"] = table.grand_total();
    if (!o.splits.empty()) m.input(o.splits);
    m.input(o.labels);
    m.output(o.out);
    m.write(o.out);
  }
  return 0;
}

// ---- submit ---------------------------------------------------------------

struct SubmitOpts {
  fs::path labels, out, splits;
  std::string zones;
  int classes = 11;
};

int run_submit(const SubmitOpts& o, const Global&) {
  std::vector<std::string> zones = split_list(o.zones);
  if (zones.empty()) {
    const auto assignment = o.splits.empty() ? ZoneAssignment::gridnet() : ZoneAssignment::load(o.splits);
    zones = assignment.zones_in("test");
  }
  ZoneLabels labels;
  for (const auto& [zone, file] : zone_files(o.labels, ".npy")) labels[zone] = load_labels(file);
  save_submission(o.out, labels, zones, o.classes);
  // read back through the validator
  const auto check = load_submission(o.out, zones, o.classes);
  std::size_t points = 0;
  for (const auto& [_, v] : check) points += v.size();
  std::cout << check.size() << " zones, " << points << " labels written to " << o.out.string() << "\n";
  Manifest m("submit");
  m.parameters()["zones"] = zones;
  m.parameters()["classes"] = o.classes;
  m.input(o.labels);
  m.output(o.out);
  m.write(o.out);
  return 0;
}

// ---- c2c ------------------------------------------------------------------

struct C2COpts {
  fs::path compared, reference, out;
};

int run_c2c(const C2COpts& o, const Global& g) {
  const auto a = read_ply(o.compared);
  const auto b = read_ply(o.reference);
  if (b.empty()) throw DataError(o.reference.string() + ": reference cloud is empty");
  const auto r = cloud_to_cloud(a.positions, b.positions, g.threads);
  const auto& s = r.summary;
  std::cout << "points " << s.count << "\n";
  for (auto [name, v] : {std::pair{"mean", s.mean}, {"rms", s.rms}, {"min", s.min}, {"median", s.median},
                         {"p90", s.p90}, {"p95", s.p95}, {"p99", s.p99}, {"max", s.max}})
    std::cout << name << " " << fmt("%.6f", v) << "\n";
  if (!o.out.empty()) {
    npy::save(o.out, npy::make_array<double>(r.distances, {r.distances.size()}));
    Manifest m("c2c");
    auto& res = m.results();
    res["count"] = s.count;
    res["mean"] = s.mean;
    res["rms"] = s.rms;
    res["median"] = s.median;
    res["p95"] = s.p95;
    res["max"] = s.max;
    m.input(o.compared);
    m.input(o.reference);
    m.output(o.out);
    m.write(o.out);
  }
  return 0;
}

// ---- plan -----------------------------------------------------------------

struct PlanOpts {
  fs::path pylons, out;
  FlightPlanConfig cfg;
  double angle_deg = 50.0;
};

int run_plan(PlanOpts o, const Global&) {
  o.cfg.depression_angle = o.angle_deg * std::numbers::pi / 180.0;
  const auto pylons = load_pylons(o.pylons);
  const auto plan = plan_trajectory(pylons, o.cfg);
  npy::write_file(o.out, format_plan(plan));
  std::cout << plan.waypoints.size() << " waypoints, line length " << fmt("%.1f", plan.line_length)
            << " m, look-ahead " << fmt("%.2f", o.cfg.look_ahead()) << " m\n";
  Manifest m("plan");
  auto& p = m.parameters();
  p["height_above"] = o.cfg.height_above;
  p["depression_angle_deg"] = o.angle_deg;
  p["lateral_offset"] = o.cfg.lateral_offset;
  p["v_min"] = o.cfg.v_min;
  p["v_max"] = o.cfg.v_max;
  p["waypoint_spacing"] = o.cfg.waypoint_spacing;
  p["max_speed_gradient"] = o.cfg.max_speed_gradient;
  p["uturn_min_radius"] = o.cfg.uturn_min_radius;
  m.results()["waypoints"] = plan.waypoints.size();
  m.results()["line_length"] = plan.line_length;
  m.input(o.pylons);
  m.output(o.out);
  m.write(o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridfuse: multi-view label transfer, fusion and evaluation for power-line point clouds"};
  app.set_version_flag("--version", std::string("gridfuse ") + GRIDFUSE_VERSION);
  app.set_config("--config", "", "TOML/INI file with option values; [subcommand] sections apply to that subcommand");
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores")
      ->envname("GRIDFUSE_THREADS")
      ->capture_default_str();

  int status = 0;
  auto bind = [&status, &g](CLI::App* sub, auto fn) { sub->callback([&status, &g, fn] { status = fn(g); }); };

  ProjectOpts po;
  auto* project = app.add_subcommand("project", "Project cloud points into every camera");
  project->add_option("--cameras", po.cameras, "Camera JSON file")->required()->check(CLI::ExistingFile);
  project->add_option("--cloud", po.cloud, "Point cloud (PLY)")->required()->check(CLI::ExistingFile);
  project->add_option("--out", po.out, "Output NPY, (cameras, points, 4) float64")->required();
  bind(project, [&po](const Global& gg) { return run_project(po, gg); });

  DepthOpts dopt;
  auto* depth = app.add_subcommand("depthmap", "Render one min-depth map per camera");
  depth->add_option("--cameras", dopt.cameras, "Camera JSON file")->required()->check(CLI::ExistingFile);
  depth->add_option("--cloud", dopt.cloud, "Point cloud (PLY)")->required()->check(CLI::ExistingFile);
  depth->add_option("--out-dir", dopt.out_dir, "Directory for <camera>.npy float32 maps")->required();
  depth->add_option("--buffer", dopt.buffer, "Splat buffer radius in pixels")
      ->capture_default_str()
      ->check(CLI::Range(0, 64));
  bind(depth, [&dopt](const Global& gg) { return run_depthmap(dopt, gg); });

  TransferOpts to;
  auto* transfer = app.add_subcommand("transfer", "Transfer per-pixel class scores to points (image vote)");
  transfer->add_option("--cameras", to.cameras, "Camera JSON file")->required()->check(CLI::ExistingFile);
  transfer->add_option("--cloud", to.cloud, "Point cloud (PLY)")->required()->check(CLI::ExistingFile);
  transfer->add_option("--logits", to.logits, "Directory of <camera>.npy (H, W, K) float32 score images")
      ->required()
      ->check(CLI::ExistingDirectory);
  transfer->add_option("--depthmaps", to.depthmaps, "Precomputed depth maps (default: render from the cloud)")
      ->check(CLI::ExistingDirectory);
  transfer->add_option("--tau", to.tau, "Depth tolerance in metres")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  transfer->add_option("--buffer", to.buffer, "Splat buffer radius in pixels")
      ->capture_default_str()
      ->check(CLI::Range(0, 64));
  transfer->add_option("--weighting", to.weighting, "View weighting")
      ->capture_default_str()
      ->check(CLI::IsMember({"uniform", "inverse-distance", "custom"}));
  transfer->add_option("--weights", to.weights, "Per-camera weights, lines 'camera_id weight'")
      ->check(CLI::ExistingFile);
  transfer->add_option("--sampling", to.sampling, "Pixel sampling")
      ->capture_default_str()
      ->check(CLI::IsMember({"nearest", "bilinear"}));
  transfer->add_option("--out", to.out, "Output labels NPY (uint8, 255 = no view)")->required();
  transfer->add_option("--logits-out", to.logits_out, "Also write the aggregated (N, K) float32 scores");
  bind(transfer, [&to](const Global& gg) { return run_transfer(to, gg); });

  TrainOpts tr;
  std::string hidden = "256,256";
  auto* train = app.add_subcommand("fuse-train", "Train the late-fusion MLP");
  train->add_option("--image-logits", tr.image_logits, "(N, K) float32 image-branch scores")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--point-logits", tr.point_logits, "(N, K) float32 point-branch scores")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--labels", tr.labels, "(N,) uint8 training labels, 255 ignored")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--classes", tr.classes, "Class count (default: logit width)")->check(CLI::Range(2, 254));
  train->add_option("--hidden", hidden, "Hidden layer widths, comma separated")->capture_default_str();
  train->add_option("--lr", tr.cfg.learning_rate, "Learning rate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--momentum", tr.cfg.momentum, "Momentum")->capture_default_str()->check(CLI::Range(0.0, 0.999));
  train->add_option("--epochs", tr.cfg.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--batch", tr.cfg.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--seed", tr.cfg.seed, "Random seed")->capture_default_str();
  train->add_flag("--class-weighting", tr.cfg.class_weighting, "Weight the loss by inverse class frequency");
  train->add_option("--out", tr.out, "Model checkpoint")->required();
  train->callback([&] {
    tr.cfg.hidden.clear();
    for (const auto& h : split_list(hidden)) {
      try {
        tr.cfg.hidden.push_back(std::stoi(h));
      } catch (const std::exception&) {
        throw CLI::ValidationError("--hidden", "'" + h + "' is not a width");
      }
      if (tr.cfg.hidden.back() <= 0) throw CLI::ValidationError("--hidden", "widths must be positive");
    }
    status = run_fuse_train(tr, g);
  });

  PredictOpts pr;
  auto* predict = app.add_subcommand("fuse-predict", "Label points with a trained fusion model");
  predict->add_option("--model", pr.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--image-logits", pr.image_logits, "(N, K) float32 image-branch scores")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--point-logits", pr.point_logits, "(N, K) float32 point-branch scores")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", pr.out, "Output labels NPY (uint8)")->required();
  bind(predict, [&pr](const Global& gg) { return run_fuse_predict(pr, gg); });

  EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "Per-class IoU and mIoU");
  eval->add_option("--pred", eo.pred, "Predictions: submission zip, directory of <zone>.npy, or one .npy")
      ->required()
      ->check(CLI::ExistingPath);
  eval->add_option("--gt", eo.gt, "Ground truth: directory of <zone>.npy or one .npy")
      ->required()
      ->check(CLI::ExistingPath);
  eval->add_option("--classes", eo.classes, "Class count")->capture_default_str()->check(CLI::Range(1, 254));
  eval->add_flag("--remap-gt", eo.remap_gt, "Ground truth holds original class ids; map them first");
  eval->add_option("--mapping", eo.mapping, "Class mapping table (default: built-in 22 -> 11)")
      ->check(CLI::ExistingFile);
  eval->add_option("--report", eo.report, "Write the scores as JSON");
  bind(eval, [&eo](const Global& gg) { return run_eval(eo, gg); });

  StatsOpts so;
  auto* stats = app.add_subcommand("stats", "Per-class split statistics");
  stats->add_option("--splits", so.splits, "Zone assignment 'zone subset' (default: built-in)")
      ->check(CLI::ExistingFile);
  stats->add_option("--labels", so.labels, "Directory of <zone>.npy labels or <zone>.counts histograms")
      ->required()
      ->check(CLI::ExistingDirectory);
  stats->add_option("--classes", so.classes, "Class count")->capture_default_str()->check(CLI::Range(1, 254));
  stats->add_option("--out", so.out, "Also write the table here");
  bind(stats, [&so](const Global& gg) { return run_stats(so, gg); });

  SubmitOpts su;
  auto* submit = app.add_subcommand("submit", "Pack per-zone labels into a submission archive");
  submit->add_option("--labels", su.labels, "Directory of <zone>.npy uint8 labels")
      ->required()
      ->check(CLI::ExistingDirectory);
  submit->add_option("--zones", su.zones, "Comma-separated zone list (default: test zones of --splits)");
  submit->add_option("--splits", su.splits, "Zone assignment (default: built-in)")->check(CLI::ExistingFile);
  submit->add_option("--classes", su.classes, "Class count")->capture_default_str()->check(CLI::Range(1, 254));
  submit->add_option("--out", su.out, "Output zip")->required();
  bind(submit, [&su](const Global& gg) { return run_submit(su, gg); });

  C2COpts co;
  auto* c2c = app.add_subcommand("c2c", "Nearest-neighbour cloud-to-cloud distances");
  c2c->add_option("--compared", co.compared, "Cloud whose points are measured (PLY)")
      ->required()
      ->check(CLI::ExistingFile);
  c2c->add_option("--reference", co.reference, "Reference cloud (PLY)")->required()->check(CLI::ExistingFile);
  c2c->add_option("--out", co.out, "Per-point distances NPY (float64)");
  bind(c2c, [&co](const Global& gg) { return run_c2c(co, gg); });

  PlanOpts pl;
  auto* plan = app.add_subcommand("plan", "Corridor flight plan over a pylon line");
  plan->add_option("--pylons", pl.pylons, "Pylon table 'id X Y Z_top'")->required()->check(CLI::ExistingFile);
  plan->add_option("--height", pl.cfg.height_above, "Clearance above the line, m")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  plan->add_option("--angle", pl.angle_deg, "Sensor depression angle below horizon, degrees")
      ->capture_default_str()
      ->check(CLI::Range(0.001, 90.0));
  plan->add_option("--offset", pl.cfg.lateral_offset, "Lateral offset, m")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  plan->add_option("--v-min", pl.cfg.v_min, "Speed near pylons, m/s")->capture_default_str()->check(CLI::PositiveNumber);
  plan->add_option("--v-max", pl.cfg.v_max, "Cruise speed, m/s")->capture_default_str()->check(CLI::PositiveNumber);
  plan->add_option("--spacing", pl.cfg.waypoint_spacing, "Waypoint spacing, m")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  plan->add_option("--gradient", pl.cfg.max_speed_gradient, "Maximum speed change per metre, (m/s)/m")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  plan->add_option("--uturn-radius", pl.cfg.uturn_min_radius, "Minimum U-turn radius, m")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  plan->add_option("--out", pl.out, "Output waypoint table")->required();
  bind(plan, [&pl](const Global& gg) { return run_plan(pl, gg); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return status;
}
