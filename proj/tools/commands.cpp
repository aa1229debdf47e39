#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <ostream>
#include <thread>

#include "monocuboid/error.hpp"
#include "monocuboid/metrics.hpp"
#include "monocuboid/service.hpp"
#include "monocuboid/synth.hpp"

#ifndef MONOCUBOID_DEFAULT_PRIORS
#define MONOCUBOID_DEFAULT_PRIORS ""
#endif

namespace monocuboid::cli {

namespace {

struct SolverFlags {
  std::string gauge = "prior";
  double lambda = 1.0;
  double lambda_pixel = 1.0;
  bool no_finetune = false;
  std::string priors;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--gauge", f.gauge, "fix-dz, homogeneous-svd or prior")
      ->envname("TOOSI_GAUGE")
      ->capture_default_str();
  cmd->add_option("--lambda", f.lambda, "size prior weight in the 3D cost")
      ->envname("TOOSI_LAMBDA")
      ->capture_default_str();
  cmd->add_option("--lambda-pixel", f.lambda_pixel, "size prior weight in the pixel cost")
      ->envname("TOOSI_LAMBDA_PIXEL")
      ->capture_default_str();
  cmd->add_flag("--no-finetune", f.no_finetune, "skip Levenberg-Marquardt on pixel residuals")
      ->envname("TOOSI_NO_FINETUNE");
  cmd->add_option("--priors", f.priors, "prior table JSON (default: bundled table)")
      ->envname("TOOSI_PRIORS");
}

SolverConfig make_config(const SolverFlags& f) {
  auto g = parse_gauge(f.gauge);
  if (!g) throw InvalidInput("unknown gauge '" + f.gauge + "'");
  SolverConfig c;
  c.gauge = *g;
  c.lambda_prior = f.lambda;
  c.lambda_pixel = f.lambda_pixel;
  c.finetune = !f.no_finetune;
  return c;
}

PriorTable load_priors(const std::string& path) {
  std::string p = path.empty() ? std::string(MONOCUBOID_DEFAULT_PRIORS) : path;
  if (p.empty()) throw InvalidInput("no prior table given (--priors or TOOSI_PRIORS)");
  return PriorTable::load(p);
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

std::vector<AnnotationLabel> recipe_by_name(const std::string& name) {
  if (name == "full-side") return recipe_full_side();
  if (name == "rear-view") return recipe_rear_view();
  if (name == "well-posed") {
    auto r = recipe_full_side();
    r.push_back(AnnotationLabel::EdgeFrontLeft);
    return r;
  }
  throw InvalidInput("unknown recipe '" + name + "'");
}

// Ground truth keyed by vehicle id. Accepts a poses file, an annotation
// document with gt blocks, or KITTI label lines (ids are line numbers).
std::map<std::string, CuboidPose> load_ground_truth(const std::string& path, std::string format,
                                                    double max_truncated, int max_occluded) {
  std::string text = read_text_file(path);
  if (format == "auto") {
    if (std::filesystem::path(path).extension() == ".txt") {
      format = "kitti";
    } else {
      format = text.find("\"annotations\"") != std::string::npos ? "document" : "poses";
    }
  }
  std::map<std::string, CuboidPose> gt;
  if (format == "kitti") {
    auto objs = parse_kitti_labels(text);
    for (std::size_t i = 0; i < objs.size(); ++i) {
      const auto& o = objs[i];
      if (o.type == "DontCare") continue;
      if (o.truncated > max_truncated || o.occluded > max_occluded) continue;
      gt.emplace(std::to_string(i), kitti_to_pose(o));
    }
  } else if (format == "document") {
    auto doc = parse_annotation_document(text, std::filesystem::path(path).parent_path());
    for (const auto& v : doc.vehicles) {
      if (v.gt) gt.emplace(v.vehicle.id, *v.gt);
    }
  } else if (format == "poses") {
    for (const auto& r : parse_poses(text)) {
      if (r.pose) gt.emplace(r.id, *r.pose);
    }
  } else {
    throw InvalidInput("unknown ground-truth format '" + format + "'");
  }
  return gt;
}

}  // namespace

std::vector<PoseRecord> solve_document(const AnnotationDocument& doc, const PriorTable& priors,
                                       const SolverConfig& config, int threads, bool timing) {
  const std::size_t n = doc.vehicles.size();
  std::vector<PoseRecord> out(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& v = doc.vehicles[i].vehicle;
      PoseRecord& r = out[i];
      r.id = v.id;
      r.gauge = std::string(to_string(config.gauge));
      try {
        auto t0 = std::chrono::steady_clock::now();
        SolveResult res = config.gauge == Gauge::Prior ? solve(v, doc.camera, priors, config)
                                                       : solve(v, doc.camera, nullptr, config);
        auto t1 = std::chrono::steady_clock::now();
        r.pose = res.pose;
        r.converged = res.converged;
        r.cost_pixel = res.cost_pixel;
        r.iterations = res.iterations;
        if (timing) r.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  threads = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cuboid pose and size from labelled 2D vehicle features", "monocuboid"};
  app.require_subcommand(1);

  SolverFlags sf;
  std::string ann_path, poses_out;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool timing = false;
  auto* solve_cmd = app.add_subcommand("solve", "solve every vehicle of an annotation document");
  solve_cmd->add_option("annotations", ann_path, "annotation document")->required();
  solve_cmd->add_option("-o,--out", poses_out, "poses JSON (default stdout)");
  solve_cmd->add_option("-j,--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  solve_cmd->add_flag("--timing", timing, "record solve_ms (output is then not reproducible)");
  add_solver_flags(solve_cmd, sf);

  std::string eval_poses, eval_gt, gt_format = "auto", csv_out, json_out;
  double max_truncated = 1.0;
  int max_occluded = 3;
  auto* eval_cmd = app.add_subcommand("evaluate", "compare solved poses with ground truth");
  eval_cmd->add_option("poses", eval_poses, "poses JSON from solve")->required();
  eval_cmd->add_option("gt", eval_gt, "ground truth: poses JSON, document with gt, or KITTI labels")
      ->required();
  eval_cmd->add_option("--gt-format", gt_format, "auto, poses, document or kitti")
      ->check(CLI::IsMember({"auto", "poses", "document", "kitti"}));
  eval_cmd->add_option("--csv", csv_out, "metrics CSV (default stdout)");
  eval_cmd->add_option("--json", json_out, "metrics JSON");
  eval_cmd->add_option("--max-truncated", max_truncated, "KITTI only: drop boxes truncated above this");
  eval_cmd->add_option("--max-occluded", max_occluded, "KITTI only: drop boxes occluded above this level");

  std::string dims_path, priors_out;
  auto* fit_cmd = app.add_subcommand("fit-priors", "fit robust size priors from a dimension CSV");
  fit_cmd->add_option("dims", dims_path, "CSV with header class,length,width,height")->required();
  fit_cmd->add_option("-o,--out", priors_out, "prior table JSON (default stdout)");

  std::uint64_t seed = 0;
  int count = 1;
  double noise = 0.0;
  std::string recipe = "well-posed", synth_class = "sedan", synth_out, synth_gt_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic annotated scenes");
  synth_cmd->add_option("--seed", seed, "first seed")->envname("TOOSI_SEED")->capture_default_str();
  synth_cmd->add_option("-n,--count", count, "number of scenes")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", noise, "pixel noise sigma")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--recipe", recipe, "full-side, rear-view or well-posed")->capture_default_str();
  synth_cmd->add_option("--class", synth_class, "prototype class written to the document");
  synth_cmd->add_option("-o,--out", synth_out, "annotation document (default stdout)");
  synth_cmd->add_option("--gt-out", synth_gt_out, "ground-truth poses JSON");

  std::string host = "127.0.0.1", origin = "*";
  int port = port_from_env(8080);
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP solve service");
  serve_cmd->add_option("--host", host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "port (env TOOSI_PORT)")->capture_default_str();
  serve_cmd->add_option("--origin", origin, "CORS allowed origin")->capture_default_str();
  SolverFlags serve_flags;
  add_solver_flags(serve_cmd, serve_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;  // --help exits 0, CLI11 usage codes collapse to 1
  }

  try {
    if (*solve_cmd) {
      SolverConfig config = make_config(sf);
      PriorTable priors = config.gauge == Gauge::Prior ? load_priors(sf.priors) : PriorTable{};
      AnnotationDocument doc = load_annotations(ann_path);
      auto records = solve_document(doc, priors, config, threads, timing);
      write_or_print(poses_out, poses_to_json(records), out);
      int failed = 0;
      for (const auto& r : records) {
        if (!r.error.empty()) {
          err << "vehicle " << r.id << " failed: " << r.error << "\n";
          ++failed;
        }
      }
      return failed ? kExitVehicleFailure : kExitOk;
    }
    if (*eval_cmd) {
      auto records = load_poses(eval_poses);
      auto gt = load_ground_truth(eval_gt, gt_format, max_truncated, max_occluded);
      MetricsReport report;
      int failed = 0;
      std::map<std::string, const PoseRecord*> by_id;
      for (const auto& r : records) by_id[r.id] = &r;
      for (const auto& [id, gt_pose] : gt) {
        auto it = by_id.find(id);
        if (it == by_id.end() || !it->second->pose) {
          err << "vehicle " << id << " failed: "
              << (it == by_id.end() ? std::string("no estimate") : it->second->error) << "\n";
          ++failed;
          continue;
        }
        MetricsRow row = evaluate_pose(id, *it->second->pose, gt_pose);
        row.solve_ms = it->second->solve_ms.value_or(0.0);
        row.converged = it->second->converged;
        report.rows.push_back(row);
      }
      write_or_print(csv_out, metrics_to_csv(report), out);
      if (!json_out.empty()) write_text_file(json_out, metrics_to_json(report));
      return failed ? kExitVehicleFailure : kExitOk;
    }
    if (*fit_cmd) {
      std::vector<SizePrior> classes;
      for (const auto& [name, dims] : parse_dimension_csv(read_text_file(dims_path))) {
        classes.push_back(fit_prior(name, dims));
      }
      write_or_print(priors_out, PriorTable(std::move(classes)).to_json(), out);
      return kExitOk;
    }
    if (*synth_cmd) {
      AnnotationDocument doc;
      std::vector<PoseRecord> gt;
      for (int i = 0; i < count; ++i) {
        SceneSpec spec;
        spec.recipe = recipe_by_name(recipe);
        spec.require_sufficient = recipe != "rear-view";
        spec.noise_sigma_px = noise;
        spec.seed = seed + static_cast<std::uint64_t>(i);
        SyntheticScene scene = generate_scene(spec);
        std::string id = "synth-" + std::to_string(spec.seed);
        AnnotationDocument one = scene_to_document(scene, id, synth_class);
        if (i == 0) doc.camera = one.camera;
        doc.vehicles.push_back(std::move(one.vehicles.front()));
        PoseRecord r;
        r.id = id;
        r.pose = scene.gt_pose;
        r.converged = true;
        gt.push_back(std::move(r));
      }
      write_or_print(synth_out, to_json(doc), out);
      if (!synth_gt_out.empty()) save_poses(gt, synth_gt_out);
      return kExitOk;
    }
    if (*serve_cmd) {
      SolverConfig config = make_config(serve_flags);
      std::string path = serve_flags.priors.empty() ? std::string(MONOCUBOID_DEFAULT_PRIORS) : serve_flags.priors;
      SolveService service(load_priors(path), path, config);
      err << "serving on http://" << host << ":" << port << "\n";
      service.serve(host, port, origin);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace monocuboid::cli
