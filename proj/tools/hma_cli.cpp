// Command-line front end tying the simulators, segmentation pipeline,
// classifier harness and sound localization into reproducible batch runs.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hma/io.hpp"

namespace fs = std::filesystem;
using namespace hma;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt_vec3(const Vec3& v) {
  return fmt_double(v.x) + " " + fmt_double(v.y) + " " + fmt_double(v.z);
}

std::string timestamp_line() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return std::string("timestamp: ") + buf + "\n";
}

void write_report(const std::string& path, const std::string& body,
                  bool no_timestamp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open report file for writing: " + path);
  if (!no_timestamp) out << timestamp_line();
  out << body;
  if (!out) throw IoError("report write failed: " + path);
}

RunConfig load_config_with_env(const std::string& path) {
  RunConfig cfg = load_config(path);
  if (const char* env = std::getenv("HMA_SEED")) {
    const uint64_t seed = std::strtoull(env, nullptr, 10);
    cfg.seed = seed;
    cfg.pipeline.ransac.seed = seed;
    cfg.scene.seed = seed;
    cfg.audio_scene.seed = seed;
  }
  return cfg;
}

std::string candidate_report_body(const PipelineResult& result,
                                  const std::vector<std::string>* class_names) {
  std::ostringstream body;
  body << "[table]\n";
  body << "normal: " << fmt_vec3(result.table.plane.normal) << "\n";
  body << "offset: " << fmt_double(result.table.plane.d) << "\n";
  body << "inliers: " << result.table.inliers.size() << "\n";
  body << "[candidates]\n";
  body << "count: " << result.candidates.size() << "\n";
  for (size_t i = 0; i < result.candidates.size(); ++i) {
    const ObjectCandidate& c = result.candidates[i];
    const GraspTarget& g = result.targets[i];
    body << "candidate: " << i << "\n";
    body << "  points: " << c.point_indices.size() << "\n";
    body << "  centroid_camera: " << fmt_vec3(c.centroid_camera) << "\n";
    body << "  roi: " << c.roi.u_min << " " << c.roi.v_min << " " << c.roi.u_max
         << " " << c.roi.v_max << "\n";
    if (c.label) {
      body << "  label: " << *c.label;
      if (class_names && *c.label < static_cast<int>(class_names->size()))
        body << " (" << (*class_names)[*c.label] << ")";
      body << "\n";
      body << "  score: " << fmt_double(*c.score) << "\n";
    }
    body << "  position_robot: " << fmt_vec3(g.position_robot) << "\n";
    body << "  approach_axis: " << fmt_vec3(g.approach_axis) << "\n";
  }
  return body.str();
}

// Per-class True/False rows plus the integer accuracy rate.
std::string confusion_report_body(const ConfusionTable& table) {
  std::ostringstream body;
  body << "[classification-results]\n";
  body << "Object number:";
  for (size_t i = 0; i < table.classes.size(); ++i) body << " " << (i + 1);
  body << "\nTrue:";
  for (int v : table.true_counts) body << " " << v;
  body << "\nFalse:";
  for (int v : table.false_counts) body << " " << v;
  body << "\nAccuracy rate [%]: " << table.accuracy_rounded() << "\n";
  body << "[accuracy]\n";
  body << "exact: " << fmt_double(table.accuracy_exact) << "\n";
  body << "rounded: " << table.accuracy_rounded() << "\n";
  body << "[classes]\n";
  for (size_t i = 0; i < table.classes.size(); ++i)
    body << (i + 1) << ": " << table.classes[i] << "\n";
  return body.str();
}

int run(int argc, char** argv) {
  CLI::App app{"Tabletop perception, classification and sound localization toolkit"};
  app.require_subcommand(1);
  bool no_timestamp = false;
  app.add_flag("--no-timestamp", no_timestamp, "omit the report timestamp line");

  std::string config_path, cloud_path, rgb_path, truth_path, ids_path;
  std::string dataset_dir, out_dir, model_path, image_path, report_path, wav_path;

  auto* sim_scene = app.add_subcommand("simulate-scene",
                                       "Render a synthetic RGB-D table scene");
  sim_scene->add_option("--config", config_path)->required();
  sim_scene->add_option("--out-cloud", cloud_path)->required();
  sim_scene->add_option("--out-rgb", rgb_path);
  sim_scene->add_option("--out-truth", truth_path);
  sim_scene->add_option("--out-ids", ids_path);

  auto* segment = app.add_subcommand("segment",
                                     "Extract tabletop object candidates from a cloud");
  segment->add_option("--cloud", cloud_path)->required();
  segment->add_option("--config", config_path)->required();
  segment->add_option("--out-candidates", out_dir);
  segment->add_option("--report", report_path)->required();

  auto* train_cmd = app.add_subcommand("train", "Train the baseline classifier");
  train_cmd->add_option("--dataset", dataset_dir)->required();
  train_cmd->add_option("--model", model_path)->required();

  auto* classify_cmd = app.add_subcommand("classify", "Classify one image");
  classify_cmd->add_option("--model", model_path)->required();
  classify_cmd->add_option("--image", image_path)->required();

  auto* augment_cmd = app.add_subcommand("augment",
                                         "Brightness-augment a dataset (x0.9, x1.0, x1.1)");
  augment_cmd->add_option("--dataset", dataset_dir)->required();
  augment_cmd->add_option("--out", out_dir)->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate",
                                          "Evaluate a model on a test dataset");
  evaluate_cmd->add_option("--model", model_path)->required();
  evaluate_cmd->add_option("--testset", dataset_dir)->required();
  evaluate_cmd->add_option("--report", report_path)->required();

  auto* sim_audio = app.add_subcommand("simulate-audio",
                                       "Synthesize microphone-array recordings");
  sim_audio->add_option("--config", config_path)->required();
  sim_audio->add_option("--out", wav_path)->required();

  auto* localize_cmd = app.add_subcommand("localize",
                                          "MUSIC direction-of-arrival estimation");
  localize_cmd->add_option("--wav", wav_path)->required();
  localize_cmd->add_option("--config", config_path)->required();
  localize_cmd->add_option("--report", report_path)->required();

  auto* pipeline_cmd = app.add_subcommand("pipeline",
                                          "Full cloud-to-grasp-target flow");
  pipeline_cmd->add_option("--config", config_path)->required();
  pipeline_cmd->add_option("--cloud", cloud_path)->required();
  pipeline_cmd->add_option("--model", model_path);
  pipeline_cmd->add_option("--report", report_path)->required();

  // Let the global --no-timestamp flag appear after the subcommand too.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (sim_scene->parsed()) {
    const RunConfig cfg = load_config_with_env(config_path);
    const RenderResult render = render_scene(cfg.scene);
    write_cloud(cloud_path, render.cloud);
    if (!rgb_path.empty()) {
      Image img;
      img.width = render.cloud.width;
      img.height = render.cloud.height;
      img.rgb = render.cloud.rgb;
      write_ppm(rgb_path, img);
    }
    if (!ids_path.empty()) {
      std::vector<uint8_t> ids(render.pixel_ids.size());
      for (size_t i = 0; i < ids.size(); ++i)
        ids[i] = static_cast<uint8_t>(std::min<uint16_t>(render.pixel_ids[i], 255));
      write_pgm(ids_path, render.cloud.width, render.cloud.height, ids);
    }
    if (!truth_path.empty()) {
      std::ostringstream body;
      body << "[plane]\n";
      body << "normal: " << fmt_vec3(render.plane_camera.normal) << "\n";
      body << "offset: " << fmt_double(render.plane_camera.d) << "\n";
      body << "[objects]\n";
      body << "count: " << render.object_centroids_camera.size() << "\n";
      for (size_t i = 0; i < render.object_centroids_camera.size(); ++i) {
        body << "object: " << i << "\n";
        body << "  centroid_camera: " << fmt_vec3(render.object_centroids_camera[i])
             << "\n";
        body << "  pixels: " << render.object_pixel_counts[i] << "\n";
      }
      write_report(truth_path, body.str(), no_timestamp);
    }
    return 0;
  }

  if (segment->parsed()) {
    const RunConfig cfg = load_config_with_env(config_path);
    const OrganizedCloud cloud = read_cloud(cloud_path);
    const PipelineResult result = run_pipeline(cloud, cfg.pipeline, nullptr);
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      for (size_t i = 0; i < result.candidates.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "candidate_%03zu.ppm", i);
        write_ppm((fs::path(out_dir) / name).string(), result.candidates[i].crop);
      }
    }
    write_report(report_path, candidate_report_body(result, nullptr), no_timestamp);
    return 0;
  }

  if (train_cmd->parsed()) {
    const Dataset ds = load_dataset(dataset_dir);
    HistogramClassifier model;
    model.train(ds);
    model.save(model_path);
    std::cout << "trained " << ds.classes.size() << " classes from "
              << ds.images.size() << " images\n";
    return 0;
  }

  if (classify_cmd->parsed()) {
    const HistogramClassifier model = HistogramClassifier::load(model_path);
    const Image img = read_ppm(image_path);
    const Prediction pred = model.classify(preprocess(img));
    std::cout << "label: " << pred.label << " (" << model.classes().at(pred.label)
              << ")\n";
    std::cout << "score: " << fmt_double(pred.score) << "\n";
    return 0;
  }

  if (augment_cmd->parsed()) {
    const Dataset ds = load_dataset(dataset_dir);
    save_dataset(out_dir, augment_brightness(ds));
    std::cout << "augmented " << ds.images.size() << " -> " << 3 * ds.images.size()
              << " images\n";
    return 0;
  }

  if (evaluate_cmd->parsed()) {
    const HistogramClassifier model = HistogramClassifier::load(model_path);
    const Dataset test = load_dataset(dataset_dir);
    const ConfusionTable table = evaluate(model, test);
    write_report(report_path, confusion_report_body(table), no_timestamp);
    return 0;
  }

  if (sim_audio->parsed()) {
    const RunConfig cfg = load_config_with_env(config_path);
    const MultichannelSignal signal = synth_array_signal(cfg.array, cfg.audio_scene);
    write_wav(wav_path, signal);
    return 0;
  }

  if (localize_cmd->parsed()) {
    const RunConfig cfg = load_config_with_env(config_path);
    const MultichannelSignal signal = read_wav(wav_path);
    const LocalizeResult result = localize(signal, cfg.array, cfg.localize);
    std::ostringstream body;
    body << "[sources]\n";
    body << "count: " << result.azimuths_deg.size() << "\n";
    for (size_t i = 0; i < result.azimuths_deg.size(); ++i)
      body << "azimuth_deg: " << fmt_double(result.azimuths_deg[i]) << "\n";
    body << "[spectrum]\n";
    body << "grid_step_deg: " << fmt_double(result.spectrum.grid_step_deg) << "\n";
    body << "band_hz: " << fmt_double(result.spectrum.band_lo_hz) << " "
         << fmt_double(result.spectrum.band_hi_hz) << "\n";
    for (size_t i = 0; i < result.spectrum.power.size(); ++i)
      body << fmt_double(result.spectrum.azimuth_deg(static_cast<int>(i))) << " "
           << fmt_double(result.spectrum.power[i]) << "\n";
    write_report(report_path, body.str(), no_timestamp);
    return 0;
  }

  if (pipeline_cmd->parsed()) {
    const RunConfig cfg = load_config_with_env(config_path);
    const OrganizedCloud cloud = read_cloud(cloud_path);
    HistogramClassifier model;
    const ClassifierModel* classifier = nullptr;
    std::vector<std::string> class_names;
    if (!model_path.empty()) {
      model = HistogramClassifier::load(model_path);
      classifier = &model;
      class_names = model.classes();
    }
    const PipelineResult result = run_pipeline(cloud, cfg.pipeline, classifier);
    write_report(report_path,
                 candidate_report_body(result, classifier ? &class_names : nullptr),
                 no_timestamp);
    return 0;
  }

  return 2;  // no subcommand matched
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
