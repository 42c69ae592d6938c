#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hma/io.hpp"
#include "hma/rng.hpp"

using namespace hma;
namespace fs = std::filesystem;

namespace {

const std::string kCli = HMA_CLI_PATH;

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hma_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static inline int counter = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

// First value following "key: " in a key-value report.
std::string report_value(const std::string& report, const std::string& key) {
  const std::string needle = key + ": ";
  const size_t pos = report.find(needle);
  if (pos == std::string::npos) return "";
  const size_t end = report.find('\n', pos);
  return report.substr(pos + needle.size(), end - pos - needle.size());
}

const char* kSceneConfig = R"({
  "seed": 7,
  "scene": {
    "camera_from_world": {"rpy_deg": [180, 0, 0], "translation": [0, 0, 0.8]},
    "objects": [
      {"shape": "box", "size": [0.06, 0.06, 0.12],
       "pose": {"translation": [0.15, 0, 0]}, "color": [200, 40, 40]},
      {"shape": "cylinder", "size": [0.03, 0, 0.1],
       "pose": {"translation": [-0.15, 0.05, 0]}, "color": [40, 200, 40]}
    ],
    "depth_noise_sigma": 0.002
  }
})";

const char* kAudioConfig = R"({
  "seed": 11,
  "audio_scene": {
    "sources": [{"waveform": "noise", "azimuth": 120, "level": 1.0}],
    "snr_db": 20,
    "duration": 0.5
  }
})";

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("segment --cloud only.cloud") == 2);  // missing required options
  TempDir dir;
  spit(dir.file("bad.json"), R"({"sede": 1})");
  CHECK(run_cli("simulate-scene --config " + dir.file("bad.json") +
                " --out-cloud " + dir.file("c.cloud")) == 2);
}

TEST_CASE("pipeline failures exit with code 1") {
  TempDir dir;
  spit(dir.file("cfg.json"), "{}");
  // Cloud file does not exist.
  CHECK(run_cli("segment --cloud " + dir.file("nope.cloud") + " --config " +
                dir.file("cfg.json") + " --report " + dir.file("r.txt")) == 1);
  // Silent recording cannot be localized.
  MultichannelSignal silent;
  silent.channels.assign(8, std::vector<double>(8000, 0.0));
  write_wav(dir.file("silent.wav"), silent);
  CHECK(run_cli("localize --wav " + dir.file("silent.wav") + " --config " +
                dir.file("cfg.json") + " --report " + dir.file("r.txt")) == 1);
}

TEST_CASE("simulate-scene then segment finds the two objects") {
  TempDir dir;
  spit(dir.file("cfg.json"), kSceneConfig);
  REQUIRE(run_cli("simulate-scene --config " + dir.file("cfg.json") +
                  " --out-cloud " + dir.file("scene.cloud") + " --out-rgb " +
                  dir.file("scene.ppm") + " --out-ids " + dir.file("ids.pgm") +
                  " --no-timestamp --out-truth " + dir.file("truth.txt")) == 0);
  CHECK(fs::exists(dir.file("scene.cloud")));
  CHECK(fs::exists(dir.file("scene.ppm")));
  CHECK(fs::exists(dir.file("ids.pgm")));
  const std::string truth = slurp(dir.file("truth.txt"));
  CHECK(report_value(truth, "count") == "2");
  CHECK(truth.find("timestamp") == std::string::npos);

  REQUIRE(run_cli("segment --cloud " + dir.file("scene.cloud") + " --config " +
                  dir.file("cfg.json") + " --report " + dir.file("seg.txt") +
                  " --out-candidates " + dir.file("cands") +
                  " --no-timestamp") == 0);
  const std::string report = slurp(dir.file("seg.txt"));
  CHECK(report.find("[table]") != std::string::npos);
  CHECK(report_value(report, "count") == "2");
  CHECK(fs::exists(dir.file("cands") + "/candidate_000.ppm"));
  CHECK(fs::exists(dir.file("cands") + "/candidate_001.ppm"));

  // Ground-truth plane: camera 0.8 m above the table.
  CHECK(std::abs(std::stod(report_value(truth, "offset")) - 0.8) < 0.01);
}

TEST_CASE("segment reports zero candidates for a bare table") {
  TempDir dir;
  spit(dir.file("cfg.json"),
       R"({"scene": {"camera_from_world":
            {"rpy_deg": [180, 0, 0], "translation": [0, 0, 0.8]}}})");
  REQUIRE(run_cli("simulate-scene --config " + dir.file("cfg.json") +
                  " --out-cloud " + dir.file("bare.cloud")) == 0);
  REQUIRE(run_cli("segment --cloud " + dir.file("bare.cloud") + " --config " +
                  dir.file("cfg.json") + " --report " + dir.file("seg.txt") +
                  " --no-timestamp") == 0);
  CHECK(report_value(slurp(dir.file("seg.txt")), "count") == "0");
}

TEST_CASE("reports are byte-identical across reruns with --no-timestamp") {
  TempDir dir;
  spit(dir.file("cfg.json"), kSceneConfig);
  REQUIRE(run_cli("simulate-scene --config " + dir.file("cfg.json") +
                  " --out-cloud " + dir.file("a.cloud")) == 0);
  REQUIRE(run_cli("simulate-scene --config " + dir.file("cfg.json") +
                  " --out-cloud " + dir.file("b.cloud")) == 0);
  CHECK(slurp(dir.file("a.cloud")) == slurp(dir.file("b.cloud")));

  for (const char* out : {"r1.txt", "r2.txt"})
    REQUIRE(run_cli("segment --cloud " + dir.file("a.cloud") + " --config " +
                    dir.file("cfg.json") + " --report " + dir.file(out) +
                    " --no-timestamp") == 0);
  const std::string r1 = slurp(dir.file("r1.txt"));
  CHECK(r1 == slurp(dir.file("r2.txt")));
  CHECK(!r1.empty());
  CHECK(r1.find("timestamp") == std::string::npos);

  // Without the flag a timestamp line leads the report.
  REQUIRE(run_cli("segment --cloud " + dir.file("a.cloud") + " --config " +
                  dir.file("cfg.json") + " --report " + dir.file("ts.txt")) == 0);
  CHECK(slurp(dir.file("ts.txt")).rfind("timestamp: ", 0) == 0);
}

TEST_CASE("HMA_SEED overrides the config seed") {
  TempDir dir;
  spit(dir.file("cfg.json"), kSceneConfig);
  auto sim = [&](const std::string& env, const std::string& out) {
    const std::string cmd = env + " " + kCli + " simulate-scene --config " +
                            dir.file("cfg.json") + " --out-cloud " +
                            dir.file(out) + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  REQUIRE(sim("HMA_SEED=123", "s123a.cloud") == 0);
  REQUIRE(sim("HMA_SEED=123", "s123b.cloud") == 0);
  REQUIRE(sim("HMA_SEED=124", "s124.cloud") == 0);
  REQUIRE(sim("", "cfgseed.cloud") == 0);
  CHECK(slurp(dir.file("s123a.cloud")) == slurp(dir.file("s123b.cloud")));
  CHECK(slurp(dir.file("s123a.cloud")) != slurp(dir.file("s124.cloud")));
  CHECK(slurp(dir.file("s123a.cloud")) != slurp(dir.file("cfgseed.cloud")));
}

TEST_CASE("train, classify, augment and evaluate round trip") {
  TempDir dir;
  // Tiny two-class dataset: red-ish vs blue-ish images.
  Dataset ds;
  ds.classes = {"red_thing", "blue_thing"};
  Rng rng(15);
  for (int label = 0; label < 2; ++label)
    for (int i = 0; i < 6; ++i) {
      LabeledImage li;
      li.image = Image::make(32, 32, 0, 0, 0);
      for (size_t p = 0; p < li.image.rgb.size(); p += 3) {
        li.image.rgb[p + (label == 0 ? 0 : 2)] =
            static_cast<uint8_t>(150 + rng.next_below(100));
        li.image.rgb[p + 1] = static_cast<uint8_t>(rng.next_below(60));
      }
      li.label = label;
      ds.images.push_back(std::move(li));
    }
  save_dataset(dir.file("train_ds"), ds);
  save_dataset(dir.file("test_ds"), ds);

  REQUIRE(run_cli("train --dataset " + dir.file("train_ds") + " --model " +
                  dir.file("model.txt")) == 0);
  CHECK(fs::exists(dir.file("model.txt")));

  write_ppm(dir.file("probe.ppm"), ds.images[0].image);
  CHECK(run_cli("classify --model " + dir.file("model.txt") + " --image " +
                dir.file("probe.ppm")) == 0);

  REQUIRE(run_cli("augment --dataset " + dir.file("train_ds") + " --out " +
                  dir.file("aug_ds")) == 0);
  CHECK(load_dataset(dir.file("aug_ds")).images.size() == 3 * ds.images.size());

  REQUIRE(run_cli("evaluate --model " + dir.file("model.txt") + " --testset " +
                  dir.file("test_ds") + " --report " + dir.file("eval.txt") +
                  " --no-timestamp") == 0);
  const std::string report = slurp(dir.file("eval.txt"));
  CHECK(report.find("[classification-results]") != std::string::npos);
  CHECK(report.find("Object number: 1 2\n") != std::string::npos);
  CHECK(report.find("True: 6 6\n") != std::string::npos);
  CHECK(report.find("False: 0 0\n") != std::string::npos);
  CHECK(report.find("Accuracy rate [%]: 100\n") != std::string::npos);
  CHECK(report_value(report, "rounded") == "100");
}

TEST_CASE("simulate-audio then localize recovers the source azimuth") {
  TempDir dir;
  spit(dir.file("cfg.json"), kAudioConfig);
  REQUIRE(run_cli("simulate-audio --config " + dir.file("cfg.json") + " --out " +
                  dir.file("mics.wav")) == 0);
  const MultichannelSignal sig = read_wav(dir.file("mics.wav"));
  CHECK(sig.n_channels() == 8);
  CHECK(sig.n_samples() == 8000);

  REQUIRE(run_cli("localize --wav " + dir.file("mics.wav") + " --config " +
                  dir.file("cfg.json") + " --report " + dir.file("loc.txt") +
                  " --no-timestamp") == 0);
  const std::string report = slurp(dir.file("loc.txt"));
  CHECK(report_value(report, "count") == "1");
  const double az = std::stod(report_value(report, "azimuth_deg"));
  double err = std::abs(az - 120.0);
  err = std::min(err, 360.0 - err);
  CHECK(err <= 5.0);
}
