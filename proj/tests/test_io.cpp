#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hma/io.hpp"
#include "hma/rng.hpp"

using namespace hma;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hma_io_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static inline int counter = 0;
};

std::vector<uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

OrganizedCloud random_cloud(int w, int h, uint64_t seed) {
  OrganizedCloud c = OrganizedCloud::make(w, h);
  Rng rng(seed);
  for (int i = 0; i < c.size(); ++i) {
    if (rng.next_double() < 0.3) continue;  // leave some invalid
    c.valid[i] = 1;
    // Dyadic rationals: exactly representable in both float and double,
    // so the float-precision on-disk text round-trips losslessly.
    auto coord = [&rng] {
      return static_cast<double>(rng.next_below(4096)) / 1024.0 - 2.0;
    };
    c.points[i] = {coord(), coord(), coord() + 2.1220703125};
    for (int k = 0; k < 3; ++k)
      c.rgb[3 * i + k] = static_cast<uint8_t>(rng.next_below(256));
  }
  return c;
}

}  // namespace

TEST_CASE("cloud round trip is exact") {
  TempDir dir;
  const OrganizedCloud cloud = random_cloud(17, 11, 44);
  write_cloud(dir.file("c.cloud"), cloud);
  const OrganizedCloud back = read_cloud(dir.file("c.cloud"));

  CHECK(back.width == cloud.width);
  CHECK(back.height == cloud.height);
  CHECK(back.valid == cloud.valid);
  CHECK(back.rgb == cloud.rgb);
  for (int i = 0; i < cloud.size(); ++i)
    if (cloud.valid[i]) CHECK(back.points[i] == cloud.points[i]);
}

TEST_CASE("cloud reader reports malformed input with a line number") {
  TempDir dir;
  std::ofstream(dir.file("bad.cloud"))
      << "HMACLOUD 1\n2 1\n0.1 0.2 0.3 1 10 20 30\nnot numbers here\n";
  try {
    read_cloud(dir.file("bad.cloud"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }

  std::ofstream(dir.file("magic.cloud")) << "NOTCLOUD 1\n1 1\n";
  CHECK_THROWS_AS(read_cloud(dir.file("magic.cloud")), ParseError);
  CHECK_THROWS_AS(read_cloud(dir.file("missing.cloud")), IoError);
}

TEST_CASE("ppm bytes match a reference encoding") {
  TempDir dir;
  Image img = Image::make(3, 2, 0, 0, 0);
  const uint8_t px[18] = {255, 0,  0,  0, 255, 0,  0,  0, 255,
                          10,  20, 30, 0, 0,   0,  255, 255, 255};
  std::copy(px, px + 18, img.rgb.begin());
  write_ppm(dir.file("img.ppm"), img);

  std::vector<uint8_t> expected;
  const std::string header = "P6\n3 2\n255\n";
  expected.insert(expected.end(), header.begin(), header.end());
  expected.insert(expected.end(), px, px + 18);
  CHECK(read_bytes(dir.file("img.ppm")) == expected);

  const Image back = read_ppm(dir.file("img.ppm"));
  CHECK(back == img);
}

TEST_CASE("ppm reader handles comments and rejects junk") {
  TempDir dir;
  {
    std::ofstream out(dir.file("comment.ppm"), std::ios::binary);
    out << "P6 # a comment\n# another\n2 1\n255\n";
    const uint8_t px[6] = {1, 2, 3, 4, 5, 6};
    out.write(reinterpret_cast<const char*>(px), 6);
  }
  const Image img = read_ppm(dir.file("comment.ppm"));
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.rgb == std::vector<uint8_t>{1, 2, 3, 4, 5, 6});

  std::ofstream(dir.file("short.ppm"), std::ios::binary) << "P6\n4 4\n255\nxy";
  CHECK_THROWS_AS(read_ppm(dir.file("short.ppm")), ParseError);
  std::ofstream(dir.file("p5.ppm"), std::ios::binary) << "P5\n1 1\n255\n ";
  CHECK_THROWS_AS(read_ppm(dir.file("p5.ppm")), ParseError);
}

TEST_CASE("pgm round trip") {
  TempDir dir;
  const std::vector<uint8_t> gray{0, 64, 128, 192, 255, 7};
  write_pgm(dir.file("g.pgm"), 3, 2, gray);
  int w = 0, h = 0;
  CHECK(read_pgm(dir.file("g.pgm"), w, h) == gray);
  CHECK(w == 3);
  CHECK(h == 2);
}

TEST_CASE("wav round trip at 16-bit quantization") {
  TempDir dir;
  Rng rng(5);
  MultichannelSignal sig;
  sig.sample_rate = 16000.0;
  sig.channels.assign(3, std::vector<double>(500));
  for (auto& ch : sig.channels)
    for (auto& s : ch) s = rng.uniform(-1.2, 1.2);  // exercise clamping

  write_wav(dir.file("s.wav"), sig);
  const MultichannelSignal back = read_wav(dir.file("s.wav"));
  CHECK(back.sample_rate == 16000.0);
  REQUIRE(back.n_channels() == 3);
  REQUIRE(back.n_samples() == 500);
  for (int ch = 0; ch < 3; ++ch)
    for (size_t i = 0; i < 500; ++i) {
      const double clamped = std::clamp(sig.channels[ch][i], -1.0, 1.0);
      CHECK(std::abs(back.channels[ch][i] - clamped) <= 1.0 / 32767.0);
    }

  // 44-byte canonical header.
  CHECK(read_bytes(dir.file("s.wav")).size() == 44 + 3 * 500 * 2);
}

TEST_CASE("wav reader rejects truncated and non-PCM files") {
  TempDir dir;
  MultichannelSignal sig;
  sig.channels = {std::vector<double>(100, 0.25)};
  write_wav(dir.file("ok.wav"), sig);
  std::vector<uint8_t> bytes = read_bytes(dir.file("ok.wav"));

  std::vector<uint8_t> truncated(bytes.begin(), bytes.begin() + 60);
  write_bytes(dir.file("trunc.wav"), truncated);
  CHECK_THROWS_AS(read_wav(dir.file("trunc.wav")), ParseError);

  std::vector<uint8_t> bad_fmt = bytes;
  bad_fmt[20] = 3;  // format tag: IEEE float instead of PCM
  write_bytes(dir.file("float.wav"), bad_fmt);
  CHECK_THROWS_AS(read_wav(dir.file("float.wav")), ParseError);

  std::vector<uint8_t> not_riff = bytes;
  not_riff[0] = 'X';
  write_bytes(dir.file("xiff.wav"), not_riff);
  CHECK_THROWS_AS(read_wav(dir.file("xiff.wav")), ParseError);
}

TEST_CASE("config defaults") {
  const RunConfig cfg = parse_config("{}");
  CHECK(cfg.seed == 0);
  REQUIRE(cfg.pipeline.pass_through.size() == 1);
  CHECK(cfg.pipeline.pass_through[0].axis == Axis::Z);
  CHECK(cfg.pipeline.pass_through[0].min == 0.3);
  CHECK(cfg.pipeline.pass_through[0].max == 1.5);
  CHECK(cfg.pipeline.ransac.iterations == 500);
  CHECK(cfg.pipeline.ransac.inlier_threshold == 0.008);
  CHECK(cfg.pipeline.ransac.min_inlier_fraction == 0.15);
  CHECK(cfg.pipeline.cluster.tolerance == 0.02);
  CHECK(cfg.pipeline.cluster.min_points == 30);
  CHECK(cfg.pipeline.cluster.max_points == 50000);
  CHECK(cfg.array.size() == 8);
  CHECK(norm(cfg.array.positions[0] - Vec3{0.0365, 0, 0}) < 1e-12);
  CHECK(cfg.localize.frame_size == 512);
  CHECK(cfg.localize.hop == 256);
  CHECK(cfg.localize.band_lo_hz == 500.0);
  CHECK(cfg.localize.band_hi_hz == 3000.0);
}

TEST_CASE("config rejects unknown keys by name") {
  try {
    parse_config(R"({"sede": 3})");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("sede") != std::string::npos);
  }
  try {
    parse_config(R"({"pipeline": {"ransca": {}}})");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("ransca") != std::string::npos);
    CHECK(what.find("pipeline") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("not json"), ParseError);
}

TEST_CASE("config parses nested sections and seed propagation") {
  const RunConfig cfg = parse_config(R"({
    "seed": 99,
    "pipeline": {"ransac": {"iterations": 200}},
    "camera": {"intrinsics": {"fx": 600, "fy": 610, "cx": 320, "cy": 240,
                              "width": 640, "height": 480}},
    "scene": {"table": {"size": [0.9, 0.7]}},
    "audio_scene": {"snr_db": "inf",
                    "sources": [{"waveform": "sine", "azimuth": 45,
                                 "freq": 800}]},
    "localize": {"n_sources": 2}
  })");
  CHECK(cfg.seed == 99);
  CHECK(cfg.pipeline.ransac.iterations == 200);
  CHECK(cfg.pipeline.ransac.seed == 99);
  CHECK(cfg.scene.seed == 99);
  CHECK(cfg.audio_scene.seed == 99);
  CHECK(cfg.pipeline.intrinsics.fx == 600);
  CHECK(cfg.scene.intrinsics.fy == 610);
  CHECK(cfg.scene.table_x == 0.9);
  CHECK(cfg.audio_scene.snr_db == std::numeric_limits<double>::infinity());
  REQUIRE(cfg.audio_scene.sources.size() == 1);
  CHECK(cfg.audio_scene.sources[0].waveform == Waveform::Sine);
  CHECK(cfg.audio_scene.sources[0].freq_hz == 800);
  CHECK(cfg.localize.n_sources == 2);
}

TEST_CASE("config pose accepts rpy or a rotation matrix but not both") {
  const RunConfig rpy = parse_config(R"({
    "scene": {"camera_from_world": {"rpy_deg": [180, 0, 0],
                                    "translation": [0, 0, 0.8]}}})");
  CHECK(rpy.scene.camera_from_world.translation.z == 0.8);
  CHECK(rpy.scene.camera_from_world.rotation(1, 1) == doctest::Approx(-1.0));

  const RunConfig mat = parse_config(R"({
    "scene": {"camera_from_world": {"rotation": [1,0,0, 0,1,0, 0,0,1],
                                    "translation": [1, 2, 3]}}})");
  CHECK(mat.scene.camera_from_world.rotation(0, 0) == 1.0);
  CHECK(mat.scene.camera_from_world.translation.x == 1.0);

  CHECK_THROWS_AS(parse_config(R"({
    "scene": {"camera_from_world": {"rotation": [1,0,0, 0,1,0, 0,0,1],
                                    "rpy_deg": [0, 0, 0],
                                    "translation": [0, 0, 0]}}})"),
                  ParseError);
}

TEST_CASE("dataset save and load round trip") {
  TempDir dir;
  Dataset ds;
  ds.classes = {"mug", "bottle"};
  Rng rng(31);
  for (int label = 0; label < 2; ++label)
    for (int i = 0; i < 3; ++i) {
      LabeledImage li;
      li.image = Image::make(10, 8, 0, 0, 0);
      for (auto& b : li.image.rgb) b = static_cast<uint8_t>(rng.next_below(256));
      li.label = label;
      li.view_angle = i * 30.0;
      ds.images.push_back(std::move(li));
    }

  save_dataset(dir.file("ds"), ds);
  const Dataset back = load_dataset(dir.file("ds"));
  CHECK(back.classes == ds.classes);
  REQUIRE(back.images.size() == ds.images.size());
  for (size_t i = 0; i < ds.images.size(); ++i) {
    CHECK(back.images[i].image == ds.images[i].image);
    CHECK(back.images[i].label == ds.images[i].label);
    REQUIRE(back.images[i].view_angle.has_value());
    CHECK(*back.images[i].view_angle == doctest::Approx(*ds.images[i].view_angle));
  }

  CHECK_THROWS_AS(load_dataset(dir.file("nowhere")), IoError);
}
