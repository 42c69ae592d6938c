#include "hma/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hma/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hma {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

// ---------------------------------------------------------------- cloud

void write_cloud(const std::string& path, const OrganizedCloud& cloud) {
  std::ostringstream out;
  out << "HMACLOUD 1\n" << cloud.width << " " << cloud.height << "\n";
  char buf[128];
  for (int i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d %d %d %d\n",
                  static_cast<float>(p.x), static_cast<float>(p.y),
                  static_cast<float>(p.z), cloud.valid[i] ? 1 : 0,
                  cloud.rgb[3 * i], cloud.rgb[3 * i + 1], cloud.rgb[3 * i + 2]);
    out << buf;
  }
  write_file(path, out.str());
}

OrganizedCloud read_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cloud file: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "HMACLOUD" || version != 1)
    throw ParseError(path + ":1: expected 'HMACLOUD 1' header");
  int width = 0, height = 0;
  in >> width >> height;
  if (!in || width <= 0 || height <= 0)
    throw ParseError(path + ":2: bad cloud dimensions");
  OrganizedCloud cloud = OrganizedCloud::make(width, height);
  for (int i = 0; i < cloud.size(); ++i) {
    float x, y, z;
    int valid, r, g, b;
    if (!(in >> x >> y >> z >> valid >> r >> g >> b))
      throw ParseError(path + ":" + std::to_string(i + 3) +
                       ": truncated or malformed point record");
    cloud.points[i] = {x, y, z};
    cloud.valid[i] = valid ? 1 : 0;
    cloud.rgb[3 * i] = static_cast<uint8_t>(r);
    cloud.rgb[3 * i + 1] = static_cast<uint8_t>(g);
    cloud.rgb[3 * i + 2] = static_cast<uint8_t>(b);
  }
  return cloud;
}

// ------------------------------------------------------------- PPM/PGM

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_pnm_token(const std::string& data, size_t& pos,
                           const std::string& path) {
  while (pos < data.size()) {
    if (std::isspace(static_cast<unsigned char>(data[pos]))) {
      ++pos;
    } else if (data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos])))
    ++pos;
  if (start == pos)
    throw ParseError(path + ": truncated header at byte offset " +
                     std::to_string(start));
  return data.substr(start, pos - start);
}

struct PnmHeader {
  int width, height, maxval;
  size_t data_offset;
};

PnmHeader parse_pnm_header(const std::string& data, const std::string& magic,
                           const std::string& path) {
  size_t pos = 0;
  if (next_pnm_token(data, pos, path) != magic)
    throw ParseError(path + ": expected " + magic + " magic at byte offset 0");
  PnmHeader h{};
  h.width = std::stoi(next_pnm_token(data, pos, path));
  h.height = std::stoi(next_pnm_token(data, pos, path));
  h.maxval = std::stoi(next_pnm_token(data, pos, path));
  if (h.width <= 0 || h.height <= 0 || h.maxval != 255)
    throw ParseError(path + ": unsupported PNM dimensions/maxval");
  h.data_offset = pos + 1;  // single whitespace after maxval
  return h;
}

}  // namespace

void write_ppm(const std::string& path, const Image& img) {
  std::ostringstream out;
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
  write_file(path, out.str());
}

Image read_ppm(const std::string& path) {
  const std::string data = read_file(path);
  const PnmHeader h = parse_pnm_header(data, "P6", path);
  const size_t need = static_cast<size_t>(h.width) * h.height * 3;
  if (data.size() < h.data_offset + need)
    throw ParseError(path + ": pixel data truncated at byte offset " +
                     std::to_string(data.size()));
  Image img;
  img.width = h.width;
  img.height = h.height;
  img.rgb.assign(data.begin() + static_cast<ptrdiff_t>(h.data_offset),
                 data.begin() + static_cast<ptrdiff_t>(h.data_offset + need));
  return img;
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& gray) {
  std::ostringstream out;
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()),
            static_cast<std::streamsize>(gray.size()));
  write_file(path, out.str());
}

std::vector<uint8_t> read_pgm(const std::string& path, int& width, int& height) {
  const std::string data = read_file(path);
  const PnmHeader h = parse_pnm_header(data, "P5", path);
  const size_t need = static_cast<size_t>(h.width) * h.height;
  if (data.size() < h.data_offset + need)
    throw ParseError(path + ": pixel data truncated at byte offset " +
                     std::to_string(data.size()));
  width = h.width;
  height = h.height;
  return {data.begin() + static_cast<ptrdiff_t>(h.data_offset),
          data.begin() + static_cast<ptrdiff_t>(h.data_offset + need)};
}

// ----------------------------------------------------------------- WAV

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
uint32_t get_u32(const std::string& s, size_t off) {
  return static_cast<uint8_t>(s[off]) | (static_cast<uint8_t>(s[off + 1]) << 8) |
         (static_cast<uint8_t>(s[off + 2]) << 16) |
         (static_cast<uint8_t>(s[off + 3]) << 24);
}
uint16_t get_u16(const std::string& s, size_t off) {
  return static_cast<uint16_t>(static_cast<uint8_t>(s[off]) |
                               (static_cast<uint8_t>(s[off + 1]) << 8));
}

}  // namespace

void write_wav(const std::string& path, const MultichannelSignal& signal) {
  const int c = signal.n_channels();
  if (c < 1) throw InvalidSpec("WAV needs at least one channel");
  const size_t n = signal.n_samples();
  const uint32_t rate = static_cast<uint32_t>(std::lround(signal.sample_rate));
  const uint32_t data_bytes = static_cast<uint32_t>(n * c * 2);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, static_cast<uint16_t>(c));
  put_u32(out, rate);
  put_u32(out, rate * c * 2);
  put_u16(out, static_cast<uint16_t>(c * 2));
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (size_t i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double v = std::clamp(signal.channels[ch][i], -1.0, 1.0);
      const int16_t q = static_cast<int16_t>(std::lround(v * 32767.0));
      put_u16(out, static_cast<uint16_t>(q));
    }
  write_file(path, out);
}

MultichannelSignal read_wav(const std::string& path) {
  const std::string data = read_file(path);
  if (data.size() < 12 || data.compare(0, 4, "RIFF") != 0 ||
      data.compare(8, 4, "WAVE") != 0)
    throw ParseError(path + ": not a RIFF/WAVE file (byte offset 0)");

  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const std::string id = data.substr(pos, 4);
    const uint32_t len = get_u32(data, pos + 4);
    if (pos + 8 + len > data.size())
      throw ParseError(path + ": chunk '" + id + "' truncated at byte offset " +
                       std::to_string(pos));
    if (id == "fmt ") {
      if (len < 16)
        throw ParseError(path + ": fmt chunk too short at byte offset " +
                         std::to_string(pos));
      format = get_u16(data, pos + 8);
      channels = get_u16(data, pos + 10);
      rate = get_u32(data, pos + 12);
      bits = get_u16(data, pos + 22);
    } else if (id == "data") {
      data_off = pos + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1);  // chunks are word-aligned
  }
  if (format != 1 || bits != 16)
    throw ParseError(path + ": only 16-bit PCM is supported");
  if (channels == 0 || data_off == 0)
    throw ParseError(path + ": missing fmt or data chunk");

  const size_t n = data_len / (static_cast<size_t>(channels) * 2);
  MultichannelSignal signal;
  signal.sample_rate = rate;
  signal.channels.assign(channels, std::vector<double>(n));
  for (size_t i = 0; i < n; ++i)
    for (int ch = 0; ch < channels; ++ch) {
      const size_t off = data_off + (i * channels + ch) * 2;
      const int16_t q = static_cast<int16_t>(get_u16(data, off));
      signal.channels[ch][i] = q / 32767.0;
    }
  return signal;
}

// -------------------------------------------------------------- config

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ParseError("unknown key '" + it.key() + "' in " + context);
  }
}

RigidTransform parse_pose(const json& j, const std::string& context) {
  check_keys(j, {"rotation", "rpy_deg", "translation"}, context);
  RigidTransform t;
  if (j.contains("rotation") && j.contains("rpy_deg"))
    throw ParseError(context + ": give either 'rotation' or 'rpy_deg', not both");
  if (j.contains("rotation")) {
    const auto& r = j["rotation"];
    if (!r.is_array() || r.size() != 9)
      throw ParseError(context + ".rotation must be 9 numbers, row-major");
    for (int i = 0; i < 9; ++i) t.rotation.m[i] = r[i].get<double>();
    if (!is_valid_rotation(t.rotation, 1e-6))
      throw ParseError(context + ".rotation is not a proper rotation matrix");
  } else if (j.contains("rpy_deg")) {
    const auto& rpy = j["rpy_deg"];
    if (!rpy.is_array() || rpy.size() != 3)
      throw ParseError(context + ".rpy_deg must be 3 numbers");
    const double d2r = 3.14159265358979323846 / 180.0;
    t.rotation = Mat3::rotation_z(rpy[2].get<double>() * d2r) *
                 Mat3::rotation_y(rpy[1].get<double>() * d2r) *
                 Mat3::rotation_x(rpy[0].get<double>() * d2r);
  }
  if (j.contains("translation")) {
    const auto& tr = j["translation"];
    if (!tr.is_array() || tr.size() != 3)
      throw ParseError(context + ".translation must be 3 numbers");
    t.translation = {tr[0].get<double>(), tr[1].get<double>(), tr[2].get<double>()};
  }
  return t;
}

Axis parse_axis(const std::string& s, const std::string& context) {
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  if (s == "z") return Axis::Z;
  throw ParseError(context + ": axis must be x, y or z");
}

void parse_pipeline(const json& j, PipelineConfig& cfg) {
  check_keys(j, {"pass_through", "ransac", "extract", "cluster", "roi_padding"},
             "pipeline");
  if (j.contains("pass_through")) {
    cfg.pass_through.clear();
    for (const auto& lim : j["pass_through"]) {
      check_keys(lim, {"axis", "min", "max"}, "pipeline.pass_through[]");
      PassThroughLimits l;
      l.axis = parse_axis(lim.value("axis", "z"), "pipeline.pass_through[]");
      l.min = lim.value("min", 0.0);
      l.max = lim.value("max", 0.0);
      cfg.pass_through.push_back(l);
    }
  }
  if (j.contains("ransac")) {
    const auto& r = j["ransac"];
    check_keys(r, {"iterations", "inlier_threshold", "min_inlier_fraction", "seed"},
               "pipeline.ransac");
    cfg.ransac.iterations = r.value("iterations", cfg.ransac.iterations);
    cfg.ransac.inlier_threshold =
        r.value("inlier_threshold", cfg.ransac.inlier_threshold);
    cfg.ransac.min_inlier_fraction =
        r.value("min_inlier_fraction", cfg.ransac.min_inlier_fraction);
    cfg.ransac.seed = r.value("seed", cfg.ransac.seed);
  }
  if (j.contains("extract")) {
    const auto& e = j["extract"];
    check_keys(e, {"min_height", "max_height"}, "pipeline.extract");
    cfg.extract_min_height = e.value("min_height", cfg.extract_min_height);
    cfg.extract_max_height = e.value("max_height", cfg.extract_max_height);
  }
  if (j.contains("cluster")) {
    const auto& c = j["cluster"];
    check_keys(c, {"tolerance", "min_points", "max_points"}, "pipeline.cluster");
    cfg.cluster.tolerance = c.value("tolerance", cfg.cluster.tolerance);
    cfg.cluster.min_points = c.value("min_points", cfg.cluster.min_points);
    cfg.cluster.max_points = c.value("max_points", cfg.cluster.max_points);
  }
  cfg.roi_padding = j.value("roi_padding", cfg.roi_padding);
}

CameraIntrinsics parse_intrinsics(const json& j, const std::string& context) {
  check_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, context);
  CameraIntrinsics k{525.0, 525.0, 319.5, 239.5, 640, 480};
  k.fx = j.value("fx", k.fx);
  k.fy = j.value("fy", k.fy);
  k.cx = j.value("cx", k.cx);
  k.cy = j.value("cy", k.cy);
  k.width = j.value("width", k.width);
  k.height = j.value("height", k.height);
  if (!k.valid()) throw ParseError(context + ": invalid camera intrinsics");
  return k;
}

void parse_scene(const json& j, SceneSpec& scene) {
  check_keys(j,
             {"table", "objects", "camera_from_world", "depth_noise_sigma",
              "outlier_fraction", "seed"},
             "scene");
  if (j.contains("table")) {
    const auto& t = j["table"];
    check_keys(t, {"pose", "size", "color"}, "scene.table");
    if (t.contains("pose")) scene.table_pose = parse_pose(t["pose"], "scene.table.pose");
    if (t.contains("size")) {
      scene.table_x = t["size"][0].get<double>();
      scene.table_y = t["size"][1].get<double>();
    }
    if (t.contains("color"))
      for (int i = 0; i < 3; ++i)
        scene.table_color[i] = t["color"][i].get<uint8_t>();
  }
  if (j.contains("objects")) {
    scene.objects.clear();
    for (const auto& o : j["objects"]) {
      check_keys(o, {"shape", "size", "pose", "color", "class_id"},
                 "scene.objects[]");
      SceneObject obj;
      const std::string shape = o.value("shape", "box");
      if (shape == "box") obj.shape = Shape::Box;
      else if (shape == "cylinder") obj.shape = Shape::Cylinder;
      else throw ParseError("scene.objects[].shape must be box or cylinder");
      if (o.contains("size")) {
        const auto& s = o["size"];
        obj.size = {s[0].get<double>(), s.size() > 1 ? s[1].get<double>() : 0.0,
                    s.size() > 2 ? s[2].get<double>() : 0.0};
      }
      if (o.contains("pose")) obj.pose = parse_pose(o["pose"], "scene.objects[].pose");
      if (o.contains("color"))
        for (int i = 0; i < 3; ++i) obj.color[i] = o["color"][i].get<uint8_t>();
      obj.class_id = o.value("class_id", 0);
      scene.objects.push_back(obj);
    }
  }
  if (j.contains("camera_from_world"))
    scene.camera_from_world = parse_pose(j["camera_from_world"],
                                         "scene.camera_from_world");
  scene.depth_noise_sigma = j.value("depth_noise_sigma", scene.depth_noise_sigma);
  scene.outlier_fraction = j.value("outlier_fraction", scene.outlier_fraction);
  scene.seed = j.value("seed", scene.seed);
}

void parse_audio_scene(const json& j, AudioSceneSpec& spec) {
  check_keys(j, {"sources", "snr_db", "duration", "seed"}, "audio_scene");
  if (j.contains("sources")) {
    spec.sources.clear();
    for (const auto& s : j["sources"]) {
      check_keys(s, {"waveform", "azimuth", "level", "freq", "band", "file"},
                 "audio_scene.sources[]");
      AudioSource src;
      const std::string wf = s.value("waveform", "noise");
      if (wf == "sine") src.waveform = Waveform::Sine;
      else if (wf == "noise") src.waveform = Waveform::BandNoise;
      else if (wf == "file") src.waveform = Waveform::File;
      else throw ParseError("audio_scene.sources[].waveform must be sine, noise or file");
      src.azimuth_deg = s.value("azimuth", 0.0);
      src.level = s.value("level", 1.0);
      src.freq_hz = s.value("freq", 1000.0);
      if (s.contains("band")) {
        src.band_lo_hz = s["band"][0].get<double>();
        src.band_hi_hz = s["band"][1].get<double>();
      }
      if (src.waveform == Waveform::File) {
        if (!s.contains("file"))
          throw ParseError("audio_scene.sources[]: file waveform needs 'file'");
        const MultichannelSignal wav = read_wav(s["file"].get<std::string>());
        src.samples = wav.channels.at(0);
      }
      spec.sources.push_back(std::move(src));
    }
  }
  if (j.contains("snr_db")) {
    if (j["snr_db"].is_string())  // "inf" = noiseless
      spec.snr_db = std::numeric_limits<double>::infinity();
    else
      spec.snr_db = j["snr_db"].get<double>();
  }
  spec.duration_s = j.value("duration", spec.duration_s);
  spec.seed = j.value("seed", spec.seed);
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
  check_keys(j, {"seed", "pipeline", "camera", "array", "localize", "scene",
                 "audio_scene"},
             "config root");
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.pipeline.ransac.seed = cfg.seed;
  cfg.scene.seed = cfg.seed;
  cfg.audio_scene.seed = cfg.seed;

  if (j.contains("pipeline")) parse_pipeline(j["pipeline"], cfg.pipeline);
  if (j.contains("camera")) {
    const auto& cam = j["camera"];
    check_keys(cam, {"intrinsics", "camera_to_robot"}, "camera");
    if (cam.contains("intrinsics")) {
      cfg.pipeline.intrinsics = parse_intrinsics(cam["intrinsics"],
                                                 "camera.intrinsics");
      cfg.scene.intrinsics = cfg.pipeline.intrinsics;
    }
    if (cam.contains("camera_to_robot"))
      cfg.pipeline.camera_to_robot =
          parse_pose(cam["camera_to_robot"], "camera.camera_to_robot");
  }
  if (j.contains("array")) {
    const auto& a = j["array"];
    check_keys(a, {"n_mics", "radius", "sample_rate", "speed_of_sound", "positions"},
               "array");
    const int n_mics = a.value("n_mics", 8);
    const double radius = a.value("radius", 0.0365);
    const double rate = a.value("sample_rate", 16000.0);
    cfg.array = MicArray::circular(n_mics, radius, rate);
    cfg.array.speed_of_sound = a.value("speed_of_sound", 343.0);
    if (a.contains("positions")) {
      cfg.array.positions.clear();
      for (const auto& p : a["positions"])
        cfg.array.positions.push_back(
            {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    if (!cfg.array.valid()) throw ParseError("array: invalid microphone geometry");
  }
  if (j.contains("localize")) {
    const auto& l = j["localize"];
    check_keys(l, {"frame_size", "hop", "window", "band_lo", "band_hi", "n_sources",
                   "grid_step"},
               "localize");
    cfg.localize.frame_size = l.value("frame_size", cfg.localize.frame_size);
    cfg.localize.hop = l.value("hop", cfg.localize.hop);
    if (l.contains("window"))
      cfg.localize.window = window_from_name(l["window"].get<std::string>());
    cfg.localize.band_lo_hz = l.value("band_lo", cfg.localize.band_lo_hz);
    cfg.localize.band_hi_hz = l.value("band_hi", cfg.localize.band_hi_hz);
    cfg.localize.n_sources = l.value("n_sources", cfg.localize.n_sources);
    cfg.localize.grid_step_deg = l.value("grid_step", cfg.localize.grid_step_deg);
  }
  if (j.contains("scene")) parse_scene(j["scene"], cfg.scene);
  if (j.contains("audio_scene")) parse_audio_scene(j["audio_scene"], cfg.audio_scene);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return parse_config(read_file(path));
}

// ------------------------------------------------------------- dataset

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);
  json manifest;
  manifest["classes"] = ds.classes;
  json images = json::array();
  std::vector<int> per_class(ds.classes.size(), 0);
  for (const LabeledImage& li : ds.images) {
    const std::string cls = ds.classes.at(li.label);
    fs::create_directories(fs::path(dir) / cls);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.ppm", per_class[li.label]++);
    const std::string rel = cls + "/" + name;
    write_ppm((fs::path(dir) / rel).string(), li.image);
    json entry;
    entry["file"] = rel;
    entry["label"] = li.label;
    if (li.view_angle) entry["view_angle"] = *li.view_angle;
    images.push_back(entry);
  }
  manifest["images"] = images;
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path.string()));
  } catch (const json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  ds.classes = manifest.at("classes").get<std::vector<std::string>>();
  for (const auto& entry : manifest.at("images")) {
    LabeledImage li;
    li.image = read_ppm((fs::path(dir) / entry.at("file").get<std::string>()).string());
    li.label = entry.at("label").get<int>();
    if (li.label < 0 || li.label >= static_cast<int>(ds.classes.size()))
      throw ParseError(manifest_path.string() + ": label out of range");
    if (entry.contains("view_angle")) li.view_angle = entry["view_angle"].get<double>();
    ds.images.push_back(std::move(li));
  }
  return ds;
}

}  // namespace hma
