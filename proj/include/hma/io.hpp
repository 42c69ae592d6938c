#pragma once

#include <string>
#include <vector>

#include "hma/classifier.hpp"
#include "hma/cloud.hpp"
#include "hma/image.hpp"
#include "hma/pipeline.hpp"
#include "hma/sim.hpp"
#include "hma/sound.hpp"

namespace hma {

// ASCII cloud format, magic "HMACLOUD 1". Coordinates are serialized with
// 9 significant digits (exact for 32-bit floats).
void write_cloud(const std::string& path, const OrganizedCloud& cloud);
OrganizedCloud read_cloud(const std::string& path);

// Binary PPM (P6) / PGM (P5), maxval 255.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);
void write_pgm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& gray);
std::vector<uint8_t> read_pgm(const std::string& path, int& width, int& height);

// WAV, PCM signed 16-bit little-endian, interleaved channels.
// Samples are clamped to [-1, 1] and quantized on write.
void write_wav(const std::string& path, const MultichannelSignal& signal);
MultichannelSignal read_wav(const std::string& path);

// Whole run configuration, parsed from JSON with defaults for every
// field; unknown keys are rejected with an error naming the key.
struct RunConfig {
  uint64_t seed = 0;
  PipelineConfig pipeline;
  MicArray array = MicArray::circular(8, 0.0365);
  LocalizeParams localize;
  SceneSpec scene;
  AudioSceneSpec audio_scene;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Dataset directory layout: manifest.json at the root naming the classes,
// one subdirectory per class holding PPM images.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace hma
