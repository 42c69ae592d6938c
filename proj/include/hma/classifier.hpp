#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hma/image.hpp"

namespace hma {

struct LabeledImage {
  Image image;
  int label = 0;
  std::optional<double> view_angle;  // degrees
};

struct Dataset {
  std::vector<std::string> classes;
  std::vector<LabeledImage> images;
};

struct Prediction {
  int label = 0;
  double score = 0.0;  // in (0, 1]
};

// Pluggable classifier contract: train once, then classify deterministic
// 224x224 RGB inputs.
class ClassifierModel {
public:
  virtual ~ClassifierModel() = default;
  virtual void train(const Dataset& ds) = 0;
  virtual Prediction classify(const Image& img) const = 0;
  virtual bool trained() const = 0;
};

constexpr int kClassifierInputSize = 224;

// Resize to the fixed 224x224 RGB-8bit classifier input.
Image preprocess(const Image& img);

// Brightness augmentation: one copy per factor with
// v -> clamp(round(v * f), 0, 255). Output order: all images at factors[0]
// in source order, then factors[1], ...
Dataset augment_brightness(const Dataset& ds,
                           const std::vector<double>& factors = {0.9, 1.0, 1.1});

// Stratified deterministic split: n_train per class into the first dataset,
// the rest into the second.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int n_train_per_class,
                                          uint64_t seed);

// [0, step, ..., (n-1)*step] degrees.
std::vector<double> make_view_protocol(int n_views, double step_degrees);

// Nearest-centroid classifier over normalized 8x8x8 RGB color histograms.
class HistogramClassifier : public ClassifierModel {
public:
  static constexpr int kBinsPerChannel = 8;
  static constexpr int kHistogramSize = kBinsPerChannel * kBinsPerChannel * kBinsPerChannel;

  void train(const Dataset& ds) override;
  Prediction classify(const Image& img) const override;
  bool trained() const override { return !centroids_.empty(); }

  const std::vector<std::vector<double>>& centroids() const { return centroids_; }
  const std::vector<std::string>& classes() const { return classes_; }

  static std::vector<double> histogram(const Image& img);

  void save(const std::string& path) const;
  static HistogramClassifier load(const std::string& path);

private:
  std::vector<std::string> classes_;
  std::vector<std::vector<double>> centroids_;
};

struct ConfusionTable {
  std::vector<std::string> classes;
  std::vector<int> true_counts;
  std::vector<int> false_counts;
  double accuracy_exact = 0.0;  // percent

  int trials(int cls) const { return true_counts[cls] + false_counts[cls]; }
  int accuracy_rounded() const;
};

// Classifies every test image and tallies per-class hits and misses.
ConfusionTable evaluate(const ClassifierModel& model, const Dataset& test);

}  // namespace hma
