#include "hma/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hma/rng.hpp"

namespace hma {

Image preprocess(const Image& img) {
  if (img.width < 1 || img.height < 1)
    throw EmptyImage("cannot preprocess an empty image");
  if (img.width == kClassifierInputSize && img.height == kClassifierInputSize)
    return img;
  return resize_bilinear(img, kClassifierInputSize, kClassifierInputSize);
}

Dataset augment_brightness(const Dataset& ds, const std::vector<double>& factors) {
  Dataset out;
  out.classes = ds.classes;
  out.images.reserve(ds.images.size() * factors.size());
  for (double f : factors) {
    for (const LabeledImage& src : ds.images) {
      LabeledImage copy = src;
      for (uint8_t& v : copy.image.rgb) {
        const double scaled = std::round(v * f);  // half away from zero
        v = static_cast<uint8_t>(std::clamp(scaled, 0.0, 255.0));
      }
      out.images.push_back(std::move(copy));
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int n_train_per_class,
                                          uint64_t seed) {
  Dataset train, test;
  train.classes = test.classes = ds.classes;
  Rng rng(seed);
  for (size_t cls = 0; cls < ds.classes.size(); ++cls) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < ds.images.size(); ++i)
      if (ds.images[i].label == static_cast<int>(cls)) idx.push_back(i);
    // Fisher-Yates
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_below(i)]);
    for (size_t i = 0; i < idx.size(); ++i) {
      auto& dst = (static_cast<int>(i) < n_train_per_class) ? train : test;
      dst.images.push_back(ds.images[idx[i]]);
    }
  }
  return {train, test};
}

std::vector<double> make_view_protocol(int n_views, double step_degrees) {
  std::vector<double> angles(n_views);
  for (int i = 0; i < n_views; ++i) angles[i] = i * step_degrees;
  return angles;
}

std::vector<double> HistogramClassifier::histogram(const Image& img) {
  std::vector<double> h(kHistogramSize, 0.0);
  const size_t n_pixels = img.rgb.size() / 3;
  constexpr int shift = 5;  // 256 / 8 = 32 = 1 << 5
  for (size_t i = 0; i < n_pixels; ++i) {
    const int r = img.rgb[3 * i] >> shift;
    const int g = img.rgb[3 * i + 1] >> shift;
    const int b = img.rgb[3 * i + 2] >> shift;
    h[(r * kBinsPerChannel + g) * kBinsPerChannel + b] += 1.0;
  }
  if (n_pixels > 0)
    for (double& v : h) v /= static_cast<double>(n_pixels);
  return h;
}

void HistogramClassifier::train(const Dataset& ds) {
  if (ds.classes.empty()) throw EmptyClass("dataset has no classes");
  classes_ = ds.classes;
  centroids_.assign(classes_.size(), std::vector<double>(kHistogramSize, 0.0));
  std::vector<int> counts(classes_.size(), 0);
  for (const LabeledImage& li : ds.images) {
    const std::vector<double> h = histogram(preprocess(li.image));
    auto& c = centroids_[li.label];
    for (int i = 0; i < kHistogramSize; ++i) c[i] += h[i];
    ++counts[li.label];
  }
  for (size_t cls = 0; cls < classes_.size(); ++cls) {
    if (counts[cls] == 0)
      throw EmptyClass("class '" + classes_[cls] + "' has no training images");
    for (double& v : centroids_[cls]) v /= counts[cls];
  }
}

Prediction HistogramClassifier::classify(const Image& img) const {
  if (centroids_.empty()) throw UntrainedModel("classify before train");
  if (img.width != kClassifierInputSize || img.height != kClassifierInputSize)
    throw WrongShape("classifier input must be 224x224 RGB");
  const std::vector<double> h = histogram(img);
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (size_t cls = 0; cls < centroids_.size(); ++cls) {
    double d2 = 0.0;
    for (int i = 0; i < kHistogramSize; ++i) {
      const double diff = h[i] - centroids_[cls][i];
      d2 += diff * diff;
    }
    const double d = std::sqrt(d2);
    if (d < best_dist) {  // strict: ties keep the lowest class index
      best_dist = d;
      best = static_cast<int>(cls);
    }
  }
  return {best, 1.0 / (1.0 + best_dist)};
}

void HistogramClassifier::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open model file for writing: " + path);
  out << "HMAMODEL 1\n" << classes_.size() << "\n";
  out.precision(17);
  for (size_t cls = 0; cls < classes_.size(); ++cls) {
    out << classes_[cls] << "\n";
    for (int i = 0; i < kHistogramSize; ++i)
      out << centroids_[cls][i] << (i + 1 == kHistogramSize ? '\n' : ' ');
  }
  if (!out) throw IoError("write failed: " + path);
}

HistogramClassifier HistogramClassifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "HMAMODEL" || version != 1)
    throw ParseError("bad model file header in " + path);
  size_t n_classes = 0;
  in >> n_classes;
  HistogramClassifier model;
  model.classes_.resize(n_classes);
  model.centroids_.assign(n_classes, std::vector<double>(kHistogramSize));
  for (size_t cls = 0; cls < n_classes; ++cls) {
    in >> model.classes_[cls];
    for (int i = 0; i < kHistogramSize; ++i) in >> model.centroids_[cls][i];
  }
  if (!in) throw ParseError("truncated model file: " + path);
  return model;
}

int ConfusionTable::accuracy_rounded() const {
  return static_cast<int>(std::lround(accuracy_exact));
}

ConfusionTable evaluate(const ClassifierModel& model, const Dataset& test) {
  if (test.images.empty()) throw EmptyTestSet("test dataset is empty");
  if (!model.trained()) throw UntrainedModel("evaluate before train");
  ConfusionTable table;
  table.classes = test.classes;
  table.true_counts.assign(test.classes.size(), 0);
  table.false_counts.assign(test.classes.size(), 0);

  const int n = static_cast<int>(test.images.size());
  std::vector<int> predicted(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i)
    predicted[i] = model.classify(preprocess(test.images[i].image)).label;

  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const int truth = test.images[i].label;
    if (predicted[i] == truth) {
      ++table.true_counts[truth];
      ++correct;
    } else {
      ++table.false_counts[truth];
    }
  }
  table.accuracy_exact = 100.0 * correct / n;
  return table;
}

}  // namespace hma
