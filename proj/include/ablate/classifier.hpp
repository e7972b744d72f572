#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ablate/grid.hpp"
#include "ablate/io.hpp"
#include "ablate/rng.hpp"

namespace ablate {

// Differentiable multi-class scorer. Evaluation returns a probability vector
// (components in [0,1], sum 1); input_gradient returns the analytic gradient
// of one class probability with respect to the input. Models are immutable
// after construction and safe to share across threads.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual GridDomain input_domain() const = 0;
  virtual int input_channels() const = 0;
  virtual int class_count() const = 0;
  virtual bool has_analytic_gradient() const { return true; }
  // Identical inputs must give identical outputs; everything here is.
  virtual bool deterministic() const { return true; }

  virtual std::vector<double> evaluate(const Image& image) const = 0;
  virtual Image input_gradient(const Image& image, int class_index) const = 0;

  // Joint forward+backward; override when one pass can serve both.
  virtual std::pair<std::vector<double>, Image> evaluate_and_gradient(const Image& image,
                                                                      int class_index) const {
    return {evaluate(image), input_gradient(image, class_index)};
  }

  std::vector<std::vector<double>> evaluate_batch(const std::vector<Image>& images) const {
    std::vector<std::vector<double>> out;
    out.reserve(images.size());
    for (const Image& img : images) out.push_back(evaluate(img));
    return out;
  }

 protected:
  void check_input(const Image& image) const {
    if (!(image.domain == input_domain()) || image.channels != input_channels())
      throw value_error("Classifier: input shape mismatch");
  }
  void check_class(int class_index) const {
    if (class_index < 0 || class_index >= class_count())
      throw value_error("Classifier: class index out of range");
  }
};

namespace detail {

inline std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace detail

// Softmax over per-class affine functions of the input.
class LinearSoftmaxClassifier : public Classifier {
 public:
  LinearSoftmaxClassifier(std::vector<Image> weights, std::vector<double> biases)
      : weights_(std::move(weights)), biases_(std::move(biases)) {
    if (weights_.size() < 2 || weights_.size() != biases_.size())
      throw value_error("LinearSoftmaxClassifier: need one weight map and bias per class (K >= 2)");
    for (const Image& w : weights_)
      if (!w.same_shape(weights_[0]))
        throw value_error("LinearSoftmaxClassifier: weight shape mismatch");
  }

  GridDomain input_domain() const override { return weights_[0].domain; }
  int input_channels() const override { return weights_[0].channels; }
  int class_count() const override { return static_cast<int>(weights_.size()); }

  std::vector<double> logits(const Image& image) const {
    check_input(image);
    std::vector<double> z(weights_.size());
    for (size_t k = 0; k < weights_.size(); ++k) {
      double acc = biases_[k];
      for (size_t i = 0; i < image.values.size(); ++i)
        acc += weights_[k].values[i] * image.values[i];
      z[k] = acc;
    }
    return z;
  }

  std::vector<double> evaluate(const Image& image) const override {
    return detail::softmax(logits(image));
  }

  Image input_gradient(const Image& image, int class_index) const override {
    check_class(class_index);
    const std::vector<double> p = evaluate(image);
    Image grad(input_domain(), input_channels());
    // d p_t / dx = sum_k p_t (delta_tk - p_k) w_k
    for (size_t k = 0; k < weights_.size(); ++k) {
      const double coef = p[class_index] * ((static_cast<int>(k) == class_index ? 1.0 : 0.0) - p[k]);
      if (coef == 0.0) continue;
      for (size_t i = 0; i < grad.values.size(); ++i)
        grad.values[i] += coef * weights_[k].values[i];
    }
    return grad;
  }

 private:
  std::vector<Image> weights_;
  std::vector<double> biases_;
};

// One-hidden-layer perceptron with tanh activations and a softmax head; the
// trainable reference model. Weights are public so diagnostic wrappers can
// reuse the forward pass.
class MlpClassifier : public Classifier {
 public:
  GridDomain domain;
  int channels = 1;
  int hidden = 0;
  int classes = 0;
  uint64_t seed = 0;
  double val_accuracy = 0.0;
  // w1: hidden x D (row-major), w2: classes x hidden.
  std::vector<double> w1, b1, w2, b2;

  MlpClassifier() = default;
  MlpClassifier(GridDomain d, int ch, int hidden_units, int class_count_, uint64_t init_seed)
      : domain(d), channels(ch), hidden(hidden_units), classes(class_count_), seed(init_seed) {
    if (hidden <= 0 || classes < 2) throw value_error("MlpClassifier: bad layer sizes");
    const int input_dim = dim();
    w1.assign(static_cast<size_t>(hidden) * input_dim, 0.0);
    b1.assign(hidden, 0.0);
    w2.assign(static_cast<size_t>(classes) * hidden, 0.0);
    b2.assign(classes, 0.0);
    Rng rng(init_seed);
    const double s1 = std::sqrt(1.0 / input_dim), s2 = std::sqrt(1.0 / hidden);
    for (double& v : w1) v = rng.normal(0.0, s1);
    for (double& v : w2) v = rng.normal(0.0, s2);
  }

  int dim() const { return domain.pixel_count() * channels; }

  GridDomain input_domain() const override { return domain; }
  int input_channels() const override { return channels; }
  int class_count() const override { return classes; }

  std::vector<double> hidden_activations(const Image& image) const {
    check_input(image);
    std::vector<double> h(hidden);
    const int d = dim();
    for (int j = 0; j < hidden; ++j) {
      double acc = b1[j];
      const double* row = &w1[static_cast<size_t>(j) * d];
      for (int i = 0; i < d; ++i) acc += row[i] * image.values[i];
      h[j] = std::tanh(acc);
    }
    return h;
  }

  std::vector<double> logits(const Image& image) const {
    const std::vector<double> h = hidden_activations(image);
    std::vector<double> z(classes);
    for (int k = 0; k < classes; ++k) {
      double acc = b2[k];
      const double* row = &w2[static_cast<size_t>(k) * hidden];
      for (int j = 0; j < hidden; ++j) acc += row[j] * h[j];
      z[k] = acc;
    }
    return z;
  }

  std::vector<double> evaluate(const Image& image) const override {
    return detail::softmax(logits(image));
  }

  Image input_gradient(const Image& image, int class_index) const override {
    return evaluate_and_gradient(image, class_index).second;
  }

  std::pair<std::vector<double>, Image> evaluate_and_gradient(const Image& image,
                                                              int class_index) const override {
    check_class(class_index);
    const std::vector<double> h = hidden_activations(image);
    std::vector<double> z(classes);
    for (int k = 0; k < classes; ++k) {
      double acc = b2[k];
      const double* row = &w2[static_cast<size_t>(k) * hidden];
      for (int j = 0; j < hidden; ++j) acc += row[j] * h[j];
      z[k] = acc;
    }
    const std::vector<double> p = detail::softmax(z);

    // dz_k = p_t (delta_tk - p_k), back through the softmax head.
    std::vector<double> dh(hidden, 0.0);
    for (int k = 0; k < classes; ++k) {
      const double dz = p[class_index] * ((k == class_index ? 1.0 : 0.0) - p[k]);
      const double* row = &w2[static_cast<size_t>(k) * hidden];
      for (int j = 0; j < hidden; ++j) dh[j] += dz * row[j];
    }
    Image grad(domain, channels);
    const int d = dim();
    for (int j = 0; j < hidden; ++j) {
      const double da = dh[j] * (1.0 - h[j] * h[j]);
      if (da == 0.0) continue;
      const double* row = &w1[static_cast<size_t>(j) * d];
      for (int i = 0; i < d; ++i) grad.values[i] += da * row[i];
    }
    return {p, grad};
  }
};

// Flips a one-vs-rest decision when the mean input intensity crosses a level;
// with a zero input and unit baseline the mean intensity equals the mask
// mass. Piecewise constant, so the analytic input gradient is zero.
class ThresholdMeanClassifier : public Classifier {
 public:
  ThresholdMeanClassifier(GridDomain d, int ch, double level) : domain_(d), ch_(ch), level_(level) {}

  GridDomain input_domain() const override { return domain_; }
  int input_channels() const override { return ch_; }
  int class_count() const override { return 2; }

  std::vector<double> evaluate(const Image& image) const override {
    check_input(image);
    double mean = 0.0;
    for (double v : image.values) mean += v;
    mean /= static_cast<double>(image.values.size());
    const double f = mean <= level_ ? 1.0 : 0.0;
    return {f, 1.0 - f};
  }

  Image input_gradient(const Image& image, int class_index) const override {
    check_input(image);
    check_class(class_index);
    return Image(domain_, ch_, 0.0);
  }

 private:
  GridDomain domain_;
  int ch_;
  double level_;
};

// Adds high-frequency pattern terms to a base model's logits, making it
// sensitive to pixel-level perturbations that a spatial low-pass removes.
// Used to study how regularisation suppresses adversarial mask populations.
class BrittleOverlayClassifier : public Classifier {
 public:
  BrittleOverlayClassifier(MlpClassifier base, double amplitude, uint64_t pattern_seed)
      : base_(std::move(base)), amplitude_(amplitude) {
    Rng rng(pattern_seed);
    patterns_.reserve(base_.classes);
    for (int k = 0; k < base_.classes; ++k) {
      Image pat(base_.domain, base_.channels);
      for (size_t i = 0; i < pat.values.size(); ++i)
        pat.values[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
      patterns_.push_back(std::move(pat));
    }
  }

  GridDomain input_domain() const override { return base_.domain; }
  int input_channels() const override { return base_.channels; }
  int class_count() const override { return base_.classes; }

  std::vector<double> evaluate(const Image& image) const override {
    return detail::softmax(combined_logits(image));
  }

  Image input_gradient(const Image& image, int class_index) const override {
    check_class(class_index);
    const std::vector<double> h = base_.hidden_activations(image);
    const std::vector<double> p = detail::softmax(combined_logits(image));
    std::vector<double> dz(base_.classes);
    for (int k = 0; k < base_.classes; ++k)
      dz[k] = p[class_index] * ((k == class_index ? 1.0 : 0.0) - p[k]);

    std::vector<double> dh(base_.hidden, 0.0);
    for (int k = 0; k < base_.classes; ++k) {
      const double* row = &base_.w2[static_cast<size_t>(k) * base_.hidden];
      for (int j = 0; j < base_.hidden; ++j) dh[j] += dz[k] * row[j];
    }
    Image grad(base_.domain, base_.channels);
    const int d = base_.dim();
    for (int j = 0; j < base_.hidden; ++j) {
      const double da = dh[j] * (1.0 - h[j] * h[j]);
      const double* row = &base_.w1[static_cast<size_t>(j) * d];
      for (int i = 0; i < d; ++i) grad.values[i] += da * row[i];
    }
    for (int k = 0; k < base_.classes; ++k)
      for (size_t i = 0; i < grad.values.size(); ++i)
        grad.values[i] += dz[k] * amplitude_ * patterns_[k].values[i];
    return grad;
  }

 private:
  std::vector<double> combined_logits(const Image& image) const {
    std::vector<double> z = base_.logits(image);
    for (int k = 0; k < base_.classes; ++k) {
      double acc = 0.0;
      for (size_t i = 0; i < image.values.size(); ++i)
        acc += patterns_[k].values[i] * image.values[i];
      z[k] += amplitude_ * acc;
    }
    return z;
  }

  MlpClassifier base_;
  double amplitude_;
  std::vector<Image> patterns_;
};

// Central-difference gradient oracle, O(2*H*W*C) evaluations. Exact on
// affine functions for any h; very small h loses precision to cancellation
// (documented behaviour, no error raised).
inline Image finite_difference_gradient(const Classifier& model, const Image& image,
                                        int class_index, double h) {
  if (!(h > 0.0)) throw value_error("finite_difference_gradient: h must be positive");
  Image grad(image.domain, image.channels);
  Image probe = image;
  for (size_t i = 0; i < image.values.size(); ++i) {
    const double orig = probe.values[i];
    probe.values[i] = orig + h;
    const double fp = model.evaluate(probe)[class_index];
    probe.values[i] = orig - h;
    const double fm = model.evaluate(probe)[class_index];
    probe.values[i] = orig;
    grad.values[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Serialization: one JSON header line, then the parameter blobs as
// little-endian f32 in the order listed by the header.
inline void save_mlp(const std::string& filename, const MlpClassifier& model) {
  nlohmann::json j;
  j["format"] = "ablate-mlp";
  j["version"] = 1;
  j["h"] = model.domain.height;
  j["w"] = model.domain.width;
  j["c"] = model.channels;
  j["hidden"] = model.hidden;
  j["classes"] = model.classes;
  j["activation"] = "tanh";
  j["seed"] = model.seed;
  j["val_accuracy"] = model.val_accuracy;
  j["blobs"] = {"w1", "b1", "w2", "b2"};
  std::string payload;
  for (const std::vector<double>* blob : {&model.w1, &model.b1, &model.w2, &model.b2})
    for (double v : *blob) detail::append_f32_le(payload, static_cast<float>(v));
  std::ofstream f(filename, std::ios::binary);
  if (!f) throw io_error("save_mlp: cannot open '" + filename + "'");
  const std::string header = j.dump() + "\n";
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!f) throw io_error("save_mlp: write failed for '" + filename + "'");
}

inline MlpClassifier load_mlp(const std::string& filename) {
  std::ifstream f(filename, std::ios::binary);
  if (!f) throw io_error("load_mlp: cannot open '" + filename + "'");
  std::string header;
  if (!std::getline(f, header)) throw io_error("load_mlp: missing header in '" + filename + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("load_mlp: bad header in '" + filename + "': " + e.what());
  }
  if (j.value("format", "") != "ablate-mlp")
    throw io_error("load_mlp: '" + filename + "' is not a model file");
  MlpClassifier m(GridDomain(j.at("h").get<int>(), j.at("w").get<int>()), j.at("c").get<int>(),
                  j.at("hidden").get<int>(), j.at("classes").get<int>(),
                  j.at("seed").get<uint64_t>());
  m.val_accuracy = j.value("val_accuracy", 0.0);
  const size_t total = m.w1.size() + m.b1.size() + m.w2.size() + m.b2.size();
  std::vector<unsigned char> payload(total * 4);
  f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<size_t>(f.gcount()) != payload.size())
    throw io_error("load_mlp: truncated parameter payload in '" + filename + "'");
  size_t off = 0;
  for (std::vector<double>* blob : {&m.w1, &m.b1, &m.w2, &m.b2})
    for (double& v : *blob) {
      v = static_cast<double>(detail::read_f32_le(&payload[off]));
      off += 4;
    }
  return m;
}

}  // namespace ablate
