// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/common.hpp"
#include "pdiff/features.hpp"
#include "pdiff/metrics.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pdiff::gru {

using metrics::Probs;

struct GruNetConfig {
  std::vector<int> layer_widths = {64, 64, 32, 32, 16};
  int fc_width = 32;
  int classes = 3;
  double dropout = 0.0;
  int epochs = 20;
  double lr = 0.002;
  int batch = 64;
  std::uint64_t seed = 0;

  static GruNetConfig desk();
  static GruNetConfig full();
  void validate() const;  // UsageError
  nlohmann::ordered_json to_json() const;
  static GruNetConfig from_json(const nlohmann::ordered_json& j);
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Gate rows are stacked [update; reset; candidate].
template <typename T>
struct GruLayer {
  Mat<T> wx;  // 3h x in
  Mat<T> u;   // 3h x h
  Vec<T> b;   // 3h
  int width() const { return static_cast<int>(u.cols()); }
};

template <typename T>
struct GruParams {
  std::vector<GruLayer<T>> layers;
  Mat<T> attn;  // d x d
  Vec<T> ln_gain, ln_bias;  // 2d
  Mat<T> fc1;   // fc x 2d
  Vec<T> fc1_b;
  Mat<T> fc2;   // classes x fc
  Vec<T> fc2_b;

  /// Every parameter block in a fixed order.
  std::vector<std::span<T>> blocks();
  std::vector<std::span<const T>> blocks() const;
  std::size_t size() const;
  GruParams zeros_like() const;
  template <typename U>
  GruParams<U> cast() const;
};

struct GruNetModel {
  GruNetConfig config;
  int input_width = 0;
  std::vector<float> input_scale;  // per column; zero cells stay zero
  GruParams<float> params;
  nlohmann::ordered_json metadata;  // opaque, carried in the header

  /// "PDGR", u32 version, u32 header length, JSON header (config, seed,
  /// shapes), the input scale, then every block as little-endian binary32.
  std::string to_binary() const;
  static GruNetModel from_binary(std::string_view bytes);
};

/// Inverse RMS of each column's nonzero values (1 for all-zero columns).
std::vector<float> fit_input_scale(const std::vector<const features::FeatureMatrix*>& corpus, int width);

/// Uniform in +-1/sqrt(fan_in) from a stream named after the config seed.
GruNetModel init_model(const GruNetConfig& config, int input_width);

/// Top-layer hidden states (width x I) for one sequence given as in x I.
template <typename T>
Mat<T> gru_forward(const GruParams<T>& params, const Mat<T>& x);

template <typename T>
struct Attention {
  Vec<T> context;
  Vec<T> weights;
};

/// u_i = h_i . (proj * last); weights = softmax(u); context = H * weights.
template <typename T>
Attention<T> global_attention(const Mat<T>& hiddens, const Vec<T>& last, const Mat<T>& proj);

struct Prediction {
  Probs probs{};
  std::vector<double> attention;  // one weight per onset
};

Prediction forward(const GruNetModel& model, const features::FeatureMatrix& m);

/// Runs several sequences as one packed batch; equals per-sequence forward.
std::vector<Prediction> forward_batch(const GruNetModel& model, const std::vector<const features::FeatureMatrix*>& batch);

struct LabeledSequence {
  const features::FeatureMatrix* matrix = nullptr;
  int label = 0;  // 1..3
};

struct TrainReport {
  double initial_loss = 0;
  std::vector<double> epoch_loss;  // mean training NLL after each epoch
};

GruNetModel train_deepgru(const std::vector<LabeledSequence>& corpus, const GruNetConfig& config,
                          TrainReport* report = nullptr);

double mean_nll(const GruNetModel& model, const std::vector<LabeledSequence>& corpus);

/// Loss and reverse-mode gradients of mean NLL over `batch`, without dropout.
template <typename T>
T loss_and_gradient(const GruParams<T>& params, const std::vector<Mat<T>>& inputs, const std::vector<int>& labels,
                    GruParams<T>* grad);

struct GradientCheck {
  double max_relative_error = 0;
  std::size_t parameters = 0;
};

/// Central differences (step 1e-5) on every parameter in double precision.
GradientCheck gradient_check(const GruParams<double>& params, const std::vector<Mat<double>>& inputs,
                             const std::vector<int>& labels, double step = 1e-5);

}  // namespace pdiff::gru
