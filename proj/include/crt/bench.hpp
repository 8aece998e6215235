#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "crt/linalg.hpp"
#include "crt/pipeline.hpp"

namespace crt {

inline constexpr int kImageSide = 12;
inline constexpr int kFeatures = kImageSide * kImageSide;
inline constexpr int kProjected = 10;
inline constexpr int kHidden = 4;
inline constexpr int kClasses = 5;

struct Dataset {
  std::vector<Vec> x;  // 144 pixels in [0, 1]
  std::vector<int> y;  // labels 0..4
  std::string source;  // "mnist" or "synthetic"
  nlohmann::json meta;
  std::size_t size() const { return y.size(); }
  std::vector<std::int64_t> histogram() const;
};

struct DataSplit {
  Dataset train, test;
};

/// Raw IDX readers (big-endian, magic 0x00000803 / 0x00000801). Throws IoError.
std::vector<std::vector<std::uint8_t>> read_idx_images(const std::string& path, int* rows, int* cols);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);

/// Exact area-average resampling of a square image (row-major, side `in`) to side `out`.
Vec area_resize(const std::vector<double>& img, int in, int out);

/// Digits 0..4 from the standard MNIST file names in `dir`, resized to 12x12.
/// Falls back to `synthetic_split` when the files are absent; throws IoError on malformed files.
DataSplit load_mnist_reduced(const std::string& dir, std::uint64_t seed, int synthetic_train = 5000,
                             int synthetic_test = 1000, double synthetic_noise = 0.15,
                             double synthetic_texture = 0.05, double synthetic_swap = 0.3);

/// Five classes, each a pair of Gaussian blobs plus a faint +-texture, with clipped pixel noise.
/// The blob is that of a random other class with probability blob_swap; the texture always matches.
/// The texture is the accurate but attack-fragile feature, the blob the robust but noisy one.
DataSplit synthetic_split(int n_train, int n_test, double noise, std::uint64_t seed, double texture = 0.05,
                          double blob_swap = 0.3);

/// Dataset selected by the bench.* keys of a configuration.
DataSplit load_bench_data(const Config& c);

/// Affine-gradient comparison task: the configured dynamics over bench.T steps.
PipelineConfig comparison_task(const Config& c);

/// Fixed Gaussian projection 144 -> 10 with entries N(0, 1) / sqrt(10).
Mat random_projection(std::uint64_t seed);

/// Bias-free 10 -> 4 -> 5 tanh network on projected features.
struct ReducedModel {
  Mat P;   // 10 x 144, fixed
  Mat W1;  // 4 x 10
  Mat W2;  // 5 x 4
  static ReducedModel init(std::uint64_t seed, double init_scale);
  int parameter_count() const { return static_cast<int>(W1.size() + W2.size()); }
  Vec logits(const Vec& x) const;
  int predict(const Vec& x) const;
  double loss(const Vec& x, int y) const;
  /// Cross-entropy gradients; either output pointer may be null.
  double gradients(const Vec& x, int y, Mat* dW1, Mat* dW2, Vec* dx) const;
};

struct PgdConfig {
  double eps = 0.025;
  double step = 0.01;
  int steps = 10;
};

/// l_inf PGD from the clean point with sign steps, projection to the eps ball and to [0, 1].
Vec pgd_attack(const ReducedModel& model, const Vec& x, int y, const PgdConfig& cfg);

struct EvalResult {
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  double clean_loss = 0.0;
};

/// Accuracy on the first `limit` samples (all if limit <= 0).
EvalResult pgd_evaluate(const ReducedModel& model, const Dataset& data, const PgdConfig& cfg, int limit = 0);

struct TrainConfig {
  int steps = 10000;
  int batch = 5;
  double lr = 0.05;
  double init_scale = 0.5;
  int log_every = 100;
  int eval_samples = 1000;
  PgdConfig pgd;
  std::uint64_t seed = 1;
  static TrainConfig from(const Config& c);
};

struct MetricRow {
  int step = 0;
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  double clean_loss = 0.0;
};

struct TrainResult {
  double alpha = 0.0;
  std::string mode;
  std::vector<MetricRow> rows;
  ReducedModel model;
  bool diverged = false;
  double seconds = 0.0;
};

std::string mode_name(double alpha);

/// Minimizes (1 - alpha) L_clean + alpha L_rob by minibatch SGD; PGD examples regenerated each step.
TrainResult train_reduced(const DataSplit& data, double alpha, const TrainConfig& cfg);

/// Variance of the last 20% of a series over the variance of its first 20%.
double plateau_ratio(const std::vector<double>& series);

void write_metrics_csv(const std::vector<TrainResult>& runs, const std::string& path);
nlohmann::json run_metadata(const DataSplit& data, const TrainConfig& cfg, const std::vector<TrainResult>& runs);

struct ReductionComparison {
  int T = 0;
  double poly_vs_exact = 0.0;          // stacked level-1 distance, lift coordinates
  double poly_vs_exact_bound = 0.0;
  double carleman_vs_poly = 0.0;       // stacked lifted distance
  double carleman_vs_poly_bound = 0.0;
  double carleman_vs_exact = 0.0;      // stacked lifted distance
  double carleman_vs_exact_bound = 0.0;
  double raw_poly_vs_exact_max = 0.0;  // max_t ||v_poly(t) - v_exact(t)||, raw coordinates
  Certificate certificate;
  bool within_bounds() const;
  nlohmann::json to_json() const;
};

/// Exact PGD, polynomial-model iteration and Carleman horizon solve on an affine-gradient instance.
ReductionComparison compare_reduction(const PipelineConfig& cfg);

}  // namespace crt
