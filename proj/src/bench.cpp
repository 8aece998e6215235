#include "crt/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "crt/errors.hpp"

namespace crt {

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated IDX header in " + path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::string find_file(const std::string& dir, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    auto p = std::filesystem::path(dir) / n;
    if (std::filesystem::exists(p)) return p.string();
  }
  return {};
}

double variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / (v.size() - 1);
}

void softmax_inplace(Vec& z) {
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  z /= z.sum();
}

}  // namespace

std::vector<std::int64_t> Dataset::histogram() const {
  std::vector<std::int64_t> h(kClasses, 0);
  for (int c : y) ++h.at(c);
  return h;
}

std::vector<std::vector<std::uint8_t>> read_idx_images(const std::string& path, int* rows, int* cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (read_be32(in, path) != 0x00000803) throw IoError("bad IDX image magic in " + path);
  const std::uint32_t n = read_be32(in, path);
  const std::uint32_t r = read_be32(in, path);
  const std::uint32_t c = read_be32(in, path);
  if (r == 0 || c == 0 || r > 4096 || c > 4096) throw IoError("bad IDX image shape in " + path);
  std::vector<std::vector<std::uint8_t>> out(n, std::vector<std::uint8_t>(r * c));
  for (auto& img : out) {
    if (!in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()))) {
      throw IoError("truncated IDX image data in " + path);
    }
  }
  if (rows) *rows = static_cast<int>(r);
  if (cols) *cols = static_cast<int>(c);
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (read_be32(in, path) != 0x00000801) throw IoError("bad IDX label magic in " + path);
  const std::uint32_t n = read_be32(in, path);
  std::vector<std::uint8_t> out(n);
  if (!in.read(reinterpret_cast<char*>(out.data()), n)) throw IoError("truncated IDX label data in " + path);
  return out;
}

Vec area_resize(const std::vector<double>& img, int in, int out) {
  if (static_cast<int>(img.size()) != in * in || in <= 0 || out <= 0) {
    throw DimensionMismatch("area_resize: image is not in x in");
  }
  // Overlap weights of source pixel i with target pixel k along one axis.
  Mat W = Mat::Zero(out, in);
  const double r = static_cast<double>(in) / out;
  for (int k = 0; k < out; ++k) {
    const double lo = k * r, hi = (k + 1) * r;
    for (int i = static_cast<int>(std::floor(lo)); i < in && i < hi; ++i) {
      W(k, i) = std::max(0.0, std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i))) / r;
    }
  }
  Mat src(in, in);
  for (int i = 0; i < in; ++i) {
    for (int j = 0; j < in; ++j) src(i, j) = img[i * in + j];
  }
  Mat dst = W * src * W.transpose();
  Vec v(out * out);
  for (int i = 0; i < out; ++i) {
    for (int j = 0; j < out; ++j) v(i * out + j) = dst(i, j);
  }
  return v;
}

namespace {

Dataset load_mnist_part(const std::string& images, const std::string& labels) {
  int rows = 0, cols = 0;
  auto imgs = read_idx_images(images, &rows, &cols);
  auto labs = read_idx_labels(labels);
  if (imgs.size() != labs.size()) throw IoError("image/label count mismatch: " + images);
  if (rows != cols) throw IoError("non-square images in " + images);
  Dataset d;
  d.source = "mnist";
  std::vector<double> buf(rows * cols);
  for (std::size_t k = 0; k < imgs.size(); ++k) {
    if (labs[k] >= kClasses) continue;
    for (int i = 0; i < rows * cols; ++i) buf[i] = imgs[k][i] / 255.0;
    d.x.push_back(area_resize(buf, rows, kImageSide));
    d.y.push_back(labs[k]);
  }
  return d;
}

}  // namespace

DataSplit synthetic_split(int n_train, int n_test, double noise, std::uint64_t seed, double texture,
                          double blob_swap) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(2.0, 9.0);
  std::normal_distribution<double> G(0.0, 1.0);
  // Each class: two Gaussian blobs on the 12 x 12 grid.
  std::vector<Vec> proto(kClasses, Vec::Zero(kFeatures));
  nlohmann::json centers = nlohmann::json::array();
  for (int c = 0; c < kClasses; ++c) {
    nlohmann::json blobs = nlohmann::json::array();
    for (int b = 0; b < 2; ++b) {
      const double cy = U(rng), cx = U(rng), w = 1.5;
      blobs.push_back({cy, cx});
      for (int i = 0; i < kImageSide; ++i) {
        for (int j = 0; j < kImageSide; ++j) {
          proto[c](i * kImageSide + j) += std::exp(-((i - cy) * (i - cy) + (j - cx) * (j - cx)) / (2 * w * w));
        }
      }
    }
    proto[c] = proto[c].cwiseMin(1.0);
    centers.push_back(blobs);
  }
  // Faint class-specific +-texture: predictive, but erased by an attack of radius >= texture.
  std::bernoulli_distribution coin(0.5);
  std::vector<Vec> tex(kClasses, Vec(kFeatures));
  for (auto& t : tex) {
    for (int i = 0; i < kFeatures; ++i) t(i) = coin(rng) ? texture : -texture;
  }
  // The blob of another class appears with probability blob_swap; the texture always matches.
  std::bernoulli_distribution swap(blob_swap);
  std::uniform_int_distribution<int> other(1, kClasses - 1);
  auto make = [&](int n) {
    Dataset d;
    d.source = "synthetic";
    for (int k = 0; k < n; ++k) {
      const int c = k % kClasses;
      const int b = swap(rng) ? (c + other(rng)) % kClasses : c;
      Vec x = proto[b] + tex[c];
      for (int i = 0; i < kFeatures; ++i) x(i) = std::clamp(x(i) + noise * G(rng), 0.0, 1.0);
      d.x.push_back(x);
      d.y.push_back(c);
    }
    return d;
  };
  DataSplit s;
  s.train = make(n_train);
  s.test = make(n_test);
  const nlohmann::json meta = {{"source", "synthetic"},
                               {"generator", "two Gaussian blobs per class (width 1.5 px, swapped to another class with probability blob_swap), +-texture pattern per class, clipped N(0, noise^2) pixel noise"},
                               {"noise", noise},
                               {"texture", texture},
                               {"blob_swap", blob_swap},
                               {"seed", seed},
                               {"blob_centers", centers}};
  s.train.meta = meta;
  s.test.meta = meta;
  return s;
}

DataSplit load_mnist_reduced(const std::string& dir, std::uint64_t seed, int synthetic_train,
                             int synthetic_test, double synthetic_noise, double synthetic_texture,
                             double synthetic_swap) {
  const std::string tr_img = dir.empty() ? "" : find_file(dir, {"train-images-idx3-ubyte", "train-images.idx3-ubyte"});
  const std::string tr_lab = dir.empty() ? "" : find_file(dir, {"train-labels-idx1-ubyte", "train-labels.idx1-ubyte"});
  const std::string te_img = dir.empty() ? "" : find_file(dir, {"t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"});
  const std::string te_lab = dir.empty() ? "" : find_file(dir, {"t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"});
  if (tr_img.empty() || tr_lab.empty() || te_img.empty() || te_lab.empty()) {
    auto s = synthetic_split(synthetic_train, synthetic_test, synthetic_noise, seed, synthetic_texture, synthetic_swap);
    s.train.meta["fallback_reason"] = dir.empty() ? "no MNIST directory given" : "MNIST files not found in " + dir;
    s.test.meta = s.train.meta;
    return s;
  }
  DataSplit s;
  s.train = load_mnist_part(tr_img, tr_lab);
  s.test = load_mnist_part(te_img, te_lab);
  // Deterministic shuffle of the training order.
  std::vector<std::size_t> idx(s.train.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(seed));
  Dataset shuffled;
  shuffled.source = "mnist";
  for (auto i : idx) {
    shuffled.x.push_back(s.train.x[i]);
    shuffled.y.push_back(s.train.y[i]);
  }
  s.train = std::move(shuffled);
  const nlohmann::json meta = {{"source", "mnist"}, {"dir", dir}, {"digits", "0-4"},
                               {"resize", "exact area average 28 -> 12"}, {"seed", seed},
                               {"train", s.train.size()}, {"test", s.test.size()}};
  s.train.meta = meta;
  s.test.meta = meta;
  return s;
}

DataSplit load_bench_data(const Config& c) {
  return load_mnist_reduced(c.str("bench.mnist_dir"), static_cast<std::uint64_t>(c.integer("run.seed")),
                            c.integer("bench.train_samples"), c.integer("bench.eval_samples"),
                            c.num("bench.synthetic_noise"), c.num("bench.synthetic_texture"),
                            c.num("bench.synthetic_swap"));
}

PipelineConfig comparison_task(const Config& c) {
  auto p = PipelineConfig::from(c);
  p.T = c.integer("bench.T");
  return p;
}

Mat random_projection(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> G(0.0, 1.0);
  Mat P(kProjected, kFeatures);
  for (int i = 0; i < kProjected; ++i) {
    for (int j = 0; j < kFeatures; ++j) P(i, j) = G(rng) / std::sqrt(static_cast<double>(kProjected));
  }
  return P;
}

ReducedModel ReducedModel::init(std::uint64_t seed, double init_scale) {
  ReducedModel m;
  m.P = random_projection(seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> G(0.0, init_scale);
  m.W1 = Mat(kHidden, kProjected);
  m.W2 = Mat(kClasses, kHidden);
  for (int i = 0; i < m.W1.size(); ++i) m.W1.data()[i] = G(rng) / std::sqrt(static_cast<double>(kProjected));
  for (int i = 0; i < m.W2.size(); ++i) m.W2.data()[i] = G(rng) / std::sqrt(static_cast<double>(kHidden));
  return m;
}

Vec ReducedModel::logits(const Vec& x) const {
  const Vec a = (W1 * (P * x)).array().tanh();
  return W2 * a;
}

int ReducedModel::predict(const Vec& x) const {
  Vec z = logits(x);
  Eigen::Index k;
  z.maxCoeff(&k);
  return static_cast<int>(k);
}

double ReducedModel::loss(const Vec& x, int y) const {
  Vec z = logits(x);
  const double mx = z.maxCoeff();
  return std::log((z.array() - mx).exp().sum()) + mx - z(y);
}

double ReducedModel::gradients(const Vec& x, int y, Mat* dW1, Mat* dW2, Vec* dx) const {
  const Vec h = P * x;
  const Vec a = (W1 * h).array().tanh();
  Vec p = W2 * a;
  const double mx = p.maxCoeff();
  const double loss = std::log((p.array() - mx).exp().sum()) + mx - p(y);
  softmax_inplace(p);
  p(y) -= 1.0;
  if (dW2) *dW2 = p * a.transpose();
  const Vec dpre = (W2.transpose() * p).cwiseProduct((1.0 - a.array().square()).matrix());
  if (dW1) *dW1 = dpre * h.transpose();
  if (dx) *dx = P.transpose() * (W1.transpose() * dpre);
  return loss;
}

Vec pgd_attack(const ReducedModel& model, const Vec& x, int y, const PgdConfig& cfg) {
  Vec adv = x;
  Vec g;
  for (int k = 0; k < cfg.steps; ++k) {
    model.gradients(adv, y, nullptr, nullptr, &g);
    adv += cfg.step * g.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); });
    adv = adv.array().max(x.array() - cfg.eps).min(x.array() + cfg.eps).max(0.0).min(1.0).matrix();
  }
  return adv;
}

EvalResult pgd_evaluate(const ReducedModel& model, const Dataset& data, const PgdConfig& cfg, int limit) {
  const std::size_t n = limit > 0 ? std::min<std::size_t>(limit, data.size()) : data.size();
  EvalResult r;
  if (n == 0) return r;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& x = data.x[i];
    const int y = data.y[i];
    const bool clean_ok = model.predict(x) == y;
    r.clean_acc += clean_ok;
    r.clean_loss += model.loss(x, y);
    // A misclassified clean point counts as broken.
    if (clean_ok) r.robust_acc += model.predict(pgd_attack(model, x, y, cfg)) == y;
  }
  r.clean_acc /= n;
  r.robust_acc /= n;
  r.clean_loss /= n;
  return r;
}

TrainConfig TrainConfig::from(const Config& c) {
  TrainConfig t;
  t.steps = c.flag("bench.full_scale") ? 120000 : c.integer("bench.steps");
  t.batch = c.integer("bench.batch");
  t.lr = c.num("bench.lr");
  t.init_scale = c.num("bench.init_scale");
  t.log_every = c.integer("bench.log_every");
  t.eval_samples = c.integer("bench.eval_samples");
  t.pgd = {c.num("bench.pgd_eps"), c.num("bench.pgd_step"), c.integer("bench.pgd_steps")};
  t.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  if (t.steps < 0 || t.batch < 1 || t.log_every < 1) throw ConfigError("bench steps/batch/log_every out of range");
  return t;
}

std::string mode_name(double alpha) {
  if (alpha == 0.0) return "clean";
  if (alpha == 1.0) return "robust";
  return "mixed";
}

TrainResult train_reduced(const DataSplit& data, double alpha, const TrainConfig& cfg) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (data.train.size() == 0) throw InvalidArgument("empty training set");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res;
  res.alpha = alpha;
  res.mode = mode_name(alpha);
  res.model = ReducedModel::init(cfg.seed, cfg.init_scale);
  ReducedModel& m = res.model;
  std::mt19937_64 rng(cfg.seed + 17);
  std::uniform_int_distribution<std::size_t> pick(0, data.train.size() - 1);
  auto log_row = [&](int step) {
    const auto e = pgd_evaluate(m, data.test, cfg.pgd, cfg.eval_samples);
    res.rows.push_back({step, e.clean_acc, e.robust_acc, e.clean_loss});
  };
  log_row(0);
  Mat gW1, gW2, dW1, dW2;
  for (int step = 1; step <= cfg.steps; ++step) {
    gW1 = Mat::Zero(kHidden, kProjected);
    gW2 = Mat::Zero(kClasses, kHidden);
    for (int b = 0; b < cfg.batch; ++b) {
      const std::size_t i = pick(rng);
      const Vec& x = data.train.x[i];
      const int y = data.train.y[i];
      if (alpha < 1.0) {
        m.gradients(x, y, &dW1, &dW2, nullptr);
        gW1 += (1.0 - alpha) * dW1;
        gW2 += (1.0 - alpha) * dW2;
      }
      if (alpha > 0.0) {
        // Alternating step: attack against the current weights, then descend.
        const Vec adv = pgd_attack(m, x, y, cfg.pgd);
        m.gradients(adv, y, &dW1, &dW2, nullptr);
        gW1 += alpha * dW1;
        gW2 += alpha * dW2;
      }
    }
    m.W1 -= cfg.lr / cfg.batch * gW1;
    m.W2 -= cfg.lr / cfg.batch * gW2;
    if (!m.W1.allFinite() || !m.W2.allFinite()) {
      res.diverged = true;
      break;
    }
    if (step % cfg.log_every == 0) log_row(step);
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

double plateau_ratio(const std::vector<double>& series) {
  const std::size_t k = std::max<std::size_t>(2, series.size() / 5);
  if (series.size() < 2 * k) return std::numeric_limits<double>::infinity();
  const std::vector<double> head(series.begin(), series.begin() + k);
  const std::vector<double> tail(series.end() - k, series.end());
  const double vh = variance(head);
  if (vh == 0.0) return variance(tail) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return variance(tail) / vh;
}

void write_metrics_csv(const std::vector<TrainResult>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,mode,alpha,clean_acc,robust_acc,clean_loss\n" << std::setprecision(10);
  for (const auto& r : runs) {
    for (const auto& row : r.rows) {
      out << row.step << "," << r.mode << "," << r.alpha << "," << row.clean_acc << "," << row.robust_acc << ","
          << row.clean_loss << "\n";
    }
  }
}

nlohmann::json run_metadata(const DataSplit& data, const TrainConfig& cfg, const std::vector<TrainResult>& runs) {
  nlohmann::json jr = nlohmann::json::array();
  for (const auto& r : runs) {
    std::vector<double> rob, cl;
    for (const auto& row : r.rows) {
      rob.push_back(row.robust_acc);
      cl.push_back(row.clean_loss);
    }
    const auto& last = r.rows.back();
    jr.push_back({{"mode", r.mode},
                  {"alpha", r.alpha},
                  {"final_clean_acc", last.clean_acc},
                  {"final_robust_acc", last.robust_acc},
                  {"final_clean_loss", last.clean_loss},
                  {"plateau_ratio_robust_acc", plateau_ratio(rob)},
                  {"plateau_ratio_clean_loss", plateau_ratio(cl)},
                  {"diverged", r.diverged},
                  {"seconds", r.seconds}});
  }
  return {{"data", data.train.meta},
          {"train_size", data.train.size()},
          {"test_size", data.test.size()},
          {"label_histogram_train", data.train.histogram()},
          {"features", kFeatures},
          {"projection", "fixed Gaussian N(0,1)/sqrt(10), 144 -> 10"},
          {"model", "bias-free 10 -> 4 -> 5, tanh hidden layer"},
          {"parameters", kProjected * kHidden + kHidden * kClasses},
          {"loss", "softmax cross-entropy; (1 - alpha) L_clean + alpha L_rob"},
          {"optimizer", "minibatch SGD"},
          {"steps", cfg.steps},
          {"batch", cfg.batch},
          {"lr", cfg.lr},
          {"init_scale", cfg.init_scale},
          {"log_every", cfg.log_every},
          {"eval_samples", cfg.eval_samples},
          {"pgd", {{"eps", cfg.pgd.eps}, {"step", cfg.pgd.step}, {"steps", cfg.pgd.steps}, {"start", "clean point"}}},
          {"seed", cfg.seed},
          {"runs", jr}};
}

bool ReductionComparison::within_bounds() const {
  return poly_vs_exact <= poly_vs_exact_bound && carleman_vs_poly <= carleman_vs_poly_bound &&
         carleman_vs_exact <= carleman_vs_exact_bound;
}

nlohmann::json ReductionComparison::to_json() const {
  return {{"T", T},
          {"poly_vs_exact", poly_vs_exact},
          {"poly_vs_exact_bound", poly_vs_exact_bound},
          {"carleman_vs_poly", carleman_vs_poly},
          {"carleman_vs_poly_bound", carleman_vs_poly_bound},
          {"carleman_vs_exact", carleman_vs_exact},
          {"carleman_vs_exact_bound", carleman_vs_exact_bound},
          {"raw_poly_vs_exact_max", raw_poly_vs_exact_max},
          {"within_bounds", within_bounds()},
          {"admissible", certificate.passes({"admissible"})}};
}

ReductionComparison compare_reduction(const PipelineConfig& cfg) {
  PipelineArtifacts art;
  ReductionComparison r;
  r.T = cfg.T;
  r.certificate = run_pipeline_certificate(cfg, &art);
  const int N = art.lifted.layout.N;
  const auto z_poly = lift_coordinates(art.poly, art.center, art.scale);
  const auto z_exact = lift_coordinates(art.exact, art.center, art.scale);
  const Vec Yp = stacked_lift(z_poly, N, cfg.cap);
  const Vec Ye = stacked_lift(z_exact, N, cfg.cap);
  double lvl1 = 0.0;
  for (std::size_t t = 0; t < z_poly.size(); ++t) {
    lvl1 += (z_poly[t] - z_exact[t]).squaredNorm();
    r.raw_poly_vs_exact_max = std::max(r.raw_poly_vs_exact_max, (art.poly[t].stacked() - art.exact[t].stacked()).norm());
  }
  r.poly_vs_exact = std::sqrt(lvl1);
  r.carleman_vs_poly = (art.forward - Yp).norm();
  r.carleman_vs_exact = (art.forward - Ye).norm();
  const auto& b = r.certificate.json["bounds"];
  r.carleman_vs_poly_bound = b["truncation_stacked"].get<double>();
  r.carleman_vs_exact_bound = b["eps_phys_hor"].get<double>();
  // Level-1 part of both lifted errors.
  r.poly_vs_exact_bound = r.carleman_vs_poly_bound + r.carleman_vs_exact_bound;
  return r;
}

}  // namespace crt
