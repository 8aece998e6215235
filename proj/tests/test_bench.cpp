#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "crt/bench.hpp"
#include "crt/config.hpp"
#include "crt/errors.hpp"

using namespace crt;
namespace fs = std::filesystem;

namespace {

void put_be32(std::ofstream& o, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  o.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx(const fs::path& dir, const std::string& prefix, const std::vector<std::vector<std::uint8_t>>& imgs,
               const std::vector<std::uint8_t>& labels, std::uint32_t magic = 0x00000803) {
  std::ofstream im(dir / (prefix + "-images-idx3-ubyte"), std::ios::binary);
  put_be32(im, magic);
  put_be32(im, static_cast<std::uint32_t>(imgs.size()));
  put_be32(im, 28);
  put_be32(im, 28);
  for (const auto& x : imgs) im.write(reinterpret_cast<const char*>(x.data()), x.size());
  std::ofstream lb(dir / (prefix + "-labels-idx1-ubyte"), std::ios::binary);
  put_be32(lb, 0x00000801);
  put_be32(lb, static_cast<std::uint32_t>(labels.size()));
  lb.write(reinterpret_cast<const char*>(labels.data()), labels.size());
}

DataSplit small_data() { return synthetic_split(500, 200, 0.05, 3); }

TrainConfig small_train(int steps) {
  TrainConfig t;
  t.steps = steps;
  t.log_every = 50;
  t.eval_samples = 200;
  return t;
}

}  // namespace

TEST_CASE("model shape and projection") {
  auto m = ReducedModel::init(1, 0.5);
  CHECK(m.parameter_count() == 60);
  CHECK(m.P.rows() == 10);
  CHECK(m.P.cols() == 144);
  CHECK((m.P * Vec::Zero(144)).norm() == 0.0);
  CHECK(m.logits(Vec::Zero(144)).norm() == 0.0);
  const Mat P = random_projection(7);
  CHECK((P - random_projection(7)).norm() == 0.0);
  // Entries are N(0, 1/10): sample variance near 0.1.
  CHECK(P.squaredNorm() / P.size() == doctest::Approx(0.1).epsilon(0.15));
}

TEST_CASE("gradients agree with central differences") {
  auto m = ReducedModel::init(4, 0.5);
  const auto d = small_data();
  const Vec x = d.train.x[3];
  const int y = d.train.y[3];
  Mat dW1, dW2;
  Vec dx;
  const double L = m.gradients(x, y, &dW1, &dW2, &dx);
  CHECK(L == doctest::Approx(m.loss(x, y)));
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 10; j += 3) {
      auto p = m, q = m;
      p.W1(i, j) += h;
      q.W1(i, j) -= h;
      CHECK(dW1(i, j) == doctest::Approx((p.loss(x, y) - q.loss(x, y)) / (2 * h)).epsilon(1e-6));
    }
  }
  for (int i = 0; i < 5; ++i) {
    auto p = m, q = m;
    p.W2(i, 1) += h;
    q.W2(i, 1) -= h;
    CHECK(dW2(i, 1) == doctest::Approx((p.loss(x, y) - q.loss(x, y)) / (2 * h)).epsilon(1e-6));
  }
  for (int k : {0, 50, 143}) {
    Vec a = x, b = x;
    a(k) += h;
    b(k) -= h;
    CHECK(dx(k) == doctest::Approx((m.loss(a, y) - m.loss(b, y)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("PGD iterates stay in the eps ball and the unit box") {
  auto m = ReducedModel::init(2, 0.5);
  const auto d = small_data();
  PgdConfig cfg{0.025, 0.01, 10};
  for (std::size_t k = 0; k < 100; ++k) {
    const Vec adv = pgd_attack(m, d.test.x[k], d.test.y[k], cfg);
    CHECK((adv - d.test.x[k]).cwiseAbs().maxCoeff() <= cfg.eps + 1e-15);
    CHECK(adv.minCoeff() >= 0.0);
    CHECK(adv.maxCoeff() <= 1.0);
  }
}

TEST_CASE("zero radius or zero steps gives robust = clean") {
  auto m = ReducedModel::init(5, 0.5);
  const auto d = small_data();
  const auto a = pgd_evaluate(m, d.test, {0.0, 0.01, 10});
  CHECK(a.robust_acc == a.clean_acc);
  const auto b = pgd_evaluate(m, d.test, {0.025, 0.01, 0});
  CHECK(b.robust_acc == b.clean_acc);
  const auto c = pgd_evaluate(m, d.test, {0.025, 0.01, 10});
  CHECK(c.robust_acc <= c.clean_acc);
}

TEST_CASE("synthetic data covers labels 0..4") {
  const auto d = small_data();
  const auto h = d.train.histogram();
  REQUIRE(h.size() == 5);
  for (auto n : h) CHECK(n == 100);
  for (const auto& x : d.train.x) {
    CHECK(x.size() == 144);
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x.maxCoeff() <= 1.0);
  }
  const auto again = small_data();
  CHECK((again.train.x[17] - d.train.x[17]).norm() == 0.0);
  CHECK(d.train.source == "synthetic");
}

TEST_CASE("area resize matches a block-average oracle") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  // 24 -> 12: plain 2x2 block means.
  std::vector<double> img(24 * 24);
  for (auto& v : img) v = U(rng);
  const Vec r = area_resize(img, 24, 12);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      const double m = (img[2 * i * 24 + 2 * j] + img[2 * i * 24 + 2 * j + 1] + img[(2 * i + 1) * 24 + 2 * j] +
                        img[(2 * i + 1) * 24 + 2 * j + 1]) / 4.0;
      CHECK(r(i * 12 + j) == doctest::Approx(m).epsilon(1e-14));
    }
  }
  // 28 -> 12 preserves the mean and constant images.
  std::vector<double> big(28 * 28);
  for (auto& v : big) v = U(rng);
  double mean = 0.0;
  for (double v : big) mean += v / big.size();
  CHECK(area_resize(big, 28, 12).mean() == doctest::Approx(mean).epsilon(1e-13));
  const Vec c = area_resize(std::vector<double>(28 * 28, 0.3), 28, 12);
  CHECK((c.array() - 0.3).abs().maxCoeff() < 1e-14);
}

TEST_CASE("IDX files load, filter to digits 0..4 and reject bad magic") {
  const fs::path dir = fs::temp_directory_path() / "crt_idx_test";
  fs::create_directories(dir);
  std::vector<std::vector<std::uint8_t>> imgs;
  std::vector<std::uint8_t> labels;
  for (int k = 0; k < 20; ++k) {
    imgs.emplace_back(28 * 28, static_cast<std::uint8_t>(10 * k));
    labels.push_back(static_cast<std::uint8_t>(k % 10));
  }
  write_idx(dir, "train", imgs, labels);
  write_idx(dir, "t10k", imgs, labels);
  const auto s = load_mnist_reduced(dir.string(), 1);
  CHECK(s.train.source == "mnist");
  CHECK(s.train.size() == 10);
  CHECK(s.test.size() == 10);
  for (std::size_t k = 0; k < s.test.size(); ++k) {
    CHECK(s.test.y[k] < 5);
    // Constant images survive the resize exactly.
    CHECK(s.test.x[k](0) == doctest::Approx(s.test.x[k](143)));
  }
  write_idx(dir, "train", imgs, labels, 0x12345678);
  CHECK_THROWS_AS(load_mnist_reduced(dir.string(), 1), IoError);
  fs::remove_all(dir);
  const auto fb = load_mnist_reduced(dir.string(), 1, 50, 10);
  CHECK(fb.train.source == "synthetic");
  CHECK(fb.train.meta.contains("fallback_reason"));
}

TEST_CASE("zero learning rate leaves metrics constant") {
  const auto d = small_data();
  auto cfg = small_train(200);
  cfg.lr = 0.0;
  const auto r = train_reduced(d, 0.5, cfg);
  REQUIRE(r.rows.size() >= 2);
  for (const auto& row : r.rows) {
    CHECK(row.clean_acc == r.rows[0].clean_acc);
    CHECK(row.robust_acc == r.rows[0].robust_acc);
    CHECK(row.clean_loss == r.rows[0].clean_loss);
  }
  CHECK(r.mode == "mixed");
}

TEST_CASE("training is deterministic and writes the metrics CSV") {
  const auto d = small_data();
  const auto cfg = small_train(300);
  const auto a = train_reduced(d, 1.0, cfg);
  const auto b = train_reduced(d, 1.0, cfg);
  const std::string pa = "bench_a.csv", pb = "bench_b.csv";
  write_metrics_csv({a}, pa);
  write_metrics_csv({b}, pb);
  auto slurp = [](const std::string& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  };
  const std::string ca = slurp(pa);
  CHECK(ca == slurp(pb));
  CHECK(ca.rfind("step,mode,alpha,clean_acc,robust_acc,clean_loss\n", 0) == 0);
  std::remove(pa.c_str());
  std::remove(pb.c_str());
  CHECK(a.rows.front().step == 0);
  CHECK(a.rows.back().step == 300);
  for (const auto& r : a.rows) CHECK(r.robust_acc <= r.clean_acc);
  CHECK_FALSE(a.diverged);
  CHECK(run_metadata(d, cfg, {a})["runs"].size() == 1);
  CHECK_THROWS_AS(train_reduced(d, 1.5, cfg), InvalidArgument);
}

TEST_CASE("plateau ratio") {
  std::vector<double> s;
  for (int k = 0; k < 100; ++k) s.push_back(k < 20 ? (k % 2 ? 1.0 : 0.0) : 0.5 + (k % 2 ? 0.01 : -0.01));
  CHECK(plateau_ratio(s) == doctest::Approx(1e-4 / 0.25));
  CHECK(plateau_ratio({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0}) == doctest::Approx(1.0));
}

TEST_CASE("reduction comparison") {
  auto c = Config::preset("toy_affine");
  c.set("bench.T", "0");
  const auto z = compare_reduction(comparison_task(c));
  CHECK(z.T == 0);
  CHECK(z.poly_vs_exact == 0.0);
  CHECK(z.carleman_vs_poly == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(z.carleman_vs_exact == doctest::Approx(0.0).epsilon(1e-15));
  c.set("bench.T", "20");
  const auto r = compare_reduction(comparison_task(c));
  CHECK(r.T == 20);
  CHECK(r.within_bounds());
  CHECK(r.carleman_vs_poly <= r.carleman_vs_poly_bound);
  CHECK(r.to_json().contains("carleman_vs_exact"));
}
