#include <doctest.h>

#include <cmath>
#include <set>

#include "semres/datagen.hpp"
#include "semres/oversamplers.hpp"
#include "test_support.hpp"

using namespace semres;

namespace {

trainer::TrainConfig micro_diffusion() {
  trainer::TrainConfig cfg;
  cfg.iterations = 200;
  cfg.T = 20;
  cfg.beta_start = 1e-3;
  cfg.beta_end = 0.2;
  cfg.arch = trainer::Arch::semst;
  cfg.semst.d_hidden = 16;
  cfg.semst.n_blocks = 1;
  cfg.semst.n_tokens = 4;
  cfg.semst.n_heads = 2;
  cfg.mlp.hidden = {16};
  return cfg;
}

}  // namespace

TEST_CASE("smote emits convex combinations of neighbor pairs") {
  Rng rng(17);
  nn::Matrix minority = oracle::random_matrix(12, 3, rng, 0.2);
  for (std::size_t i = 0; i < minority.rows(); ++i)
    for (std::size_t j = 0; j < minority.cols(); ++j)
      minority(i, j) = std::clamp(0.5 + minority(i, j), 0.0, 1.0);

  oversample::SmoteProvenance prov;
  const nn::Matrix synth = oversample::smote(minority, 5, 30, 77, &prov);
  REQUIRE(synth.rows() == 30);
  REQUIRE(prov.base.size() == 30);

  double lo[3] = {1e9, 1e9, 1e9}, hi[3] = {-1e9, -1e9, -1e9};
  for (std::size_t i = 0; i < minority.rows(); ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      lo[j] = std::min(lo[j], minority(i, j));
      hi[j] = std::max(hi[j], minority(i, j));
    }

  for (std::size_t s = 0; s < synth.rows(); ++s) {
    CHECK(prov.lambda[s] >= 0.0);
    CHECK(prov.lambda[s] <= 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
      const double expect = minority(prov.base[s], j) +
                            prov.lambda[s] * (minority(prov.neighbor[s], j) - minority(prov.base[s], j));
      CHECK(std::abs(synth(s, j) - expect) < 1e-9);
      // Convex combinations stay inside the minority bounding box.
      CHECK(synth(s, j) >= lo[j] - 1e-12);
      CHECK(synth(s, j) <= hi[j] + 1e-12);
    }
  }

  // Two-point minority: every synthetic row sits on the segment.
  nn::Matrix segment(2, 2);
  segment(0, 0) = 0.0;
  segment(0, 1) = 0.0;
  segment(1, 0) = 1.0;
  segment(1, 1) = 1.0;
  const nn::Matrix on_segment = oversample::smote(segment, 5, 10, 3);
  for (std::size_t s = 0; s < on_segment.rows(); ++s)
    CHECK(on_segment(s, 0) == doctest::Approx(on_segment(s, 1)).epsilon(1e-12));

  CHECK_THROWS_AS(oversample::smote(nn::Matrix(1, 2, 0.5), 5, 3, 1), std::invalid_argument);
}

TEST_CASE("smote is deterministic per seed") {
  Rng rng(18);
  nn::Matrix minority = oracle::random_matrix(8, 2, rng, 0.1);
  const nn::Matrix a = oversample::smote(minority, 3, 12, 5);
  const nn::Matrix b = oversample::smote(minority, 3, 12, 5);
  const nn::Matrix c = oversample::smote(minority, 3, 12, 6);
  bool equal = true, differs = false;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      equal = equal && a(i, j) == b(i, j);
      differs = differs || a(i, j) != c(i, j);
    }
  CHECK(equal);
  CHECK(differs);
}

TEST_CASE("adasyn concentrates on boundary minority rows") {
  // Minority row 0 sits inside the majority blob; rows 1..6 form a far-away
  // pure minority cluster.
  nn::Matrix x(17, 2);
  std::vector<std::uint8_t> y(17, 0);
  x(0, 0) = 0.0;
  x(0, 1) = 0.0;
  y[0] = 1;
  for (int i = 1; i <= 6; ++i) {
    x(i, 0) = 10.0 + 0.1 * i;
    x(i, 1) = 10.0 - 0.1 * i;
    y[i] = 1;
  }
  for (int i = 7; i < 17; ++i) {
    x(i, 0) = 0.3 * (i - 7);
    x(i, 1) = -0.2 * (i - 7);
  }

  bool fallback = true;
  std::vector<std::size_t> alloc;
  const nn::Matrix synth = oversample::adasyn(x, y, 5, 20, 99, &fallback, &alloc);
  CHECK_FALSE(fallback);
  REQUIRE(synth.rows() == 20);
  // Row 0 is the only minority row with majority neighbors, so the whole
  // budget lands on it.
  REQUIRE(alloc.size() == 7);
  CHECK(alloc[0] == 20);
  for (std::size_t m = 1; m < alloc.size(); ++m) CHECK(alloc[m] == 0);

  // Interior-only minority: fall back to uniform allocation.
  nn::Matrix far(12, 2);
  std::vector<std::uint8_t> fy(12, 0);
  for (int i = 0; i < 6; ++i) {
    far(i, 0) = 100.0 + i;
    far(i, 1) = 100.0 - i;
    fy[i] = 1;
  }
  for (int i = 6; i < 12; ++i) {
    far(i, 0) = -100.0 - i;
    far(i, 1) = -100.0 + i;
  }
  bool fb = false;
  const nn::Matrix uniform = oversample::adasyn(far, fy, 3, 13, 1, &fb);
  CHECK(fb);
  CHECK(uniform.rows() == 13);
}

TEST_CASE("adasyn allocations sum to the requested count and follow the weights") {
  Rng rng(23);
  for (const std::size_t count : {1UL, 7UL, 40UL, 111UL}) {
    nn::Matrix x = oracle::random_matrix(30, 3, rng);
    std::vector<std::uint8_t> y(30, 0);
    for (int i = 0; i < 9; ++i) y[i] = 1;
    std::vector<std::size_t> alloc;
    const nn::Matrix synth = oversample::adasyn(x, y, 5, count, 7, nullptr, &alloc);
    CHECK(synth.rows() == count);
    std::size_t total = 0;
    for (const std::size_t a : alloc) total += a;
    CHECK(total == count);
  }
}

TEST_CASE("balance dispatches and fills to the majority count") {
  const dataio::Dataset ds = datagen::generate(datagen::shape_by_name("abalone9-18"), 7);

  oversample::OversampleRequest req;
  req.data = &ds;
  req.train_idx.resize(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) req.train_idx[i] = i;
  req.seed = 11;

  req.method = "smote";
  const oversample::BalancedTrainSet smoted = oversample::balance(req);
  std::size_t n_min = 0, n_maj = 0, n_synth = 0;
  for (std::size_t i = 0; i < smoted.y.size(); ++i) {
    (smoted.y[i] ? n_min : n_maj)++;
    n_synth += smoted.synthetic[i];
  }
  CHECK(n_synth == 689 - 42);
  CHECK(n_min == 689);
  CHECK(n_maj == 689);
  // Synthetic rows carry the minority label and decode to schema-valid rows.
  for (std::size_t i = smoted.n_original; i < smoted.rows.size(); ++i) {
    CHECK(smoted.y[i] == 1);
    CHECK(smoted.synthetic[i] == 1);
    const double cat = smoted.rows[i][0];  // first feature is categorical
    CHECK((cat == 0.0 || cat == 1.0 || cat == 2.0));
  }

  req.method = "none";
  const oversample::BalancedTrainSet plain = oversample::balance(req);
  CHECK(plain.rows.size() == ds.n_rows());
  CHECK(plain.n_original == ds.n_rows());

  req.method = "borderline";
  CHECK_THROWS_AS(oversample::balance(req), std::invalid_argument);
}

TEST_CASE("balance is the identity on already balanced splits") {
  datagen::DatasetShape shape{"tiny", 3, 12, 12, 0};
  const dataio::Dataset ds = datagen::generate(shape, 3);
  oversample::OversampleRequest req;
  req.data = &ds;
  req.train_idx.resize(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) req.train_idx[i] = i;
  req.method = "semres_ddpm";  // no deficit, so no training happens
  req.diffusion = micro_diffusion();
  const oversample::BalancedTrainSet out = oversample::balance(req);
  CHECK(out.rows.size() == 24);
  for (const auto s : out.synthetic) CHECK(s == 0);
}

TEST_CASE("ddpm oversampling fills the deficit with decodable rows") {
  datagen::DatasetShape shape{"tiny-imb", 4, 12, 30, 1};
  const dataio::Dataset ds = datagen::generate(shape, 5);
  oversample::OversampleRequest req;
  req.data = &ds;
  req.train_idx.resize(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) req.train_idx[i] = i;
  req.seed = 21;
  req.diffusion = micro_diffusion();

  for (const char* method : {"semres_ddpm", "mlp_ddpm"}) {
    req.method = method;
    const oversample::BalancedTrainSet out = oversample::balance(req);
    std::size_t n_min = 0, n_maj = 0;
    for (const auto label : out.y) (label ? n_min : n_maj)++;
    CHECK(n_min == 30);
    CHECK(n_maj == 30);
    CHECK(out.rows.size() == 60);
    // Encoded synthetic rows are clamped to the unit box.
    for (std::size_t i = out.n_original; i < out.x.rows(); ++i)
      for (std::size_t j = 0; j < out.x.cols(); ++j) {
        CHECK(out.x(i, j) >= 0.0);
        CHECK(out.x(i, j) <= 1.0);
      }
    // Categorical cells decode to declared categories.
    for (std::size_t i = out.n_original; i < out.rows.size(); ++i) {
      const double cat = out.rows[i][0];
      CHECK((cat == 0.0 || cat == 1.0 || cat == 2.0));
    }
  }
}
