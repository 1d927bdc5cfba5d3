#include <doctest.h>

#include "echosep/nmf.hpp"

using namespace echosep;

namespace {

Mat random_positive(int rows, int cols, std::uint64_t seed, double lo = 0.1,
                    double hi = 2.0) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST_CASE("IS divergence closed-form values") {
  CHECK(is_divergence(2.0, 1.0) ==
        doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
  CHECK(is_divergence(1.0, 1.0) == doctest::Approx(0.0));
  CHECK(is_divergence(1.0, 4.0) ==
        doctest::Approx(0.25 + std::log(4.0) - 1.0).epsilon(1e-12));
  CHECK_THROWS_AS(is_divergence(1.0, 0.0), NumericalError);
}

TEST_CASE("IS divergence is scale invariant and zero only at equality") {
  Mat v = random_positive(20, 15, 1);
  Mat vh = random_positive(20, 15, 2);
  const double d = is_divergence(v, vh);
  CHECK(d > 0.0);
  CHECK(is_divergence(Mat(7.3 * v), Mat(7.3 * vh)) ==
        doctest::Approx(d).epsilon(1e-10));
  CHECK(is_divergence(v, v) == doctest::Approx(0.0).epsilon(1e-12));
  // elementwise sum oracle
  double acc = 0.0;
  for (int r = 0; r < v.rows(); ++r)
    for (int c = 0; c < v.cols(); ++c) acc += is_divergence(v(r, c), vh(r, c));
  CHECK(acc == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("IS-NMF fits an exactly low-rank matrix to near machine precision") {
  Mat Dtrue = random_positive(30, 3, 10);
  Mat Ztrue = random_positive(3, 40, 11);
  Mat V = Dtrue * Ztrue;
  Mat D = random_positive(30, 3, 12);
  Mat Z = random_positive(3, 40, 13);
  for (int it = 0; it < 2000; ++it) is_nmf_step(V, D, Z);
  CHECK(is_divergence(V, Mat((D * Z).array().max(kEps))) < 1e-6);
}

TEST_CASE("IS-NMF cost is nonincreasing") {
  Mat V = random_positive(50, 60, 20).array() + 0.01;
  Mat D = random_positive(50, 5, 21);
  Mat Z = random_positive(5, 60, 22);
  double prev = is_divergence(V, Mat((D * Z).array().max(kEps)));
  for (int it = 0; it < 100; ++it) {
    is_nmf_step(V, D, Z);
    const double cost = is_divergence(V, Mat((D * Z).array().max(kEps)));
    CHECK(cost <= prev + 1e-9 * std::abs(prev));
    prev = cost;
  }
}

TEST_CASE("column normalization preserves the product") {
  Mat D = random_positive(12, 4, 30);
  Mat Z = random_positive(4, 9, 31);
  Mat before = D * Z;
  normalize_columns(D, Z);
  CHECK((D * Z - before).cwiseAbs().maxCoeff() < 1e-12);
  for (int a = 0; a < D.cols(); ++a)
    CHECK(D.col(a).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("speaker training returns normalized atoms and decreasing cost") {
  std::vector<Mat> spectra = {random_positive(64, 30, 40),
                              random_positive(64, 25, 41)};
  TrainedSpeaker ts = train_speaker_dictionary("spk", spectra, 5, 60, 7);
  CHECK(ts.D.rows() == 64);
  CHECK(ts.D.cols() == 5);
  for (int a = 0; a < 5; ++a)
    CHECK(ts.D.col(a).sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ts.D.minCoeff() > 0.0);
  REQUIRE(ts.cost_trace.size() == 60);
  for (std::size_t i = 1; i < ts.cost_trace.size(); ++i)
    CHECK(ts.cost_trace[i] <=
          ts.cost_trace[i - 1] + 1e-9 * std::abs(ts.cost_trace[i - 1]));
  // deterministic in the seed
  TrainedSpeaker again = train_speaker_dictionary("spk", spectra, 5, 60, 7);
  CHECK((ts.D - again.D).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(train_speaker_dictionary("spk", {}, 5, 10, 1), InputError);
  CHECK_THROWS_AS(train_speaker_dictionary("spk", spectra, 0, 10, 1),
                  ConfigError);
}

TEST_CASE("multi-speaker dictionary exposes per-speaker blocks") {
  std::vector<std::pair<std::string, std::vector<Mat>>> data = {
      {"a", {random_positive(32, 20, 50)}},
      {"b", {random_positive(32, 20, 51)}},
      {"c", {random_positive(32, 20, 52)}}};
  Dictionary dict = train_dictionary(data, 4, 40, 9);
  CHECK(dict.n_bins() == 32);
  CHECK(dict.n_atoms() == 12);
  REQUIRE(dict.blocks.size() == 3);
  CHECK(dict.blocks[1].speaker == "b");
  CHECK(dict.blocks[1].start == 4);
  Mat blk = dict.block_matrix("b");
  CHECK((blk - dict.D.middleCols(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(dict.block_matrix("zeta"), InputError);
}

TEST_CASE("single-source single-mic MU activation update matches plain IS-NMF") {
  // with J=1, M=1, Q = 1 and gamma = 0, mu_update_activations must reduce
  // to the unregularized Z update of is_nmf_step
  const int F = 24, A = 3, N = 18;
  Mat V = random_positive(F, N, 60);
  Mat D = random_positive(F, A, 61);
  Mat Z0 = random_positive(A, N, 62);

  MuState s;
  s.V = {V};
  s.D = {D};
  s.Z = {Z0};
  s.Q = {{Eigen::VectorXd::Ones(F)}};
  mu_update_activations(s, 0, 0.0);

  Mat Dref = D, Zref = Z0;
  is_nmf_step(V, Dref, Zref, /*update_d=*/false);
  CHECK((s.Z[0] - Zref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("MU cost with regularization is nonincreasing over alternating updates") {
  const int F = 40, N = 25;
  Rng rng(70);
  MuState s;
  s.V = {random_positive(F, N, 71).array() + 0.05,
         random_positive(F, N, 72).array() + 0.05};
  s.D = {random_positive(F, 4, 73), random_positive(F, 4, 74)};
  s.Z = {random_positive(4, N, 75), random_positive(4, N, 76)};
  for (int j = 0; j < 2; ++j) {
    s.Q.push_back({});
    for (int m = 0; m < 2; ++m)
      s.Q[j].push_back(random_positive(F, 1, 100 + 10 * j + m).col(0));
  }
  const double gamma = 0.05;
  double prev = mu_cost(s, gamma);
  for (int it = 0; it < 40; ++it) {
    for (int j = 0; j < 2; ++j) mu_update_activations(s, j, gamma);
    const double cost = mu_cost(s, gamma);
    CHECK(cost <= prev + 1e-8 * std::abs(prev));
    prev = cost;
  }
}

TEST_CASE("channel MU update recovers a known Q on synthetic data") {
  // V generated exactly as diag(q_true) D Z per mic; starting from flat Q
  // the channel update should converge toward q_true up to the global
  // renormalization
  const int F = 30, N = 40;
  Mat D = random_positive(F, 3, 80);
  Mat Z = random_positive(3, N, 81);
  Eigen::VectorXd q_true(F);
  Rng rng(82);
  for (int f = 0; f < F; ++f) q_true(f) = rng.uniform(0.2, 3.0);
  // normalize so sum q = F (M = 1), matching the update's convention
  q_true *= F / q_true.sum();
  MuState s;
  s.V = {q_true.asDiagonal() * D * Z};
  s.D = {D};
  s.Z = {Z};
  s.Q = {{Eigen::VectorXd::Ones(F)}};
  for (int it = 0; it < 200; ++it) {
    mu_update_channel(s, 0);
    mu_update_activations(s, 0, 0.0);
  }
  // compare shapes after aligning scale
  Eigen::VectorXd q = s.Q[0][0];
  q *= q_true.sum() / q.sum();
  CHECK((q - q_true).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(s.Q[0][0].sum() == doctest::Approx(static_cast<double>(F)).epsilon(1e-9));
}

TEST_CASE("exact model is a fixed point of the MU updates") {
  const int F = 20, N = 15;
  Mat D = random_positive(F, 2, 90);
  Mat Z = random_positive(2, N, 91);
  MuState s;
  s.V = {D * Z};
  s.D = {D};
  s.Z = {Z};
  s.Q = {{Eigen::VectorXd::Ones(F)}};
  Mat z_before = s.Z[0];
  mu_update_activations(s, 0, 0.0);
  CHECK((s.Z[0] - z_before).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::VectorXd q_before = s.Q[0][0];
  mu_update_channel(s, 0);
  CHECK((s.Q[0][0] - q_before).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("model matrix shape matches the STFT geometry") {
  const int F = 1025, N = 500;
  MuState s;
  s.V = {Mat::Ones(F, N)};
  s.D = {Mat::Ones(F, 10) / F};
  s.Z = {Mat::Ones(10, N)};
  s.Q = {{Eigen::VectorXd::Ones(F)}};
  Mat vhat = mu_model_vhat(s, 0);
  CHECK(vhat.rows() == F);
  CHECK(vhat.cols() == N);
  CHECK(vhat(0, 0) == doctest::Approx(10.0 / F).epsilon(1e-12));
}
