#pragma once

#include "echosep/mu_separator.hpp"

namespace echosep {

struct EmRunConfig {
  ChannelKind channel_mode = ChannelKind::Echoes;
  int iterations = 300;
  double noise_floor = 1e-5;  // relative to per-frequency mixture power
  DictionaryMode dictionary_mode = DictionaryMode::SpeakerSpecific;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (noise_floor <= 0.0) throw ConfigError("noise_floor must be > 0");
  }
};

struct EmRunResult {
  std::vector<std::vector<double>> sources;  // image estimates at mic 0
  std::vector<double> cost_trace;            // negative log-likelihood
  std::vector<Mat> Z;
  std::vector<Mat> posterior_power;          // per source, F x N
};

// Exact negative log-likelihood sum_{fn} y^H Sigma^-1 y + log det Sigma.
// source_power[j] is the F x N variance model of source j, sigma2 the
// per-frequency noise variance.
inline double em_loglik(const std::vector<Spectrogram>& mixture,
                        const std::vector<CMat>& H,
                        const std::vector<Mat>& source_power,
                        const Eigen::VectorXd& sigma2) {
  const int M = static_cast<int>(mixture.size());
  const int J = static_cast<int>(source_power.size());
  const int F = mixture.front().n_bins();
  const int N = mixture.front().n_frames();
  double cost = 0.0;
  Eigen::VectorXcd y(M);
  for (int f = 0; f < F; ++f) {
    const CMat& Hf = H[f];
    for (int n = 0; n < N; ++n) {
      CMat sigma = CMat::Zero(M, M);
      for (int j = 0; j < J; ++j)
        sigma += std::max(source_power[j](f, n), kEps) *
                 (Hf.col(j) * Hf.col(j).adjoint());
      sigma += sigma2(f) * CMat::Identity(M, M);
      Eigen::LLT<CMat> llt(sigma);
      if (llt.info() != Eigen::Success)
        throw NumericalError("mixture covariance not positive definite");
      for (int m = 0; m < M; ++m) y(m) = mixture[m].data(f, n);
      cost += std::real(y.dot(llt.solve(y).eval()));
      double logdet = 0.0;
      for (int m = 0; m < M; ++m)
        logdet += 2.0 * std::log(std::real(llt.matrixLLT()(m, m)));
      cost += logdet;
    }
  }
  return cost;
}

inline EmRunResult separate_em(const std::vector<Spectrogram>& mixture,
                               const ChannelMatrix& channels,
                               const Dictionary& dict,
                               const EmRunConfig& config,
                               const std::vector<std::string>& speakers = {}) {
  config.validate();
  const int M = static_cast<int>(mixture.size());
  const int J = channels.n_sources();
  const int F = mixture.front().n_bins();
  const int N = mixture.front().n_frames();
  if (dict.n_bins() != F) throw InputError("dictionary bin count mismatch");
  if (channels.n_bins() != F) throw InputError("channel bin count mismatch");

  // per-frequency noise variance from the mixture power
  Eigen::VectorXd sigma2(F);
  double global_mean = 0.0;
  {
    Eigen::VectorXd mean_pow = Eigen::VectorXd::Zero(F);
    for (int m = 0; m < M; ++m) mean_pow += power(mixture[m]).rowwise().mean();
    mean_pow /= M;
    global_mean = mean_pow.mean();
    if (global_mean <= 0.0) throw InputError("all-zero mixture");
    sigma2 = config.noise_floor *
             mean_pow.cwiseMax(1e-3 * global_mean).eval();
  }

  std::vector<Mat> D = run_dictionaries(dict, config.dictionary_mode,
                                        speakers, J);
  std::vector<Mat> Z;
  Rng rng(config.seed);
  for (int j = 0; j < J; ++j) {
    Mat z(D[j].cols(), N);
    for (int a = 0; a < z.rows(); ++a)
      for (int n = 0; n < N; ++n)
        z(a, n) = rng.uniform(0.5, 1.5) * global_mean * F;
    Z.push_back(z);
  }
  std::vector<CMat> H = channels.H;
  const bool learn = channels.provenance == ChannelKind::LearnInit;

  EmRunResult result;
  std::vector<Mat> post_power(J, Mat::Zero(F, N));
  Eigen::VectorXcd y(M);

  for (int it = 0; it <= config.iterations; ++it) {
    const bool final_pass = it == config.iterations;
    std::vector<Mat> source_power(J);
    for (int j = 0; j < J; ++j)
      source_power[j] = (D[j] * Z[j]).array().max(kEps);

    double cost = 0.0;
    std::vector<CMat> xhat(J, CMat::Zero(F, N));
    std::vector<CMat> An, Bn;
    if (learn) {
      An.assign(F, CMat::Zero(M, J));
      Bn.assign(F, CMat::Zero(J, J));
    }
    for (int j = 0; j < J; ++j) post_power[j].setZero();

    for (int f = 0; f < F; ++f) {
      const CMat& Hf = H[f];
      Eigen::VectorXd p(J);
      for (int n = 0; n < N; ++n) {
        for (int j = 0; j < J; ++j) p(j) = source_power[j](f, n);
        CMat sigma = Hf * p.asDiagonal() * Hf.adjoint() +
                     sigma2(f) * CMat::Identity(M, M);
        Eigen::LLT<CMat> llt(sigma);
        if (llt.info() != Eigen::Success)
          throw NumericalError("covariance not PD at iteration " +
                               std::to_string(it));
        for (int m = 0; m < M; ++m) y(m) = mixture[m].data(f, n);
        const Eigen::VectorXcd siy = llt.solve(y);
        cost += std::real(y.dot(siy));
        for (int m = 0; m < M; ++m)
          cost += 2.0 * std::log(std::real(llt.matrixLLT()(m, m)));

        // Wiener gain G = Sigma_X H^H Sigma_Y^-1 applied implicitly
        const Eigen::VectorXcd hy = Hf.adjoint() * siy;  // J
        Eigen::VectorXcd x(J);
        for (int j = 0; j < J; ++j) x(j) = p(j) * hy(j);
        // posterior covariance diag: p_j - p_j h_j^H Sigma^-1 h_j p_j
        CMat sih = llt.solve(Hf);
        for (int j = 0; j < J; ++j) {
          const double var =
              p(j) - p(j) * std::real(Hf.col(j).dot(sih.col(j))) * p(j);
          post_power[j](f, n) = std::norm(x(j)) + std::max(var, 0.0);
          xhat[j](f, n) = x(j);
        }
        if (learn) {
          An[f] += y * x.adjoint();
          CMat postc = p.asDiagonal().toDenseMatrix().cast<cplx>() -
                       (p.asDiagonal() * Hf.adjoint()) * sih *
                           p.asDiagonal().toDenseMatrix().cast<cplx>();
          Bn[f] += x * x.adjoint() + postc;
        }
      }
    }
    if (!std::isfinite(cost))
      throw NumericalError("non-finite EM cost at iteration " +
                           std::to_string(it));
    if (!final_pass) result.cost_trace.push_back(cost);
    if (final_pass) {
      // final source estimates: Wiener posterior means mapped to mic 0
      for (int j = 0; j < J; ++j) {
        Spectrogram est = mixture[0];
        for (int f = 0; f < F; ++f)
          for (int n = 0; n < N; ++n)
            est.data(f, n) = H[f](0, j) * xhat[j](f, n);
        result.sources.push_back(istft(est));
      }
      result.posterior_power = post_power;
      break;
    }

    // M-step: one IS-MU step of Z_j toward the posterior power
    for (int j = 0; j < J; ++j) {
      Mat vhat = (D[j] * Z[j]).array().max(kEps);
      Mat num = D[j].transpose() *
                (post_power[j].array() * vhat.array().pow(-2.0)).matrix();
      Mat den = D[j].transpose() * vhat.array().inverse().matrix();
      Z[j] = (Z[j].array() * num.array() / den.array().max(kEps)).max(0.0);
    }
    if (learn) {
      for (int f = 0; f < F; ++f) {
        CMat B = Bn[f] + 1e-12 * Bn[f].norm() * CMat::Identity(J, J) +
                 kEps * CMat::Identity(J, J);
        H[f] = An[f] * B.inverse();
        // pin |H(0,j)| to 1, absorb the scale into the source variance
        for (int j = 0; j < J; ++j) {
          const cplx c = H[f](0, j);
          if (std::abs(c) > 1e-12) {
            H[f].col(j) /= c;
            D[j].row(f) *= std::norm(c);
          }
        }
      }
    }
  }
  result.Z = Z;
  return result;
}

}  // namespace echosep
