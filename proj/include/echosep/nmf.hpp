#pragma once

#include <numeric>

#include "echosep/common.hpp"

namespace echosep {

// Non-negative spectral dictionary with named per-speaker column blocks.
struct Dictionary {
  Mat D;  // F x A, columns sum to 1
  struct Block {
    std::string speaker;
    int start = 0;
    int count = 0;
  };
  std::vector<Block> blocks;
  std::string normalization = "l1-column";

  int n_bins() const { return static_cast<int>(D.rows()); }
  int n_atoms() const { return static_cast<int>(D.cols()); }

  Mat block_matrix(const std::string& speaker) const {
    for (const Block& b : blocks)
      if (b.speaker == speaker) return D.middleCols(b.start, b.count);
    throw InputError("no dictionary block for speaker " + speaker);
  }
};

inline double is_divergence(const Mat& V, const Mat& Vhat) {
  if ((Vhat.array() <= 0.0).any())
    throw NumericalError("is_divergence: nonpositive model entries");
  const auto ratio = (V.array().max(kEps)) / Vhat.array().max(kEps);
  return (ratio - ratio.log() - 1.0).sum();
}

inline double is_divergence(double v, double vhat) {
  if (vhat <= 0.0) throw NumericalError("is_divergence: nonpositive model");
  const double r = std::max(v, kEps) / std::max(vhat, kEps);
  return r - std::log(r) - 1.0;
}

// One pair of standard IS-NMF multiplicative updates (D then Z) in place.
inline void is_nmf_step(const Mat& V, Mat& D, Mat& Z, bool update_d = true) {
  Mat Vhat = (D * Z).array().max(kEps);
  if (update_d) {
    Mat num = (V.array() * Vhat.array().pow(-2.0)).matrix() * Z.transpose();
    Mat den = Vhat.array().inverse().matrix() * Z.transpose();
    D = (D.array() * num.array() / den.array().max(kEps)).max(kEps);
    Vhat = (D * Z).array().max(kEps);
  }
  Mat num = D.transpose() * (V.array() * Vhat.array().pow(-2.0)).matrix();
  Mat den = D.transpose() * Vhat.array().inverse().matrix();
  Z = (Z.array() * num.array() / den.array().max(kEps)).max(0.0);
}

// Normalizes dictionary columns to unit sum, pushing the scale into Z.
inline void normalize_columns(Mat& D, Mat& Z) {
  for (int a = 0; a < D.cols(); ++a) {
    const double s = D.col(a).sum();
    if (s <= 0.0) continue;
    D.col(a) /= s;
    Z.row(a) *= s;
  }
  D = D.array().max(kEps);
}

struct TrainedSpeaker {
  std::string speaker;
  Mat D;
  std::vector<double> cost_trace;
};

// Per-speaker IS-NMF fit of the concatenated power spectra. Deterministic
// positive initialization from the seed.
inline TrainedSpeaker train_speaker_dictionary(const std::string& speaker,
                                               const std::vector<Mat>& spectra,
                                               int atoms, int iters,
                                               std::uint64_t seed) {
  if (spectra.empty()) throw InputError("no training spectra for " + speaker);
  if (atoms < 1) throw ConfigError("atoms_per_speaker must be >= 1");
  const int F = static_cast<int>(spectra.front().rows());
  int N = 0;
  for (const Mat& s : spectra) {
    if (s.rows() != F) throw InputError("inconsistent bin count in spectra");
    N += static_cast<int>(s.cols());
  }
  Mat V(F, N);
  int off = 0;
  for (const Mat& s : spectra) {
    V.middleCols(off, s.cols()) = s;
    off += static_cast<int>(s.cols());
  }
  const double scale = std::max(V.mean(), kEps);
  Rng rng(seed);
  Mat D(F, atoms), Z(atoms, N);
  for (int f = 0; f < F; ++f)
    for (int a = 0; a < atoms; ++a) D(f, a) = rng.uniform(0.5, 1.5) * scale;
  for (int a = 0; a < atoms; ++a)
    for (int n = 0; n < N; ++n) Z(a, n) = rng.uniform(0.5, 1.5);
  TrainedSpeaker out;
  out.speaker = speaker;
  for (int it = 0; it < iters; ++it) {
    is_nmf_step(V, D, Z);
    out.cost_trace.push_back(is_divergence(V, (D * Z).array().max(kEps)));
  }
  normalize_columns(D, Z);
  out.D = D;
  return out;
}

inline Dictionary train_dictionary(
    const std::vector<std::pair<std::string, std::vector<Mat>>>& per_speaker,
    int atoms_per_speaker, int iters, std::uint64_t seed) {
  if (per_speaker.empty()) throw InputError("empty training set");
  Dictionary dict;
  const int F = static_cast<int>(per_speaker.front().second.front().rows());
  dict.D.resize(F, atoms_per_speaker * static_cast<int>(per_speaker.size()));
  int start = 0;
  int idx = 0;
  for (const auto& [speaker, spectra] : per_speaker) {
    TrainedSpeaker ts = train_speaker_dictionary(speaker, spectra,
                                                 atoms_per_speaker, iters,
                                                 seed + 77 * idx++);
    dict.D.middleCols(start, atoms_per_speaker) = ts.D;
    dict.blocks.push_back({speaker, start, atoms_per_speaker});
    start += atoms_per_speaker;
  }
  return dict;
}

// Multichannel MU state: per-source dictionary view and activations, shared
// per-mic observations, channel magnitudes Q as F-vectors per (j, m).
struct MuState {
  std::vector<Mat> V;             // per mic, F x N
  std::vector<Mat> D;             // per source, F x A_j
  std::vector<Mat> Z;             // per source, A_j x N
  std::vector<std::vector<Eigen::VectorXd>> Q;  // [j][m], size F
};

inline Mat mu_model_vhat(const MuState& s, int m) {
  Mat vhat = Mat::Zero(s.V[m].rows(), s.V[m].cols());
  for (std::size_t j = 0; j < s.D.size(); ++j)
    vhat += s.Q[j][m].asDiagonal() * s.D[j] * s.Z[j];
  return vhat.array().max(kEps);
}

inline double mu_cost(const MuState& s, double gamma) {
  double c = 0.0;
  for (std::size_t m = 0; m < s.V.size(); ++m)
    c += is_divergence(s.V[m], mu_model_vhat(s, static_cast<int>(m)));
  for (const Mat& z : s.Z) c += gamma * z.sum();
  return c;
}

// Regularized MU step on the activations of source j, with the model
// recomputed from the current state.
inline void mu_update_activations(MuState& s, int j, double gamma) {
  const int A = static_cast<int>(s.Z[j].rows());
  const int N = static_cast<int>(s.Z[j].cols());
  Mat num = Mat::Zero(A, N), den = Mat::Zero(A, N);
  for (std::size_t m = 0; m < s.V.size(); ++m) {
    Mat vhat = mu_model_vhat(s, static_cast<int>(m));
    Mat QD = s.Q[j][m].asDiagonal() * s.D[j];
    num += QD.transpose() *
           (s.V[m].array() * vhat.array().pow(-2.0)).matrix();
    den += QD.transpose() * vhat.array().inverse().matrix();
  }
  den.array() += gamma;
  s.Z[j] = (s.Z[j].array() * num.array() / den.array().max(kEps)).max(0.0);
}

// MU step on the channel magnitudes of source j (learn mode), followed by
// the per-source renormalization sum_{f,m} q = F * M with the inverse scale
// pushed into Z_j.
inline void mu_update_channel(MuState& s, int j) {
  const int M = static_cast<int>(s.V.size());
  const int F = static_cast<int>(s.V[0].rows());
  Mat P = s.D[j] * s.Z[j];  // F x N
  for (int m = 0; m < M; ++m) {
    Mat vhat = mu_model_vhat(s, m);
    for (int f = 0; f < F; ++f) {
      double num = 0.0, den = 0.0;
      for (int n = 0; n < P.cols(); ++n) {
        const double p = P(f, n);
        const double vh = vhat(f, n);
        num += p * s.V[m](f, n) / (vh * vh);
        den += p / vh;
      }
      const double factor = den > kEps ? num / den : 1.0;
      s.Q[j][m](f) *= factor;
    }
  }
  double total = 0.0;
  for (int m = 0; m < M; ++m) total += s.Q[j][m].sum();
  if (total > kEps) {
    const double scale = (static_cast<double>(F) * M) / total;
    for (int m = 0; m < M; ++m) s.Q[j][m] *= scale;
    s.Z[j] /= scale;
  }
}

}  // namespace echosep
