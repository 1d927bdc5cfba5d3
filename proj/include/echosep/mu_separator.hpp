#pragma once

#include "echosep/echo_model.hpp"
#include "echosep/nmf.hpp"
#include "echosep/stft.hpp"

namespace echosep {

enum class DictionaryMode { Universal, SpeakerSpecific };

struct MuRunConfig {
  ChannelKind channel_mode = ChannelKind::Echoes;
  double gamma = 0.0;
  int iterations = 200;
  DictionaryMode dictionary_mode = DictionaryMode::Universal;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
  }
};

struct MuRunResult {
  std::vector<std::vector<double>> sources;  // per source, reference mic
  std::vector<double> cost_trace;
  std::vector<Mat> Z;                        // final activations per source
  // per source, per mic masks retained as spectrograms for inspection
  std::vector<std::vector<Mat>> masks;       // [j][m], F x N
};

// Source dictionaries for this run: universal mode hands every source the
// full dictionary, speaker-specific mode one block per source.
inline std::vector<Mat> run_dictionaries(const Dictionary& dict,
                                         DictionaryMode mode,
                                         const std::vector<std::string>& speakers,
                                         int n_sources) {
  std::vector<Mat> out;
  if (mode == DictionaryMode::Universal) {
    for (int j = 0; j < n_sources; ++j) out.push_back(dict.D);
  } else {
    if (static_cast<int>(speakers.size()) != n_sources)
      throw ConfigError("speaker-specific mode needs one speaker per source");
    for (const std::string& s : speakers) out.push_back(dict.block_matrix(s));
  }
  return out;
}

// Applies each source's mask at the reference mic and resynthesizes.
inline std::vector<std::vector<double>> select_mask_output(
    const std::vector<std::vector<Mat>>& masks,
    const std::vector<Spectrogram>& mixture, int reference_mic) {
  if (reference_mic < 0 ||
      reference_mic >= static_cast<int>(mixture.size()))
    throw InputError("reference mic index out of range");
  std::vector<std::vector<double>> out;
  for (const auto& per_mic : masks) {
    Spectrogram est = mixture[reference_mic];
    est.data = mixture[reference_mic].data.cwiseProduct(
        per_mic[reference_mic].cast<cplx>());
    out.push_back(istft(est));
  }
  return out;
}

inline MuRunResult separate_mu(const std::vector<Spectrogram>& mixture,
                               const ChannelMatrix& channels,
                               const Dictionary& dict,
                               const MuRunConfig& config,
                               const std::vector<std::string>& speakers = {}) {
  config.validate();
  const int M = static_cast<int>(mixture.size());
  const int J = channels.n_sources();
  const int F = mixture.front().n_bins();
  const int N = mixture.front().n_frames();
  if (dict.n_bins() != F) throw InputError("dictionary bin count mismatch");
  if (channels.n_bins() != F) throw InputError("channel bin count mismatch");

  MuState s;
  for (int m = 0; m < M; ++m) s.V.push_back(power(mixture[m]));
  double vsum = 0.0;
  for (const Mat& v : s.V) vsum += v.sum();
  if (vsum <= 0.0) throw InputError("all-zero mixture");

  s.D = run_dictionaries(dict, config.dictionary_mode, speakers, J);
  Rng rng(config.seed);
  const double vscale = vsum / (M * F * N);
  for (int j = 0; j < J; ++j) {
    Mat Z(s.D[j].cols(), N);
    for (int a = 0; a < Z.rows(); ++a)
      for (int n = 0; n < N; ++n) Z(a, n) = rng.uniform(0.5, 1.5) * vscale * F;
    s.Z.push_back(Z);
  }
  s.Q.assign(J, std::vector<Eigen::VectorXd>(M));
  for (int j = 0; j < J; ++j)
    for (int m = 0; m < M; ++m) {
      Eigen::VectorXd q(F);
      for (int f = 0; f < F; ++f) q(f) = channels.Q[f](m, j);
      s.Q[j][m] = q;
    }

  const bool learn = channels.provenance == ChannelKind::LearnInit;
  MuRunResult result;
  for (int it = 0; it < config.iterations; ++it) {
    for (int j = 0; j < J; ++j) mu_update_activations(s, j, config.gamma);
    if (learn)
      for (int j = 0; j < J; ++j) mu_update_channel(s, j);
    const double cost = mu_cost(s, config.gamma);
    if (!std::isfinite(cost))
      throw NumericalError("non-finite MU cost at iteration " +
                           std::to_string(it));
    result.cost_trace.push_back(cost);
  }

  // Wiener-style power-ratio masks per mic; partition of unity across j
  result.masks.assign(J, std::vector<Mat>(M));
  std::vector<Mat> vhat(M);
  for (int m = 0; m < M; ++m) vhat[m] = mu_model_vhat(s, m);
  for (int j = 0; j < J; ++j)
    for (int m = 0; m < M; ++m) {
      Mat contrib = s.Q[j][m].asDiagonal() * s.D[j] * s.Z[j];
      result.masks[j][m] = contrib.array() / vhat[m].array();
    }
  result.Z = s.Z;
  result.sources = select_mask_output(result.masks, mixture, 0);
  return result;
}

}  // namespace echosep
