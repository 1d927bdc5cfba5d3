#pragma once

#include "echosep/rir.hpp"

namespace echosep {

// Echo list for one (source, mic) pair. The direct path is pinned to delay
// zero; echo delays are relative to it.
struct EchoChannel {
  std::vector<double> delays_s;    // ascending, delays_s[0] == 0
  std::vector<double> amplitudes;  // constant alpha per path
};

enum class ChannelKind { Echoes, LearnInit, Anechoic, NoEchoes, ExactAnechoic };

inline std::string to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::Echoes: return "echoes";
    case ChannelKind::LearnInit: return "learn-init";
    case ChannelKind::Anechoic: return "anechoic";
    case ChannelKind::NoEchoes: return "no-echoes";
    case ChannelKind::ExactAnechoic: return "exact-anechoic";
  }
  return "?";
}

// Frequency-domain channel model for all (mic, source) pairs.
// H[f](m, j) complex, Q[f](m, j) = |H|^2.
struct ChannelMatrix {
  std::vector<CMat> H;  // F entries of M x J
  std::vector<Mat> Q;
  ChannelKind provenance = ChannelKind::NoEchoes;
  int n_echoes = 0;
  std::vector<std::string> warnings;

  int n_bins() const { return static_cast<int>(H.size()); }
  int n_mics() const { return static_cast<int>(H.front().rows()); }
  int n_sources() const { return static_cast<int>(H.front().cols()); }

  void fill_q_from_h() {
    Q.resize(H.size());
    for (std::size_t f = 0; f < H.size(); ++f) Q[f] = H[f].array().abs2();
  }
};

struct ImageMic {
  Vec3 position;
  double relative_delay_s = 0.0;  // vs the direct source-mic path
  int first_wall = -1;
};

// Reflects each microphone across the walls and keeps the K images nearest
// to that microphone. Relative delays measured from the source.
inline std::vector<std::vector<ImageMic>> k_nearest_image_mics(
    const Room& room, const std::vector<Vec3>& mics, const Vec3& source,
    int K, int search_order = 3) {
  if (K < 0) throw ConfigError("K must be >= 0");
  std::vector<std::vector<ImageMic>> per_mic;
  for (const Vec3& mic : mics) {
    auto images = enumerate_images(room, mic, search_order, source);
    // drop the order-0 entry (the microphone itself)
    std::vector<const ImageSource*> candidates;
    for (const ImageSource& img : images)
      if (img.order > 0) candidates.push_back(&img);
    if (static_cast<int>(candidates.size()) < K)
      throw GeometryError("only " + std::to_string(candidates.size()) +
                          " image microphones available, requested " +
                          std::to_string(K));
    std::sort(candidates.begin(), candidates.end(),
              [&](const ImageSource* a, const ImageSource* b) {
                const double da = (a->position - mic).norm();
                const double db = (b->position - mic).norm();
                if (std::abs(da - db) > 1e-12) return da < db;
                return a->wall_sequence.front() < b->wall_sequence.front();
              });
    const double direct = (source - mic).norm();
    std::vector<ImageMic> kept;
    for (int k = 0; k < K; ++k) {
      ImageMic im;
      im.position = candidates[k]->position;
      im.relative_delay_s =
          ((source - im.position).norm() - direct) / room.speed_of_sound;
      im.first_wall = candidates[k]->wall_sequence.front();
      kept.push_back(im);
    }
    std::sort(kept.begin(), kept.end(), [](const ImageMic& a, const ImageMic& b) {
      return a.relative_delay_s < b.relative_delay_s;
    });
    per_mic.push_back(std::move(kept));
  }
  return per_mic;
}

// echoes[m][j] holds the echo list for source j at mic m.
inline ChannelMatrix build_channels(
    const std::vector<std::vector<EchoChannel>>& echoes, int n_bins,
    int frame_size, double sample_rate) {
  const int M = static_cast<int>(echoes.size());
  const int J = static_cast<int>(echoes.front().size());
  ChannelMatrix cm;
  cm.provenance = ChannelKind::Echoes;
  cm.H.assign(n_bins, CMat::Zero(M, J));
  const double frame_dur = frame_size / sample_rate;
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < J; ++j) {
      const EchoChannel& ec = echoes[m][j];
      if (ec.delays_s.empty() || std::abs(ec.delays_s.front()) > 1e-15)
        throw ConfigError("first delay must be 0 (direct path reference)");
      cm.n_echoes =
          std::max(cm.n_echoes, static_cast<int>(ec.delays_s.size()) - 1);
      for (std::size_t k = 0; k < ec.delays_s.size(); ++k) {
        if (ec.delays_s[k] >= frame_dur)
          cm.warnings.push_back("echo delay exceeds frame duration (m=" +
                                std::to_string(m) + ", j=" + std::to_string(j) +
                                ")");
        for (int f = 0; f < n_bins; ++f) {
          const double omega = 2.0 * kPi * f * sample_rate / frame_size;
          cm.H[f](m, j) += ec.amplitudes[k] *
                           std::exp(cplx(0.0, -omega * ec.delays_s[k]));
        }
      }
    }
  cm.fill_q_from_h();
  return cm;
}

// Channel from the K nearest image microphones, direct path at delay 0,
// constant amplitude alpha on every path.
inline ChannelMatrix echo_channels(const Room& room,
                                   const std::vector<Vec3>& mics,
                                   const std::vector<Vec3>& sources, int K,
                                   int n_bins, int frame_size,
                                   double alpha = 1.0, int search_order = 3) {
  const int M = static_cast<int>(mics.size());
  const int J = static_cast<int>(sources.size());
  std::vector<std::vector<EchoChannel>> echoes(
      M, std::vector<EchoChannel>(J));
  for (int j = 0; j < J; ++j) {
    auto per_mic = k_nearest_image_mics(room, mics, sources[j], K, search_order);
    for (int m = 0; m < M; ++m) {
      EchoChannel ec;
      ec.delays_s.push_back(0.0);
      ec.amplitudes.push_back(alpha);
      for (const ImageMic& im : per_mic[m]) {
        ec.delays_s.push_back(im.relative_delay_s);
        ec.amplitudes.push_back(alpha);
      }
      echoes[m][j] = std::move(ec);
    }
  }
  ChannelMatrix cm = build_channels(echoes, n_bins, frame_size, room.sample_rate);
  cm.provenance = K == 0 ? ChannelKind::NoEchoes : ChannelKind::Echoes;
  cm.n_echoes = K;
  return cm;
}

inline ChannelMatrix baseline_channels(ChannelKind kind, int n_bins, int M,
                                       int J, std::uint64_t seed = 0) {
  ChannelMatrix cm;
  cm.provenance = kind;
  cm.H.assign(n_bins, CMat::Ones(M, J));
  if (kind == ChannelKind::LearnInit) {
    Rng rng(seed);
    for (int f = 0; f < n_bins; ++f)
      for (int m = 0; m < M; ++m)
        for (int j = 0; j < J; ++j) {
          const double mag = rng.uniform(0.5, 1.5);
          const double ph = rng.uniform(0.0, 2.0 * kPi);
          cm.H[f](m, j) = mag * std::exp(cplx(0.0, ph));
        }
  } else if (kind != ChannelKind::Anechoic && kind != ChannelKind::NoEchoes) {
    throw ConfigError("use echo_channels / exact_anechoic_channels instead");
  }
  cm.fill_q_from_h();
  return cm;
}

// Exact direct-path channels for anechoic mixtures: per source, delays are
// relative to the earliest mic and amplitudes follow 1/(4 pi d) ratios with
// the nearest mic normalized to 1. Q stays flat only in the far field.
inline ChannelMatrix exact_anechoic_channels(const Scenario& scenario,
                                             int n_bins, int frame_size) {
  const int M = static_cast<int>(scenario.mic_positions.size());
  const int J = static_cast<int>(scenario.source_positions.size());
  ChannelMatrix cm;
  cm.provenance = ChannelKind::ExactAnechoic;
  cm.H.assign(n_bins, CMat::Zero(M, J));
  const double c = scenario.room.speed_of_sound;
  const double fs = scenario.room.sample_rate;
  for (int j = 0; j < J; ++j) {
    std::vector<double> dist(M);
    double dmin = 1e300;
    for (int m = 0; m < M; ++m) {
      dist[m] = (scenario.source_positions[j] - scenario.mic_positions[m]).norm();
      dmin = std::min(dmin, dist[m]);
    }
    for (int m = 0; m < M; ++m) {
      const double tau = (dist[m] - dmin) / c;
      const double amp = dmin / dist[m];
      for (int f = 0; f < n_bins; ++f) {
        const double omega = 2.0 * kPi * f * fs / frame_size;
        cm.H[f](m, j) = amp * std::exp(cplx(0.0, -omega * tau));
      }
    }
  }
  cm.fill_q_from_h();
  return cm;
}

}  // namespace echosep
