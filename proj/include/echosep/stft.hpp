#pragma once

#include "echosep/fft.hpp"

namespace echosep {

struct StftConfig {
  int frame_size = 2048;
  int hop = 1024;
  std::string window = "cosine";

  void validate() const {
    if (frame_size <= 0 || hop <= 0) throw ConfigError("invalid STFT sizes");
    if (hop > frame_size) throw ConfigError("hop exceeds frame size");
    if (window != "cosine") throw ConfigError("unknown window: " + window);
    // COLA for the cosine (sine) window on both sides needs 50% overlap
    if (2 * hop != frame_size)
      throw ConfigError("cosine analysis+synthesis requires 50% overlap");
  }

  int n_bins() const { return frame_size / 2 + 1; }

  // sin(pi (t + 0.5) / L); squared sums to 1 at 50% overlap
  std::vector<double> make_window() const {
    std::vector<double> w(frame_size);
    for (int t = 0; t < frame_size; ++t)
      w[t] = std::sin(kPi * (t + 0.5) / frame_size);
    return w;
  }
};

struct Spectrogram {
  CMat data;  // F x N
  StftConfig config;
  double sample_rate = 16000.0;

  int n_bins() const { return static_cast<int>(data.rows()); }
  int n_frames() const { return static_cast<int>(data.cols()); }
};

inline Spectrogram stft(const std::vector<double>& signal,
                        const StftConfig& config,
                        double sample_rate = 16000.0) {
  config.validate();
  const int L = config.frame_size;
  const int H = config.hop;
  const int F = config.n_bins();
  const std::size_t len = std::max<std::size_t>(signal.size(), L);
  const int n_frames = 1 + static_cast<int>((len - L + H - 1) / H);
  const std::vector<double> win = config.make_window();

  Spectrogram spec;
  spec.config = config;
  spec.sample_rate = sample_rate;
  spec.data.resize(F, n_frames);
  std::vector<double> frame(L);
  for (int n = 0; n < n_frames; ++n) {
    const std::size_t off = static_cast<std::size_t>(n) * H;
    for (int t = 0; t < L; ++t) {
      const std::size_t idx = off + t;
      frame[t] = (idx < signal.size() ? signal[idx] : 0.0) * win[t];
    }
    std::vector<cplx> bins = rfft(frame);
    for (int f = 0; f < F; ++f) spec.data(f, n) = bins[f];
  }
  return spec;
}

inline std::vector<double> istft(const Spectrogram& spec) {
  spec.config.validate();
  const int L = spec.config.frame_size;
  const int H = spec.config.hop;
  const int F = spec.config.n_bins();
  const int n_frames = spec.n_frames();
  const std::vector<double> win = spec.config.make_window();
  std::vector<double> out(static_cast<std::size_t>(n_frames - 1) * H + L, 0.0);
  std::vector<cplx> bins(F);
  for (int n = 0; n < n_frames; ++n) {
    for (int f = 0; f < F; ++f) bins[f] = spec.data(f, n);
    std::vector<double> frame = irfft(bins, L);
    const std::size_t off = static_cast<std::size_t>(n) * H;
    for (int t = 0; t < L; ++t) out[off + t] += frame[t] * win[t];
  }
  return out;
}

inline Mat power(const Spectrogram& spec) {
  return spec.data.array().abs2();
}

}  // namespace echosep
