#pragma once

#include <array>

#include "echosep/audio_io.hpp"

namespace echosep {

// Synthetic "speakers" for desk-scale experiments without a real corpus.
// Each speaker owns a pitch range and a handful of spectral-envelope
// templates; utterances are random sequences of voiced/unvoiced segments
// drawn from those templates, which makes their power spectra low-rank and
// learnable by NMF.

struct SpeakerProfile {
  double f0_base = 120.0;
  // each template: list of (center_hz, width_hz, gain) bumps
  std::vector<std::vector<std::array<double, 3>>> templates;
};

inline SpeakerProfile make_speaker_profile(std::uint64_t speaker_seed) {
  Rng rng(speaker_seed * 0x9e3779b97f4a7c15ULL + 1);
  SpeakerProfile sp;
  sp.f0_base = rng.uniform(90.0, 280.0);
  const int n_templates = 6;
  for (int i = 0; i < n_templates; ++i) {
    std::vector<std::array<double, 3>> bumps;
    const int n_bumps = 3;
    for (int b = 0; b < n_bumps; ++b) {
      bumps.push_back({rng.uniform(200.0, 6000.0), rng.uniform(150.0, 600.0),
                       rng.uniform(0.3, 1.0)});
    }
    sp.templates.push_back(std::move(bumps));
  }
  return sp;
}

inline double envelope_at(const std::vector<std::array<double, 3>>& bumps,
                          double hz) {
  double v = 1e-3;
  for (const auto& b : bumps) {
    const double d = (hz - b[0]) / b[1];
    v += b[2] * std::exp(-0.5 * d * d);
  }
  return v;
}

inline AudioClip synth_utterance(const SpeakerProfile& sp, double duration_s,
                                 std::uint64_t utt_seed,
                                 double sample_rate = 16000.0) {
  Rng rng(utt_seed * 0xd1342543de82ef95ULL + 7);
  const std::size_t n = static_cast<std::size_t>(duration_s * sample_rate);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(n, 0.0);
  std::size_t pos = 0;
  while (pos < n) {
    const std::size_t seg_len = static_cast<std::size_t>(
        rng.uniform(0.12, 0.30) * sample_rate);
    const std::size_t len = std::min(seg_len, n - pos);
    if (len < 64) break;
    const auto& tmpl = sp.templates[rng.integer(sp.templates.size())];
    const bool voiced = rng.uniform() < 0.75;
    const double amp = rng.uniform(0.4, 1.0);
    std::vector<double> seg(len, 0.0);
    if (voiced) {
      const double f0 = sp.f0_base * rng.uniform(0.9, 1.15);
      const double drift = rng.uniform(-0.06, 0.06);  // relative over segment
      double phase = rng.uniform(0.0, 2.0 * kPi);
      for (int h = 1; h * f0 < 7000.0; ++h) {
        const double ph0 = rng.uniform(0.0, 2.0 * kPi);
        for (std::size_t t = 0; t < len; ++t) {
          const double frac = static_cast<double>(t) / len;
          const double f = h * f0 * (1.0 + drift * frac);
          seg[t] += envelope_at(tmpl, h * f0) / h *
                    std::sin(2.0 * kPi * f * t / sample_rate + ph0);
        }
      }
      (void)phase;
    } else {
      const std::size_t nfft = next_pow2(len);
      std::vector<double> noise(nfft, 0.0);
      for (std::size_t t = 0; t < len; ++t) noise[t] = rng.normal();
      std::vector<cplx> spec = rfft(noise);
      for (std::size_t f = 0; f < spec.size(); ++f)
        spec[f] *= envelope_at(tmpl, f * sample_rate / nfft);
      std::vector<double> shaped = irfft(spec, nfft);
      for (std::size_t t = 0; t < len; ++t) seg[t] = shaped[t];
    }
    // raised-cosine ramps to avoid clicks
    const std::size_t ramp = std::min<std::size_t>(len / 4, 256);
    for (std::size_t t = 0; t < ramp; ++t) {
      const double g = 0.5 * (1.0 - std::cos(kPi * t / ramp));
      seg[t] *= g;
      seg[len - 1 - t] *= g;
    }
    double rms = 0.0;
    for (double s : seg) rms += s * s;
    rms = std::sqrt(rms / len) + 1e-12;
    for (std::size_t t = 0; t < len; ++t)
      clip.samples[pos + t] += amp * seg[t] / rms * 0.1;
    // occasional short pause
    pos += len + (rng.uniform() < 0.3
                      ? static_cast<std::size_t>(rng.uniform(0.02, 0.08) *
                                                 sample_rate)
                      : 0);
  }
  double peak = 1e-12;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  for (double& s : clip.samples) s *= 0.9 / peak;
  return clip;
}

// speaker -> clips, deterministic
inline std::map<std::string, std::vector<AudioClip>> make_synthetic_corpus(
    int n_speakers, int utts_per_speaker, double duration_s,
    std::uint64_t seed, double sample_rate = 16000.0) {
  std::map<std::string, std::vector<AudioClip>> corpus;
  for (int s = 0; s < n_speakers; ++s) {
    SpeakerProfile sp = make_speaker_profile(seed + 1000 * s);
    char name[32];
    std::snprintf(name, sizeof(name), "spk%03d", s);
    for (int u = 0; u < utts_per_speaker; ++u) {
      AudioClip clip =
          synth_utterance(sp, duration_s, seed + 1000 * s + u + 1, sample_rate);
      clip.speaker_id = name;
      clip.utterance_id = "utt" + std::to_string(u);
      corpus[name].push_back(std::move(clip));
    }
  }
  return corpus;
}

}  // namespace echosep
