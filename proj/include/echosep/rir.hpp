#pragma once

#include <utility>
#include <vector>

#include "echosep/fft.hpp"
#include "echosep/geometry.hpp"

namespace echosep {

struct Rir {
  std::vector<double> taps;
  double sample_rate = 16000.0;
  int source_id = -1;
  int mic_id = -1;
};

inline constexpr int kFracDelayTaps = 81;  // Hann-windowed sinc

// Adds a windowed-sinc pulse of the given amplitude at a (fractional)
// sample delay into `taps`, growing the vector as needed.
inline void add_fractional_pulse(std::vector<double>& taps,
                                 double delay_samples, double amplitude) {
  const int half = kFracDelayTaps / 2;
  const int center = static_cast<int>(std::floor(delay_samples));
  const double frac = delay_samples - center;
  const int last = center + half + 1;
  if (static_cast<int>(taps.size()) < last + 1) taps.resize(last + 1, 0.0);
  for (int i = -half; i <= half; ++i) {
    const int n = center + i;
    if (n < 0) continue;
    const double t = i - frac;
    double sinc = (std::abs(t) < 1e-12) ? 1.0 : std::sin(kPi * t) / (kPi * t);
    double win = 0.5 * (1.0 + std::cos(kPi * (t) / (half + 1)));
    if (std::abs(t) > half + 1) win = 0.0;
    taps[n] += amplitude * sinc * win;
  }
}

inline Rir synthesize_rir(const Room& room, const Vec3& source,
                          const Vec3& mic, int max_order) {
  if (!room.contains(source)) throw GeometryError("source outside room");
  if (!room.contains(mic)) throw GeometryError("mic outside room");
  auto images = enumerate_images(room, source, max_order, mic);
  Rir rir;
  rir.sample_rate = room.sample_rate;
  for (const ImageSource& img : images) {
    const double dist = (img.position - mic).norm();
    if (dist < 1e-9) throw GeometryError("mic coincides with source");
    const double delay = dist / room.speed_of_sound * room.sample_rate;
    add_fractional_pulse(rir.taps, delay, img.attenuation / (4.0 * kPi * dist));
  }
  if (rir.taps.empty()) rir.taps.assign(1, 0.0);
  return rir;
}

struct Scenario {
  Room room;
  std::vector<Vec3> mic_positions;
  std::vector<Vec3> source_positions;
  std::uint64_t seed = 0;
};

// Equilateral triangle mic array in a horizontal plane, centered at
// `center`, first vertex toward +x.
inline std::vector<Vec3> triangle_array(const Vec3& center, double edge = 0.3) {
  const double r = edge / std::sqrt(3.0);
  std::vector<Vec3> mics;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * kPi * i / 3.0;
    mics.push_back(center + Vec3(r * std::cos(a), r * std::sin(a), 0.0));
  }
  return mics;
}

struct ScenarioPairs {
  Scenario scenario;
  std::vector<std::pair<int, int>> pairs;  // unordered source index pairs
};

// Rejection-samples `n_sources` positions inside the room at a distance in
// `dist_range` from the mic array centroid; returns every unordered pair of
// sources at least `min_pair_dist` apart. Deterministic given the seed.
inline ScenarioPairs sample_scenarios(const Room& room,
                                      const std::vector<Vec3>& mics,
                                      int n_sources,
                                      std::pair<double, double> dist_range,
                                      double min_pair_dist,
                                      std::uint64_t seed,
                                      double wall_margin = 0.1) {
  if (n_sources < 2) throw ConfigError("need at least 2 sources");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& m : mics) centroid += m;
  centroid /= static_cast<double>(mics.size());

  // room bounding box for proposals
  Vec3 lo(1e300, 1e300, 1e300), hi(-1e300, -1e300, -1e300);
  for (const Wall& w : room.walls)
    for (const Vec3& v : w.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }

  Rng rng(seed);
  ScenarioPairs out;
  out.scenario.room = room;
  out.scenario.mic_positions = mics;
  out.scenario.seed = seed;
  const int retry_cap = 10000;
  for (int j = 0; j < n_sources; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < retry_cap; ++attempt) {
      Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
             rng.uniform(lo.z(), hi.z()));
      const double d = (p - centroid).norm();
      if (d < dist_range.first || d > dist_range.second) continue;
      if (!room.contains(p, wall_margin)) continue;
      out.scenario.source_positions.push_back(p);
      placed = true;
      break;
    }
    if (!placed)
      throw GeometryError("source placement infeasible after retry cap");
  }
  for (int a = 0; a < n_sources; ++a)
    for (int b = a + 1; b < n_sources; ++b)
      if ((out.scenario.source_positions[a] - out.scenario.source_positions[b])
              .norm() >= min_pair_dist)
        out.pairs.emplace_back(a, b);
  return out;
}

struct Mixture {
  // mixture[m] is the signal at microphone m
  std::vector<std::vector<double>> mics;
  // images[j][m] is the spatial image of source j at microphone m
  std::vector<std::vector<std::vector<double>>> images;
  double sample_rate = 16000.0;
};

inline Mixture render_mixture(const Scenario& scenario,
                              const std::vector<std::vector<double>>& sources,
                              int max_order = 10) {
  if (sources.size() != scenario.source_positions.size())
    throw InputError("signal count does not match source count");
  const std::size_t M = scenario.mic_positions.size();
  const std::size_t J = sources.size();
  Mixture mix;
  mix.sample_rate = scenario.room.sample_rate;
  mix.images.assign(J, std::vector<std::vector<double>>(M));
  std::size_t max_len = 0;
  for (std::size_t j = 0; j < J; ++j) {
    // source images enumerated once per source, visibility per mic
    for (std::size_t m = 0; m < M; ++m) {
      Rir rir = synthesize_rir(scenario.room, scenario.source_positions[j],
                               scenario.mic_positions[m], max_order);
      mix.images[j][m] = fft_convolve(sources[j], rir.taps);
      max_len = std::max(max_len, mix.images[j][m].size());
    }
  }
  mix.mics.assign(M, std::vector<double>(max_len, 0.0));
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t m = 0; m < M; ++m) {
      mix.images[j][m].resize(max_len, 0.0);
      for (std::size_t t = 0; t < max_len; ++t)
        mix.mics[m][t] += mix.images[j][m][t];
    }
  return mix;
}

// Schroeder backward-integration T60 estimate from the decay range
// [-5 dB, -25 dB], extrapolated to -60 dB.
inline double estimate_t60(const Rir& rir) {
  std::vector<double> edc(rir.taps.size());
  double acc = 0.0;
  for (std::size_t i = rir.taps.size(); i-- > 0;) {
    acc += rir.taps[i] * rir.taps[i];
    edc[i] = acc;
  }
  if (acc <= 0.0) throw NumericalError("empty RIR");
  double t5 = -1.0, t25 = -1.0;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double db = 10.0 * std::log10(edc[i] / edc[0]);
    if (t5 < 0 && db <= -5.0) t5 = static_cast<double>(i);
    if (t25 < 0 && db <= -25.0) {
      t25 = static_cast<double>(i);
      break;
    }
  }
  if (t5 < 0 || t25 < 0)
    throw NumericalError("decay range not covered by RIR");
  return (t25 - t5) / rir.sample_rate * (60.0 / 20.0);
}

}  // namespace echosep
