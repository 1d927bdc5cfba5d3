#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "echosep/common.hpp"
#include "echosep/fft.hpp"

namespace echosep {

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  double sample_rate = 16000.0;
  std::string speaker_id;
  std::string utterance_id;
};

namespace wav {

inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace wav

// float32 mono WAV
inline void write_wav(const std::string& path,
                      const std::vector<double>& samples, double sample_rate) {
  std::string data;
  data.reserve(samples.size() * 4);
  for (double s : samples) {
    float f = static_cast<float>(s);
    char buf[4];
    std::memcpy(buf, &f, 4);
    data.append(buf, 4);
  }
  std::string out;
  out += "RIFF";
  wav::put_u32(out, static_cast<std::uint32_t>(36 + data.size()));
  out += "WAVEfmt ";
  wav::put_u32(out, 16);
  wav::put_u16(out, 3);  // IEEE float
  wav::put_u16(out, 1);
  wav::put_u32(out, static_cast<std::uint32_t>(sample_rate));
  wav::put_u32(out, static_cast<std::uint32_t>(sample_rate) * 4);
  wav::put_u16(out, 4);
  wav::put_u16(out, 32);
  out += "data";
  wav::put_u32(out, static_cast<std::uint32_t>(data.size()));
  out += data;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// Reads mono (or first-channel) PCM16 / float32 WAV.
inline AudioClip read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open: " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < 44 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw InputError("not a WAV file: " + path);
  std::size_t pos = 12;
  std::uint16_t format = 0, channels = 1, bits = 0;
  std::uint32_t rate = 0;
  AudioClip clip;
  bool have_fmt = false, have_data = false;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    std::uint32_t size = wav::get_u32(raw.data() + pos + 4);
    pos += 8;
    if (pos + size > raw.size()) size = static_cast<std::uint32_t>(raw.size() - pos);
    if (std::memcmp(id, "fmt ", 4) == 0 && size >= 16) {
      format = wav::get_u16(raw.data() + pos);
      channels = wav::get_u16(raw.data() + pos + 2);
      rate = wav::get_u32(raw.data() + pos + 4);
      bits = wav::get_u16(raw.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw InputError("WAV data before fmt: " + path);
      const std::size_t bytes_per = bits / 8;
      const std::size_t n = size / (bytes_per * channels);
      clip.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* p = raw.data() + pos + i * bytes_per * channels;
        if (format == 1 && bits == 16) {
          std::int16_t v;
          std::memcpy(&v, p, 2);
          clip.samples[i] = v / 32768.0;
        } else if (format == 3 && bits == 32) {
          float v;
          std::memcpy(&v, p, 4);
          clip.samples[i] = v;
        } else {
          throw InputError("unsupported WAV format in " + path);
        }
      }
      have_data = true;
    }
    pos += size + (size & 1);
  }
  if (!have_data) throw InputError("no data chunk: " + path);
  clip.sample_rate = rate;
  return clip;
}

struct CorpusLoadReport {
  std::map<std::string, std::vector<AudioClip>> speakers;
  std::vector<std::string> rejects;  // wrong-rate or unreadable files
};

// Expects layout root/speaker/utterance.wav; deterministic lexicographic
// ordering. Files whose rate differs from `expected_rate` go to rejects.
inline CorpusLoadReport load_corpus(const std::string& root,
                                    double expected_rate) {
  namespace fs = std::filesystem;
  CorpusLoadReport report;
  if (!fs::is_directory(root)) throw InputError("corpus root not found: " + root);
  std::vector<fs::path> speaker_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) speaker_dirs.push_back(e.path());
  std::sort(speaker_dirs.begin(), speaker_dirs.end());
  for (const fs::path& sd : speaker_dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(sd))
      if (e.is_regular_file() && e.path().extension() == ".wav")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& fp : files) {
      try {
        AudioClip clip = read_wav(fp.string());
        if (std::abs(clip.sample_rate - expected_rate) > 0.5) {
          report.rejects.push_back(fp.string() + ": rate " +
                                   std::to_string(clip.sample_rate));
          continue;
        }
        clip.speaker_id = sd.filename().string();
        clip.utterance_id = fp.stem().string();
        report.speakers[clip.speaker_id].push_back(std::move(clip));
      } catch (const InputError& e) {
        report.rejects.push_back(fp.string() + ": " + e.what());
      }
    }
  }
  if (report.speakers.empty()) throw InputError("no speakers found in " + root);
  return report;
}

enum class SynthKind { Harmonic, Chirp, FilteredNoise };

// Deterministic synthetic test signals with controllable spectral support.
inline AudioClip synth_speech_like(SynthKind kind, double duration_s,
                                   std::uint64_t seed,
                                   double sample_rate = 16000.0,
                                   double band_lo = 100.0,
                                   double band_hi = 4000.0) {
  if (duration_s <= 0) throw ConfigError("duration must be positive");
  const std::size_t n = static_cast<std::size_t>(duration_s * sample_rate);
  Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(n, 0.0);
  if (kind == SynthKind::Harmonic) {
    const double f0 = band_lo;
    for (int h = 1; h * f0 <= band_hi; ++h) {
      const double amp = 1.0 / h;
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      for (std::size_t t = 0; t < n; ++t)
        clip.samples[t] +=
            amp * std::sin(2.0 * kPi * h * f0 * t / sample_rate + phase);
    }
  } else if (kind == SynthKind::Chirp) {
    const double phase0 = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t t = 0; t < n; ++t) {
      const double frac = static_cast<double>(t) / n;
      const double f = band_lo + (band_hi - band_lo) * frac;
      clip.samples[t] = std::sin(phase0 + 2.0 * kPi *
                                              (band_lo * t / sample_rate +
                                               0.5 * (band_hi - band_lo) *
                                                   frac * t / sample_rate));
    }
  } else {
    // white noise with an FFT brickwall for exact band support
    const std::size_t nfft = next_pow2(n);
    std::vector<double> noise(nfft, 0.0);
    for (std::size_t t = 0; t < n; ++t) noise[t] = rng.normal();
    std::vector<cplx> spec = rfft(noise);
    for (std::size_t f = 0; f < spec.size(); ++f) {
      const double hz = f * sample_rate / nfft;
      if (hz < band_lo || hz > band_hi) spec[f] = 0.0;
    }
    std::vector<double> shaped = irfft(spec, nfft);
    shaped.resize(n);
    clip.samples = std::move(shaped);
  }
  double peak = 1e-12;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  for (double& s : clip.samples) s *= 0.9 / peak;
  return clip;
}

}  // namespace echosep
