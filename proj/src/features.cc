#include "mmom/features.h"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mmom/errors.h"
#include "mmom/ingest.h"

namespace mmom {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(in[at + k]);
  return v;
}

std::uint16_t get_u16(const std::string& in, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(in[at]) |
                                    (static_cast<unsigned char>(in[at + 1]) << 8));
}

}  // namespace

void fft(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw std::invalid_argument("fft size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<std::complex<double>> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        auto u = data[i + k];
        auto v = data[i + k + half] * twiddle[k];
        data[i + k] = u + v;
        data[i + k + half] = u - v;
      }
    }
  }
}

FeatureSequence spectrogram(const AudioSignal& signal, const SpectrogramOptions& options) {
  const std::size_t window = options.window;
  const std::size_t hop = options.hop;
  if (!is_power_of_two(window)) throw std::invalid_argument("window must be a power of two");
  if (hop == 0) throw std::invalid_argument("hop must be positive");
  if (signal.sample_rate_hz <= 0) throw std::invalid_argument("sample rate must be positive");
  for (double s : signal.samples) {
    if (!std::isfinite(s)) throw NumericError("audio signal contains non-finite samples");
  }

  std::vector<double> samples = signal.samples;
  if (samples.size() < window) {
    if (!options.pad_short_signal) {
      throw std::invalid_argument("signal has " + std::to_string(samples.size()) +
                                  " samples, shorter than one window of " + std::to_string(window) +
                                  "; enable zero-padding (pad_short_signal) to accept it");
    }
    samples.resize(window, 0.0);
  }

  std::vector<double> taper(window, 1.0);
  if (options.window_function == WindowFunction::kHann) {
    for (std::size_t i = 0; i < window; ++i) {
      taper[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(window));
    }
  }

  FeatureSequence out;
  out.modality = Modality::kAudio;
  out.dim = window / 2 + 1;
  const std::size_t frames = (samples.size() - window) / hop + 1;
  out.frames.reserve(frames);
  out.frame_times_ms.reserve(frames);

  std::vector<std::complex<double>> buffer(window);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t offset = f * hop;
    for (std::size_t i = 0; i < window; ++i) buffer[i] = {samples[offset + i] * taper[i], 0.0};
    fft(buffer);
    std::vector<double> bins(out.dim);
    for (std::size_t k = 0; k < out.dim; ++k) {
      double mag = std::abs(buffer[k]);
      bins[k] = options.log_compress ? std::log1p(mag) : mag;
    }
    out.frames.push_back(std::move(bins));
    out.frame_times_ms.push_back(1000.0 * static_cast<double>(offset) / signal.sample_rate_hz);
  }
  return out;
}

AudioSignal read_wav(const std::filesystem::path& path) {
  std::string data = read_file(path);
  auto bad = [&](const std::string& what) {
    return ValidationError(path.string() + ": " + what);
  };
  if (data.size() < 12 || data.compare(0, 4, "RIFF") != 0 || data.compare(8, 4, "WAVE") != 0) {
    throw bad("not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  int channels = 0, bits = 0, format = 0;
  AudioSignal signal;
  bool have_fmt = false;
  while (pos + 8 <= data.size()) {
    std::string id = data.substr(pos, 4);
    std::uint32_t size = get_u32(data, pos + 4);
    std::size_t body = pos + 8;
    if (body + size > data.size()) throw bad("truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw bad("short fmt chunk");
      format = get_u16(data, body);
      channels = get_u16(data, body + 2);
      signal.sample_rate_hz = static_cast<int>(get_u32(data, body + 4));
      bits = get_u16(data, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      if (format != 1 || channels != 1 || bits != 16) {
        throw bad("only 16-bit PCM mono is supported");
      }
      std::size_t count = size / 2;
      signal.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        auto raw = static_cast<std::int16_t>(get_u16(data, body + 2 * i));
        signal.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return signal;
    }
    pos = body + size + (size & 1);
  }
  throw bad("no data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : signal.samples) {
    double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  write_file(path, out);
}

AudioSignal cut_signal(const AudioSignal& signal, std::int64_t start_ms, std::int64_t end_ms) {
  AudioSignal out;
  out.sample_rate_hz = signal.sample_rate_hz;
  auto index = [&](std::int64_t ms) {
    // First sample whose time is >= ms.
    auto num = static_cast<long double>(std::max<std::int64_t>(ms, 0)) * signal.sample_rate_hz;
    auto i = static_cast<std::size_t>(std::ceil(num / 1000.0L));
    return std::min(i, signal.samples.size());
  };
  std::size_t lo = index(start_ms), hi = index(end_ms);
  if (lo < hi) out.samples.assign(signal.samples.begin() + lo, signal.samples.begin() + hi);
  return out;
}

void save_feature_file(const std::filesystem::path& path, const FeatureSequence& seq, double fps) {
  std::string out(kFeatureMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(seq.frames.size()));
  put_u32(out, static_cast<std::uint32_t>(seq.dim));
  put_u32(out, static_cast<std::uint32_t>(std::llround(fps * 1000.0)));
  out.reserve(16 + seq.frames.size() * seq.dim * 4);
  for (const auto& frame : seq.frames) {
    if (frame.size() != seq.dim) throw ShapeError("frame length differs from sequence dim");
    for (double v : frame) {
      auto f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  write_file(path, out);
}

FeatureSequence load_feature_file(const std::filesystem::path& path, Modality modality) {
  std::string data = read_file(path);
  auto bad = [&](const std::string& what) {
    return ValidationError(path.string() + ": " + what);
  };
  if (data.empty()) throw bad("no frames");
  if (data.size() < 16 || data.compare(0, 4, std::string(kFeatureMagic, 4)) != 0) {
    throw bad("missing feature-file header");
  }
  std::uint32_t count = get_u32(data, 4);
  std::uint32_t dim = get_u32(data, 8);
  std::uint32_t fps_milli = get_u32(data, 12);
  if (count == 0) throw bad("no frames");
  if (dim == 0 || fps_milli == 0) throw bad("zero dim or frame rate in header");
  std::size_t expected = 16 + static_cast<std::size_t>(count) * dim * 4;
  if (data.size() < expected) {
    throw bad("truncated: header promises " + std::to_string(count) + "x" + std::to_string(dim) +
              " floats, file has " + std::to_string(data.size()) + " bytes");
  }
  FeatureSequence seq;
  seq.modality = modality;
  seq.dim = dim;
  double fps = fps_milli / 1000.0;
  seq.frames.resize(count, std::vector<double>(dim));
  for (std::size_t f = 0; f < count; ++f) {
    for (std::size_t k = 0; k < dim; ++k) {
      std::uint32_t bits = get_u32(data, 16 + 4 * (f * dim + k));
      float v;
      std::memcpy(&v, &bits, 4);
      seq.frames[f][k] = v;
    }
    seq.frame_times_ms.push_back(1000.0 * static_cast<double>(f) / fps);
  }
  return seq;
}

FeatureSequence load_video_features(const std::filesystem::path& path, std::size_t expected_dim,
                                    double csv_fps) {
  FeatureSequence seq;
  if (path.extension() == ".csv") {
    std::string data = read_file(path);
    std::istringstream in(data);
    std::string line;
    std::size_t line_no = 0;
    seq.modality = Modality::kVideo;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::vector<double> frame;
      std::istringstream fields(line);
      std::string field;
      while (std::getline(fields, field, ',')) {
        try {
          std::size_t used = 0;
          frame.push_back(std::stod(field, &used));
        } catch (const std::exception&) {
          throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                ": cannot parse '" + field + "'");
        }
      }
      if (frame.size() != expected_dim) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": dimension mismatch, expected " + std::to_string(expected_dim) +
                              " values, found " + std::to_string(frame.size()));
      }
      seq.frame_times_ms.push_back(1000.0 * static_cast<double>(seq.frames.size()) / csv_fps);
      seq.frames.push_back(std::move(frame));
    }
    if (seq.frames.empty()) throw ValidationError(path.string() + ": no frames");
    seq.dim = expected_dim;
    return seq;
  }
  seq = load_feature_file(path, Modality::kVideo);
  if (seq.dim != expected_dim) {
    throw ValidationError(path.string() + ": dimension mismatch, expected " +
                          std::to_string(expected_dim) + ", file has " + std::to_string(seq.dim));
  }
  return seq;
}

FeatureSequence cut_to_span(const FeatureSequence& seq, double start_ms, double end_ms) {
  if (!(start_ms < end_ms)) throw std::invalid_argument("span start must precede its end");
  if (seq.frame_times_ms.size() != seq.frames.size()) {
    throw std::invalid_argument("cut_to_span needs per-frame timestamps");
  }
  FeatureSequence out;
  out.modality = seq.modality;
  out.dim = seq.dim;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    double t = seq.frame_times_ms[f];
    if (t >= start_ms && t < end_ms) {
      out.frames.push_back(seq.frames[f]);
      out.frame_times_ms.push_back(t);
    }
  }
  return out;
}

FeatureSequence downsample(const FeatureSequence& seq, std::size_t max_frames) {
  if (max_frames == 0) throw std::invalid_argument("max_frames must be at least 1");
  if (seq.frames.size() <= max_frames) return seq;
  FeatureSequence out;
  out.modality = seq.modality;
  out.dim = seq.dim;
  const std::size_t n = seq.frames.size();
  bool timed = seq.frame_times_ms.size() == n;
  for (std::size_t i = 0; i < max_frames; ++i) {
    std::size_t src = max_frames == 1 ? 0 : (i * (n - 1) + (max_frames - 1) / 2) / (max_frames - 1);
    out.frames.push_back(seq.frames[src]);
    if (timed) out.frame_times_ms.push_back(seq.frame_times_ms[src]);
  }
  return out;
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string feature_cache_name(const std::string& media_ref, std::int64_t start_ms,
                               std::int64_t end_ms, Modality modality,
                               const std::string& params_digest) {
  std::string safe;
  for (char c : media_ref) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return safe + "_" + std::to_string(start_ms) + "_" + std::to_string(end_ms) +
         (modality == Modality::kAudio ? "_audio_" : "_video_") + params_digest + ".mmft";
}

}  // namespace mmom
