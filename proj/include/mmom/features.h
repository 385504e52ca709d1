#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmom {

struct AudioSignal {
  std::vector<double> samples;
  int sample_rate_hz = 16000;
};

enum class Modality { kAudio, kVideo };

struct FeatureSequence {
  Modality modality = Modality::kAudio;
  std::size_t dim = 0;
  std::vector<std::vector<double>> frames;
  std::vector<double> frame_times_ms;  // empty when timing is unknown

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
};

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& data);

enum class WindowFunction { kHann, kRectangular };

struct SpectrogramOptions {
  std::size_t window = 1024;
  std::size_t hop = 512;
  WindowFunction window_function = WindowFunction::kHann;
  bool log_compress = true;       // log(1 + magnitude)
  bool pad_short_signal = false;  // zero-pad signals shorter than one window
};

// Frame k covers samples [k*hop, k*hop + window); frame count is
// floor((N - window) / hop) + 1 and each frame holds window/2 + 1 bins.
// frame_times_ms holds each frame's start time.
FeatureSequence spectrogram(const AudioSignal& signal, const SpectrogramOptions& options = {});

// 16-bit PCM mono RIFF/WAVE. Samples are scaled to [-1, 1).
AudioSignal read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioSignal& signal);

// Samples falling inside [start_ms, end_ms).
AudioSignal cut_signal(const AudioSignal& signal, std::int64_t start_ms, std::int64_t end_ms);

inline constexpr double kDefaultVideoFps = 25.0;
inline constexpr std::size_t kDefaultVideoDim = 1024;
inline constexpr char kFeatureMagic[4] = {'M', 'M', 'F', 'T'};

// Binary layout: 16-byte header (magic "MMFT", uint32 frame count, uint32 dim,
// uint32 fps*1000), then little-endian float32 frames, row-major.
FeatureSequence load_feature_file(const std::filesystem::path& path, Modality modality);
void save_feature_file(const std::filesystem::path& path, const FeatureSequence& seq, double fps);

// Binary layout above, or CSV with one comma-separated frame per line (".csv"
// extension; frame rate from `csv_fps`). Frames are checked against
// expected_dim and stamped with index * 1000 / fps.
FeatureSequence load_video_features(const std::filesystem::path& path,
                                    std::size_t expected_dim = kDefaultVideoDim,
                                    double csv_fps = kDefaultVideoFps);

// Frames whose timestamp lies in [start_ms, end_ms).
FeatureSequence cut_to_span(const FeatureSequence& seq, double start_ms, double end_ms);

// Uniform-stride subsample to at most max_frames, keeping the first and last.
FeatureSequence downsample(const FeatureSequence& seq, std::size_t max_frames);

// Stable 64-bit FNV-1a digest rendered as 16 hex chars.
std::string fnv1a_hex(std::string_view data);

// Cache file name for one sentence segment.
std::string feature_cache_name(const std::string& media_ref, std::int64_t start_ms,
                               std::int64_t end_ms, Modality modality,
                               const std::string& params_digest);

}  // namespace mmom
