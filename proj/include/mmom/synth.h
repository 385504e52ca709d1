#pragma once

// Synthetic review fixtures: templated sentences with gold tags, one audio
// track with a class-dependent tone per sentence, video features drawn around
// class-dependent cluster means, and subtitles covering each sentence.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mmom/features.h"
#include "mmom/ingest.h"
#include "mmom/subalign.h"

namespace mmom {

struct SynthOptions {
  std::size_t sentences = 50;
  std::uint64_t seed = 7;
  // Text carries no sentiment cue; the sentence sentiment is uniform over the
  // three classes and visible only in the media.
  bool modal_only = false;
  int sample_rate_hz = 8000;
  std::size_t video_dim = 64;
  double video_fps = kDefaultVideoFps;
  std::int64_t sentence_ms = 400;
  std::int64_t gap_ms = 100;
  double audio_noise = 0.05;
  double video_noise = 0.3;
  std::size_t embedding_dim = 50;
};

struct SynthData {
  std::vector<Sentence> sentences;
  AudioSignal audio;
  FeatureSequence video;
  std::vector<SubtitleChunk> subtitles;
};

// Tone frequency used for sentences of class `s`.
double synth_tone_hz(SentimentClass s);

SynthData make_synth(const SynthOptions& options);

// GloVe-layout text with one random vector per distinct token, sorted.
std::string synth_embeddings(const SynthData& data, std::size_t dim, std::uint64_t seed);

// sentences.jsonl, audio.wav, video.mmft, subtitles.srt and embeddings.txt
// under `dir`.
void write_synth(const SynthData& data, const SynthOptions& options, const std::filesystem::path& dir);

}  // namespace mmom
