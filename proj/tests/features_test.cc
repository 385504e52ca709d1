#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "mmom/errors.h"
#include "mmom/features.h"
#include "oracles.h"

using namespace mmom;
namespace fs = std::filesystem;

TEST_SUITE("features") {
  TEST_CASE("frame count and bins") {
    AudioSignal sig{std::vector<double>(2048, 0.5), 16000};
    auto spec = spectrogram(sig);
    CHECK(spec.size() == 3);
    CHECK(spec.dim == 513);
    CHECK(spec.frame_times_ms == std::vector<double>{0.0, 32.0, 64.0});
  }

  TEST_CASE("silence gives zero frames") {
    auto spec = spectrogram({std::vector<double>(3000, 0.0), 16000});
    for (const auto& f : spec.frames)
      for (double v : f) CHECK(v == 0.0);
  }

  TEST_CASE("bin-aligned sinusoid concentrates in one bin") {
    const std::size_t w = 256, bin = 16;
    std::vector<double> x(w);
    for (std::size_t n = 0; n < w; ++n) x[n] = std::cos(2.0 * std::numbers::pi * bin * n / w);
    SpectrogramOptions o;
    o.window = w;
    o.window_function = WindowFunction::kRectangular;
    o.log_compress = false;
    auto f = spectrogram({x, 8000}, o).frames.at(0);
    const double peak = f[bin];
    CHECK(peak == doctest::Approx(w / 2.0));
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (k != bin) CHECK(f[k] <= 1e-9 * peak);
    }
  }

  TEST_CASE("fft matches the naive dft") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> x(128);
    for (auto& v : x) v = u(rng);
    std::vector<std::complex<double>> data(x.begin(), x.end());
    fft(data);
    auto ref = oracle::naive_dft(x);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(data[k] - ref[k]) < 1e-9);
  }

  TEST_CASE("short signals") {
    AudioSignal sig{std::vector<double>(100, 0.1), 16000};
    CHECK_THROWS_AS(spectrogram(sig), std::invalid_argument);
    SpectrogramOptions o;
    o.pad_short_signal = true;
    CHECK(spectrogram(sig, o).size() == 1);
    o.window = 1000;
    CHECK_THROWS_AS(spectrogram(sig, o), std::invalid_argument);
  }

  TEST_CASE("wav round trip") {
    auto p = fs::temp_directory_path() / "mmom-features-test.wav";
    AudioSignal sig{{0.0, 0.5, -0.5, 0.25}, 8000};
    write_wav(p, sig);
    auto back = read_wav(p);
    CHECK(back.sample_rate_hz == 8000);
    REQUIRE(back.samples.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(back.samples[i] == doctest::Approx(sig.samples[i]).epsilon(1e-4));
    fs::remove(p);
  }

  TEST_CASE("video features") {
    auto dir = fs::temp_directory_path() / "mmom-video-test";
    fs::create_directories(dir);
    FeatureSequence seq;
    seq.modality = Modality::kVideo;
    seq.dim = 1024;
    seq.frames.assign(10, std::vector<double>(1024, 0.25));
    save_feature_file(dir / "v.mmft", seq, 25.0);
    auto back = load_video_features(dir / "v.mmft");
    CHECK(back.size() == 10);
    CHECK(back.frame_times_ms.at(9) == 360.0);

    std::ofstream(dir / "empty.csv").close();
    CHECK_THROWS_AS(load_video_features(dir / "empty.csv"), ValidationError);
    seq.dim = 512;
    seq.frames.assign(2, std::vector<double>(512, 0.0));
    save_feature_file(dir / "small.mmft", seq, 25.0);
    CHECK_THROWS_AS(load_video_features(dir / "small.mmft"), ValidationError);
    std::ofstream(dir / "f.csv") << "1,2\n3,4\n";
    auto csv = load_video_features(dir / "f.csv", 2, 10.0);
    CHECK(csv.frame_times_ms == std::vector<double>{0.0, 100.0});
    fs::remove_all(dir);
  }

  TEST_CASE("cut to span") {
    FeatureSequence seq;
    seq.dim = 1;
    seq.frames = {{0}, {1}, {2}};
    seq.frame_times_ms = {0, 40, 80};
    auto cut = cut_to_span(seq, 35, 85);
    CHECK(cut.frame_times_ms == std::vector<double>{40, 80});
    CHECK(cut_to_span(seq, 0, 1000).frames == seq.frames);
    CHECK(cut_to_span(seq, -100, -10).empty());
  }

  TEST_CASE("downsample keeps ends") {
    FeatureSequence seq;
    seq.dim = 1;
    for (int i = 0; i < 10; ++i) seq.frames.push_back({double(i)});
    auto d = downsample(seq, 4);
    CHECK(d.size() == 4);
    CHECK(d.frames.front()[0] == 0);
    CHECK(d.frames.back()[0] == 9);
    CHECK(downsample(seq, 20).size() == 10);
  }

  TEST_CASE("cache names are stable") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(feature_cache_name("vid", 1, 2, Modality::kAudio, "x") == feature_cache_name("vid", 1, 2, Modality::kAudio, "x"));
    CHECK(feature_cache_name("vid", 1, 2, Modality::kAudio, "x") != feature_cache_name("vid", 1, 2, Modality::kVideo, "x"));
  }
}
