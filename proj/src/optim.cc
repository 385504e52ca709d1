#include "mmom/optim.h"

#include <bit>
#include <cmath>
#include <cstring>

#include "mmom/errors.h"
#include "mmom/ingest.h"

namespace mmom {

Adam::Adam(std::vector<ad::Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    // Parameters no gradient reached this step are skipped, moments included.
    if (!p.has_grad()) continue;
    const auto& g = p.node()->grad;
    auto values = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      double gk = g[k];
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * gk;
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * gk * gk;
      double m_hat = m[k] / correction1;
      double v_hat = v[k] / correction2;
      values[k] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

namespace {

constexpr char kMagic[4] = {'M', 'M', 'C', 'K'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(in[at + k]);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors,
                     const nlohmann::json& header) {
  nlohmann::json manifest;
  manifest["header"] = header;
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  std::string text = manifest.dump();

  std::string out(kMagic, 4);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 8);
  for (const auto& [name, t] : tensors) {
    for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  write_file(path, out);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::string data = read_file(path);
  if (data.size() < 12 || data.compare(0, 4, std::string(kMagic, 4)) != 0) {
    throw ValidationError(path.string() + ": not a checkpoint file");
  }
  std::uint64_t length = get_u64(data, 4);
  if (12 + length > data.size()) throw ValidationError(path.string() + ": truncated manifest");
  nlohmann::json manifest = nlohmann::json::parse(data.substr(12, length));
  std::size_t blob = 12 + length;

  Checkpoint ckpt;
  ckpt.header = manifest.value("header", nlohmann::json::object());
  for (const auto& entry : manifest.at("tensors")) {
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    auto offset = entry.at("offset").get<std::size_t>();
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    if (blob + (offset + count) * 8 > data.size()) {
      throw ValidationError(path.string() + ": truncated tensor data");
    }
    std::vector<double> values(count);
    for (std::size_t k = 0; k < count; ++k) {
      values[k] = std::bit_cast<double>(get_u64(data, blob + (offset + k) * 8));
    }
    ckpt.shapes.emplace_back(entry.at("name").get<std::string>(), std::move(shape));
    ckpt.values.push_back(std::move(values));
  }
  return ckpt;
}

void load_checkpoint(const std::filesystem::path& path, NamedTensors& tensors,
                     nlohmann::json* header) {
  Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.shapes.size() != tensors.size()) {
    throw ValidationError(path.string() + ": checkpoint holds " + std::to_string(ckpt.shapes.size()) +
                          " tensors, model expects " + std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, t] = tensors[i];
    if (ckpt.shapes[i].first != name || ckpt.shapes[i].second != t.shape()) {
      throw ValidationError(path.string() + ": tensor " + std::to_string(i) + " is '" +
                            ckpt.shapes[i].first + "', expected '" + name + "' " + t.shape_string());
    }
    auto dst = t.mutable_values();
    std::copy(ckpt.values[i].begin(), ckpt.values[i].end(), dst.begin());
  }
  if (header) *header = ckpt.header;
}

}  // namespace mmom
