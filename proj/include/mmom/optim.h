#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mmom/autodiff.h"

namespace mmom {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are allocated per parameter on
// construction and keep the parameter's shape.
class Adam {
 public:
  Adam(std::vector<ad::Tensor> params, AdamOptions options = {});

  // One update from the parameters' current gradients. Parameters without a
  // gradient are left untouched. Gradients are kept; call zero_grad() after.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<ad::Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

using NamedTensors = std::vector<std::pair<std::string, ad::Tensor>>;

// Checkpoint file: "MMCK" magic, uint64 LE manifest length, JSON manifest
// {"header": ..., "tensors": [{"name", "shape", "offset"}]}, then the values
// as little-endian IEEE-754 doubles (offset counts doubles).
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors,
                     const nlohmann::json& header = nlohmann::json::object());

struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> shapes;
  std::vector<std::vector<double>> values;
};

Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into `tensors` by name; every name and shape must match.
void load_checkpoint(const std::filesystem::path& path, NamedTensors& tensors,
                     nlohmann::json* header = nullptr);

}  // namespace mmom
