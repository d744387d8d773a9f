#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mcua/tensor.hpp"

namespace mcua {

using NamedTensors = std::vector<std::pair<std::string, TensorPtr>>;

// Checkpoint file layout (all integers little-endian):
//   bytes 0..3   magic "MCUA"
//   u32          format version (currently 1)
//   u32          record count
//   per record:  u32 name length, UTF-8 name bytes,
//                u32 rank, u32 dims[rank],
//                float32 values in row-major order.
// Values are stored as float32; saving then loading reproduces exactly the
// float32-rounded values.

void save_checkpoint(const std::string& path, const NamedTensors& tensors);

struct LoadedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;  // widened from the stored float32
};

// File order preserved. Bad magic/version -> ValidationError; unreadable or
// truncated file -> IoError.
std::vector<LoadedTensor> load_checkpoint(const std::string& path);

// Copies checkpoint contents into existing tensors, matched by name. Every
// destination name must be present with an identical shape, and the file must
// not contain extra records; mismatches throw ValidationError naming the
// offender.
void load_into(const std::string& path, const NamedTensors& dest);

}  // namespace mcua
