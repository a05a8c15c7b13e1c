#pragma once

// Binary checkpoint archive (little-endian):
//
//   "LXTCKPT\0"  u32 version
//   u32 n_config,  n x (str key, str value)
//   u64 n_vocab,   n x str word
//   u64 n_tensor,  n x (str name, u32 rank, rank x u64 dim, prod(dim) x f64)
//   "END\0"
//
// str = u32 byte length + bytes. Tensors appear in parameter order.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lextree/model.hpp"

namespace lextree {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct CheckpointData {
  std::uint32_t version = kCheckpointVersion;
  std::map<std::string, std::string> config;
  std::vector<std::string> vocab;
  std::vector<NamedTensor> tensors;
};

std::map<std::string, std::string> config_record(const ModelConfig& config);
ModelConfig config_from_record(const std::map<std::string, std::string>& record);

void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

// `extra` entries are stored next to the model config (task name, seed, ...).
void save_checkpoint(const std::string& path, const Model& model,
                     const std::map<std::string, std::string>& extra = {});

// Rebuilds the model described by the archive.
Model load_checkpoint(const std::string& path);

// Copies archived tensors into an existing model. Names and shapes are all
// checked before anything is written, so a failed load leaves `model` as it was.
void load_parameters(Model& model, const CheckpointData& data);

}  // namespace lextree
