#pragma once

#include <memory>
#include <string>

#include "tdcn/model.hpp"

namespace tdcn {

// Checkpoint file: magic "TDCN0001", u32 LE version=1, u8 model-kind code,
// u32 LE tensor count; per tensor: u16 LE name length, UTF-8 name, u8 rank,
// rank x u32 LE dims, raw 32-bit LE floats. The model configuration rides as
// a reserved rank-1 tensor named "__config__".
void save_checkpoint(const Model& model, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

// Config encode/decode for the reserved tensor (exposed for tests).
std::vector<float> encode_model_config(const ModelConfig& cfg);
ModelConfig decode_model_config(const std::vector<float>& v);

} // namespace tdcn
