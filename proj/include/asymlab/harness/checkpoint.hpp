#pragma once

// Parameter files: one tensor per matrix plus manifest.json recording names,
// shapes and order, so a directory can be reloaded without the writing code.

#include "asymlab/attention.hpp"
#include "asymlab/autoencoder.hpp"
#include "asymlab/derivatives.hpp"
#include "asymlab/harness/output.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace asymlab {

/// dims = [out_dim, latent_dim x order]; row-major order matches flat_index.
Tensor derivative_to_tensor(const DerivativeTensor& t);
DerivativeTensor derivative_from_tensor(const Tensor& t);

/// Writes `dir`/manifest.json (model config, parameter list) and
/// `dir`/<parameter>.atns under the output root.
void save_model_checkpoint(const OutputDir& out, const std::string& dir, const SlotAutoencoder& model);
SlotAutoencoder load_model_checkpoint(const std::filesystem::path& dir);

struct AttentionDecoder {
  std::vector<CrossAttentionLayer> layers;
  PixelHead head;
};

/// Manifest lists layers in application order with head count and scaling;
/// only the first layer stores query inputs.
void save_attention_decoder(const OutputDir& out, const std::string& dir, const AttentionDecoder& d);
AttentionDecoder load_attention_decoder(const std::filesystem::path& dir);

}  // namespace asymlab
