#pragma once

// Toy sprite scenes: coloured squares and circles on black, rasterized without
// anti-aliasing. A pixel belongs to a shape when its centre does: squares
// cover |x - cx| < s/2 and |y - cy| < s/2 (half-open on the high side),
// circles cover (x - cx)^2 + (y - cy)^2 <= (s/2)^2. Later objects occlude
// earlier ones.

#include "asymlab/linalg.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace asymlab {

enum class SpriteShape { Square = 0, Circle = 1 };

inline constexpr int kSpriteColors = 4;
/// RGB of each colour id.
const std::array<double, 3>& sprite_color(int id);

struct SpriteLatent {
  double cx = 0.0, cy = 0.0;  // centre in pixel units, origin at the top-left corner
  double size = 1.0;          // side length or diameter
  int color = 0;
  SpriteShape shape = SpriteShape::Square;
};

struct SpriteScene {
  int image_size = 0;
  Mat image;                            // (H*W) x 3, l = y*W + x
  std::vector<std::vector<bool>> masks;  // full coverage per object
  std::vector<int> labels;              // visible object + 1, 0 = background
  std::vector<SpriteLatent> latents;

  std::vector<bool> foreground() const;
};

SpriteScene render_scene(const std::vector<SpriteLatent>& latents, int image_size);

struct DatasetConfig {
  int image_size = 16;
  int min_objects = 2;
  int max_objects = 3;
  int min_size = 3;
  int max_size = 5;
  int count = 512;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct Dataset {
  DatasetConfig config;
  std::vector<SpriteScene> scenes;
  std::vector<std::size_t> train, val, test;

  std::vector<Mat> images(const std::vector<std::size_t>& idx) const;
  nlohmann::json manifest() const;
};

/// Latents are drawn so every object lies fully inside the frame.
Dataset make_dataset(const DatasetConfig& cfg);

}  // namespace asymlab
