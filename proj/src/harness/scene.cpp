#include "asymlab/harness/scene.hpp"

#include "asymlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace asymlab {

using nlohmann::json;

const std::array<double, 3>& sprite_color(int id) {
  static const std::array<std::array<double, 3>, kSpriteColors> colors = {{
      {1.0, 0.2, 0.2},
      {0.2, 1.0, 0.2},
      {0.3, 0.4, 1.0},
      {1.0, 1.0, 0.2},
  }};
  require(id >= 0 && id < kSpriteColors, ErrorCode::InvalidArgument, "sprite: colour id out of range");
  return colors[static_cast<std::size_t>(id)];
}

std::vector<bool> SpriteScene::foreground() const {
  std::vector<bool> fg(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) fg[i] = labels[i] != 0;
  return fg;
}

namespace {
bool covers(const SpriteLatent& o, double px, double py) {
  const double h = o.size / 2.0;
  if (o.shape == SpriteShape::Square)
    return px >= o.cx - h && px < o.cx + h && py >= o.cy - h && py < o.cy + h;
  const double dx = px - o.cx, dy = py - o.cy;
  return dx * dx + dy * dy <= h * h;
}
}  // namespace

SpriteScene render_scene(const std::vector<SpriteLatent>& latents, int image_size) {
  require(image_size > 0, ErrorCode::InvalidArgument, "render: image size must be positive");
  const int p = image_size * image_size;
  SpriteScene s;
  s.image_size = image_size;
  s.image = Mat::Zero(p, 3);
  s.labels.assign(static_cast<std::size_t>(p), 0);
  s.latents = latents;
  for (std::size_t k = 0; k < latents.size(); ++k) {
    const auto& o = latents[k];
    const double h = o.size / 2.0;
    require(o.size > 0.0 && o.cx - h >= 0.0 && o.cy - h >= 0.0 && o.cx + h <= image_size &&
                o.cy + h <= image_size,
            ErrorCode::DomainError, "render: object " + std::to_string(k) + " leaves the frame");
    const auto& rgb = sprite_color(o.color);
    std::vector<bool> mask(static_cast<std::size_t>(p), false);
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x) {
        if (!covers(o, x + 0.5, y + 0.5)) continue;
        const int l = y * image_size + x;
        mask[static_cast<std::size_t>(l)] = true;
        s.labels[static_cast<std::size_t>(l)] = static_cast<int>(k) + 1;
        for (int c = 0; c < 3; ++c) s.image(l, c) = rgb[static_cast<std::size_t>(c)];
      }
    s.masks.push_back(std::move(mask));
  }
  return s;
}

void DatasetConfig::validate() const {
  require(image_size > 0 && min_objects >= 0 && max_objects >= min_objects && count > 0,
          ErrorCode::ConfigError, "dataset: invalid counts");
  require(min_size >= 1 && max_size >= min_size && max_size <= image_size, ErrorCode::ConfigError,
          "dataset: invalid object sizes");
  require(train_fraction >= 0 && val_fraction >= 0 && train_fraction + val_fraction <= 1.0,
          ErrorCode::ConfigError, "dataset: invalid split fractions");
}

json to_json(const DatasetConfig& c) {
  return {{"image_size", c.image_size},         {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},       {"min_size", c.min_size},
          {"max_size", c.max_size},             {"count", c.count},
          {"train_fraction", c.train_fraction}, {"val_fraction", c.val_fraction},
          {"seed", c.seed}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig c;
  c.image_size = j.value("image_size", c.image_size);
  c.min_objects = j.value("min_objects", c.min_objects);
  c.max_objects = j.value("max_objects", c.max_objects);
  c.min_size = j.value("min_size", c.min_size);
  c.max_size = j.value("max_size", c.max_size);
  c.count = j.value("count", c.count);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::vector<Mat> Dataset::images(const std::vector<std::size_t>& idx) const {
  std::vector<Mat> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(scenes.at(i).image);
  return out;
}

json Dataset::manifest() const {
  json objects = json::array();
  for (const auto& s : scenes) {
    json scene = json::array();
    for (const auto& o : s.latents)
      scene.push_back({{"cx", o.cx},
                       {"cy", o.cy},
                       {"size", o.size},
                       {"color", o.color},
                       {"shape", o.shape == SpriteShape::Square ? "square" : "circle"}});
    objects.push_back(scene);
  }
  return {{"config", to_json(config)},
          {"split", {{"train", train}, {"val", val}, {"test", test}}},
          {"scenes", objects}};
}

Dataset make_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> n_obj(cfg.min_objects, cfg.max_objects);
  std::uniform_int_distribution<int> size(cfg.min_size, cfg.max_size);
  std::uniform_int_distribution<int> color(0, kSpriteColors - 1);
  std::uniform_int_distribution<int> shape(0, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset d;
  d.config = cfg;
  for (int i = 0; i < cfg.count; ++i) {
    std::vector<SpriteLatent> objs(static_cast<std::size_t>(n_obj(rng)));
    for (auto& o : objs) {
      o.size = size(rng);
      const double span = cfg.image_size - o.size;
      o.cx = o.size / 2.0 + span * unit(rng);
      o.cy = o.size / 2.0 + span * unit(rng);
      o.color = color(rng);
      o.shape = static_cast<SpriteShape>(shape(rng));
    }
    d.scenes.push_back(render_scene(objs, cfg.image_size));
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(cfg.count));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * cfg.count));
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * cfg.count));
  d.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  d.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  for (auto* v : {&d.train, &d.val, &d.test}) std::sort(v->begin(), v->end());
  return d;
}

}  // namespace asymlab
