#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "harsanyi/and_gate.hpp"
#include "harsanyi/attribution.hpp"
#include "harsanyi/field_set.hpp"
#include "harsanyi/game.hpp"

namespace harsanyi {

// Convolution + max-pool + ReLU producing z0. Not part of the game: players
// are the locations of z0.
struct StemConfig {
  int in_channels = 1;
  int image_height = 8;
  int image_width = 8;
  int kernel = 3;
  int channels = 8;
  int pool = 1;
};

struct CnnConfig {
  StemConfig stem;
  int blocks = 2;
  int channels = 8;
  int kernel = 3;
  int class_count = 2;
  double beta = 1000.0;
  double gamma = 1.0;
  AndMode and_mode = AndMode::kSoft;

  int grid_height() const { return stem.image_height / stem.pool; }
  int grid_width() const { return stem.image_width / stem.pool; }
  int locations() const { return grid_height() * grid_width(); }
  int image_size() const { return stem.in_channels * stem.image_height * stem.image_width; }
  void validate() const;
};

// C x H x W, row-major.
struct FeatureTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  int layer = 0;
  std::vector<double> values;

  FeatureTensor() = default;
  FeatureTensor(int c, int h, int w, int l = 0)
      : channels(c), height(h), width(w), layer(l), values(std::size_t(c) * h * w, 0.0) {}

  int locations() const { return height * width; }
  double& at(int c, int loc) { return values[std::size_t(c) * height * width + loc]; }
  double at(int c, int loc) const { return values[std::size_t(c) * height * width + loc]; }
  double& at(int c, int h, int w) { return at(c, h * width + w); }
  double at(int c, int h, int w) const { return at(c, h * width + w); }
};

struct Stem {
  std::vector<double> weights;  // channels x in_channels x kernel x kernel
  std::vector<double> bias;     // channels
};

// One Harsanyi conv block. Every output location (h, w) owns a selector over
// its K x K candidate locations, shared by all output channels and applied
// to whole channel vectors. Taps that fall outside the grid are never
// children.
struct ConvBlock {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int height = 0;
  int width = 0;
  std::vector<double> tau;      // locations x kernel^2
  std::vector<double> weights;  // out x in x kernel x kernel

  int taps() const { return kernel * kernel; }
  bool selected(int loc, int tap) const { return tau[std::size_t(loc) * taps() + tap] > 0.0; }
  // Grid location read by `tap` of output location `loc`, or -1 when the tap
  // lies in the padding.
  int tap_location(int loc, int tap) const;
  double weight(int out, int in, int tap) const {
    return weights[(std::size_t(out) * in_channels + in) * taps() + tap];
  }
};

struct CnnActivations {
  FeatureTensor z0;                         // after grid masking
  std::vector<FeatureTensor> blocks;        // z^(l), l = 1..L
  std::vector<std::vector<std::uint8_t>> gate;  // gate[l][loc]: AND passed
  AndMode mode = AndMode::kSoft;
};

// Receptive fields per (block, channel, location); channel agreement is
// checked while building and exposed via `location(l, loc)`.
struct GridFieldMap {
  int locations = 0;
  std::vector<std::vector<std::vector<FieldSet>>> per_channel;  // [l][c][loc]

  const FieldSet& location(int l, int loc) const { return per_channel[l][0][loc]; }
};

class HarsanyiCnn {
 public:
  explicit HarsanyiCnn(CnnConfig config);

  const CnnConfig& config() const { return config_; }
  CnnConfig& mutable_config() { return config_; }
  int class_count() const { return config_.class_count; }
  int block_count() const { return config_.blocks; }
  int locations() const { return config_.locations(); }
  // Units per block: channels x locations.
  int block_units() const { return config_.channels * config_.locations(); }
  int total_units() const { return block_units() * config_.blocks; }

  Stem& stem() { return stem_; }
  const Stem& stem() const { return stem_; }
  std::vector<ConvBlock>& blocks() { return blocks_; }
  const std::vector<ConvBlock>& blocks() const { return blocks_; }
  // class_count rows; each row is [block][channel][location].
  std::vector<double>& head() { return head_; }
  const std::vector<double>& head() const { return head_; }
  double head_weight(int cls, int l, int c, int loc) const {
    return head_[std::size_t(cls) * total_units() + std::size_t(l) * block_units() +
                 std::size_t(c) * locations() + loc];
  }

 private:
  CnnConfig config_;
  Stem stem_;
  std::vector<ConvBlock> blocks_;
  std::vector<double> head_;
};

FeatureTensor stem_forward(const HarsanyiCnn& model, std::span<const double> image);

// Zeroes the channel vector of every location not in `present`.
void mask_grid(FeatureTensor& z0, const FieldSet& present);

FeatureTensor conv_block_forward(const ConvBlock& block, const FeatureTensor& input, AndMode mode,
                                 double gamma, std::vector<std::uint8_t>* gate_state = nullptr);

// Blocks on top of an already masked z0.
CnnActivations forward_blocks(const HarsanyiCnn& model, FeatureTensor z0, AndMode mode);
CnnActivations cnn_forward(const HarsanyiCnn& model, std::span<const double> image,
                           const FieldSet& present, AndMode mode);

std::vector<double> cnn_output(const HarsanyiCnn& model, const CnnActivations& act);
double cnn_class_logit(const HarsanyiCnn& model, const CnnActivations& act, int cls);

GridFieldMap grid_receptive_fields(const HarsanyiCnn& model);

AttributionVector exact_shapley_grid(const HarsanyiCnn& model, std::span<const double> image,
                                     int class_index, AndMode mode);
AttributionVector exact_shapley_grid(const HarsanyiCnn& model, const CnnActivations& act,
                                     const GridFieldMap& fields, int class_index);

// Shapley values over `selected` locations, all others held present.
AttributionVector restricted_shapley_grid(const HarsanyiCnn& model,
                                          std::span<const double> image,
                                          const FieldSet& selected, int class_index,
                                          AndMode mode);

// Game over grid locations (requires locations() <= 24).
ValueOracle grid_game(const HarsanyiCnn& model, std::span<const double> image, int class_index,
                      AndMode mode);
ValueOracle restricted_grid_game(const HarsanyiCnn& model, std::span<const double> image,
                                 const FieldSet& selected, int class_index, AndMode mode);

}  // namespace harsanyi
