#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>

#include "harsanyi/cnn.hpp"
#include "harsanyi/dataset.hpp"
#include "harsanyi/mlp.hpp"

namespace harsanyi {

// `harsanyinet v1` text format: one record per line, reals in shortest
// round-trip decimal, closed by a CRC-32 of everything before the checksum
// line. An optional preprocessing record lets a model be applied to raw CSV
// rows later.
std::string serialize_model(const HarsanyiMlp& model, const Preprocessing* prep = nullptr);
std::string serialize_model(const HarsanyiCnn& model, const Preprocessing* prep = nullptr);

void save_model(const HarsanyiMlp& model, const std::string& path,
                const Preprocessing* prep = nullptr);
void save_model(const HarsanyiCnn& model, const std::string& path,
                const Preprocessing* prep = nullptr);

struct LoadedModel {
  std::variant<HarsanyiMlp, HarsanyiCnn> model;
  std::optional<Preprocessing> preprocessing;

  bool is_mlp() const { return model.index() == 0; }
  bool is_cnn() const { return model.index() == 1; }
};

// FormatError on bad syntax, version mismatch, truncation or checksum failure.
LoadedModel parse_model(const std::string& text);
LoadedModel load_model(const std::string& path);

// TopologyError if the file holds the other kind of network.
HarsanyiMlp load_mlp(const std::string& path, std::optional<Preprocessing>* prep = nullptr);
HarsanyiCnn load_cnn(const std::string& path, std::optional<Preprocessing>* prep = nullptr);

}  // namespace harsanyi
