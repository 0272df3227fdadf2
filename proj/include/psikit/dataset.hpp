#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "raster.hpp"

namespace psikit {

enum class VariantKind { Filled, Outline, Ideal, Wireframe, Shaded, Glyph };

inline const char* to_string(VariantKind k) {
  switch (k) {
    case VariantKind::Filled: return "filled";
    case VariantKind::Outline: return "outline";
    case VariantKind::Ideal: return "ideal";
    case VariantKind::Wireframe: return "wireframe";
    case VariantKind::Shaded: return "shaded";
    case VariantKind::Glyph: return "glyph";
  }
  return "?";
}

inline VariantKind variant_kind_from_string(const std::string& s) {
  if (s == "filled") return VariantKind::Filled;
  if (s == "outline") return VariantKind::Outline;
  if (s == "ideal") return VariantKind::Ideal;
  if (s == "wireframe") return VariantKind::Wireframe;
  if (s == "shaded") return VariantKind::Shaded;
  if (s == "glyph") return VariantKind::Glyph;
  throw std::invalid_argument("unknown variant kind: " + s);
}

// Per-sample provenance: the rendering variant plus whatever key/value
// metadata is needed to regenerate or group the sample. Ordered map so the
// manifest serialization is canonical.
struct VariantTag {
  VariantKind kind = VariantKind::Filled;
  std::map<std::string, std::string> params;

  bool operator==(const VariantTag& o) const { return kind == o.kind && params == o.params; }
};

struct LabeledDataset {
  std::vector<GrayImage> images;
  std::vector<int> labels;
  std::vector<VariantTag> tags;
  std::vector<std::string> class_names;
  std::uint64_t master_seed = 0;

  std::size_t size() const { return images.size(); }

  int num_classes() const {
    if (!class_names.empty()) return static_cast<int>(class_names.size());
    int m = 0;
    for (int l : labels) m = std::max(m, l + 1);
    return m;
  }

  void validate() const {
    if (images.empty()) throw std::invalid_argument("dataset is empty");
    if (images.size() != labels.size() || images.size() != tags.size())
      throw std::invalid_argument("dataset images/labels/tags sizes differ");
    for (const GrayImage& img : images)
      if (!img.same_size(images.front()))
        throw std::invalid_argument("dataset images are not uniformly sized");
    const int classes = num_classes();
    for (int l : labels)
      if (l < 0 || l >= classes) throw std::invalid_argument("label out of class range");
  }

  void push(GrayImage img, int label, VariantTag tag) {
    images.push_back(std::move(img));
    labels.push_back(label);
    tags.push_back(std::move(tag));
  }
};

}  // namespace psikit
