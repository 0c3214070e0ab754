#include "groundseg/fusion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <unordered_map>

#include "groundseg/error.hpp"
#include "groundseg/parallel.hpp"

namespace groundseg {
namespace {

std::unordered_map<int, const FeatureMap2D*> index_maps(const std::vector<FeatureMap2D>& maps, const char* what) {
  std::unordered_map<int, const FeatureMap2D*> by_view;
  for (const auto& m : maps) {
    m.validate();
    if (!by_view.emplace(m.view_index, &m).second) {
      throw ArgumentError(std::string(what) + ": duplicate map for view " + std::to_string(m.view_index));
    }
  }
  return by_view;
}

const FeatureMap2D& lookup(const std::unordered_map<int, const FeatureMap2D*>& by_view, int view, const char* what) {
  const auto it = by_view.find(view);
  if (it == by_view.end()) {
    throw ArgumentError(std::string(what) + ": no map for referenced view " + std::to_string(view));
  }
  return *it->second;
}

std::span<const double> cell_values(const FeatureMap2D& m, const ViewRecord& r) {
  const auto cell = map_pixel_to_feature_cell(r.u, r.v, m.image_width, m.image_height, m.width, m.height);
  return m.at(cell.row, cell.col);
}

}  // namespace

void FeatureMap2D::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0 || image_width <= 0 || image_height <= 0) {
    throw ArgumentError("FeatureMap2D: dimensions must be positive (view " + std::to_string(view_index) + ")");
  }
  if (values.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ArgumentError("FeatureMap2D: value count does not match H x W x C (view " +
                        std::to_string(view_index) + ")");
  }
}

FeatureCell map_pixel_to_feature_cell(int u, int v, int image_width, int image_height, int feature_width,
                                      int feature_height) {
  if (u < 0 || v < 0 || u >= image_width || v >= image_height) {
    throw ArgumentError("map_pixel_to_feature_cell: pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") outside " + std::to_string(image_width) + "x" + std::to_string(image_height));
  }
  const auto row = static_cast<std::int64_t>(v) * feature_height / image_height;
  const auto col = static_cast<std::int64_t>(u) * feature_width / image_width;
  return {static_cast<int>(row), static_cast<int>(col)};
}

std::size_t depth_pool_as_negated_max(std::span<const double> depths) {
  if (depths.empty()) throw ArgumentError("depth_pool_as_negated_max: empty depth list");
  std::size_t best = 0;
  double best_value = -depths[0];
  for (std::size_t i = 1; i < depths.size(); ++i) {
    const double negated = -depths[i];
    if (negated > best_value) {
      best_value = negated;
      best = i;
    }
  }
  return best;
}

FeatureVolume fuse(const VoxelViewAssociation& assoc, const std::vector<FeatureMap2D>& feats, PoolingMode mode) {
  const auto by_view = index_maps(feats, "fuse");
  int channels = -1;
  for (const auto& m : feats) {
    if (channels >= 0 && m.channels != channels) throw ArgumentError("fuse: feature maps differ in channel count");
    channels = m.channels;
  }
  FeatureVolume out;
  out.channels = std::max(channels, 0);
  out.values.assign(assoc.size() * static_cast<std::size_t>(out.channels), 0.0);
  out.valid.assign(assoc.size(), 0);

  // Resolve every referenced map up front so a missing view fails loudly.
  for (const auto& recs : assoc.records) {
    for (const auto& r : recs) lookup(by_view, r.view_index, "fuse");
  }

  parallel_for(assoc.size(), [&](std::size_t i) {
    const auto& recs = assoc.records[i];
    if (recs.empty()) return;
    double* dst = out.values.data() + i * out.channels;
    if (mode == PoolingMode::DepthPool) {
      // Records are in priority order; reorder by view index so depth ties
      // resolve to the lowest view regardless of angle ranking.
      std::vector<const ViewRecord*> order;
      order.reserve(recs.size());
      for (const auto& r : recs) order.push_back(&r);
      std::sort(order.begin(), order.end(),
                [](const ViewRecord* a, const ViewRecord* b) { return a->view_index < b->view_index; });
      std::vector<double> depths;
      depths.reserve(order.size());
      for (const auto* r : order) depths.push_back(r->pixel_depth);
      const auto& chosen = *order[depth_pool_as_negated_max(depths)];
      const auto src = cell_values(*by_view.at(chosen.view_index), chosen);
      std::copy(src.begin(), src.end(), dst);
    } else {
      std::fill(dst, dst + out.channels, -std::numeric_limits<double>::infinity());
      for (const auto& r : recs) {
        const auto src = cell_values(*by_view.at(r.view_index), r);
        for (int c = 0; c < out.channels; ++c) dst[c] = std::max(dst[c], src[c]);
      }
    }
    out.valid[i] = 1;
  });
  return out;
}

std::vector<MaterialLabel> project_2d_labels(const VoxelViewAssociation& assoc,
                                             const std::vector<FeatureMap2D>& score_maps) {
  const auto by_view = index_maps(score_maps, "project_2d_labels");
  for (const auto& m : score_maps) {
    if (m.channels != kNumClasses) {
      throw ArgumentError("project_2d_labels: score map for view " + std::to_string(m.view_index) + " has " +
                          std::to_string(m.channels) + " channels, expected " + std::to_string(kNumClasses));
    }
  }
  std::vector<MaterialLabel> out(assoc.size(), MaterialLabel::Unlabeled);
  for (std::size_t i = 0; i < assoc.size(); ++i) {
    const auto& recs = assoc.records[i];
    if (recs.empty()) continue;
    std::array<double, kNumClasses> sum{};
    for (const auto& r : recs) {
      const auto s = cell_values(lookup(by_view, r.view_index, "project_2d_labels"), r);
      for (int k = 0; k < kNumClasses; ++k) sum[k] += s[k];
    }
    int best = 0;
    for (int k = 1; k < kNumClasses; ++k) {
      if (sum[k] > sum[best]) best = k;
    }
    out[i] = static_cast<MaterialLabel>(best);
  }
  return out;
}

void write_feature_volume(const FeatureVolume& volume, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::size_t count = 0;
  for (const auto v : volume.valid) count += v;
  out << "groundseg-feature-volume 1\nchannels " << volume.channels << "\ncount " << count
      << "\nlayout uint64_le_voxel_position float32_le_x_channels\nend_header\n";
  for (std::size_t i = 0; i < volume.size(); ++i) {
    if (!volume.valid[i]) continue;
    std::uint64_t idx = i;
    if constexpr (std::endian::native == std::endian::big) idx = __builtin_bswap64(idx);
    out.write(reinterpret_cast<const char*>(&idx), 8);
    for (const double v : volume.at(i)) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

FeatureVolume read_feature_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  int line_no = 0;
  auto line = [&]() {
    std::string s;
    while (pos < bytes.size() && bytes[pos] != '\n') s.push_back(static_cast<char>(bytes[pos++]));
    if (pos >= bytes.size()) throw ParseError(path.string() + ": truncated header");
    ++pos;
    ++line_no;
    return s;
  };
  if (line() != "groundseg-feature-volume 1") throw ParseError(path.string() + ": line 1: bad magic");
  long channels = -1, count = -1;
  for (std::string s = line(); s != "end_header"; s = line()) {
    if (std::sscanf(s.c_str(), "channels %ld", &channels) == 1 || std::sscanf(s.c_str(), "count %ld", &count) == 1 ||
        s.rfind("layout ", 0) == 0) {
      continue;
    }
    throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": unknown header line");
  }
  if (channels <= 0 || count < 0) throw ParseError(path.string() + ": header lacks channels/count");
  const std::size_t record = 8 + 4 * static_cast<std::size_t>(channels);
  if (bytes.size() - pos < record * static_cast<std::size_t>(count)) {
    throw ParseError(path.string() + ": truncated body at byte " + std::to_string(pos));
  }
  FeatureVolume vol;
  vol.channels = static_cast<int>(channels);
  for (long r = 0; r < count; ++r) {
    std::uint64_t idx;
    std::memcpy(&idx, &bytes[pos], 8);
    if constexpr (std::endian::native == std::endian::big) idx = __builtin_bswap64(idx);
    pos += 8;
    if (idx > (1ULL << 32)) throw ParseError(path.string() + ": implausible voxel position at byte " + std::to_string(pos - 8));
    if (idx >= vol.valid.size()) {
      vol.valid.resize(idx + 1, 0);
      vol.values.resize((idx + 1) * channels, 0.0);
    }
    vol.valid[idx] = 1;
    for (long c = 0; c < channels; ++c) {
      std::uint32_t bits;
      std::memcpy(&bits, &bytes[pos], 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      pos += 4;
      vol.values[idx * channels + c] = std::bit_cast<float>(bits);
    }
  }
  return vol;
}

}  // namespace groundseg
