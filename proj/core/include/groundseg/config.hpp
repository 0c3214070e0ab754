#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "groundseg/association.hpp"
#include "groundseg/export.hpp"
#include "groundseg/nn/models.hpp"
#include "groundseg/nn/train.hpp"
#include "groundseg/synthetic.hpp"
#include "groundseg/voxel_grid.hpp"

namespace groundseg {

/// The three experiment arms: 2D network alone, and 2D features fused into
/// the 3D network with max pooling or depth pooling across views.
enum class PipelineMode { TwoDOnly, MaxPool, DepthPool };

std::string mode_name(PipelineMode m);
PipelineMode parse_mode(const std::string& name);

struct PipelineConfig {
  std::uint64_t seed = 1;
  PipelineMode mode = PipelineMode::DepthPool;

  // [scene]
  double extent_x = 100.0;
  double extent_y = 100.0;
  double relief_amplitude = 0.8;
  double mesh_resolution = 0.5;

  // [flight]: one flight per altitude, sharing the remaining settings.
  std::vector<double> altitudes{70.0, 280.0};
  FlightSpec flight;

  // [preprocess]
  double downsample_spacing = 0.3;

  // [voxel]: chunk origin is anchored at each cloud's minimum corner.
  Eigen::Vector3d chunk_size{16.0, 16.0, 4.0};
  Eigen::Vector3i voxel_counts{32, 32, 8};

  AssociationConfig association;

  nn::Backbone2DConfig backbone;
  nn::TrainConfig train2d{0.01, 0.9, 12, 4, 20, 0.5, 1};

  /// input_channels is derived from backbone.out_channels.
  nn::Net3DConfig net3d;
  nn::TrainConfig train3d{0.01, 0.9, 40, 2, 20, 0.5, 1};

  BackprojectConfig backproject;
  double export_cell_size = 0.5;

  /// Throws ConfigError listing every violated field.
  void validate() const;
  ChunkSpec chunk_spec_for(const PointCloud& cloud) const;
  std::vector<FlightSpec> flights() const;
};

/// INI text with [run], [scene], [flight], [preprocess], [voxel],
/// [association], [backbone], [train2d], [net3d], [train3d], [annotation].
/// Missing keys keep their defaults; unknown sections or keys are errors.
PipelineConfig parse_config(const std::string& text, const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical INI text containing every key; parse_config(to_ini(c)) == c.
std::string to_ini(const PipelineConfig& cfg);

/// Hex SHA-256 of to_ini(cfg).
std::string config_hash(const PipelineConfig& cfg);

}  // namespace groundseg
