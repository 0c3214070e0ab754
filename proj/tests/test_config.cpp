#include <gtest/gtest.h>

#include "groundseg/config.hpp"
#include "groundseg/error.hpp"
#include "groundseg/hash.hpp"

using namespace groundseg;

TEST(Config, CanonicalTextRoundTrips) {
  const PipelineConfig d;
  const std::string text = to_ini(d);
  EXPECT_EQ(to_ini(parse_config(text)), text);
  for (const char* section : {"[run]", "[scene]", "[flight]", "[preprocess]", "[voxel]", "[association]",
                              "[backbone]", "[train2d]", "[net3d]", "[train3d]", "[annotation]"}) {
    EXPECT_NE(text.find(section), std::string::npos) << section;
  }
}

TEST(Config, ShippedDefaultFileMatchesDefaults) {
  EXPECT_EQ(to_ini(load_config(GROUNDSEG_SOURCE_DIR "/configs/default.ini")), to_ini(PipelineConfig{}));
}

TEST(Config, OverridesApply) {
  const auto c = parse_config("[run]\nseed = 42\nmode = 2d3d-maxpool\n[train3d]\nepochs = 3\n[voxel]\n"
                              "chunk_size = 8 8 4\nvoxel_counts = 16 16 8\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.mode, PipelineMode::MaxPool);
  EXPECT_EQ(c.train3d.epochs, 3);
  EXPECT_EQ(c.chunk_size, Eigen::Vector3d(8, 8, 4));
  EXPECT_EQ(c.voxel_counts, Eigen::Vector3i(16, 16, 8));
  EXPECT_NE(config_hash(c), config_hash(PipelineConfig{}));
}

TEST(Config, DerivedInputChannels) {
  const auto c = parse_config("[backbone]\nout_channels = 5\n");
  EXPECT_EQ(c.net3d.input_channels, 6);
}

TEST(Config, UnknownKeysAndSectionsAreErrors) {
  EXPECT_THROW(parse_config("[run]\nsede = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[nonsense]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("stray = 1\n"), ConfigError);
}

TEST(Config, BadValuesAreErrors) {
  EXPECT_THROW(parse_config("[run]\nseed = banana\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nmode = 3d-only\n"), ConfigError);
  EXPECT_THROW(parse_config("[flight]\noverlap = 0.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[voxel]\nchunk_size = 16 16\n"), ConfigError);
}

TEST(Config, ValidateListsEveryProblem) {
  PipelineConfig c;
  c.train3d.learning_rate = -1.0;
  c.downsample_spacing = 0.0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
    EXPECT_NE(msg.find("downsample"), std::string::npos) << msg;
  }
}

TEST(Config, HashIsSha256OfCanonicalText) {
  const PipelineConfig c;
  EXPECT_EQ(config_hash(c), sha256_hex(to_ini(c)));
  EXPECT_EQ(config_hash(c).size(), 64u);
}

TEST(Config, ModeNames) {
  for (const auto m : {PipelineMode::TwoDOnly, PipelineMode::MaxPool, PipelineMode::DepthPool}) {
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  }
  EXPECT_EQ(mode_name(PipelineMode::DepthPool), "2d3d-depthpool");
}

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ChunkSpecFor, AnchorsAtCloudMinimum) {
  const PipelineConfig c;
  const PointCloud cloud({{3, 4, 5}, {10, 11, 6}});
  const auto s = c.chunk_spec_for(cloud);
  EXPECT_EQ(s.origin, Eigen::Vector3d(3, 4, 5));
  EXPECT_EQ(s.chunk_size, c.chunk_size);
}
