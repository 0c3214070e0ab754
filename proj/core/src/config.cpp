#include "groundseg/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "groundseg/error.hpp"
#include "groundseg/hash.hpp"

namespace groundseg {

std::string mode_name(PipelineMode m) {
  switch (m) {
    case PipelineMode::TwoDOnly:
      return "2d-only";
    case PipelineMode::MaxPool:
      return "2d3d-maxpool";
    case PipelineMode::DepthPool:
      return "2d3d-depthpool";
  }
  return "?";
}

PipelineMode parse_mode(const std::string& name) {
  for (auto m : {PipelineMode::TwoDOnly, PipelineMode::MaxPool, PipelineMode::DepthPool}) {
    if (mode_name(m) == name) return m;
  }
  throw ConfigError("unknown mode '" + name + "' (expected 2d-only, 2d3d-maxpool or 2d3d-depthpool)");
}

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string list(const T& values) {
  std::string s;
  for (std::size_t i = 0; i < static_cast<std::size_t>(values.size()); ++i) {
    if (i) s += ' ';
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(values[0])>>) {
      s += num(values[i]);
    } else {
      s += std::to_string(values[i]);
    }
  }
  return s;
}

/// Typed reader over one ptree that records every problem instead of
/// stopping at the first.
class Reader {
 public:
  Reader(const boost::property_tree::ptree& tree, std::vector<std::string>& problems)
      : tree_(tree), problems_(problems) {}

  template <typename T>
  void scalar(const std::string& section, const std::string& key, T& out) {
    const auto v = take(section, key);
    if (!v) return;
    std::istringstream is(*v);
    T tmp{};
    if constexpr (std::is_same_v<T, bool>) {
      if (*v == "true" || *v == "1") {
        out = true;
      } else if (*v == "false" || *v == "0") {
        out = false;
      } else {
        bad(section, key, *v);
      }
      return;
    } else {
      if (!(is >> tmp) || !(is >> std::ws).eof()) {
        bad(section, key, *v);
        return;
      }
    }
    out = tmp;
  }

  void text(const std::string& section, const std::string& key, std::string& out) {
    if (const auto v = take(section, key)) out = *v;
  }

  template <typename T>
  void vector(const std::string& section, const std::string& key, std::vector<T>& out, std::size_t expected = 0) {
    const auto v = take(section, key);
    if (!v) return;
    std::istringstream is(*v);
    std::vector<T> tmp;
    T x;
    while (is >> x) tmp.push_back(x);
    if (!is.eof() || tmp.empty() || (expected && tmp.size() != expected)) {
      bad(section, key, *v);
      return;
    }
    out = std::move(tmp);
  }

  void check_unknown() {
    std::set<std::string> sections;
    for (const auto& k : seen_) sections.insert(k.substr(0, k.find('.')));
    for (const auto& [section, sub] : tree_) {
      if (!sections.count(section)) {
        problems_.push_back(sub.empty() && !sub.data().empty()
                                ? "top-level key '" + section + "' must be inside a section"
                                : "unknown section [" + section + "]");
        continue;
      }
      for (const auto& [key, value] : sub) {
        if (!seen_.count(section + "." + key)) problems_.push_back("unknown key [" + section + "] " + key);
      }
    }
  }

 private:
  std::optional<std::string> take(const std::string& section, const std::string& key) {
    seen_.insert(section + "." + key);
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    std::string s = *v;
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  }

  void bad(const std::string& section, const std::string& key, const std::string& value) {
    problems_.push_back("[" + section + "] " + key + ": cannot parse '" + value + "'");
  }

  const boost::property_tree::ptree& tree_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

void read_train(Reader& r, const std::string& s, nn::TrainConfig& t) {
  r.scalar(s, "learning_rate", t.learning_rate);
  r.scalar(s, "momentum", t.momentum);
  r.scalar(s, "epochs", t.epochs);
  r.scalar(s, "batch_size", t.batch_size);
  r.scalar(s, "lr_decay_every", t.lr_decay_every);
  r.scalar(s, "lr_decay", t.lr_decay);
}

void write_train(std::ostream& os, const char* s, const nn::TrainConfig& t) {
  os << "\n[" << s << "]\n"
     << "learning_rate = " << num(t.learning_rate) << "\nmomentum = " << num(t.momentum) << "\nepochs = " << t.epochs
     << "\nbatch_size = " << t.batch_size << "\nlr_decay_every = " << t.lr_decay_every
     << "\nlr_decay = " << num(t.lr_decay) << "\n";
}

void throw_problems(const std::vector<std::string>& problems, const std::string& source) {
  if (problems.empty()) return;
  std::string msg = source + ": invalid configuration:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::string& source) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  PipelineConfig c;
  std::vector<std::string> problems;
  Reader r(tree, problems);

  std::string mode = mode_name(c.mode);
  r.scalar("run", "seed", c.seed);
  r.text("run", "mode", mode);
  try {
    c.mode = parse_mode(mode);
  } catch (const ConfigError& e) {
    problems.emplace_back(std::string("[run] mode: ") + e.what());
  }

  std::vector<double> extent{c.extent_x, c.extent_y};
  r.vector("scene", "extent", extent, 2);
  c.extent_x = extent[0];
  c.extent_y = extent[1];
  r.scalar("scene", "relief_amplitude", c.relief_amplitude);
  r.scalar("scene", "mesh_resolution", c.mesh_resolution);

  r.vector("flight", "altitudes", c.altitudes);
  r.scalar("flight", "scale", c.flight.scale);
  r.scalar("flight", "overlap", c.flight.overlap);
  std::vector<int> image{c.flight.image_width, c.flight.image_height};
  r.vector("flight", "image_size", image, 2);
  c.flight.image_width = image[0];
  c.flight.image_height = image[1];
  std::vector<double> focal{c.flight.fx, c.flight.fy};
  r.vector("flight", "focal", focal, 2);
  c.flight.fx = focal[0];
  c.flight.fy = focal[1];

  r.scalar("preprocess", "downsample_spacing", c.downsample_spacing);

  std::vector<double> cs{c.chunk_size.x(), c.chunk_size.y(), c.chunk_size.z()};
  r.vector("voxel", "chunk_size", cs, 3);
  c.chunk_size = Eigen::Vector3d(cs[0], cs[1], cs[2]);
  std::vector<int> vc{c.voxel_counts.x(), c.voxel_counts.y(), c.voxel_counts.z()};
  r.vector("voxel", "voxel_counts", vc, 3);
  c.voxel_counts = Eigen::Vector3i(vc[0], vc[1], vc[2]);

  r.scalar("association", "max_views", c.association.max_views);
  r.scalar("association", "depth_prune_threshold", c.association.depth_prune_threshold);
  std::string ref = c.association.angle_reference == AngleReference::VerticalAxis ? "vertical" : "normal";
  r.text("association", "angle_reference", ref);
  if (ref == "vertical") {
    c.association.angle_reference = AngleReference::VerticalAxis;
  } else if (ref == "normal") {
    c.association.angle_reference = AngleReference::SurfaceNormal;
  } else {
    problems.push_back("[association] angle_reference: expected 'vertical' or 'normal', got '" + ref + "'");
  }
  r.scalar("association", "normal_neighbors", c.association.normal_neighbors);

  r.scalar("backbone", "out_channels", c.backbone.out_channels);
  std::vector<int> fr{c.backbone.feature_height, c.backbone.feature_width};
  r.vector("backbone", "feature_resolution", fr, 2);
  c.backbone.feature_height = fr[0];
  c.backbone.feature_width = fr[1];
  r.scalar("backbone", "hidden_channels", c.backbone.hidden_channels);
  read_train(r, "train2d", c.train2d);

  r.vector("net3d", "encoder_channels", c.net3d.encoder_channels);
  r.scalar("net3d", "dropout_rate", c.net3d.dropout_rate);
  r.scalar("net3d", "use_batchnorm", c.net3d.use_batchnorm);
  read_train(r, "train3d", c.train3d);

  r.scalar("annotation", "splat_radius", c.backproject.splat_radius);
  r.scalar("annotation", "depth_prune_threshold", c.backproject.depth_prune_threshold);
  r.scalar("annotation", "cell_size", c.export_cell_size);

  r.check_unknown();
  throw_problems(problems, source);

  c.backbone.input_width = c.flight.image_width;
  c.backbone.input_height = c.flight.image_height;
  c.net3d.input_channels = 1 + c.backbone.out_channels;
  c.train2d.seed = derive_seed(c.seed, 2);
  c.train3d.seed = derive_seed(c.seed, 3);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("config file not found: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.string());
}

void PipelineConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](const std::string& field, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      problems.push_back(field + ": " + e.what());
    }
  };
  if (!(extent_x > 0.0 && extent_y > 0.0)) problems.emplace_back("[scene] extent must be positive");
  if (!(relief_amplitude >= 0.0)) problems.emplace_back("[scene] relief_amplitude must be >= 0");
  if (!(mesh_resolution > 0.0)) problems.emplace_back("[scene] mesh_resolution must be positive");
  if (altitudes.empty()) problems.emplace_back("[flight] altitudes must list at least one altitude");
  for (const auto& f : flights()) check("[flight]", [&] { f.validate(); });
  if (!(downsample_spacing > 0.0)) problems.emplace_back("[preprocess] downsample_spacing must be positive");
  check("[voxel]", [&] {
    ChunkSpec s;
    s.chunk_size = chunk_size;
    s.voxel_counts = voxel_counts;
    s.validate();
  });
  check("[association]", [&] { association.validate(); });
  check("[backbone]", [&] { backbone.validate(); });
  check("[train2d]", [&] { train2d.validate(); });
  check("[net3d]", [&] { net3d.validate(); });
  check("[train3d]", [&] { train3d.validate(); });
  if (mode != PipelineMode::TwoDOnly) {
    const int div = net3d.divisor();
    if (voxel_counts.x() % div || voxel_counts.y() % div || voxel_counts.z() % div) {
      problems.push_back("[voxel] voxel_counts must be divisible by " + std::to_string(div) +
                         " for the configured encoder depth");
    }
  }
  if (net3d.input_channels != 1 + backbone.out_channels) {
    problems.emplace_back("[net3d] input channels must equal 1 + backbone out_channels");
  }
  if (backproject.splat_radius < 0) problems.emplace_back("[annotation] splat_radius must be >= 0");
  if (!(backproject.depth_prune_threshold > 0.0)) problems.emplace_back("[annotation] depth_prune_threshold must be positive");
  if (!(export_cell_size > 0.0)) problems.emplace_back("[annotation] cell_size must be positive");
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

ChunkSpec PipelineConfig::chunk_spec_for(const PointCloud& cloud) const {
  ChunkSpec s;
  s.chunk_size = chunk_size;
  s.voxel_counts = voxel_counts;
  s.origin = cloud.min_corner();
  s.validate();
  return s;
}

std::vector<FlightSpec> PipelineConfig::flights() const {
  std::vector<FlightSpec> out;
  for (std::size_t i = 0; i < altitudes.size(); ++i) {
    FlightSpec f = flight;
    f.altitude = altitudes[i];
    f.id_prefix = "f" + std::to_string(i);
    out.push_back(f);
  }
  return out;
}

std::string to_ini(const PipelineConfig& c) {
  std::ostringstream os;
  os << "[run]\nseed = " << c.seed << "\nmode = " << mode_name(c.mode) << "\n";
  os << "\n[scene]\nextent = " << num(c.extent_x) << " " << num(c.extent_y)
     << "\nrelief_amplitude = " << num(c.relief_amplitude) << "\nmesh_resolution = " << num(c.mesh_resolution)
     << "\n";
  os << "\n[flight]\naltitudes = " << list(c.altitudes) << "\nscale = " << num(c.flight.scale)
     << "\noverlap = " << num(c.flight.overlap) << "\nimage_size = " << c.flight.image_width << " "
     << c.flight.image_height << "\nfocal = " << num(c.flight.fx) << " " << num(c.flight.fy) << "\n";
  os << "\n[preprocess]\ndownsample_spacing = " << num(c.downsample_spacing) << "\n";
  os << "\n[voxel]\nchunk_size = " << num(c.chunk_size.x()) << " " << num(c.chunk_size.y()) << " "
     << num(c.chunk_size.z()) << "\nvoxel_counts = " << c.voxel_counts.x() << " " << c.voxel_counts.y() << " "
     << c.voxel_counts.z() << "\n";
  os << "\n[association]\nmax_views = " << c.association.max_views
     << "\ndepth_prune_threshold = " << num(c.association.depth_prune_threshold) << "\nangle_reference = "
     << (c.association.angle_reference == AngleReference::VerticalAxis ? "vertical" : "normal")
     << "\nnormal_neighbors = " << c.association.normal_neighbors << "\n";
  os << "\n[backbone]\nout_channels = " << c.backbone.out_channels << "\nfeature_resolution = "
     << c.backbone.feature_height << " " << c.backbone.feature_width
     << "\nhidden_channels = " << c.backbone.hidden_channels << "\n";
  write_train(os, "train2d", c.train2d);
  os << "\n[net3d]\nencoder_channels = " << list(c.net3d.encoder_channels)
     << "\ndropout_rate = " << num(c.net3d.dropout_rate)
     << "\nuse_batchnorm = " << (c.net3d.use_batchnorm ? "true" : "false") << "\n";
  write_train(os, "train3d", c.train3d);
  os << "\n[annotation]\nsplat_radius = " << c.backproject.splat_radius
     << "\ndepth_prune_threshold = " << num(c.backproject.depth_prune_threshold)
     << "\ncell_size = " << num(c.export_cell_size) << "\n";
  return os.str();
}

std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(to_ini(cfg)); }

}  // namespace groundseg
