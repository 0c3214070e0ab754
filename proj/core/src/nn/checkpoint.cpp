#include "groundseg/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "groundseg/error.hpp"

namespace groundseg::nn {
namespace {

constexpr const char* kMagic = "groundseg-checkpoint 1";

struct Entry {
  std::string name;
  Tensor* tensor;
};

std::vector<Entry> entries(Model& model) {
  std::vector<Entry> out;
  for (auto* p : model.parameters()) out.push_back({p->name, &p->value});
  for (auto& [name, t] : model.buffers()) out.push_back({name, t});
  return out;
}

void put_f64(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

struct Header {
  CheckpointInfo info;
  std::vector<std::pair<std::string, std::string>> tensors;  // name, shape string
};

Header read_header(std::istream& is, const std::filesystem::path& path) {
  Header h;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  if (!std::getline(is, line) || line != kMagic) {
    lineno = 1;
    fail("not a groundseg checkpoint");
  }
  lineno = 1;
  bool ended = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line == "end_header") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "seed") {
      if (!(ls >> h.info.seed)) fail("bad seed");
    } else if (key == "epoch") {
      if (!(ls >> h.info.epoch)) fail("bad epoch");
    } else if (key == "config") {
      std::string kv;
      ls >> kv;
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail("config line without '='");
      h.info.config[kv.substr(0, eq)] = kv.substr(eq + 1);
    } else if (key == "tensor") {
      std::string name, shape;
      if (!(ls >> name >> shape)) fail("bad tensor line");
      h.tensors.emplace_back(name, shape);
    } else {
      fail("unknown header key '" + key + "'");
    }
  }
  if (!ended) fail("missing end_header");
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model, std::uint64_t seed, int epoch) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os << kMagic << "\n" << "seed " << seed << "\n" << "epoch " << epoch << "\n";
  for (const auto& [k, v] : model.describe()) os << "config " << k << "=" << v << "\n";
  const auto list = entries(model);
  for (const auto& e : list) os << "tensor " << e.name << " " << e.tensor->shape_string() << "\n";
  os << "end_header\n";
  for (const auto& e : list) {
    for (const double v : e.tensor->values()) put_f64(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("checkpoint not found: " + path.string());
  return read_header(is, path).info;
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path, Model& model) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("checkpoint not found: " + path.string());
  Header h = read_header(is, path);
  const auto list = entries(model);
  if (h.tensors.size() != list.size()) {
    throw ParseError(path.string() + ": checkpoint holds " + std::to_string(h.tensors.size()) +
                     " tensors, model expects " + std::to_string(list.size()));
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (h.tensors[i].first != list[i].name || h.tensors[i].second != list[i].tensor->shape_string()) {
      throw ParseError(path.string() + ": tensor " + std::to_string(i) + " is " + h.tensors[i].first + " " +
                       h.tensors[i].second + ", model expects " + list[i].name + " " +
                       list[i].tensor->shape_string());
    }
  }
  for (const auto& e : list) {
    for (auto& v : e.tensor->values()) v = get_f64(is);
  }
  if (!is) throw ParseError(path.string() + ": truncated parameter block");
  if (is.peek() != std::char_traits<char>::eof()) throw ParseError(path.string() + ": trailing bytes after parameters");
  return h.info;
}

}  // namespace groundseg::nn
