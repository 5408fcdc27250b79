#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mgs/net.hpp"
#include "mgs/tensor_io.hpp"

namespace mgs {
namespace detail {

inline std::string repr_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace detail

// Checkpoint layout: a text index ("MGSCKPT 1", meta lines reconstructing the
// architecture, one "param NAME OFFSET N C H W" line per tensor, then "end")
// followed by concatenated MGST containers; offsets count from the byte after
// the "end" line. Biases are stored as 1x1x1xLEN tensors.
inline void save_checkpoint(const SaliencyNet& net, const std::string& path) {
  const NetConfig& cfg = net.config();
  std::string blobs;
  std::ostringstream index;
  index << "MGSCKPT 1\n";
  index << "meta channels " << cfg.channels[0] << ',' << cfg.channels[1] << ','
        << cfg.channels[2] << '\n';
  index << "meta lambda " << detail::repr_double(cfg.lambda) << '\n';
  index << "meta generator "
        << (cfg.generator == OffsetGenerator::geometric ? "geometric"
                                                        : "learned")
        << '\n';
  index << "meta clamp " << detail::repr_double(cfg.clamp) << '\n';
  for (const auto& [name, p] : net.named_params()) {
    const Tensor& w = p->weights;
    index << "param " << name << ".weight " << blobs.size() << ' ' << w.n()
          << ' ' << w.c() << ' ' << w.h() << ' ' << w.w() << '\n';
    blobs += encode_tensor(w);
    Tensor b(1, 1, 1, p->bias.size());
    for (std::size_t i = 0; i < p->bias.size(); ++i) b.raw()[i] = p->bias[i];
    index << "param " << name << ".bias " << blobs.size() << " 1 1 1 "
          << p->bias.size() << '\n';
    blobs += encode_tensor(b);
  }
  index << "end\n";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const std::string head = index.str();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline SaliencyNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string b = buf.str();

  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t eol = b.find('\n', pos);
    if (eol == std::string::npos)
      throw std::runtime_error(path + ": unterminated checkpoint index");
    std::string line = b.substr(pos, eol - pos);
    pos = eol + 1;
    return line;
  };

  if (next_line() != "MGSCKPT 1")
    throw std::runtime_error(path + ": not a checkpoint file");
  NetConfig cfg;
  struct ParamEntry {
    std::size_t offset = 0;
    std::size_t dims[4] = {0, 0, 0, 0};
  };
  std::map<std::string, ParamEntry> entries;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key, value;
      ls >> key >> value;
      if (!ls || key.empty() || value.empty())
        throw std::runtime_error(path + ": malformed meta line: " + line);
      if (key == "channels") {
        std::istringstream vs(value);
        char comma1 = 0, comma2 = 0;
        vs >> cfg.channels[0] >> comma1 >> cfg.channels[1] >> comma2 >>
            cfg.channels[2];
        if (!vs || comma1 != ',' || comma2 != ',')
          throw std::runtime_error(path + ": malformed channels meta");
      } else if (key == "lambda") {
        cfg.lambda = std::stod(value);
      } else if (key == "clamp") {
        cfg.clamp = std::stod(value);
      } else if (key == "generator") {
        if (value == "geometric")
          cfg.generator = OffsetGenerator::geometric;
        else if (value == "learned")
          cfg.generator = OffsetGenerator::learned;
        else
          throw std::runtime_error(path + ": unknown generator: " + value);
      } else {
        throw std::runtime_error(path + ": unknown meta key: " + key);
      }
    } else if (kind == "param") {
      std::string name;
      ParamEntry e;
      ls >> name >> e.offset >> e.dims[0] >> e.dims[1] >> e.dims[2] >>
          e.dims[3];
      if (!ls) throw std::runtime_error(path + ": malformed param line: " + line);
      entries[name] = e;
    } else {
      throw std::runtime_error(path + ": unexpected index line: " + line);
    }
  }

  SaliencyNet net{cfg};
  std::size_t assigned = 0;
  for (const auto& [name, p] : net.named_params()) {
    for (const std::string suffix : {".weight", ".bias"}) {
      const std::string key = name + suffix;
      const auto it = entries.find(key);
      if (it == entries.end())
        throw std::runtime_error(path + ": missing parameter " + key);
      std::size_t at = pos + it->second.offset;
      const Tensor t = decode_tensor(b, at, path + ": " + key);
      if (suffix == ".weight") {
        if (!t.same_shape(p->weights))
          throw std::runtime_error(path + ": shape mismatch for " + key);
        p->weights = t;
      } else {
        if (t.size() != p->bias.size())
          throw std::runtime_error(path + ": length mismatch for " + key);
        for (std::size_t i = 0; i < t.size(); ++i) p->bias[i] = t.raw()[i];
      }
      ++assigned;
    }
  }
  if (assigned != entries.size())
    throw std::runtime_error(path + ": checkpoint holds unknown parameters");
  return net;
}

}  // namespace mgs
