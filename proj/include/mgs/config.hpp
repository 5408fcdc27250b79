#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mgs/net.hpp"

namespace mgs {
namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] inline void config_fail(int line, const std::string& what) {
  std::ostringstream msg;
  msg << "config line " << line << ": " << what;
  throw std::invalid_argument(msg.str());
}

template <typename T>
inline T parse_value(const std::string& raw, int line, const std::string& key) {
  std::istringstream in(raw);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof())
    config_fail(line, "cannot parse value '" + raw + "' for key '" + key + "'");
  return v;
}

}  // namespace detail

// Flat "key = value" configuration with '#' comments. Recognized keys:
// size (HxW or one extent), epochs, lr, momentum, batch, lambda,
// generator (geometric|learned), seed, channels (three comma-separated),
// clamp. Anything else is rejected with its line number.
inline NetConfig parse_config(const std::string& text) {
  NetConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      detail::config_fail(lineno, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (value.empty()) detail::config_fail(lineno, "empty value for '" + key + "'");
    if (key == "size") {
      const std::size_t x = value.find('x');
      if (x == std::string::npos) {
        cfg.h = cfg.w = detail::parse_value<int>(value, lineno, key);
      } else {
        cfg.h = detail::parse_value<int>(value.substr(0, x), lineno, key);
        cfg.w = detail::parse_value<int>(value.substr(x + 1), lineno, key);
      }
    } else if (key == "epochs") {
      cfg.epochs = detail::parse_value<int>(value, lineno, key);
    } else if (key == "lr") {
      cfg.lr = detail::parse_value<double>(value, lineno, key);
    } else if (key == "momentum") {
      cfg.momentum = detail::parse_value<double>(value, lineno, key);
    } else if (key == "batch") {
      cfg.batch = detail::parse_value<int>(value, lineno, key);
    } else if (key == "lambda") {
      cfg.lambda = detail::parse_value<double>(value, lineno, key);
    } else if (key == "generator") {
      if (value == "geometric")
        cfg.generator = OffsetGenerator::geometric;
      else if (value == "learned")
        cfg.generator = OffsetGenerator::learned;
      else
        detail::config_fail(lineno, "generator must be 'geometric' or 'learned', got '" +
                                        value + "'");
    } else if (key == "seed") {
      cfg.seed = detail::parse_value<std::uint64_t>(value, lineno, key);
    } else if (key == "channels") {
      std::istringstream vs(value);
      char c1 = 0, c2 = 0;
      vs >> cfg.channels[0] >> c1 >> cfg.channels[1] >> c2 >> cfg.channels[2];
      if (!vs || c1 != ',' || c2 != ',' || !(vs >> std::ws).eof())
        detail::config_fail(lineno, "channels must be three comma-separated counts");
    } else if (key == "clamp") {
      cfg.clamp = detail::parse_value<double>(value, lineno, key);
    } else {
      detail::config_fail(lineno, "unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline NetConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace mgs
