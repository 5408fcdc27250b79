#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <unistd.h>

#include "mgs/checkpoint.hpp"
#include "mgs/config.hpp"
#include "mgs/evaluate.hpp"
#include "mgs/image_io.hpp"
#include "mgs/tensor_io.hpp"
#include "oracles.hpp"

using Catch::Matchers::ContainsSubstring;
using mgs::Tensor;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;

  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("mgs_io_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CerrCapture {
  std::ostringstream captured;
  std::streambuf* saved;

  CerrCapture() : saved(std::cerr.rdbuf(captured.rdbuf())) {}
  ~CerrCapture() { std::cerr.rdbuf(saved); }
};

}  // namespace

TEST_CASE("eight-bit images round trip bit for bit") {
  TempDir dir("img8");
  mgs::Rng rng(61);

  Tensor gray(1, 1, 5, 7);
  for (double& v : gray.raw()) v = rng.uniform_int(256) / 255.0;
  mgs::save_image(gray, dir.file("g.pgm"));
  REQUIRE(mgs::load_image(dir.file("g.pgm")) == gray);

  Tensor rgb(1, 3, 4, 6);
  for (double& v : rgb.raw()) v = rng.uniform_int(256) / 255.0;
  mgs::save_image(rgb, dir.file("c.ppm"));
  REQUIRE(mgs::load_image(dir.file("c.ppm")) == rgb);

  // Channel interleaving: red advances first in the payload.
  Tensor tiny(1, 3, 1, 2);
  tiny.raw() = {10 / 255.0, 40 / 255.0,   // red plane
                20 / 255.0, 50 / 255.0,   // green plane
                30 / 255.0, 60 / 255.0};  // blue plane
  mgs::save_image(tiny, dir.file("t.ppm"));
  const std::string bytes = read_bytes(dir.file("t.ppm"));
  const std::string payload = bytes.substr(bytes.size() - 6);
  REQUIRE(payload == std::string("\x0A\x14\x1E\x28\x32\x3C", 6));

  Tensor batch(2, 1, 2, 2);
  REQUIRE_THROWS_WITH(mgs::save_image(batch, dir.file("x.pgm")),
                      ContainsSubstring("1x{1,3}xHxW"));
  REQUIRE_THROWS_WITH(mgs::save_image(gray, dir.file("x.pgm"), 12),
                      ContainsSubstring("bitdepth"));
}

TEST_CASE("sixteen-bit images round trip and embed the eight-bit levels") {
  TempDir dir("img16");
  mgs::Rng rng(62);

  Tensor fine(1, 1, 6, 5);
  for (double& v : fine.raw()) v = rng.uniform_int(65536) / 65535.0;
  mgs::save_image(fine, dir.file("f.pgm"), 16);
  REQUIRE(mgs::load_image(dir.file("f.pgm")) == fine);

  // Eight-bit levels k/255 survive a 16-bit save unchanged because
  // (257 k)/65535 reduces to k/255 exactly.
  Tensor coarse(1, 1, 4, 4);
  for (double& v : coarse.raw()) v = rng.uniform_int(256) / 255.0;
  mgs::save_image(coarse, dir.file("k.pgm"), 16);
  REQUIRE(mgs::load_image(dir.file("k.pgm")) == coarse);
}

TEST_CASE("quantization rounds half up and clamps with a warning") {
  TempDir dir("quant");
  mgs::Rng rng(63);

  Tensor vals(1, 1, 1, 64);
  for (double& v : vals.raw()) v = rng.uniform01();
  vals.raw()[0] = 0.5;  // exact tie: 127.5 must round up to 128
  mgs::save_image(vals, dir.file("q8.pgm"));
  const std::string b8 = read_bytes(dir.file("q8.pgm"));
  const std::string p8 = b8.substr(b8.size() - 64);
  for (std::size_t i = 0; i < 64; ++i) {
    const auto want = static_cast<unsigned char>(
        std::floor(vals.raw()[i] * 255.0 + 0.5));
    REQUIRE(static_cast<unsigned char>(p8[i]) == want);
  }
  REQUIRE(static_cast<unsigned char>(p8[0]) == 128);

  mgs::save_image(vals, dir.file("q16.pgm"), 16);
  const std::string b16 = read_bytes(dir.file("q16.pgm"));
  const std::string p16 = b16.substr(b16.size() - 128);
  for (std::size_t i = 0; i < 64; ++i) {
    const auto want = static_cast<std::size_t>(
        std::floor(vals.raw()[i] * 65535.0 + 0.5));
    const std::size_t got =
        (static_cast<std::size_t>(static_cast<unsigned char>(p16[2 * i]))
         << 8) |
        static_cast<unsigned char>(p16[2 * i + 1]);
    REQUIRE(got == want);  // big-endian sample order
  }

  Tensor wild(1, 1, 1, 2);
  wild.raw() = {-0.25, 1.5};
  {
    CerrCapture cap;
    mgs::save_image(wild, dir.file("w.pgm"));
    REQUIRE_THAT(cap.captured.str(), ContainsSubstring("clamped 2"));
  }
  const std::string wb = read_bytes(dir.file("w.pgm"));
  REQUIRE(static_cast<unsigned char>(wb[wb.size() - 2]) == 0);
  REQUIRE(static_cast<unsigned char>(wb[wb.size() - 1]) == 255);
}

TEST_CASE("hand-written sixteen-bit payloads decode as big-endian") {
  TempDir dir("be");
  const std::string path = dir.file("h.pgm");
  write_bytes(path, std::string("P5\n2 1\n65535\n", 13) +
                        std::string("\x01\x00\x00\xFF", 4));
  const Tensor t = mgs::load_image(path);
  REQUIRE(t.w() == 2);
  REQUIRE(t.raw()[0] == 256.0 / 65535.0);
  REQUIRE(t.raw()[1] == 255.0 / 65535.0);
}

TEST_CASE("image parse failures name the offending byte") {
  TempDir dir("bad");
  auto bad = [&](const std::string& name, const std::string& bytes) {
    write_bytes(dir.file(name), bytes);
    return dir.file(name);
  };
  REQUIRE_THROWS_WITH(mgs::load_image(bad("m.pgm", "P4\n1 1\n255\n\x00")),
                      ContainsSubstring("expected P5 or P6 magic at byte 0"));
  REQUIRE_THROWS_WITH(mgs::load_image(bad("w.pgm", "P5\nx 1\n255\n\x00")),
                      ContainsSubstring("expected width at byte 3"));
  REQUIRE_THROWS_WITH(mgs::load_image(bad("z.pgm", "P5\n0 4\n255\n")),
                      ContainsSubstring("zero image extent"));
  REQUIRE_THROWS_WITH(mgs::load_image(bad("v.pgm", "P5\n1 1\n300\n\x00")),
                      ContainsSubstring("unsupported maxval"));
  REQUIRE_THROWS_WITH(mgs::load_image(bad("t.pgm", "P5\n2 2\n255\n\x01\x02")),
                      ContainsSubstring("truncated payload"));
  REQUIRE_THROWS_WITH(mgs::load_image(bad("e.pgm", "P5\n2 2\n255")),
                      ContainsSubstring("expected single whitespace"));
  REQUIRE_THROWS_WITH(mgs::load_image(bad("r.pgm", "P5\n99999999999 1\n255\n")),
                      ContainsSubstring("width out of range"));
  REQUIRE_THROWS_WITH(mgs::load_image(dir.file("absent.pgm")),
                      ContainsSubstring("cannot open for reading"));

  // Header comments are part of the format and must parse cleanly.
  write_bytes(dir.file("c.pgm"),
              std::string("P5 # magic\n# a comment line\n1 # w\n1\n255\n") +
                  std::string(1, '\x7F'));
  const Tensor t = mgs::load_image(dir.file("c.pgm"));
  REQUIRE(t.raw()[0] == 127.0 / 255.0);
}

TEST_CASE("depth maps round trip through millimeter quantization") {
  TempDir dir("depth");
  Tensor d(1, 1, 2, 2);
  d.raw() = {1.234, 0.0, 65.535, 0.001};
  mgs::save_depth_pgm16(d, dir.file("d.pgm"));
  const Tensor back = mgs::load_depth(dir.file("d.pgm"));
  REQUIRE(back.raw()[0] == 1.234);
  REQUIRE(back.raw()[1] == 0.0);
  REQUIRE(back.raw()[2] == 65.535);
  REQUIRE(back.raw()[3] == 0.001);

  // A second pass over already-quantized values is the identity.
  mgs::save_depth_pgm16(back, dir.file("d2.pgm"));
  REQUIRE(read_bytes(dir.file("d2.pgm")) == read_bytes(dir.file("d.pgm")));

  Tensor wild(1, 1, 1, 2);
  wild.raw() = {-0.5, 70.0};
  {
    CerrCapture cap;
    mgs::save_depth_pgm16(wild, dir.file("w.pgm"));
    REQUIRE_THAT(cap.captured.str(), ContainsSubstring("clamped"));
  }
  const Tensor clamped = mgs::load_depth(dir.file("w.pgm"));
  REQUIRE(clamped.raw()[0] == 0.0);
  REQUIRE(clamped.raw()[1] == 65.535);

  Tensor rgb(1, 3, 1, 1, 0.5);
  mgs::save_image(rgb, dir.file("rgb.ppm"));
  REQUIRE_THROWS_WITH(mgs::load_depth(dir.file("rgb.ppm")),
                      ContainsSubstring("single-channel"));
}

TEST_CASE("tensor containers preserve exact bit patterns") {
  TempDir dir("mgst");
  Tensor t(1, 1, 1, 7);
  t.raw() = {0.0,
             -0.0,
             std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::quiet_NaN(),
             std::numeric_limits<double>::denorm_min(),
             3.141592653589793};
  mgs::save_tensor(t, dir.file("t.mgst"));
  const Tensor back = mgs::load_tensor(dir.file("t.mgst"));
  REQUIRE(back.same_shape(t));
  for (std::size_t i = 0; i < t.size(); ++i)
    REQUIRE(std::bit_cast<std::uint64_t>(back.raw()[i]) ==
            std::bit_cast<std::uint64_t>(t.raw()[i]));

  // Container prefix: magic, rank 4, then little-endian extents.
  Tensor s(1, 2, 1, 3);
  const std::string buf = mgs::encode_tensor(s);
  REQUIRE(buf.size() == 4 + 4 + 16 + 8 * 6);
  REQUIRE(buf.substr(0, 4) == "MGST");
  auto u32_at = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(buf[at + static_cast<std::size_t>(i)]))
           << (8 * i);
    return v;
  };
  REQUIRE(u32_at(4) == 4);
  REQUIRE(u32_at(8) == 1);
  REQUIRE(u32_at(12) == 2);
  REQUIRE(u32_at(16) == 1);
  REQUIRE(u32_at(20) == 3);
}

TEST_CASE("tensor container decoding rejects malformed buffers") {
  std::size_t pos = 0;
  REQUIRE_THROWS_WITH(mgs::decode_tensor("MGSX0000", pos, "unit"),
                      ContainsSubstring("missing MGST magic"));
  std::string rank3 = "MGST";
  mgs::detail::put_u32(rank3, 3);
  pos = 0;
  REQUIRE_THROWS_WITH(mgs::decode_tensor(rank3, pos, "unit"),
                      ContainsSubstring("unsupported rank"));
  pos = 0;
  REQUIRE_THROWS_WITH(mgs::decode_tensor("MGST\x04\x00", pos, "unit"),
                      ContainsSubstring("truncated container"));
  std::string short_payload = "MGST";
  mgs::detail::put_u32(short_payload, 4);
  for (std::uint32_t d : {1u, 1u, 1u, 2u}) mgs::detail::put_u32(short_payload, d);
  mgs::detail::put_f64(short_payload, 1.0);
  pos = 0;
  REQUIRE_THROWS_WITH(mgs::decode_tensor(short_payload, pos, "unit"),
                      ContainsSubstring("truncated payload"));

  TempDir dir("mgstbad");
  Tensor t(1, 1, 1, 1, 2.0);
  mgs::save_tensor(t, dir.file("t.mgst"));
  write_bytes(dir.file("t.mgst"), read_bytes(dir.file("t.mgst")) + "x");
  REQUIRE_THROWS_WITH(mgs::load_tensor(dir.file("t.mgst")),
                      ContainsSubstring("trailing bytes"));
}

TEST_CASE("checkpoints restore configuration and parameters bit for bit") {
  TempDir dir("ckpt");
  mgs::NetConfig cfg;
  cfg.h = 16;
  cfg.w = 16;
  cfg.channels = {4, 8, 12};
  cfg.lambda = 0.25;
  cfg.generator = mgs::OffsetGenerator::learned;
  cfg.clamp = 3.5;
  cfg.seed = 9;
  mgs::SaliencyNet net(cfg);
  net.init();
  const std::string path = dir.file("net.ckpt");
  mgs::save_checkpoint(net, path);

  mgs::SaliencyNet loaded = mgs::load_checkpoint(path);
  REQUIRE(loaded.config().channels == cfg.channels);
  REQUIRE(loaded.config().lambda == 0.25);
  REQUIRE(loaded.config().clamp == 3.5);
  REQUIRE(loaded.config().generator == mgs::OffsetGenerator::learned);
  const auto want = net.named_params();
  const auto got = loaded.named_params();
  REQUIRE(want.size() == got.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    REQUIRE(want[i].first == got[i].first);
    REQUIRE(want[i].second->weights == got[i].second->weights);
    REQUIRE(want[i].second->bias == got[i].second->bias);
  }

  // Saving the restored network reproduces the file byte for byte.
  mgs::save_checkpoint(loaded, dir.file("again.ckpt"));
  REQUIRE(read_bytes(dir.file("again.ckpt")) == read_bytes(path));
}

TEST_CASE("checkpoint loading rejects tampered files") {
  TempDir dir("tamper");
  mgs::NetConfig cfg;
  cfg.h = 16;
  cfg.w = 16;
  cfg.channels = {4, 8, 12};
  mgs::SaliencyNet net(cfg);
  net.init();
  const std::string path = dir.file("net.ckpt");
  mgs::save_checkpoint(net, path);
  const std::string original = read_bytes(path);

  auto tampered = [&](const std::string& from, const std::string& to) {
    std::string copy = original;
    const std::size_t at = copy.find(from);
    REQUIRE(at != std::string::npos);
    copy.replace(at, from.size(), to);
    write_bytes(dir.file("bad.ckpt"), copy);
    return dir.file("bad.ckpt");
  };

  REQUIRE_THROWS_WITH(mgs::load_checkpoint(tampered("MGSCKPT 1", "MGSCKPT 9")),
                      ContainsSubstring("not a checkpoint file"));
  REQUIRE_THROWS_WITH(
      mgs::load_checkpoint(tampered("meta generator", "blob generator")),
      ContainsSubstring("unexpected index line"));
  REQUIRE_THROWS_WITH(
      mgs::load_checkpoint(tampered("meta generator geometric",
                                    "meta generator mystery33")),
      ContainsSubstring("unknown generator"));
  REQUIRE_THROWS_WITH(
      mgs::load_checkpoint(tampered("meta clamp", "meta verve")),
      ContainsSubstring("unknown meta key"));
  REQUIRE_THROWS_WITH(
      mgs::load_checkpoint(tampered("param enc1.weight", "param zzzz.weight")),
      ContainsSubstring("missing parameter enc1.weight"));

  // An extra index entry that no parameter claims is an error too.
  {
    std::string copy = original;
    const std::size_t at = copy.find("param enc1.weight");
    const std::size_t eol = copy.find('\n', at);
    const std::string line = copy.substr(at, eol - at);
    std::string extra = line;
    extra.replace(extra.find("enc1"), 4, "augh");
    copy.insert(at, extra + "\n");
    write_bytes(dir.file("extra.ckpt"), copy);
    REQUIRE_THROWS_WITH(mgs::load_checkpoint(dir.file("extra.ckpt")),
                        ContainsSubstring("unknown parameters"));
  }

  // Pointing one parameter at another's blob trips the shape check.
  {
    std::string copy = original;
    auto offset_of = [&](const std::string& name) {
      const std::size_t at = copy.find("param " + name + " ");
      std::istringstream ls(copy.substr(at));
      std::string kind, pname, off;
      ls >> kind >> pname >> off;
      return off;
    };
    const std::string o1 = offset_of("enc1.weight");
    const std::string o2 = offset_of("enc2.weight");
    const std::string from = "param enc1.weight " + o1;
    copy.replace(copy.find(from), from.size(), "param enc1.weight " + o2);
    write_bytes(dir.file("swap.ckpt"), copy);
    REQUIRE_THROWS_WITH(mgs::load_checkpoint(dir.file("swap.ckpt")),
                        ContainsSubstring("shape mismatch for enc1.weight"));
  }

  write_bytes(dir.file("cut.ckpt"), original.substr(0, original.size() / 2));
  REQUIRE_THROWS(mgs::load_checkpoint(dir.file("cut.ckpt")));
  REQUIRE_THROWS_WITH(mgs::load_checkpoint(dir.file("absent.ckpt")),
                      ContainsSubstring("cannot open"));
}

TEST_CASE("configuration files parse every key and report line numbers") {
  const std::string text =
      "# training setup\n"
      "size = 48x32\n"
      "epochs = 3\n"
      "lr = 0.125  # inline comment\n"
      "momentum = 0.5\n"
      "\n"
      "batch = 4\n"
      "lambda = 0.75\n"
      "generator = learned\n"
      "seed = 42\n"
      "channels = 4, 8, 12\n"
      "clamp = 2.5\n";
  const mgs::NetConfig cfg = mgs::parse_config(text);
  REQUIRE(cfg.h == 48);
  REQUIRE(cfg.w == 32);
  REQUIRE(cfg.epochs == 3);
  REQUIRE(cfg.lr == 0.125);
  REQUIRE(cfg.momentum == 0.5);
  REQUIRE(cfg.batch == 4);
  REQUIRE(cfg.lambda == 0.75);
  REQUIRE(cfg.generator == mgs::OffsetGenerator::learned);
  REQUIRE(cfg.seed == 42);
  REQUIRE(cfg.channels == std::array<int, 3>{4, 8, 12});
  REQUIRE(cfg.clamp == 2.5);

  const mgs::NetConfig square = mgs::parse_config("size = 32\n");
  REQUIRE(square.h == 32);
  REQUIRE(square.w == 32);

  const mgs::NetConfig defaults = mgs::parse_config("");
  REQUIRE(defaults.h == 64);
  REQUIRE(defaults.channels == std::array<int, 3>{16, 32, 64});
  REQUIRE(defaults.lr == 0.05);
  REQUIRE(defaults.momentum == 0.9);
  REQUIRE(defaults.batch == 8);
  REQUIRE(defaults.epochs == 20);
  REQUIRE(defaults.lambda == 1.0);
  REQUIRE(defaults.generator == mgs::OffsetGenerator::geometric);

  REQUIRE_THROWS_WITH(mgs::parse_config("size = 32\nbogus = 3\n"),
                      ContainsSubstring("config line 2: unknown key 'bogus'"));
  REQUIRE_THROWS_WITH(mgs::parse_config("\n\nsize 32\n"),
                      ContainsSubstring("config line 3: expected 'key = value'"));
  REQUIRE_THROWS_WITH(mgs::parse_config("lr = abc\n"),
                      ContainsSubstring("cannot parse value 'abc'"));
  REQUIRE_THROWS_WITH(
      mgs::parse_config("generator = conv\n"),
      ContainsSubstring("generator must be 'geometric' or 'learned'"));
  REQUIRE_THROWS_WITH(mgs::parse_config("channels = 4,8\n"),
                      ContainsSubstring("three comma-separated"));
  REQUIRE_THROWS_WITH(mgs::parse_config("lr =\n"),
                      ContainsSubstring("empty value for 'lr'"));

  REQUIRE_THROWS_WITH(mgs::parse_config("size = 10\n"),
                      ContainsSubstring("divisible by 4"));
  REQUIRE_THROWS_WITH(mgs::parse_config("momentum = 1.0\n"),
                      ContainsSubstring("[0, 1)"));
  REQUIRE_THROWS_WITH(mgs::parse_config("lr = -1\n"),
                      ContainsSubstring("lr must be >= 0"));
  REQUIRE_THROWS_WITH(mgs::parse_config("lambda = -0.5\n"),
                      ContainsSubstring("lambda must be >= 0"));
  REQUIRE_THROWS_WITH(mgs::parse_config("batch = 0\n"),
                      ContainsSubstring("batch must be >= 1"));
  REQUIRE_THROWS_WITH(mgs::parse_config("epochs = 0\n"),
                      ContainsSubstring("epochs"));

  TempDir dir("cfg");
  write_bytes(dir.file("train.cfg"), text);
  const mgs::NetConfig from_file = mgs::load_config(dir.file("train.cfg"));
  REQUIRE(from_file.h == 48);
  REQUIRE(from_file.seed == 42);
  REQUIRE_THROWS_WITH(mgs::load_config(dir.file("absent.cfg")),
                      ContainsSubstring("cannot open"));
}

TEST_CASE("directory evaluation pairs stems and averages the rest") {
  TempDir dir("eval");
  const std::string pred = dir.file("pred");
  const std::string gt = dir.file("gt");
  fs::create_directories(pred);
  fs::create_directories(gt);

  mgs::Rng rng(64);
  auto quantized = [&](std::size_t h, std::size_t w) {
    Tensor s(1, 1, h, w);
    for (double& v : s.raw()) v = rng.uniform_int(256) / 255.0;
    return s;
  };
  auto blob = [&](std::size_t h, std::size_t w, std::size_t y0, std::size_t y1,
                  std::size_t x0, std::size_t x1) {
    Tensor g(1, 1, h, w);
    for (std::size_t y = y0; y < y1; ++y)
      for (std::size_t x = x0; x < x1; ++x) g(0, 0, y, x) = 1.0;
    return g;
  };

  const Tensor sa = quantized(10, 10), sb = quantized(10, 10),
               sc = quantized(10, 10), sd = quantized(10, 10);
  const Tensor ga = blob(10, 10, 2, 7, 2, 7), gb = blob(10, 10, 1, 9, 4, 8),
               gc = blob(10, 10, 3, 6, 1, 9);
  Tensor gd(1, 1, 10, 10);  // no foreground: the pair must be excluded

  mgs::save_image(sa, pred + "/a.pgm");
  mgs::save_image(sb, pred + "/b.pgm");
  mgs::save_image(sc, pred + "/c.pgm");
  mgs::save_image(sd, pred + "/d.pgm");
  mgs::save_image(quantized(4, 4), pred + "/x.pgm");  // no ground truth
  write_bytes(pred + "/notes.txt", "ignored\n");
  mgs::save_image(ga, gt + "/a.pgm");
  mgs::save_image(gb, gt + "/b.pgm");
  mgs::save_image(gc, gt + "/c.pgm");
  mgs::save_image(gd, gt + "/d.pgm");
  mgs::save_image(blob(4, 4, 0, 2, 0, 2), gt + "/y.pgm");  // no prediction

  std::ostringstream warn;
  const mgs::MetricsReport r = mgs::evaluate_dirs(pred, gt, &warn);
  REQUIRE(r.pairs == 3);
  REQUIRE(r.degenerate == 1);
  REQUIRE(r.unmatched == 2);
  REQUIRE_THAT(warn.str(), ContainsSubstring("no ground truth for"));
  REQUIRE_THAT(warn.str(), ContainsSubstring("no prediction for"));
  REQUIRE_THAT(warn.str(), ContainsSubstring("no foreground"));

  const mgs::MetricsReport want = mgs::aggregate(
      {mgs::evaluate_pair(sa, ga), mgs::evaluate_pair(sb, gb),
       mgs::evaluate_pair(sc, gc), mgs::evaluate_pair(sd, gd)});
  REQUIRE(r.mae == want.mae);
  REQUIRE(r.f_max == want.f_max);
  REQUIRE(r.f_mean == want.f_mean);
  REQUIRE(r.f_w == want.f_w);
  REQUIRE(r.s_measure == want.s_measure);
  REQUIRE(r.e_measure == want.e_measure);

  // Self-evaluation of the ground truth scores perfectly.
  const mgs::MetricsReport self = mgs::evaluate_dirs(gt, gt);
  REQUIRE(self.mae == 0.0);
  REQUIRE(self.f_max == 1.0);
  REQUIRE(self.s_measure >= 1.0 - 1e-6);

  TempDir other("eval2");
  fs::create_directories(other.file("p"));
  mgs::save_image(quantized(4, 4), other.file("p") + "/zz.pgm");
  REQUIRE_THROWS_WITH(mgs::evaluate_dirs(other.file("p"), gt),
                      ContainsSubstring("no matching filename stems"));
  REQUIRE_THROWS_WITH(mgs::evaluate_dirs(dir.file("nothere"), gt),
                      ContainsSubstring("not a directory"));

  // Multi-channel files are rejected on either side.
  TempDir rgbd("eval3");
  fs::create_directories(rgbd.file("p"));
  fs::create_directories(rgbd.file("g"));
  Tensor rgb(1, 3, 4, 4, 0.5);
  mgs::save_image(rgb, rgbd.file("p") + "/q.ppm");
  mgs::save_image(blob(4, 4, 0, 2, 0, 2), rgbd.file("g") + "/q.pgm");
  REQUIRE_THROWS_WITH(mgs::evaluate_dirs(rgbd.file("p"), rgbd.file("g")),
                      ContainsSubstring("prediction must be single-channel"));
}
