#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mgs/checkpoint.hpp"
#include "mgs/config.hpp"
#include "mgs/evaluate.hpp"
#include "mgs/image_io.hpp"
#include "mgs/net.hpp"
#include "mgs/offsets.hpp"
#include "mgs/synth.hpp"
#include "mgs/tensor_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string index_name(const std::string& prefix, int i,
                       const std::string& ext) {
  std::ostringstream s;
  s << prefix << std::setw(4) << std::setfill('0') << i << ext;
  return s.str();
}

std::pair<int, int> parse_size(const std::string& text) {
  const std::size_t x = text.find('x');
  std::pair<int, int> hw;
  if (x == std::string::npos) {
    hw.first = hw.second = mgs::detail::parse_value<int>(text, 0, "size");
  } else {
    hw.first = mgs::detail::parse_value<int>(text.substr(0, x), 0, "size");
    hw.second = mgs::detail::parse_value<int>(text.substr(x + 1), 0, "size");
  }
  mgs::require(hw.first >= 8 && hw.second >= 8, "size must be at least 8");
  return hw;
}

mgs::CameraIntrinsics parse_intrinsics(const std::string& text) {
  std::istringstream in(text);
  mgs::CameraIntrinsics k;
  char c1 = 0, c2 = 0, c3 = 0;
  in >> k.fx >> c1 >> k.fy >> c2 >> k.cx >> c3 >> k.cy;
  mgs::require(bool(in) && c1 == ',' && c2 == ',' && c3 == ',' &&
                   (in >> std::ws).eof(),
               "intrinsics must be fx,fy,cx,cy");
  k.validate();
  return k;
}

mgs::CameraIntrinsics synthetic_intrinsics(std::size_t h, std::size_t w) {
  return {64.0, 64.0, static_cast<double>(w) / 2.0,
          static_cast<double>(h) / 2.0};
}

void run_gen_data(const std::string& out_dir, int count, std::uint64_t seed,
                  const std::string& size) {
  const auto [h, w] = parse_size(size);
  fs::create_directories(out_dir);
  mgs::CameraIntrinsics k;
  for (int i = 0; i < count; ++i) {
    const mgs::SynthSample s = mgs::synth_sample(
        mgs::derive_seed(seed, 0, static_cast<std::uint64_t>(i)),
        static_cast<std::size_t>(h), static_cast<std::size_t>(w));
    const fs::path dir(out_dir);
    mgs::save_image(s.rgb, (dir / index_name("rgb_", i, ".ppm")).string(), 8);
    mgs::save_depth_pgm16(s.depth,
                          (dir / index_name("depth_", i, ".pgm")).string());
    mgs::save_image(s.gt, (dir / index_name("gt_", i, ".pgm")).string(), 8);
    k = s.intrinsics;
  }
  std::ofstream intr(fs::path(out_dir) / "intrinsics.txt");
  mgs::require(bool(intr), "cannot write intrinsics.txt");
  intr << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' '
       << k.cy << '\n';
  std::cout << "wrote " << count << " samples to " << out_dir << '\n';
}

std::vector<mgs::SynthSample> load_dataset(const std::string& dir) {
  mgs::require(fs::is_directory(dir), dir + " is not a directory");
  std::ifstream intr(fs::path(dir) / "intrinsics.txt");
  mgs::require(bool(intr), dir + ": missing intrinsics.txt");
  mgs::CameraIntrinsics k;
  intr >> k.fx >> k.fy >> k.cx >> k.cy;
  mgs::require(bool(intr), dir + ": malformed intrinsics.txt");
  k.validate();

  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("rgb_", 0) == 0 && entry.path().extension() == ".ppm")
      stems.push_back(name.substr(4, name.size() - 8));
  }
  std::sort(stems.begin(), stems.end());
  mgs::require(!stems.empty(), dir + ": no rgb_*.ppm samples found");

  std::vector<mgs::SynthSample> data;
  data.reserve(stems.size());
  for (const std::string& stem : stems) {
    mgs::SynthSample s;
    const fs::path base(dir);
    s.rgb = mgs::load_image((base / ("rgb_" + stem + ".ppm")).string());
    s.depth = mgs::load_depth((base / ("depth_" + stem + ".pgm")).string());
    s.gt = mgs::binarize(
        mgs::load_image((base / ("gt_" + stem + ".pgm")).string()), 0.5);
    s.intrinsics = k;
    mgs::require(s.rgb.c() == 3, "rgb_" + stem + ".ppm: expected 3 channels");
    mgs::require_same_shape(s.depth, s.gt, "dataset sample " + stem);
    mgs::require(s.rgb.h() == s.depth.h() && s.rgb.w() == s.depth.w(),
                 "dataset sample " + stem + ": extents differ across files");
    data.push_back(std::move(s));
  }
  return data;
}

void run_train(const std::string& config_path, const std::string& data_dir,
               const std::string& out_path, const std::string& log_path) {
  const mgs::NetConfig cfg = mgs::load_config(config_path);
  const std::vector<mgs::SynthSample> data = load_dataset(data_dir);
  mgs::SaliencyNet net(cfg);
  net.init();
  const mgs::TrainResult result = mgs::train(net, data, &std::cout);
  mgs::save_checkpoint(net, out_path);
  if (!log_path.empty()) {
    std::ofstream log(log_path);
    mgs::require(bool(log), log_path + ": cannot open for writing");
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
      log << (e + 1) << ',' << std::setprecision(17) << result.epoch_loss[e]
          << '\n';
  }
}

void run_infer(const std::string& ckpt_path, const std::string& rgb_path,
               const std::string& depth_path, const std::string& out_path) {
  const mgs::SaliencyNet net = mgs::load_checkpoint(ckpt_path);
  const mgs::Tensor rgb = mgs::load_image(rgb_path);
  mgs::Tensor depth;
  if (!depth_path.empty()) depth = mgs::load_depth(depth_path);
  const mgs::Tensor map = mgs::infer_map(
      net, rgb, depth, synthetic_intrinsics(rgb.h(), rgb.w()));
  mgs::save_image(map, out_path, 8);
}

void run_eval(const std::string& pred_dir, const std::string& gt_dir,
              const std::string& report_path) {
  const mgs::MetricsReport r = mgs::evaluate_dirs(pred_dir, gt_dir, &std::cerr);
  nlohmann::json j;
  j["mae"] = r.mae;
  j["f_max"] = r.f_max;
  j["f_mean"] = r.f_mean;
  j["f_w"] = r.f_w;
  j["s_measure"] = r.s_measure;
  j["e_measure"] = r.e_measure;
  j["pairs"] = r.pairs;
  j["degenerate"] = r.degenerate;
  j["unmatched"] = r.unmatched;
  std::ofstream out(report_path);
  mgs::require(bool(out), report_path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
}

void run_offsets(const std::string& depth_path, const std::string& intr_text,
                 int dilation, const std::string& out_path,
                 const std::string& csv_path) {
  const mgs::Tensor depth = mgs::load_depth(depth_path);
  const mgs::CameraIntrinsics k = parse_intrinsics(intr_text);
  mgs::GeometricOffsetConfig cfg;
  cfg.dilation = dilation;
  const mgs::OffsetField off = mgs::geometric_offsets(depth, k, cfg);
  mgs::save_tensor(off.data, out_path);
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    mgs::require(bool(csv), csv_path + ": cannot open for writing");
    csv << "v,u,tap,dy,dx\n" << std::setprecision(17);
    for (std::size_t v = 0; v < off.data.h(); ++v)
      for (std::size_t u = 0; u < off.data.w(); ++u)
        for (int tap = 0; tap < off.taps(); ++tap)
          csv << v << ',' << u << ',' << tap << ',' << off.dy(0, tap, v, u)
              << ',' << off.dx(0, tap, v, u) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-guided deformable-convolution saliency toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic RGB-D scenes");
  std::string gen_out, gen_size = "64x64";
  int gen_count = 0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of samples")->required();
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--size", gen_size, "Sample extents as HxW");
  gen->callback([&] {
    mgs::require(gen_count > 0, "--count must be positive");
    run_gen_data(gen_out, gen_count, gen_seed, gen_size);
  });

  auto* train = app.add_subcommand("train", "Train the saliency network");
  std::string train_config, train_data, train_out, train_log;
  train->add_option("--config", train_config, "Configuration file")->required();
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--log", train_log, "Per-epoch loss file");
  train->callback([&] { run_train(train_config, train_data, train_out, train_log); });

  auto* infer = app.add_subcommand("infer", "Run a checkpoint on one image");
  std::string infer_ckpt, infer_rgb, infer_depth, infer_out;
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint path")->required();
  infer->add_option("--rgb", infer_rgb, "RGB image (PPM)")->required();
  infer->add_option("--depth", infer_depth, "Depth map (PGM, millimeters)");
  infer->add_option("--out", infer_out, "Output saliency map (8-bit PGM)")
      ->required();
  infer->callback([&] { run_infer(infer_ckpt, infer_rgb, infer_depth, infer_out); });

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string eval_pred, eval_gt, eval_report;
  eval->add_option("--pred", eval_pred, "Prediction directory")->required();
  eval->add_option("--gt", eval_gt, "Ground-truth directory")->required();
  eval->add_option("--report", eval_report, "Report file (JSON)")->required();
  eval->callback([&] { run_eval(eval_pred, eval_gt, eval_report); });

  auto* offsets = app.add_subcommand("offsets", "Dump geometric offsets for a depth map");
  std::string off_depth, off_intr, off_out, off_csv;
  int off_dilation = 1;
  offsets->add_option("--depth", off_depth, "Depth map (PGM, millimeters)")
      ->required();
  offsets->add_option("--intrinsics", off_intr, "fx,fy,cx,cy")->required();
  offsets->add_option("--dilation", off_dilation, "Tap spacing in pixels");
  offsets->add_option("--out", off_out, "Offset tensor (MGST)")->required();
  offsets->add_option("--csv", off_csv, "Also dump readable rows v,u,tap,dy,dx");
  offsets->callback([&] {
    mgs::require(off_dilation >= 1, "--dilation must be >= 1");
    run_offsets(off_depth, off_intr, off_dilation, off_out, off_csv);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
