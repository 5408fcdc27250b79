#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgs/image_io.hpp"
#include "mgs/metrics.hpp"

namespace mgs {

// Pairs prediction and ground-truth maps by filename stem and averages the
// per-pair metrics. Stems present on only one side are listed on `warn` and
// counted; ground truths are binarized at 0.5; an empty intersection is an
// error. Pairs are visited in sorted stem order, so aggregation is
// deterministic.
inline MetricsReport evaluate_dirs(const std::string& pred_dir,
                                   const std::string& gt_dir,
                                   std::ostream* warn = nullptr) {
  namespace fs = std::filesystem;
  auto collect = [](const std::string& dir) {
    std::map<std::string, std::string> stems;
    if (!fs::is_directory(dir))
      throw std::runtime_error(dir + ": not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const fs::path p = entry.path();
      if (p.extension() != ".pgm" && p.extension() != ".ppm") continue;
      stems[p.stem().string()] = p.string();
    }
    return stems;
  };
  const auto preds = collect(pred_dir);
  const auto gts = collect(gt_dir);

  std::size_t unmatched = 0;
  for (const auto& [stem, path] : preds)
    if (!gts.count(stem)) {
      ++unmatched;
      if (warn) *warn << "warning: no ground truth for " << path << '\n';
    }
  for (const auto& [stem, path] : gts)
    if (!preds.count(stem)) {
      ++unmatched;
      if (warn) *warn << "warning: no prediction for " << path << '\n';
    }

  std::vector<PairMetrics> all;
  for (const auto& [stem, path] : preds) {
    const auto it = gts.find(stem);
    if (it == gts.end()) continue;
    const Tensor s = load_image(path);
    if (s.c() != 1)
      throw std::runtime_error(path + ": prediction must be single-channel");
    const Tensor g = binarize(load_image(it->second), 0.5);
    if (g.c() != 1)
      throw std::runtime_error(it->second + ": ground truth must be single-channel");
    all.push_back(evaluate_pair(s, g));
    if (all.back().degenerate && warn)
      *warn << "warning: " << it->second
            << ": ground truth has no foreground; pair excluded\n";
  }
  if (all.empty())
    throw std::runtime_error("no matching filename stems between " + pred_dir +
                             " and " + gt_dir);
  MetricsReport report = aggregate(all);
  report.unmatched = unmatched;
  return report;
}

}  // namespace mgs
