#pragma once

// Small fitted two-telltale monitor shared by the monitor tests.

#include <filesystem>
#include <string>
#include <vector>

#include "tmon/assets.hpp"
#include "tmon/backgrounds.hpp"
#include "tmon/datagen.hpp"
#include "tmon/monitor.hpp"
#include "tmon/pipeline.hpp"

namespace fixture {

inline constexpr int kCrop = 52;

struct MiniStudy {
  std::filesystem::path dir;
  std::vector<tmon::TelltaleAsset> assets;
  std::vector<tmon::Image> backgrounds;
  tmon::MonitorConfig config;

  explicit MiniStudy(const std::string& name, int train = 60) {
    using namespace tmon;
    dir = std::filesystem::temp_directory_path() / ("tmon_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto all = builtin_assets();
    assets = {all[0], all[1]};
    backgrounds = background_pool(6, 120, 120, 4);
    Extractor ex{builtin_bank(0), {}, 128};
    config.frame_width = 2 * kCrop;
    config.frame_height = kCrop;
    config.window = 60;
    config.threads = 1;
    for (std::size_t i = 0; i < assets.size(); ++i) {
      const auto& a = assets[i];
      const auto tr = gen_train(a, backgrounds, train, 1 + i);
      const PcaBank bank = fit_bank(ex.all(tr.images, 1), BankMode::Full, RetainVariance{0.95});
      const auto file = dir / (a.id() + ".fpca");
      save_bank(file, bank);
      const Roi roi{kCrop * static_cast<int>(i), 0, kCrop, kCrop};
      FreSettings fre;
      const ScoringStage stage{bank, make_fre_config(fre, a, centered_layout(a, kCrop), 16, 16)};
      const auto te = gen_test(a, backgrounds, 5, 10 + i);
      std::vector<double> good;
      const auto scores = stage.score_batch(ex.all(te.images, 1), 1);
      for (std::size_t r = 0; r < scores.size(); ++r)
        if (!te.manifest.rows[r].error) good.push_back(scores[r][0]);
      BankRef ref{file, {calibrate(good, 2.1)}};
      config.telltales.push_back({a, roi, std::nullopt, fre, {ref}, CombinePolicy::AllOk});
    }
  }
  ~MiniStudy() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }

  /// Background crop with each icon drawn centered in its ROI.
  [[nodiscard]] tmon::Image frame(bool draw = true, std::size_t bg = 0) const {
    using namespace tmon;
    Image f = crop(backgrounds[bg], Roi{10, 10, 2 * kCrop, kCrop});
    if (!draw) return f;
    for (std::size_t i = 0; i < assets.size(); ++i) {
      const auto off = centered_layout(assets[i], kCrop).icon_offset;
      f = alpha_blend(assets[i].icon(), f, 1.0,
                      {off.x + kCrop * static_cast<int>(i), off.y});
    }
    return f;
  }

  [[nodiscard]] std::map<std::string, tmon::Expected> all(tmon::Expected e) const {
    std::map<std::string, tmon::Expected> m;
    for (const auto& a : assets) m[a.id()] = e;
    return m;
  }
};

}  // namespace fixture
