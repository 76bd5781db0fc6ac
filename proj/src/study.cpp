#include "tmon/study.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "tmon/assets.hpp"
#include "tmon/backgrounds.hpp"
#include "tmon/error.hpp"
#include "tmon/png_io.hpp"

namespace tmon {

using nlohmann::json;

namespace {

std::string retention_text(const Retention& r) {
  if (const auto* c = std::get_if<RetainCount>(&r)) return "count:" + std::to_string(c->k);
  return "variance:" + format_number(std::get<RetainVariance>(r).q);
}

Retention parse_retention(const std::string& s) {
  try {
    if (s.starts_with("count:")) return RetainCount{std::stoi(s.substr(6))};
    if (s.starts_with("variance:")) return RetainVariance{std::stod(s.substr(9))};
  } catch (const std::logic_error&) {
  }
  throw ConfigError("retention must be 'count:<k>' or 'variance:<q>', got '" + s + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
}

void read_path(const json& j, const char* key, std::optional<std::filesystem::path>& dst,
               const std::filesystem::path& base) {
  if (j.contains(key) && !j[key].is_null()) {
    const std::filesystem::path p(j[key].get<std::string>());
    dst = p.is_absolute() ? p : base / p;
  }
}

}  // namespace

void StudyConfig::validate() const {
  if (backgrounds < 0 || background_size < crop_size) {
    throw ConfigError("backgrounds must be at least as large as the crop");
  }
  if (crop_size < 8) throw ConfigError("crop_size must be >= 8");
  if (train_count < 2) throw ConfigError("train_count must be >= 2");
  if (test_per_bucket < 1 || eval_per_defect < 1 || eval_flood_per_kind < 0) {
    throw ConfigError("bucket sizes must be positive");
  }
  if (input_size < 1) throw ConfigError("input_size must be positive");
  if (margin < 1.0) throw ConfigError("margin must be >= 1");
  if (alpha_level && (*alpha_level < 0 || *alpha_level > kMaxErrorLevel)) {
    throw ConfigError("alpha_level must lie in 0..10");
  }
  if (window < 1) throw ConfigError("window must be >= 1");
  if (const auto* v = std::get_if<RetainVariance>(&retention); v && !(v->q > 0.0 && v->q <= 1.0)) {
    throw ConfigError("variance retention must lie in (0, 1]");
  }
}

StudyConfig load_study_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read study config " + path.string());
  const auto base = path.parent_path();
  StudyConfig c;
  try {
    const json j = json::parse(in);
    std::optional<std::filesystem::path> p;
    read_path(j, "data_root", p, base);
    if (p) c.data_root = *p;
    p.reset();
    read_path(j, "out_dir", p, base);
    if (p) c.out_dir = *p;
    read_path(j, "assets_dir", c.assets_dir, base);
    read_opt(j, "telltales", c.telltales);
    read_opt(j, "backgrounds", c.backgrounds);
    read_opt(j, "background_size", c.background_size);
    read_opt(j, "background_seed", c.background_seed);
    read_path(j, "user_backgrounds", c.user_backgrounds, base);
    read_opt(j, "crop_size", c.crop_size);
    read_opt(j, "train_count", c.train_count);
    read_opt(j, "test_per_bucket", c.test_per_bucket);
    read_opt(j, "eval_per_defect", c.eval_per_defect);
    read_opt(j, "eval_flood_per_kind", c.eval_flood_per_kind);
    read_opt(j, "train_seed", c.train_seed);
    read_opt(j, "test_seed", c.test_seed);
    read_opt(j, "eval_seed", c.eval_seed);
    read_path(j, "weights", c.weights, base);
    read_opt(j, "builtin_seed", c.builtin_seed);
    read_opt(j, "input_size", c.input_size);
    if (j.contains("retention")) c.retention = parse_retention(j["retention"].get<std::string>());
    if (j.contains("pca_mode")) c.pca_mode = parse_bank_mode(j["pca_mode"].get<std::string>());
    read_opt(j, "channels", c.channels);
    if (j.contains("fre")) {
      const auto& f = j["fre"];
      if (f.contains("mask")) c.fre.mask = parse_mask_choice(f["mask"].get<std::string>());
      read_opt(f, "bg_weight", c.fre.bg_weight);
      if (f.contains("d_max")) {
        c.fre.d_max = f["d_max"].is_null() ? kNoClamp : f["d_max"].get<double>();
      }
    }
    read_opt(j, "margin", c.margin);
    if (j.contains("alpha_level") && !j["alpha_level"].is_null()) {
      c.alpha_level = j["alpha_level"].get<int>();
    }
    if (j.contains("combine")) c.combine = parse_combine_policy(j["combine"].get<std::string>());
    read_opt(j, "window", c.window);
    read_opt(j, "threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError("study config " + path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError("study config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

void save_study_config(const std::filesystem::path& path, const StudyConfig& c) {
  auto opt_path = [](const std::optional<std::filesystem::path>& p) {
    return p ? json(p->string()) : json(nullptr);
  };
  json j = {
      {"data_root", c.data_root.string()},
      {"out_dir", c.out_dir.string()},
      {"assets_dir", opt_path(c.assets_dir)},
      {"telltales", c.telltales},
      {"backgrounds", c.backgrounds},
      {"background_size", c.background_size},
      {"background_seed", c.background_seed},
      {"user_backgrounds", opt_path(c.user_backgrounds)},
      {"crop_size", c.crop_size},
      {"train_count", c.train_count},
      {"test_per_bucket", c.test_per_bucket},
      {"eval_per_defect", c.eval_per_defect},
      {"eval_flood_per_kind", c.eval_flood_per_kind},
      {"train_seed", c.train_seed},
      {"test_seed", c.test_seed},
      {"eval_seed", c.eval_seed},
      {"weights", opt_path(c.weights)},
      {"builtin_seed", c.builtin_seed},
      {"input_size", c.input_size},
      {"retention", retention_text(c.retention)},
      {"pca_mode", std::string(to_string(c.pca_mode))},
      {"channels", c.channels},
      {"fre",
       {{"mask", std::string(to_string(c.fre.mask))},
        {"bg_weight", c.fre.bg_weight},
        {"d_max", std::isfinite(c.fre.d_max) ? json(c.fre.d_max) : json(nullptr)}}},
      {"margin", c.margin},
      {"alpha_level", c.alpha_level ? json(*c.alpha_level) : json(nullptr)},
      {"combine", std::string(to_string(c.combine))},
      {"window", c.window},
      {"threads", c.threads},
  };
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string_view to_string(BankMode m) noexcept {
  return m == BankMode::Full ? "full" : "per-feature";
}

BankMode parse_bank_mode(std::string_view s) {
  if (s == "full") return BankMode::Full;
  if (s == "per-feature") return BankMode::PerFeature;
  throw ValidationError("PCA mode must be full or per-feature, got '" + std::string(s) + "'");
}

StudyContext::StudyContext(StudyConfig config) : cfg(std::move(config)) {
  cfg.validate();
  assets = cfg.assets_dir ? load_assets(*cfg.assets_dir) : builtin_assets();
  backgrounds = background_pool(cfg.backgrounds, cfg.background_size, cfg.background_size,
                                cfg.background_seed, cfg.user_backgrounds);
  extractor.bank = cfg.weights ? load_weights(*cfg.weights) : builtin_bank(cfg.builtin_seed);
  extractor.input_size = cfg.input_size;
  if (cfg.input_size % extractor.bank.reduction() != 0) {
    throw ConfigError("input_size must be a multiple of the extractor reduction");
  }
  for (const auto& id : cfg.telltales) (void)asset(id);
}

const TelltaleAsset& StudyContext::asset(const std::string& id) const {
  for (const auto& a : assets) {
    if (a.id() == id) return a;
  }
  throw ConfigError("unknown telltale '" + id + "'");
}

std::vector<TelltaleAsset> StudyContext::selected() const {
  if (cfg.telltales.empty()) return assets;
  std::vector<TelltaleAsset> out;
  for (const auto& id : cfg.telltales) out.push_back(asset(id));
  return out;
}

int StudyContext::feature_side() const { return extractor.bank.output_side(cfg.input_size); }

Dataset StudyContext::generate(const TelltaleAsset& a, Split split) const {
  switch (split) {
    case Split::Train: return gen_train(a, backgrounds, cfg.train_count, cfg.train_seed, geometry());
    case Split::Test: return gen_test(a, backgrounds, cfg.test_per_bucket, cfg.test_seed, geometry());
    case Split::Eval:
      return gen_eval(a, backgrounds, cfg.eval_per_defect, cfg.eval_seed, geometry(),
                      cfg.eval_flood_per_kind);
  }
  throw ValidationError("bad split");
}

FreConfig StudyContext::fre(const TelltaleAsset& a) const {
  const int side = feature_side();
  return make_fre_config(cfg.fre, a, centered_layout(a, cfg.crop_size), side, side);
}

PcaBank StudyContext::fit(std::span<const FeatureTensor> train) const {
  return fit_bank(train, cfg.pca_mode, cfg.retention, cfg.channels, cfg.threads);
}

std::vector<FeatureTensor> StudyContext::features(const Dataset& d) const {
  return extractor.all(d.images, cfg.threads);
}

ThresholdConfig Thresholds::config(std::size_t model) const {
  ThresholdConfig tc;
  tc.tau = tau.at(model);
  tc.margin = margin;
  tc.tau_alpha = tau_alpha;
  return tc;
}

Thresholds calibrate_bank(const std::string& telltale_id, BankMode mode,
                          const std::vector<std::string>& pca_ids,
                          const std::vector<std::vector<double>>& scores,
                          const DatasetManifest& manifest, double margin) {
  if (scores.size() != manifest.rows.size()) {
    throw DataError("score count does not match the manifest");
  }
  Thresholds t{telltale_id, mode, margin, pca_ids, {}, std::nullopt, std::nullopt};
  for (std::size_t m = 0; m < pca_ids.size(); ++m) {
    std::vector<double> good;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!manifest.rows[i].error) good.push_back(scores[i].at(m));
    }
    t.tau.push_back(calibrate(good, margin).tau);
  }
  return t;
}

void save_thresholds(const std::filesystem::path& path, const Thresholds& t) {
  json models = json::array();
  for (std::size_t i = 0; i < t.tau.size(); ++i) {
    models.push_back({{"pca_id", t.pca_ids[i]}, {"tau", t.tau[i]}});
  }
  json j = {{"telltale", t.telltale_id},
            {"pca_mode", std::string(to_string(t.mode))},
            {"margin", t.margin},
            {"models", models},
            {"alpha_level", t.alpha_level ? json(*t.alpha_level) : json(nullptr)},
            {"tau_alpha", t.tau_alpha ? json(*t.tau_alpha) : json(nullptr)}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Thresholds load_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read thresholds " + path.string());
  try {
    const json j = json::parse(in);
    Thresholds t;
    t.telltale_id = j.at("telltale").get<std::string>();
    t.mode = parse_bank_mode(j.at("pca_mode").get<std::string>());
    t.margin = j.at("margin").get<double>();
    for (const auto& m : j.at("models")) {
      t.pca_ids.push_back(m.at("pca_id").get<std::string>());
      t.tau.push_back(m.at("tau").get<double>());
    }
    if (j.contains("alpha_level") && !j["alpha_level"].is_null()) {
      t.alpha_level = j["alpha_level"].get<int>();
    }
    if (j.contains("tau_alpha") && !j["tau_alpha"].is_null()) {
      t.tau_alpha = j["tau_alpha"].get<double>();
    }
    if (t.tau.empty()) throw ConfigError("thresholds file lists no models");
    return t;
  } catch (const json::exception& e) {
    throw ConfigError("thresholds " + path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError("thresholds " + path.string() + ": " + e.what());
  }
}

std::vector<Image> alpha_renderings(const StudyContext& ctx, const TelltaleAsset& asset,
                                    const Dataset& test, int level) {
  std::vector<Image> out;
  for (const auto& row : test.manifest.rows) {
    if (row.error) continue;
    ManifestRow r = row;
    r.error = ErrorSpec{ErrorKind::AlphaBlending, level, 0};
    out.push_back(render_row(r, asset, ctx.backgrounds, ctx.geometry()));
  }
  return out;
}

std::vector<double> combined_scores(const std::vector<std::vector<double>>& scores,
                                    const Thresholds& t, CombinePolicy policy) {
  std::vector<double> out;
  out.reserve(scores.size());
  if (t.tau.size() == 1) {
    for (const auto& row : scores) out.push_back(row.at(0));
    return out;
  }
  std::size_t full = t.tau.size();
  if (policy == CombinePolicy::FullOnly) {
    const auto it = std::find(t.pca_ids.begin(), t.pca_ids.end(), "full");
    if (it == t.pca_ids.end()) throw ValidationError("FULL_ONLY needs a full PCA model");
    full = static_cast<std::size_t>(it - t.pca_ids.begin());
  }
  for (const auto& row : scores) {
    if (full < t.tau.size()) {
      out.push_back(row.at(full) / t.tau[full]);
      continue;
    }
    double v = row.at(0) / t.tau[0];
    for (std::size_t m = 1; m < t.tau.size(); ++m) {
      const double r = row.at(m) / t.tau[m];
      v = policy == CombinePolicy::AnyOk ? std::min(v, r) : std::max(v, r);
    }
    out.push_back(v);
  }
  return out;
}

std::filesystem::path bank_path(const StudyConfig& cfg, const std::string& id, BankMode mode) {
  return cfg.out_dir / (id + "_" + std::string(to_string(mode)) + ".fpca");
}

std::filesystem::path thresholds_path(const StudyConfig& cfg, const std::string& id,
                                      BankMode mode) {
  return cfg.out_dir / (id + "_" + std::string(to_string(mode)) + "_thresholds.json");
}

}  // namespace tmon
