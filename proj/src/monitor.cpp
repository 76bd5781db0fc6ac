#include "tmon/monitor.hpp"

#include <fstream>

#include "json.hpp"
#include "tmon/assets.hpp"
#include "tmon/error.hpp"
#include "tmon/parallel.hpp"
#include "tmon/png_io.hpp"

namespace tmon {

using nlohmann::json;

namespace {

constexpr std::string_view kBuiltinPrefix = "builtin:";

CropLayout layout_in(const TelltaleAsset& asset, const Roi& roi) {
  if (roi.w < asset.width() || roi.h < asset.height()) {
    throw ConfigError("ROI of telltale '" + asset.id() + "' is smaller than its icon");
  }
  return {roi.w, roi.h, {(roi.w - asset.width()) / 2, (roi.h - asset.height()) / 2}};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

TelltaleAsset load_asset(const std::string& id, const std::string& ref,
                         const std::filesystem::path& base) {
  if (ref.starts_with(kBuiltinPrefix)) {
    const std::string name = ref.substr(kBuiltinPrefix.size());
    for (auto& a : builtin_assets()) {
      if (a.id() == name) return TelltaleAsset(id, a.icon());
    }
    throw ConfigError("unknown built-in telltale '" + name + "'");
  }
  return TelltaleAsset(id, read_png(resolve(base, ref)));
}

}  // namespace

void MonitorConfig::validate() const {
  if (frame_width < 1 || frame_height < 1) throw ConfigError("frame size must be positive");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (input_size < 1) throw ConfigError("input_size must be positive");
  if (telltales.empty()) throw ConfigError("no telltales configured");
  std::map<std::string, int> seen;
  for (const auto& t : telltales) {
    if (++seen[t.asset.id()] > 1) throw ConfigError("duplicate telltale id '" + t.asset.id() + "'");
    if (!t.roi.inside(frame_width, frame_height)) {
      throw ConfigError("ROI of telltale '" + t.asset.id() + "' lies outside the frame");
    }
    (void)layout_in(t.asset, t.roi);
    if (t.banks.empty()) throw ConfigError("telltale '" + t.asset.id() + "' has no PCA bank");
    for (const auto& b : t.banks) {
      if (!std::filesystem::exists(b.file)) {
        throw ConfigError("bank file " + b.file.string() + " does not exist");
      }
      for (const auto& tc : b.thresholds) tc.validate();
    }
  }
}

MonitorConfig load_monitor_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read monitor config " + path.string());
  const auto base = path.parent_path();
  try {
    const json j = json::parse(in);
    MonitorConfig cfg;
    cfg.frame_width = j.at("frame").at("width").get<int>();
    cfg.frame_height = j.at("frame").at("height").get<int>();
    cfg.window = j.value("window", std::size_t{60});
    cfg.threads = j.value("threads", 0u);
    if (j.contains("extractor")) {
      const auto& e = j["extractor"];
      if (e.contains("weights") && !e["weights"].is_null()) {
        cfg.weights = resolve(base, e["weights"].get<std::string>());
      }
      cfg.builtin_seed = e.value("builtin_seed", std::uint64_t{0});
      cfg.input_size = e.value("input_size", 128);
    }
    for (const auto& t : j.at("telltales")) {
      const std::string id = t.at("id").get<std::string>();
      const auto& r = t.at("roi");
      TelltaleEntry entry{load_asset(id, t.at("asset").get<std::string>(), base),
                          Roi{r.at("x").get<int>(), r.at("y").get<int>(), r.at("w").get<int>(),
                              r.at("h").get<int>()},
                          std::nullopt,
                          {},
                          {},
                          CombinePolicy::AllOk};
      if (t.contains("transform") && !t["transform"].is_null()) {
        const auto m = t["transform"].get<std::vector<double>>();
        if (m.size() != 6) throw ConfigError("transform needs 6 entries");
        entry.transform = GeomTransform::affine({m[0], m[1], m[2], m[3], m[4], m[5]});
      }
      if (t.contains("fre")) {
        const auto& f = t["fre"];
        entry.fre.mask = parse_mask_choice(f.value("mask", std::string("binary")));
        entry.fre.bg_weight = f.value("bg_weight", 0.0);
        entry.fre.d_max = f.value("d_max", 1.0);
      }
      entry.combine = parse_combine_policy(t.value("combine", std::string("all")));
      for (const auto& b : t.at("banks")) {
        BankRef ref;
        ref.file = resolve(base, b.at("file").get<std::string>());
        const auto taus = b.at("tau").get<std::vector<double>>();
        std::vector<double> offs;
        if (b.contains("tau_off")) offs = b["tau_off"].get<std::vector<double>>();
        if (!offs.empty() && offs.size() != taus.size()) {
          throw ConfigError("tau_off must list one value per model");
        }
        for (std::size_t i = 0; i < taus.size(); ++i) {
          ThresholdConfig tc;
          tc.tau = taus[i];
          if (!offs.empty()) tc.tau_off = offs[i];
          ref.thresholds.push_back(tc);
        }
        entry.banks.push_back(std::move(ref));
      }
      cfg.telltales.push_back(std::move(entry));
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError("monitor config " + path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError("monitor config " + path.string() + ": " + e.what());
  }
}

void save_monitor_config(const std::filesystem::path& path, const MonitorConfig& cfg) {
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    return base.empty() ? p.string() : std::filesystem::relative(p, base).string();
  };
  json j;
  j["frame"] = {{"width", cfg.frame_width}, {"height", cfg.frame_height}};
  j["window"] = cfg.window;
  j["threads"] = cfg.threads;
  j["extractor"] = {{"weights", cfg.weights ? json(rel(*cfg.weights)) : json(nullptr)},
                    {"builtin_seed", cfg.builtin_seed},
                    {"input_size", cfg.input_size}};
  j["telltales"] = json::array();
  for (const auto& t : cfg.telltales) {
    json e;
    e["id"] = t.asset.id();
    const auto icon = base / (t.asset.id() + ".png");
    write_png(icon, t.asset.icon());
    e["asset"] = rel(icon);
    e["roi"] = {{"x", t.roi.x}, {"y", t.roi.y}, {"w", t.roi.w}, {"h", t.roi.h}};
    if (t.transform) {
      const auto& m = t.transform->matrix();
      e["transform"] = std::vector<double>(m.begin(), m.end());
    }
    e["fre"] = {{"mask", std::string(to_string(t.fre.mask))},
                {"bg_weight", t.fre.bg_weight},
                {"d_max", t.fre.d_max}};
    e["combine"] = std::string(to_string(t.combine));
    e["banks"] = json::array();
    for (const auto& b : t.banks) {
      std::vector<double> taus;
      std::vector<double> offs;
      bool any_off = false;
      for (const auto& tc : b.thresholds) {
        taus.push_back(tc.tau);
        offs.push_back(tc.threshold_for(Expected::Off));
        any_off = any_off || tc.tau_off.has_value();
      }
      json bj = {{"file", rel(b.file)}, {"tau", taus}};
      if (any_off) bj["tau_off"] = offs;
      e["banks"].push_back(bj);
    }
    j["telltales"].push_back(e);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write monitor config " + path.string());
  out << j.dump(2) << '\n';
}

Monitor::Monitor(MonitorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  try {
    extractor_.bank = cfg_.weights ? load_weights(*cfg_.weights) : builtin_bank(cfg_.builtin_seed);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot load extractor weights: ") + e.what());
  }
  extractor_.input_size = cfg_.input_size;
  if (cfg_.input_size % extractor_.bank.reduction() != 0) {
    throw ConfigError("input_size must be a multiple of the extractor reduction");
  }
  for (const auto& t : cfg_.telltales) branches_.push_back(load_branch(t));
}

Monitor::Branch Monitor::load_branch(const TelltaleEntry& entry) const {
  const int side = extractor_.bank.output_side(cfg_.input_size);
  const FreConfig fre =
      make_fre_config(entry.fre, entry.asset, layout_in(entry.asset, entry.roi), side, side);
  Branch b;
  for (const auto& ref : entry.banks) {
    PcaBank bank = [&] {
      try {
        return load_bank(ref.file);
      } catch (const Error& e) {
        throw ConfigError("cannot load bank " + ref.file.string() + ": " + e.what());
      }
    }();
    if (bank.channels() != static_cast<int>(extractor_.bank.filters) || bank.height() != side ||
        bank.width() != side) {
      throw ConfigError("bank " + ref.file.string() + " does not match the extractor output");
    }
    if (ref.thresholds.size() != bank.size()) {
      throw ConfigError("bank " + ref.file.string() + " needs one threshold per model");
    }
    b.filters.emplace_back(bank.size(), TemporalFilter(cfg_.window));
    b.stages.push_back({std::move(bank), fre});
  }
  return b;
}

std::size_t Monitor::telltale_index(const std::string& id) const {
  for (std::size_t i = 0; i < cfg_.telltales.size(); ++i) {
    if (cfg_.telltales[i].asset.id() == id) return i;
  }
  throw ValidationError("unknown telltale '" + id + "'");
}

FeatureTensor Monitor::crop_features(std::size_t telltale, const Image& crop) const {
  const auto& entry = cfg_.telltales.at(telltale);
  if (crop.width() != entry.roi.w || crop.height() != entry.roi.h) {
    throw ShapeError("crop does not match the ROI of telltale '" + entry.asset.id() + "'");
  }
  return entry.transform ? extractor_(denormalize(crop, *entry.transform)) : extractor_(crop);
}

const ScoringStage& Monitor::stage(std::size_t telltale, std::size_t bank) const {
  return branches_.at(telltale).stages.at(bank);
}

std::size_t Monitor::bank_count(std::size_t telltale) const {
  return branches_.at(telltale).stages.size();
}

PcaBank& Monitor::mutable_bank(std::size_t telltale, std::size_t bank) {
  return branches_.at(telltale).stages.at(bank).bank;
}

std::size_t Monitor::filter_fill(std::size_t telltale) const {
  return branches_.at(telltale).filters.at(0).at(0).size();
}

Verdict Monitor::run_branch(std::size_t i, const Image& frame, Expected expected,
                            std::uint64_t frame_id) {
  const auto& entry = cfg_.telltales[i];
  Branch& branch = branches_[i];
  const FeatureTensor f = crop_features(i, crop(frame, entry.roi));
  std::vector<Verdict> members;
  for (std::size_t b = 0; b < branch.stages.size(); ++b) {
    const auto scores = branch.stages[b].score(f);
    for (std::size_t m = 0; m < scores.size(); ++m) {
      const double filtered = branch.filters[b][m].push(scores[m].value);
      Verdict v = decide(scores[m].value, filtered, entry.banks[b].thresholds[m], expected);
      v.telltale_id = entry.asset.id();
      v.frame_id = frame_id;
      v.pca_id = scores[m].pca_id;
      members.push_back(std::move(v));
    }
  }
  return combine(members, entry.combine);
}

std::vector<Verdict> Monitor::check_frame(const Image& frame,
                                          const std::map<std::string, Expected>& active) {
  if (frame.width() != cfg_.frame_width || frame.height() != cfg_.frame_height) {
    throw ShapeError("frame is " + std::to_string(frame.width()) + "x" +
                     std::to_string(frame.height()) + ", configured " +
                     std::to_string(cfg_.frame_width) + "x" + std::to_string(cfg_.frame_height));
  }
  std::vector<Expected> expected;
  for (const auto& t : cfg_.telltales) {
    const auto it = active.find(t.asset.id());
    if (it == active.end()) {
      throw ValidationError("no ON/OFF flag for telltale '" + t.asset.id() + "'");
    }
    expected.push_back(it->second);
  }
  const std::uint64_t frame_id = next_frame_++;
  std::vector<std::optional<Verdict>> slots(branches_.size());
  parallel_for(branches_.size(), [&](std::size_t i) {
    slots[i] = run_branch(i, frame, expected[i], frame_id);
  }, cfg_.threads);
  std::vector<Verdict> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

void Monitor::reset_scoring_stage() {
  std::vector<Branch> fresh;
  fresh.reserve(cfg_.telltales.size());
  for (const auto& t : cfg_.telltales) fresh.push_back(load_branch(t));
  branches_ = std::move(fresh);
}

}  // namespace tmon
