// tmon: dataset generation, PCA fitting, calibration, evaluation, frame
// monitoring, testing mode and GA search from the command line.
//
// Exit codes: 0 success, 1 failed gate (false alarms, NOK verdicts, failed
// self-test, undetectable error found), 2 usage or input error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tmon/adversarial.hpp"
#include "tmon/error.hpp"
#include "tmon/monitor.hpp"
#include "tmon/png_io.hpp"
#include "tmon/reports.hpp"
#include "tmon/study.hpp"
#include "tmon/test_db.hpp"

using namespace tmon;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kGateFailed = 1;
constexpr int kUsage = 2;

struct Flags {
  std::string config;
  std::string telltale;
  std::string split;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string pca_mode;
  std::string combine;
  std::optional<double> margin;
  std::string budget;
  bool svg = false;
  std::optional<unsigned> threads;

  // Subcommand specifics.
  std::string frames;
  std::vector<std::string> off;
  std::string db;
  std::string test_id;
  bool build = false;
  std::size_t population = 100;
  std::size_t generations = 300;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Configuration file (JSON)");
  cmd->add_option("--telltale", f.telltale, "Restrict to one telltale id");
  cmd->add_option("--out", f.out, "Output directory or file");
  cmd->add_option("--threads", f.threads, "Worker threads (0: all cores)");
}

void add_study(CLI::App* cmd, Flags& f) {
  add_common(cmd, f);
  cmd->add_option("--pca-mode", f.pca_mode, "full | per-feature")
      ->check(CLI::IsMember({"full", "per-feature"}));
  cmd->add_option("--combine", f.combine, "all | any | full")
      ->check(CLI::IsMember({"all", "any", "full"}));
  cmd->add_option("--margin", f.margin, "Threshold margin m")->check(CLI::Range(1.0, 1e6));
  cmd->add_flag("--svg", f.svg, "Also write SVG charts");
}

StudyConfig study_config(const Flags& f) {
  StudyConfig c = f.config.empty() ? StudyConfig{} : load_study_config(f.config);
  if (!f.telltale.empty()) c.telltales = {f.telltale};
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.pca_mode.empty()) c.pca_mode = parse_bank_mode(f.pca_mode);
  if (!f.combine.empty()) c.combine = parse_combine_policy(f.combine);
  if (f.margin) c.margin = *f.margin;
  if (f.threads) c.threads = *f.threads;
  c.validate();
  return c;
}

std::vector<Split> splits_of(const Flags& f) {
  if (f.split.empty()) return {Split::Train, Split::Test, Split::Eval};
  return {parse_split(f.split)};
}

Dataset load_or_fail(const StudyContext& ctx, const TelltaleAsset& a, Split s) {
  const auto path = manifest_path(ctx.cfg.data_root, s, a.id());
  if (!fs::exists(path)) {
    throw DataError("no " + std::string(to_string(s)) + " split for '" + a.id() + "' under " +
                    ctx.cfg.data_root.string() + "; run gen-data first");
  }
  return load_dataset(ctx.cfg.data_root, s, a.id());
}

ScoringStage load_stage(const StudyContext& ctx, const TelltaleAsset& a) {
  const auto path = bank_path(ctx.cfg, a.id(), ctx.cfg.pca_mode);
  if (!fs::exists(path)) throw DataError("no PCA bank " + path.string() + "; run fit first");
  return {load_bank(path), ctx.fre(a)};
}

Thresholds load_calibration(const StudyContext& ctx, const TelltaleAsset& a) {
  const auto path = thresholds_path(ctx.cfg, a.id(), ctx.cfg.pca_mode);
  if (!fs::exists(path)) throw DataError("no thresholds " + path.string() + "; run calibrate first");
  return load_thresholds(path);
}

std::vector<std::string> labels(const PcaBank& bank) {
  std::vector<std::string> out;
  for (std::size_t m = 0; m < bank.size(); ++m) out.push_back(bank.model_label(m));
  return out;
}

int cmd_gen_data(const Flags& f) {
  StudyConfig cfg = study_config(f);
  if (f.seed) {
    cfg.train_seed = *f.seed;
    cfg.test_seed = *f.seed + 1;
    cfg.eval_seed = *f.seed + 2;
  }
  const StudyContext ctx(cfg);
  for (const auto& a : ctx.selected()) {
    for (const Split s : splits_of(f)) {
      const Dataset d = ctx.generate(a, s);
      write_dataset(cfg.data_root, d);
      std::cout << a.id() << ' ' << to_string(s) << ": " << d.images.size() << " images\n";
    }
  }
  return kOk;
}

int cmd_fit(const Flags& f) {
  const StudyContext ctx(study_config(f));
  for (const auto& a : ctx.selected()) {
    const Dataset train = load_or_fail(ctx, a, Split::Train);
    const PcaBank bank = ctx.fit(ctx.features(train));
    const auto path = bank_path(ctx.cfg, a.id(), ctx.cfg.pca_mode);
    fs::create_directories(path.parent_path());
    save_bank(path, bank);
    std::cout << a.id() << ": " << bank.size() << " model(s), " << bank.model(0).n_components()
              << " component(s) in the first -> " << path.string() << '\n';
  }
  return kOk;
}

void write_monitor_config(const StudyContext& ctx, const std::vector<TelltaleAsset>& assets) {
  MonitorConfig mc;
  const int crop = ctx.cfg.crop_size;
  mc.frame_width = crop * static_cast<int>(assets.size());
  mc.frame_height = crop;
  mc.window = ctx.cfg.window;
  mc.weights = ctx.cfg.weights;
  mc.builtin_seed = ctx.cfg.builtin_seed;
  mc.input_size = ctx.cfg.input_size;
  for (std::size_t i = 0; i < assets.size(); ++i) {
    const Thresholds t = load_calibration(ctx, assets[i]);
    BankRef ref{bank_path(ctx.cfg, assets[i].id(), ctx.cfg.pca_mode), {}};
    for (std::size_t m = 0; m < t.tau.size(); ++m) ref.thresholds.push_back(t.config(m));
    mc.telltales.push_back({assets[i], Roi{crop * static_cast<int>(i), 0, crop, crop},
                            std::nullopt, ctx.cfg.fre, {ref}, ctx.cfg.combine});
  }
  save_monitor_config(ctx.cfg.out_dir / "monitor.json", mc);
}

int cmd_calibrate(const Flags& f) {
  const StudyContext ctx(study_config(f));
  const auto assets = ctx.selected();
  for (const auto& a : assets) {
    const ScoringStage stage = load_stage(ctx, a);
    const Dataset test = load_or_fail(ctx, a, Split::Test);
    const auto scores = stage.score_batch(ctx.features(test), ctx.cfg.threads);
    Thresholds t = calibrate_bank(a.id(), ctx.cfg.pca_mode, labels(stage.bank), scores,
                                  test.manifest, ctx.cfg.margin);
    if (ctx.cfg.alpha_level) {
      const auto alpha = alpha_renderings(ctx, a, test, *ctx.cfg.alpha_level);
      const auto as = stage.score_batch(ctx.extractor.all(alpha, ctx.cfg.threads), ctx.cfg.threads);
      t.alpha_level = ctx.cfg.alpha_level;
      t.tau_alpha = calibrate_alpha(column(as, 0), ctx.cfg.margin);
    }
    save_thresholds(thresholds_path(ctx.cfg, a.id(), ctx.cfg.pca_mode), t);
    std::cout << a.id() << ": tau";
    for (double v : t.tau) std::cout << ' ' << format_number(v);
    if (t.tau_alpha) std::cout << ", tau_alpha " << format_number(*t.tau_alpha);
    std::cout << '\n';
  }
  write_monitor_config(ctx, assets);
  return kOk;
}

int cmd_eval(const Flags& f) {
  const StudyContext ctx(study_config(f));
  bool gate = true;
  for (const auto& a : ctx.selected()) {
    const ScoringStage stage = load_stage(ctx, a);
    const Thresholds t = load_calibration(ctx, a);
    const Split split = f.split.empty() ? Split::Eval : parse_split(f.split);
    const Dataset d = load_or_fail(ctx, a, split);
    const auto scores = stage.score_batch(ctx.features(d), ctx.cfg.threads);
    const auto combined = combined_scores(scores, t, ctx.cfg.combine);
    ThresholdConfig tc;
    tc.margin = t.margin;
    tc.tau = t.tau.size() == 1 ? t.tau[0] : 1.0;
    if (t.tau.size() == 1) tc.tau_alpha = t.tau_alpha;
    const RunReport report = score_report(d.manifest, combined, tc, t.alpha_level);
    const fs::path dir = ctx.cfg.out_dir / a.id() / to_string(split);
    write_scores(dir / "scores.csv", d.manifest, combined);
    write_report(dir, report);
    if (f.svg) write_report_svg(dir / "report.svg", report);
    std::cout << a.id() << ": " << report.false_alarms << '/' << report.good_count
              << " false alarms";
    for (const auto& g : report.groupings) {
      if (g.kind != "good") std::cout << ", " << g.kind << ' ' << format_number(g.nok_rate_per_telltale);
    }
    std::cout << '\n';
    gate = gate && report.false_alarms == 0;
  }
  return gate ? kOk : kGateFailed;
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

MonitorConfig monitor_config(const Flags& f) {
  if (f.config.empty()) throw ConfigError("--config <monitor.json> is required");
  MonitorConfig mc = load_monitor_config(f.config);
  if (f.threads) mc.threads = *f.threads;
  return mc;
}

int cmd_monitor(const Flags& f) {
  if (f.frames.empty()) throw ConfigError("--frames <dir> is required");
  Monitor monitor(monitor_config(f));
  std::map<std::string, Expected> active;
  for (const auto& t : monitor.config().telltales) active[t.asset.id()] = Expected::On;
  for (const auto& id : f.off) {
    if (!active.contains(id)) throw ConfigError("unknown telltale '" + id + "' in --off");
    active[id] = Expected::Off;
  }
  std::ofstream file;
  if (!f.out.empty()) {
    const fs::path p(f.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    file.open(p);
    if (!file) throw IoError("cannot write " + f.out);
  }
  std::ostream& out = f.out.empty() ? std::cout : file;
  out << verdict_csv_header() << '\n';
  std::size_t nok = 0;
  for (const auto& path : png_files(f.frames)) {
    for (const auto& v : monitor.check_frame(read_png(path), active)) {
      out << verdict_csv_row(v) << '\n';
      nok += !v.ok();
    }
  }
  if (!f.out.empty()) std::cout << nok << " NOK verdict(s)\n";
  return nok == 0 ? kOk : kGateFailed;
}

int cmd_test_mode(const Flags& f) {
  if (f.db.empty()) throw ConfigError("--db <dir> is required");
  Monitor monitor(monitor_config(f));
  if (f.build) {
    if (f.frames.empty()) throw ConfigError("--build needs --frames <dir>");
    std::vector<TestCase> cases;
    for (const auto& path : png_files(f.frames)) {
      const Image frame = read_png(path);
      for (const auto& t : monitor.config().telltales) {
        cases.push_back({path.stem().string() + "_" + t.asset.id(), t.asset.id(),
                         crop(frame, t.roi), 0, 0});
      }
    }
    const TestDb db = build_test_db(monitor, f.db, cases);
    std::cout << db.entries.size() << " reference map(s) written to " << f.db << '\n';
    return kOk;
  }
  const TestDb db = load_test_db(f.db);
  std::vector<std::string> ids;
  if (!f.test_id.empty()) {
    ids.push_back(f.test_id);
  } else {
    for (const auto& e : db.entries) ids.push_back(e.test_id);
  }
  bool all = true;
  std::cout << "test_id,pass,first_attempt,reset,first_diff_y,first_diff_x\n";
  for (const auto& id : ids) {
    const TestResult r = run_test_mode(monitor, db, id);
    std::cout << r.test_id << ',' << r.pass << ',' << r.passed_first_attempt << ','
              << r.reset_performed << ',' << (r.first_diff ? std::to_string(r.first_diff->first) : "")
              << ',' << (r.first_diff ? std::to_string(r.first_diff->second) : "") << '\n';
    all = all && r.pass;
  }
  return all ? kOk : kGateFailed;
}

std::optional<double> parse_budget(const std::string& s) {
  if (s.empty() || s == "none") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && v > 0.0 && v <= 1.0) return v;
  } catch (const std::logic_error&) {
  }
  throw ValidationError("--budget must be a fraction in (0, 1] or 'none', got '" + s + "'");
}

int cmd_ga_search(const Flags& f) {
  const StudyContext ctx(study_config(f));
  GaConfig ga;
  ga.population = f.population;
  ga.generations = f.generations;
  ga.budget = parse_budget(f.budget);
  ga.seed = f.seed.value_or(0);
  ga.threads = ctx.cfg.threads;
  ga.validate();
  const TelltaleAsset a = ctx.selected().front();
  const Thresholds t = load_calibration(ctx, a);
  const int crop_size = ctx.cfg.crop_size;
  const Image background = crop(ctx.backgrounds.front(), Roi{0, 0, crop_size, crop_size});
  const GaScorer scorer(ctx.extractor, background, load_stage(ctx, a), t.tau, ctx.cfg.combine,
                        ctx.cfg.threads);
  const SearchTrace trace =
      search([&](std::span<const Image> imgs) { return scorer(imgs); }, background, a,
             centered_layout(a, crop_size).icon_offset, ga);
  const std::string tag = "ga_" + (ga.budget ? format_number(*ga.budget) : std::string("none")) +
                          "_seed" + std::to_string(ga.seed);
  const fs::path dir = ctx.cfg.out_dir / a.id();
  write_trace(dir / (tag + ".csv"), trace);
  write_png(dir / (tag + ".png"), trace.best_image);
  std::cout << a.id() << ": best relative score " << format_number(trace.best.fitness) << " after "
            << trace.generations.size() << " generation(s)"
            << (trace.success ? ", undetectable error found\n" : "\n");
  return trace.success ? kGateFailed : kOk;
}

int cmd_feature_report(const Flags& f) {
  StudyConfig cfg = study_config(f);
  cfg.pca_mode = BankMode::PerFeature;
  if (!f.margin) cfg.margin = 1.2;
  const StudyContext ctx(cfg);
  for (const auto& a : ctx.selected()) {
    const auto path = bank_path(cfg, a.id(), BankMode::PerFeature);
    PcaBank bank = fs::exists(path) ? load_bank(path)
                                    : ctx.fit(ctx.features(load_or_fail(ctx, a, Split::Train)));
    if (!fs::exists(path)) {
      fs::create_directories(path.parent_path());
      save_bank(path, bank);
    }
    const ScoringStage stage{std::move(bank), ctx.fre(a)};
    const Dataset test = load_or_fail(ctx, a, Split::Test);
    const Dataset eval = load_or_fail(ctx, a, Split::Eval);
    const auto ts = stage.score_batch(ctx.features(test), cfg.threads);
    const auto es = stage.score_batch(ctx.features(eval), cfg.threads);
    const FeatureReport rep = feature_report(stage.bank, ts, test.manifest, es, eval.manifest, cfg.margin);
    const fs::path dir = cfg.out_dir / a.id();
    write_feature_report(dir / "feature_report.csv", rep);
    if (f.svg) write_feature_report_svg(dir / "feature_report.svg", rep);
    std::cout << a.id() << ": " << rep.separating_count() << " of " << rep.channels.size()
              << " channels separate good from NoRender at m=" << format_number(cfg.margin) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Telltale monitor: PCA feature reconstruction error verification"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "Generate train/test/eval datasets");
  add_study(gen, f);
  gen->add_option("--split", f.split, "train | test | eval (default: all)");
  gen->add_option("--seed", f.seed, "Base seed (train, test = seed+1, eval = seed+2)");

  auto* fit = app.add_subcommand("fit", "Fit PCA banks on the train split");
  add_study(fit, f);

  auto* cal = app.add_subcommand("calibrate", "Thresholds from the good test samples");
  add_study(cal, f);

  auto* ev = app.add_subcommand("eval", "Score a split and write reports");
  add_study(ev, f);
  ev->add_option("--split", f.split, "Split to score (default: eval)");

  auto* mon = app.add_subcommand("monitor", "Run check_frame over a frame directory");
  add_common(mon, f);
  mon->add_option("--frames", f.frames, "Directory of frame PNGs (processed in name order)");
  mon->add_option("--off", f.off, "Telltale ids expected OFF");

  auto* tm = app.add_subcommand("test-mode", "Bit-exact self-test of the scoring stage");
  add_common(tm, f);
  tm->add_option("--db", f.db, "Test database directory");
  tm->add_option("--id", f.test_id, "Single test id (default: all)");
  tm->add_flag("--build", f.build, "Build the database from --frames instead of testing");
  tm->add_option("--frames", f.frames, "Frame PNGs for --build");

  auto* ga = app.add_subcommand("ga-search", "Genetic search for undetectable errors");
  add_study(ga, f);
  ga->add_option("--budget", f.budget, "Corrupted shape fraction in (0, 1], or none");
  ga->add_option("--seed", f.seed, "GA seed");
  ga->add_option("--population", f.population, "Population size");
  ga->add_option("--generations", f.generations, "Generation limit");

  auto* fr = app.add_subcommand("feature-report", "Per-channel PCA separation report");
  add_study(fr, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(f);
    if (fit->parsed()) return cmd_fit(f);
    if (cal->parsed()) return cmd_calibrate(f);
    if (ev->parsed()) return cmd_eval(f);
    if (mon->parsed()) return cmd_monitor(f);
    if (tm->parsed()) return cmd_test_mode(f);
    if (ga->parsed()) return cmd_ga_search(f);
    if (fr->parsed()) return cmd_feature_report(f);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
