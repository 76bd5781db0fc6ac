#include "tmon/reports.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

#include "tmon/error.hpp"

namespace tmon {

namespace {

int kind_rank(const std::string& kind) {
  if (kind == "good") return 0;
  for (std::size_t i = 0; i < kAllErrorKinds.size(); ++i) {
    if (to_string(kAllErrorKinds[i]) == kind) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(kAllErrorKinds.size()) + 1;
}

int effective_level(const ManifestRow& row) {
  if (!row.error) return 0;
  return is_leveled(row.error->kind) ? row.error->level : kMaxErrorLevel;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::vector<std::string> ordered_kinds(const std::map<std::string, std::vector<double>>& m) {
  std::vector<std::string> kinds;
  for (const auto& [k, v] : m) kinds.push_back(k);
  std::sort(kinds.begin(), kinds.end(), [](const std::string& a, const std::string& b) {
    return std::tuple(kind_rank(a), a) < std::tuple(kind_rank(b), b);
  });
  return kinds;
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

const BucketStats* RunReport::find(const std::string& kind, int level) const {
  for (const auto& b : buckets) {
    if (b.kind == kind && b.level == level) return &b;
  }
  return nullptr;
}

BucketStats RunReport::kind_total(const std::string& kind, int min_level) const {
  BucketStats t;
  t.kind = kind;
  t.min = std::numeric_limits<double>::infinity();
  t.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& b : buckets) {
    if (b.kind != kind || b.level < min_level) continue;
    t.telltale_id = b.telltale_id;
    t.count += b.count;
    t.nok += b.nok;
    t.min = std::min(t.min, b.min);
    t.max = std::max(t.max, b.max);
    sum += b.mean * static_cast<double>(b.count);
  }
  t.mean = t.count ? sum / static_cast<double>(t.count) : 0.0;
  if (t.count == 0) t.min = t.max = 0.0;
  return t;
}

RunReport score_report(const DatasetManifest& manifest, std::span<const double> scores,
                       const ThresholdConfig& tc, std::optional<int> alpha_level) {
  if (scores.size() != manifest.rows.size()) {
    throw DataError("score list has " + std::to_string(scores.size()) + " entries for " +
                    std::to_string(manifest.rows.size()) + " manifest rows");
  }
  tc.validate();
  RunReport r;
  r.tau = tc.tau;
  r.margin = tc.margin;
  r.tau_alpha = tc.tau_alpha;
  r.alpha_level = alpha_level;

  using Key = std::tuple<std::string, int, std::string, int>;
  std::map<Key, BucketStats> buckets;
  std::map<std::string, GroupingRow> groups;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& row = manifest.rows[i];
    const double s = scores[i];
    if (!std::isfinite(s) || s < 0.0) throw DataError("invalid score in row " + std::to_string(i));
    const std::string kind = bucket_of(row);
    const int level = row.error ? row.error->level : 0;
    auto& b = buckets[{row.telltale_id, kind_rank(kind), kind, level}];
    if (b.count == 0) {
      b.telltale_id = row.telltale_id;
      b.kind = kind;
      b.level = level;
      b.min = b.max = s;
    }
    b.min = std::min(b.min, s);
    b.max = std::max(b.max, s);
    b.mean += s;
    ++b.count;
    const bool nok = s >= tc.tau;
    b.nok += nok;
    if (!row.error) {
      ++r.good_count;
      r.false_alarms += nok;
    }
    r.sorted_scores[kind].push_back(s);

    const bool alpha_ok_level = row.error && row.error->kind == ErrorKind::AlphaBlending &&
                                alpha_level && tc.tau_alpha && row.error->level <= *alpha_level;
    const bool nok_type = alpha_ok_level ? s >= *tc.tau_alpha : nok;
    auto& g = groups[kind];
    g.kind = kind;
    ++g.count;
    g.nok_rate_per_telltale += nok;
    g.nok_rate_per_error_type += nok_type;
  }
  for (auto& [k, b] : buckets) {
    b.mean /= static_cast<double>(b.count);
    r.buckets.push_back(b);
  }
  for (auto& [k, v] : r.sorted_scores) std::sort(v.begin(), v.end());
  for (const auto& kind : ordered_kinds(r.sorted_scores)) {
    GroupingRow g = groups[kind];
    g.nok_rate_per_telltale /= static_cast<double>(g.count);
    g.nok_rate_per_error_type /= static_cast<double>(g.count);
    r.groupings.push_back(g);
  }
  return r;
}

void write_scores(const std::filesystem::path& path, const DatasetManifest& manifest,
                  std::span<const double> scores) {
  if (scores.size() != manifest.rows.size()) throw DataError("score count does not match manifest");
  auto out = open_out(path);
  out << "image_path,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << manifest.rows[i].image_path << ',' << format_number(scores[i]) << '\n';
  }
}

std::vector<double> read_scores(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read scores " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "image_path,score") {
    throw DataError("scores " + path.string() + ": bad header");
  }
  std::map<std::string, double> by_path;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw DataError("scores: malformed line '" + line + "'");
    try {
      by_path[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (const std::logic_error&) {
      throw DataError("scores: bad number in '" + line + "'");
    }
  }
  std::vector<double> out;
  out.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    const auto it = by_path.find(row.image_path);
    if (it == by_path.end()) throw DataError("no score for " + row.image_path);
    out.push_back(it->second);
    by_path.erase(it);
  }
  if (!by_path.empty()) throw DataError("score for unknown image " + by_path.begin()->first);
  return out;
}

void write_report(const std::filesystem::path& dir, const RunReport& r) {
  {
    auto out = open_out(dir / "report.csv");
    out << "telltale_id,error_kind,error_level,count,min_score,mean_score,max_score,nok_count,"
           "nok_rate\n";
    for (const auto& b : r.buckets) {
      out << b.telltale_id << ',' << b.kind << ',' << b.level << ',' << b.count << ','
          << format_number(b.min) << ',' << format_number(b.mean) << ',' << format_number(b.max)
          << ',' << b.nok << ',' << format_number(b.nok_rate()) << '\n';
    }
  }
  {
    auto out = open_out(dir / "sorted_scores.csv");
    out << "error_kind,rank,score\n";
    for (const auto& kind : ordered_kinds(r.sorted_scores)) {
      const auto& v = r.sorted_scores.at(kind);
      for (std::size_t i = 0; i < v.size(); ++i) {
        out << kind << ',' << i << ',' << format_number(v[i]) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "groupings.csv");
    out << "error_kind,count,nok_rate_per_telltale,nok_rate_per_error_type\n";
    for (const auto& g : r.groupings) {
      out << g.kind << ',' << g.count << ',' << format_number(g.nok_rate_per_telltale) << ','
          << format_number(g.nok_rate_per_error_type) << '\n';
    }
  }
  auto out = open_out(dir / "summary.csv");
  out << "key,value\n";
  out << "tau," << format_number(r.tau) << '\n';
  out << "margin," << format_number(r.margin) << '\n';
  out << "tau_alpha," << (r.tau_alpha ? format_number(*r.tau_alpha) : "") << '\n';
  out << "alpha_level," << (r.alpha_level ? std::to_string(*r.alpha_level) : "") << '\n';
  out << "good_count," << r.good_count << '\n';
  out << "false_alarms," << r.false_alarms << '\n';
}

void write_report_svg(const std::filesystem::path& path, const RunReport& r) {
  const auto kinds = ordered_kinds(r.sorted_scores);
  double top = r.tau;
  for (const auto& k : kinds) top = std::max(top, r.sorted_scores.at(k).back());
  top = top > 0.0 ? top * 1.05 : 1.0;
  const int w = 80 + 70 * static_cast<int>(kinds.size());
  const int h = 360;
  const int plot = 280;
  auto ypos = [&](double v) { return 20.0 + plot * (1.0 - v / top); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"50\" x2=\"" << w - 10 << "\" y1=\"" << ypos(r.tau) << "\" y2=\"" << ypos(r.tau)
    << "\" stroke=\"red\" stroke-dasharray=\"4 3\"/>\n";
  s << "<text x=\"52\" y=\"" << ypos(r.tau) - 3 << "\" fill=\"red\">tau</text>\n";
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const auto& v = r.sorted_scores.at(kinds[i]);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    const double x = 80.0 + 70.0 * static_cast<double>(i);
    s << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << ypos(v.front()) << "\" y2=\""
      << ypos(v.back()) << "\" stroke=\"black\"/>\n";
    s << "<circle cx=\"" << x << "\" cy=\"" << ypos(mean) << "\" r=\"3\" fill=\"steelblue\"/>\n";
    s << "<text x=\"" << x << "\" y=\"" << h - 40 << "\" text-anchor=\"end\" transform=\"rotate(-40 "
      << x << ' ' << h - 40 << ")\">" << svg_escape(kinds[i]) << "</text>\n";
  }
  s << "</svg>\n";
  auto out = open_out(path);
  out << s.str();
}

std::size_t FeatureReport::separating_count() const {
  return static_cast<std::size_t>(
      std::count_if(channels.begin(), channels.end(), [](const auto& c) { return c.separates(); }));
}

FeatureReport feature_report(const PcaBank& bank, const std::vector<std::vector<double>>& calib_scores,
                             const DatasetManifest& calib,
                             const std::vector<std::vector<double>>& eval_scores,
                             const DatasetManifest& eval, double margin) {
  if (bank.mode() != BankMode::PerFeature) throw ValidationError("feature report needs a per-feature bank");
  if (calib_scores.size() != calib.rows.size() || eval_scores.size() != eval.rows.size()) {
    throw DataError("score count does not match manifest");
  }
  if (margin < 1.0) throw ValidationError("margin must be >= 1");
  FeatureReport rep;
  rep.margin = margin;
  for (std::size_t m = 0; m < bank.size(); ++m) {
    ChannelReport c;
    c.channel = bank.selected().at(m);
    c.pca_id = bank.model_label(m);
    double good_max = 0.0;
    for (std::size_t i = 0; i < calib.rows.size(); ++i) {
      if (!calib.rows[i].error) good_max = std::max(good_max, calib_scores[i].at(m));
    }
    c.tau = good_max * margin;
    c.degenerate = good_max == 0.0 || bank.model(m).n_components() == 0;
    std::size_t goods = 0;
    std::size_t goods_ok = 0;
    std::size_t norender = 0;
    std::size_t norender_nok = 0;
    for (const ErrorKind k : kAllErrorKinds) c.max_ok_level[std::string(to_string(k))] = -1;
    for (std::size_t i = 0; i < eval.rows.size(); ++i) {
      const auto& row = eval.rows[i];
      const bool ok = eval_scores[i].at(m) < c.tau;
      if (!row.error) {
        ++goods;
        goods_ok += ok;
        continue;
      }
      const std::string kind(to_string(row.error->kind));
      if (ok) c.max_ok_level[kind] = std::max(c.max_ok_level[kind], effective_level(row));
      if (row.error->kind == ErrorKind::NoRender) {
        ++norender;
        norender_nok += !ok;
      }
      if (row.error->kind == ErrorKind::FloodBackground) continue;
      ++c.error_count;
      c.errors_rejected += !ok;
    }
    c.good_pass_rate = goods ? static_cast<double>(goods_ok) / static_cast<double>(goods) : 0.0;
    c.rejects_norender = norender > 0 && norender_nok == norender;
    rep.channels.push_back(std::move(c));
  }
  std::stable_sort(rep.channels.begin(), rep.channels.end(),
                   [](const ChannelReport& a, const ChannelReport& b) {
                     return std::tuple(!a.separates(), b.errors_rejected, a.channel) <
                            std::tuple(!b.separates(), a.errors_rejected, b.channel);
                   });
  return rep;
}

void write_feature_report(const std::filesystem::path& path, const FeatureReport& rep) {
  auto out = open_out(path);
  out << "rank,channel,pca_id,tau,good_pass_rate,errors_rejected,error_count,rejects_norender,"
         "degenerate,separates";
  for (const ErrorKind k : kAllErrorKinds) out << ",max_ok_" << to_string(k);
  out << '\n';
  for (std::size_t i = 0; i < rep.channels.size(); ++i) {
    const auto& c = rep.channels[i];
    out << i << ',' << c.channel << ',' << c.pca_id << ',' << format_number(c.tau) << ','
        << format_number(c.good_pass_rate) << ',' << c.errors_rejected << ',' << c.error_count
        << ',' << c.rejects_norender << ',' << c.degenerate << ',' << c.separates();
    for (const ErrorKind k : kAllErrorKinds) out << ',' << c.max_ok_level.at(std::string(to_string(k)));
    out << '\n';
  }
}

void write_feature_report_svg(const std::filesystem::path& path, const FeatureReport& rep) {
  const int bar = 8;
  const int w = 60 + bar * static_cast<int>(rep.channels.size());
  const int h = 240;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"10\" y=\"14\">rejected error rows per channel (ranked)</text>\n";
  for (std::size_t i = 0; i < rep.channels.size(); ++i) {
    const auto& c = rep.channels[i];
    const double frac = c.error_count ? static_cast<double>(c.errors_rejected) /
                                            static_cast<double>(c.error_count)
                                      : 0.0;
    const double bh = 180.0 * frac;
    s << "<rect x=\"" << 40 + bar * static_cast<int>(i) << "\" y=\"" << 210.0 - bh
      << "\" width=\"" << bar - 1 << "\" height=\"" << bh << "\" fill=\""
      << (c.separates() ? "seagreen" : "lightgray") << "\"><title>" << c.pca_id
      << "</title></rect>\n";
  }
  s << "</svg>\n";
  auto out = open_out(path);
  out << s.str();
}

}  // namespace tmon
