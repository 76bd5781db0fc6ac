#include "tmon/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "tmon/error.hpp"
#include "tmon/parallel.hpp"

namespace tmon {

namespace {

Rgb random_color(Rng& rng) { return {rng.byte(), rng.byte(), rng.byte()}; }

Individual random_individual(std::size_t shape, double fraction, Rng rng) {
  const auto most = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(shape)));
  const auto count = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(most)));
  std::vector<std::uint32_t> idx(shape);
  std::iota(idx.begin(), idx.end(), 0u);
  Individual ind;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(shape - i));
    std::swap(idx[i], idx[j]);
    ind.genes.push_back({idx[i], random_color(rng)});
  }
  std::sort(ind.genes.begin(), ind.genes.end(),
            [](const Gene& a, const Gene& b) { return a.pixel < b.pixel; });
  return ind;
}

std::size_t tournament(std::span<const Individual> pop, std::size_t k, Rng& rng) {
  std::size_t best = static_cast<std::size_t>(rng.uniform_index(pop.size()));
  for (std::size_t i = 1; i < k; ++i) {
    const auto c = static_cast<std::size_t>(rng.uniform_index(pop.size()));
    if (pop[c].fitness < pop[best].fitness || (pop[c].fitness == pop[best].fitness && c < best)) {
      best = c;
    }
  }
  return best;
}

// Every pixel corrupted in either parent is a candidate; shared pixels take
// either parent's color, the others are kept with probability 1/2.
std::vector<Gene> crossover(const std::vector<Gene>& a, const std::vector<Gene>& b, Rng& rng) {
  std::vector<Gene> out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].pixel < b[j].pixel)) {
      if (rng.bernoulli(0.5)) out.push_back(a[i]);
      ++i;
    } else if (i == a.size() || b[j].pixel < a[i].pixel) {
      if (rng.bernoulli(0.5)) out.push_back(b[j]);
      ++j;
    } else {
      out.push_back(rng.bernoulli(0.5) ? a[i] : b[j]);
      ++i;
      ++j;
    }
  }
  return out;
}

std::vector<Gene> mutate(const std::vector<Gene>& genes, std::size_t shape, double p, Rng& rng) {
  std::vector<Gene> out;
  out.reserve(genes.size() + 8);
  std::size_t j = 0;
  for (std::uint32_t i = 0; i < shape; ++i) {
    const bool present = j < genes.size() && genes[j].pixel == i;
    if (!rng.bernoulli(p)) {
      if (present) out.push_back(genes[j]);
    } else if (!present) {
      out.push_back({i, random_color(rng)});
    } else if (rng.bernoulli(0.5)) {
      out.push_back({i, random_color(rng)});
    }
    if (present) ++j;
  }
  return out;
}

GenerationStats stats(std::size_t g, std::span<const Individual> pop, std::size_t best,
                      std::size_t shape) {
  double sum = 0.0;
  for (const auto& ind : pop) sum += ind.fitness;
  return {g, pop[best].fitness, sum / static_cast<double>(pop.size()),
          static_cast<double>(pop[best].genes.size()) / static_cast<double>(shape)};
}

std::size_t best_index(std::span<const Individual> pop) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i) {
    if (pop[i].fitness < pop[best].fitness) best = i;
  }
  return best;
}

}  // namespace

void GaConfig::validate() const {
  if (population < 2) throw ValidationError("population must be >= 2");
  if (generations < 1) throw ValidationError("generations must be >= 1");
  if (tournament < 1) throw ValidationError("tournament size must be >= 1");
  auto rate = [](double r, const char* name) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
  };
  rate(p_mutation, "mutation rate");
  rate(p_crossover, "crossover rate");
  if (!(init_fraction > 0.0 && init_fraction <= 1.0)) {
    throw ValidationError("initial fraction must lie in (0, 1]");
  }
  if (budget && !(*budget > 0.0 && *budget <= 1.0)) {
    throw ValidationError("budget must lie in (0, 1]");
  }
}

std::size_t budget_limit(double budget, std::size_t shape_pixels) {
  return static_cast<std::size_t>(std::floor(budget * static_cast<double>(shape_pixels) + 1e-9));
}

Individual project_budget(Individual ind, double budget, std::size_t shape_pixels, Rng& rng) {
  if (!(budget > 0.0 && budget <= 1.0)) throw ValidationError("budget must lie in (0, 1]");
  const std::size_t limit = budget_limit(budget, shape_pixels);
  if (ind.genes.size() <= limit) return ind;
  // Partial Fisher-Yates picks which genes survive; order is restored after.
  std::vector<std::size_t> idx(ind.genes.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < limit; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  std::vector<Gene> kept;
  kept.reserve(limit);
  for (std::size_t i : idx) kept.push_back(ind.genes[i]);
  ind.genes = std::move(kept);
  ind.fitness = std::numeric_limits<double>::infinity();
  return ind;
}

Image render_individual(const Individual& ind, const Image& background, const TelltaleAsset& asset,
                        Point offset) {
  if (offset.x < 0 || offset.y < 0 || offset.x + asset.width() > background.width() ||
      offset.y + asset.height() > background.height()) {
    throw BoundsError("icon placement leaves the background");
  }
  const auto& shape = asset.shape_pixels();
  Image out = background;
  for (const Gene& g : ind.genes) {
    if (g.pixel >= shape.size()) throw BoundsError("gene outside the icon shape");
    const Point p = shape[g.pixel];
    out.set(offset.x + p.x, offset.y + p.y, Rgba{g.color.r, g.color.g, g.color.b, 255});
  }
  return out;
}

SearchTrace search(const BatchFitness& fitness, const Image& background,
                   const TelltaleAsset& asset, Point offset, const GaConfig& cfg) {
  cfg.validate();
  const std::size_t shape = asset.shape_pixels().size();
  const Rng root(cfg.seed);

  auto evaluate = [&](std::vector<Individual>& pop) {
    std::vector<std::size_t> todo;
    std::vector<Image> images;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (std::isfinite(pop[i].fitness)) continue;
      todo.push_back(i);
      images.push_back(render_individual(pop[i], background, asset, offset));
    }
    if (todo.empty()) return;
    const auto scores = fitness(images);
    if (scores.size() != todo.size()) throw ValidationError("fitness returned a wrong count");
    for (std::size_t i = 0; i < todo.size(); ++i) pop[todo[i]].fitness = scores[i];
  };

  std::vector<Individual> pop;
  pop.reserve(cfg.population);
  {
    const Rng init = root.split(0);
    for (std::size_t i = 0; i < cfg.population; ++i) {
      Rng rng = init.split(i);
      Individual ind = random_individual(shape, cfg.init_fraction, rng.split(0));
      if (cfg.budget) ind = project_budget(std::move(ind), *cfg.budget, shape, rng);
      pop.push_back(std::move(ind));
    }
  }
  evaluate(pop);

  SearchTrace trace;
  std::size_t best = best_index(pop);
  trace.generations.push_back(stats(0, pop, best, shape));
  for (std::size_t g = 1; g < cfg.generations && pop[best].fitness >= 1.0; ++g) {
    const Rng gen = root.split(g);
    std::vector<Individual> next;
    next.reserve(cfg.population);
    next.push_back(pop[best]);
    for (std::size_t c = 1; c < cfg.population; ++c) {
      Rng rng = gen.split(c);
      const Individual& a = pop[tournament(pop, cfg.tournament, rng)];
      Individual child;
      if (rng.bernoulli(cfg.p_crossover)) {
        const Individual& b = pop[tournament(pop, cfg.tournament, rng)];
        child.genes = crossover(a.genes, b.genes, rng);
      } else {
        child.genes = a.genes;
      }
      child.genes = mutate(child.genes, shape, cfg.p_mutation, rng);
      if (cfg.budget) child = project_budget(std::move(child), *cfg.budget, shape, rng);
      if (child.genes == a.genes) child.fitness = a.fitness;
      next.push_back(std::move(child));
    }
    evaluate(next);
    pop = std::move(next);
    best = best_index(pop);
    trace.generations.push_back(stats(g, pop, best, shape));
  }
  trace.success = pop[best].fitness < 1.0;
  trace.best = pop[best];
  trace.best_image = render_individual(trace.best, background, asset, offset);
  return trace;
}

void write_trace(const std::filesystem::path& path, const SearchTrace& trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace " + path.string());
  out << "generation,best_relative_score,mean_relative_score,corrupted_pixel_fraction\n";
  for (const auto& s : trace.generations) {
    out << s.generation << ',' << format_number(s.best) << ',' << format_number(s.mean) << ','
        << format_number(s.corrupted_fraction) << '\n';
  }
}

GaScorer::GaScorer(const Extractor& extractor, const Image& background, ScoringStage stage,
                   std::vector<double> taus, CombinePolicy policy, unsigned threads)
    : input_size_(extractor.input_size),
      delta_(extractor.bank,
             resize_bilinear(background, extractor.input_size, extractor.input_size),
             extractor.norm),
      stage_(std::move(stage)),
      taus_(std::move(taus)),
      policy_(policy),
      threads_(threads) {
  if (taus_.size() != stage_.bank.size()) throw ValidationError("need one tau per PCA model");
  for (double t : taus_) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("tau must be positive");
  }
  if (policy_ == CombinePolicy::FullOnly && stage_.bank.mode() != BankMode::Full) {
    throw ValidationError("FULL_ONLY needs a full PCA bank");
  }
}

std::vector<double> GaScorer::operator()(std::span<const Image> crops) const {
  std::vector<std::optional<FeatureTensor>> slots(crops.size());
  parallel_for(crops.size(), [&](std::size_t i) {
    slots[i] = delta_(resize_bilinear(crops[i], input_size_, input_size_));
  }, threads_);
  std::vector<FeatureTensor> fs;
  fs.reserve(crops.size());
  for (auto& s : slots) fs.push_back(std::move(*s));
  const auto scores = stage_.score_batch(fs, threads_);
  std::vector<double> out;
  out.reserve(scores.size());
  for (const auto& row : scores) {
    double v = row[0] / taus_[0];
    for (std::size_t m = 1; m < row.size(); ++m) {
      const double r = row[m] / taus_[m];
      v = policy_ == CombinePolicy::AnyOk ? std::min(v, r) : std::max(v, r);
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace tmon
