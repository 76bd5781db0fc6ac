#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "tmon/imaging.hpp"
#include "tmon/pipeline.hpp"
#include "tmon/rng.hpp"
#include "tmon/scoring.hpp"

namespace tmon {

struct GaConfig {
  std::size_t population = 100;
  std::size_t generations = 300;
  std::size_t tournament = 3;
  /// Per shape pixel and child: add a corruption, or remove/recolor one.
  double p_mutation = 0.02;
  double p_crossover = 0.9;
  /// Maximum corrupted fraction of the shape pixels; unlimited when empty.
  std::optional<double> budget;
  /// Upper bound on the corrupted fraction of the initial population.
  double init_fraction = 0.05;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const;
};

/// One corrupted pixel: index into TelltaleAsset::shape_pixels() and color.
struct Gene {
  std::uint32_t pixel = 0;
  Rgb color;
  friend bool operator==(const Gene&, const Gene&) = default;
};

struct Individual {
  /// Sorted by pixel, unique.
  std::vector<Gene> genes;
  double fitness = std::numeric_limits<double>::infinity();
};

/// Largest allowed gene count for a budget.
std::size_t budget_limit(double budget, std::size_t shape_pixels);

/// Removes uniformly chosen genes until at most budget * shape_pixels remain.
Individual project_budget(Individual ind, double budget, std::size_t shape_pixels, Rng& rng);

/// Background with the corrupted pixels written at icon-shape coordinates
/// (icon placed at `offset`). The clean icon is not drawn.
Image render_individual(const Individual& ind, const Image& background, const TelltaleAsset& asset,
                        Point offset);

struct GenerationStats {
  std::size_t generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double corrupted_fraction = 0.0;
};

struct SearchTrace {
  std::vector<GenerationStats> generations;
  /// True when some individual scored below its threshold.
  bool success = false;
  Individual best;
  Image best_image{1, 1};
};

/// Relative scores (score / tau) of a batch of rendered images.
using BatchFitness = std::function<std::vector<double>(std::span<const Image>)>;

/// Minimizes the relative score with tournament selection, uniform
/// crossover, per-slot mutation, budget projection and elitism of one.
SearchTrace search(const BatchFitness& fitness, const Image& background,
                   const TelltaleAsset& asset, Point offset, const GaConfig& cfg);

/// CSV columns: generation,best_relative_score,mean_relative_score,
/// corrupted_pixel_fraction
void write_trace(const std::filesystem::path& path, const SearchTrace& trace);

/// Monitor scoring of crops that differ from one fixed background crop.
/// Per-model relative scores are reduced by the combine policy: ALL_OK
/// accepts only when every model does (max ratio), ANY_OK when one does
/// (min ratio), FULL_ONLY uses the "full" model.
class GaScorer {
 public:
  GaScorer(const Extractor& extractor, const Image& background, ScoringStage stage,
           std::vector<double> taus, CombinePolicy policy, unsigned threads = 0);

  [[nodiscard]] std::vector<double> operator()(std::span<const Image> crops) const;

 private:
  int input_size_;
  DeltaExtractor delta_;
  ScoringStage stage_;
  std::vector<double> taus_;
  CombinePolicy policy_;
  unsigned threads_;
};

}  // namespace tmon
