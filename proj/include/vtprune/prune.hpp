#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtprune/linalg.hpp"
#include "vtprune/model.hpp"

namespace vtprune {

/// Per-text-token importance at one layer: raw column sums of the causally
/// masked text-to-text block.
struct TextPrior {
    std::size_t layer_index = 0;
    Vector weights; // length text_count, all >= 0
};

/// Prior-weighted attention mass collected by each live vision token.
struct VisionScores {
    std::size_t layer_index = 0;
    Vector scores;                            // length = live vision count
    std::vector<std::size_t> origin_indices;  // original positions, sorted
};

struct ScheduleStage {
    std::size_t prune_after_layer = 0;
    std::size_t keep_count = 0;
};

/// Ordered pruning stages. Stage layers strictly increase and keep counts
/// strictly decrease; tokens dropped at one stage never return.
struct PruneSchedule {
    std::vector<ScheduleStage> stages;
    std::size_t total_layers = 0;

    bool empty() const { return stages.empty(); }
    void validate() const;
};

struct RetainedSet {
    std::size_t layer_index = 0;
    std::vector<std::size_t> kept; // original vision positions, sorted
};

TextPrior text_prior(const Matrix& t2t, std::size_t layer_index = 0);

/// s[j] = sum_i w[i] * t2v(i, j). origin_indices defaults to 0..V-1 when
/// empty; otherwise it must have one entry per t2v column.
VisionScores score_vision(const TextPrior& prior, const Matrix& t2v,
                          std::vector<std::size_t> origin_indices = {});

/// The k highest-scoring tokens, ties broken toward the smaller original
/// index, reported sorted ascending by original position.
RetainedSet top_k_retain(const VisionScores& scores, std::size_t k);

/// Composes text_prior -> score_vision -> top_k_retain at each stage layer.
/// When `log` is non-null, every stage decision is appended to it.
LayerHook make_hook(const PruneSchedule& schedule, std::vector<RetainedSet>* log = nullptr);

/// Vision-token count entering each layer under the schedule (length = total_layers).
std::vector<std::size_t> schedule_timeline(const PruneSchedule& schedule, std::size_t initial_vision);

/// Mean of schedule_timeline over all layers.
double timeline_average(const PruneSchedule& schedule, std::size_t initial_vision);

/// Mean vision-token count over the layers after the first pruning stage.
/// Equals initial_vision for an empty schedule.
double post_prune_average(const PruneSchedule& schedule, std::size_t initial_vision);

/// How solve_schedule interprets the requested budget.
enum class BudgetSemantics {
    post_prune_average,    // average over layers after the first stage
    full_timeline_average, // average over all layers, pre-prune ones included
};

struct SolvePolicy {
    std::size_t final_keep = 8; // keep count of the last stage (two or more stages)
    double stage_ratio = 2.0;   // each earlier stage keeps ratio x the next one
    BudgetSemantics semantics = BudgetSemantics::post_prune_average;

    std::string name() const;
};

/// Solves integer keep counts whose layer-weighted average (under the policy
/// semantics) lands within +-1 token of the budget. The last stage is pinned
/// to final_keep and earlier stages follow the geometric ratio; a single
/// stage is solved directly. Throws InfeasibleBudgetError with the feasible
/// range when the budget cannot be met.
PruneSchedule solve_schedule(double budget, std::size_t initial_vision,
                             std::size_t total_layers,
                             const std::vector<std::size_t>& stage_layers,
                             const SolvePolicy& policy = {});

/// Comparison schedules: stages at start, start+stride, ... while < total_layers.
PruneSchedule uniform_baseline(std::size_t start, std::size_t stride,
                               std::size_t total_layers, double budget,
                               std::size_t initial_vision, const SolvePolicy& policy = {});

PruneSchedule single_baseline(std::size_t layer, std::size_t total_layers, double budget,
                              std::size_t initial_vision, const SolvePolicy& policy = {});

struct RandomBaseline {
    PruneSchedule schedule;
    std::vector<std::size_t> drawn_layers; // logged for the run report
};

/// Draws stage_count distinct pruning layers from a seeded generator.
RandomBaseline random_baseline(std::size_t stage_count, std::size_t total_layers,
                               std::uint64_t seed, double budget,
                               std::size_t initial_vision, const SolvePolicy& policy = {});

} // namespace vtprune
