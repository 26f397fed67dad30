#include "vtprune/prune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "vtprune/errors.hpp"
#include "vtprune/rng.hpp"
#include "vtprune/selection.hpp"

namespace vtprune {

void PruneSchedule::validate() const {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (stages[i].prune_after_layer >= total_layers) {
            throw InvalidArgument("PruneSchedule: stage layer " +
                                  std::to_string(stages[i].prune_after_layer) +
                                  " not below total_layers " + std::to_string(total_layers));
        }
        if (i > 0) {
            if (stages[i].prune_after_layer <= stages[i - 1].prune_after_layer) {
                throw InvalidArgument("PruneSchedule: stage layers must strictly increase");
            }
            if (stages[i].keep_count >= stages[i - 1].keep_count) {
                throw InvalidArgument("PruneSchedule: keep counts must strictly decrease");
            }
        }
    }
}

namespace {

void check_attention_block(const Matrix& m, const char* what) {
    check_finite(m, what);
    for (double x : m.data) {
        if (x < 0.0) {
            throw InvalidArgument(std::string(what) + ": negative attention weight");
        }
    }
}

} // namespace

TextPrior text_prior(const Matrix& t2t, std::size_t layer_index) {
    if (t2t.empty()) {
        throw InvalidArgument("text_prior: empty text block");
    }
    if (t2t.rows != t2t.cols) {
        throw DimensionError("text_prior: t2t block must be square");
    }
    check_attention_block(t2t, "text_prior t2t");
    return TextPrior{layer_index, column_sums(t2t)};
}

VisionScores score_vision(const TextPrior& prior, const Matrix& t2v,
                          std::vector<std::size_t> origin_indices) {
    if (prior.weights.size() != t2v.rows) {
        throw DimensionError("score_vision: prior length " + std::to_string(prior.weights.size()) +
                             " vs t2v rows " + std::to_string(t2v.rows));
    }
    if (origin_indices.empty()) {
        origin_indices.resize(t2v.cols);
        for (std::size_t i = 0; i < t2v.cols; ++i) {
            origin_indices[i] = i;
        }
    } else if (origin_indices.size() != t2v.cols) {
        throw DimensionError("score_vision: origin_indices length vs t2v columns");
    }
    if (!std::is_sorted(origin_indices.begin(), origin_indices.end()) ||
        std::adjacent_find(origin_indices.begin(), origin_indices.end()) != origin_indices.end()) {
        throw InvalidArgument("score_vision: origin_indices must be sorted and unique");
    }
    if (t2v.cols > 0) {
        check_attention_block(t2v, "score_vision t2v");
    }
    return VisionScores{prior.layer_index, matvec_left(prior.weights, t2v),
                        std::move(origin_indices)};
}

RetainedSet top_k_retain(const VisionScores& scores, std::size_t k) {
    if (k > scores.scores.size()) {
        throw InvalidArgument("top_k_retain: k=" + std::to_string(k) + " exceeds " +
                              std::to_string(scores.scores.size()) + " live vision tokens");
    }
    RetainedSet out;
    out.layer_index = scores.layer_index;
    // Columns are ordered by original position, so the selector's index tie
    // rule is the original-position tie rule.
    for (std::size_t col : top_indices_by_score(scores.scores, k)) {
        out.kept.push_back(scores.origin_indices[col]);
    }
    return out;
}

LayerHook make_hook(const PruneSchedule& schedule, std::vector<RetainedSet>* log) {
    schedule.validate();
    return [schedule, log](const LayerAttention& layer) -> std::optional<std::vector<std::size_t>> {
        const auto stage = std::find_if(
            schedule.stages.begin(), schedule.stages.end(),
            [&](const ScheduleStage& s) { return s.prune_after_layer == layer.layer_index; });
        if (stage == schedule.stages.end()) {
            return std::nullopt;
        }
        const TextPrior prior = text_prior(layer.t2t, layer.layer_index);
        const VisionScores scores = score_vision(prior, layer.t2v, layer.vision_origins);
        const std::size_t k = std::min(stage->keep_count, scores.scores.size());
        RetainedSet retained = top_k_retain(scores, k);
        if (log) {
            log->push_back(retained);
        }
        return std::move(retained.kept);
    };
}

std::vector<std::size_t> schedule_timeline(const PruneSchedule& schedule,
                                           std::size_t initial_vision) {
    schedule.validate();
    std::vector<std::size_t> counts(schedule.total_layers);
    std::size_t current = initial_vision;
    auto stage = schedule.stages.begin();
    for (std::size_t layer = 0; layer < schedule.total_layers; ++layer) {
        counts[layer] = current;
        if (stage != schedule.stages.end() && stage->prune_after_layer == layer) {
            current = std::min(stage->keep_count, current);
            ++stage;
        }
    }
    return counts;
}

double timeline_average(const PruneSchedule& schedule, std::size_t initial_vision) {
    const auto counts = schedule_timeline(schedule, initial_vision);
    if (counts.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t c : counts) {
        sum += static_cast<double>(c);
    }
    return sum / static_cast<double>(counts.size());
}

double post_prune_average(const PruneSchedule& schedule, std::size_t initial_vision) {
    if (schedule.empty()) {
        return static_cast<double>(initial_vision);
    }
    const auto counts = schedule_timeline(schedule, initial_vision);
    const std::size_t first = schedule.stages.front().prune_after_layer + 1;
    if (first >= counts.size()) {
        throw InvalidArgument("post_prune_average: no layers follow the first stage");
    }
    double sum = 0.0;
    for (std::size_t layer = first; layer < counts.size(); ++layer) {
        sum += static_cast<double>(counts[layer]);
    }
    return sum / static_cast<double>(counts.size() - first);
}

std::string SolvePolicy::name() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "final%zu-ratio%g-%s", final_keep, stage_ratio,
                  semantics == BudgetSemantics::post_prune_average ? "postprune" : "fulltimeline");
    return buf;
}

namespace {

struct BudgetEquation {
    // realized budget = (fixed + sum_i weight_i * k_i) / denom
    double fixed = 0.0;
    std::vector<double> weights; // layer spans per stage
    double denom = 1.0;

    double realized(const std::vector<std::size_t>& keeps) const {
        double sum = fixed;
        for (std::size_t i = 0; i < keeps.size(); ++i) {
            sum += weights[i] * static_cast<double>(keeps[i]);
        }
        return sum / denom;
    }
};

BudgetEquation budget_equation(const std::vector<std::size_t>& stage_layers,
                               std::size_t total_layers, std::size_t initial_vision,
                               BudgetSemantics semantics) {
    BudgetEquation eq;
    const std::size_t s = stage_layers.size();
    eq.weights.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        const std::size_t next = (i + 1 < s) ? stage_layers[i + 1] : total_layers - 1;
        eq.weights[i] = static_cast<double>(next - stage_layers[i]);
    }
    if (semantics == BudgetSemantics::full_timeline_average) {
        eq.fixed = static_cast<double>((stage_layers.front() + 1) * initial_vision);
        eq.denom = static_cast<double>(total_layers);
    } else {
        eq.fixed = 0.0;
        eq.denom = static_cast<double>(total_layers - 1 - stage_layers.front());
    }
    return eq;
}

} // namespace

PruneSchedule solve_schedule(double budget, std::size_t initial_vision,
                             std::size_t total_layers,
                             const std::vector<std::size_t>& stage_layers,
                             const SolvePolicy& policy) {
    if (total_layers < 1) {
        throw InvalidArgument("solve_schedule: total_layers must be >= 1");
    }
    if (!std::isfinite(budget) || budget < 0.0) {
        throw InvalidArgument("solve_schedule: budget must be a non-negative number");
    }
    for (std::size_t i = 0; i < stage_layers.size(); ++i) {
        if (stage_layers[i] >= total_layers) {
            throw InvalidArgument("solve_schedule: stage layer " + std::to_string(stage_layers[i]) +
                                  " not below total_layers " + std::to_string(total_layers));
        }
        if (i > 0 && stage_layers[i] <= stage_layers[i - 1]) {
            throw InvalidArgument("solve_schedule: stage layers must strictly increase");
        }
    }

    PruneSchedule schedule;
    schedule.total_layers = total_layers;
    if (stage_layers.empty()) {
        const auto v0 = static_cast<double>(initial_vision);
        if (std::abs(budget - v0) > 1e-9) {
            throw InfeasibleBudgetError(
                "solve_schedule: no stages; budget must equal the initial vision count", v0, v0);
        }
        return schedule;
    }
    if (stage_layers.back() + 1 >= total_layers) {
        throw InvalidArgument("solve_schedule: last stage must leave at least one following layer");
    }

    const std::size_t s = stage_layers.size();
    const BudgetEquation eq =
        budget_equation(stage_layers, total_layers, initial_vision, policy.semantics);
    const auto fkeep = static_cast<double>(policy.final_keep);

    // Keep counts follow keep_i = ratio^(s-2-i) * x, where x is the
    // second-to-last stage's count and the last stage is pinned to
    // final_keep; a lone stage is solved directly.
    double ratio_pow_sum = 0.0; // sum of weight_i * ratio^(s-2-i) over free stages
    for (std::size_t i = 0; i + 1 < s; ++i) {
        ratio_pow_sum += eq.weights[i] * std::pow(policy.stage_ratio, static_cast<double>(s - 2 - i));
    }

    double x = 0.0;
    double x_min = 0.0;
    double x_max = 0.0;
    if (s == 1) {
        x = (budget * eq.denom - eq.fixed) / eq.weights[0];
        x_min = 0.0;
        x_max = static_cast<double>(initial_vision);
    } else {
        if (policy.stage_ratio <= 1.0) {
            throw InvalidArgument("solve_schedule: stage_ratio must exceed 1 for multi-stage schedules");
        }
        x = (budget * eq.denom - eq.fixed - eq.weights[s - 1] * fkeep) / ratio_pow_sum;
        x_min = fkeep + 1.0;
        x_max = static_cast<double>(initial_vision) /
                std::pow(policy.stage_ratio, static_cast<double>(s - 2));
    }

    if (x < x_min - 1e-9 || x > x_max + 1e-9) {
        auto budget_at = [&](double xv) {
            double total = eq.fixed;
            if (s == 1) {
                total += eq.weights[0] * xv;
            } else {
                total += ratio_pow_sum * xv + eq.weights[s - 1] * fkeep;
            }
            return total / eq.denom;
        };
        throw InfeasibleBudgetError(
            "solve_schedule: budget " + std::to_string(budget) +
                " outside the feasible range for this policy and stage set",
            budget_at(x_min), budget_at(x_max));
    }

    schedule.stages.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        schedule.stages[i].prune_after_layer = stage_layers[i];
        if (s >= 2 && i == s - 1) {
            schedule.stages[i].keep_count = policy.final_keep;
        } else {
            const double ideal =
                s == 1 ? x : x * std::pow(policy.stage_ratio, static_cast<double>(s - 2 - i));
            schedule.stages[i].keep_count = static_cast<std::size_t>(std::llround(ideal));
        }
    }
    schedule.validate();

    const double realized = eq.realized([&] {
        std::vector<std::size_t> keeps;
        for (const auto& st : schedule.stages) {
            keeps.push_back(st.keep_count);
        }
        return keeps;
    }());
    if (std::abs(realized - budget) > 1.0) {
        throw NumericError("solve_schedule: rounded schedule misses the budget by more than one token");
    }
    return schedule;
}

PruneSchedule uniform_baseline(std::size_t start, std::size_t stride,
                               std::size_t total_layers, double budget,
                               std::size_t initial_vision, const SolvePolicy& policy) {
    if (stride < 1) {
        throw InvalidArgument("uniform_baseline: stride must be >= 1");
    }
    std::vector<std::size_t> layers;
    for (std::size_t layer = start; layer + 1 < total_layers; layer += stride) {
        layers.push_back(layer);
    }
    if (layers.empty()) {
        throw InvalidArgument("uniform_baseline: no stage layers below total_layers");
    }
    return solve_schedule(budget, initial_vision, total_layers, layers, policy);
}

PruneSchedule single_baseline(std::size_t layer, std::size_t total_layers, double budget,
                              std::size_t initial_vision, const SolvePolicy& policy) {
    return solve_schedule(budget, initial_vision, total_layers, {layer}, policy);
}

RandomBaseline random_baseline(std::size_t stage_count, std::size_t total_layers,
                               std::uint64_t seed, double budget,
                               std::size_t initial_vision, const SolvePolicy& policy) {
    if (total_layers < 3 || stage_count == 0 || stage_count > total_layers - 2) {
        throw InvalidArgument("random_baseline: need 1 <= stage_count <= total_layers - 2");
    }
    // Candidate stage layers 1 .. total_layers-2: pruning before the first
    // layer has no attention to rank with, and pruning after the last layer
    // changes nothing.
    std::vector<std::size_t> pool;
    for (std::size_t layer = 1; layer + 1 < total_layers; ++layer) {
        pool.push_back(layer);
    }
    SeededRng rng(seed);
    for (std::size_t i = 0; i < stage_count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    RandomBaseline out;
    out.drawn_layers.assign(pool.begin(), pool.begin() + stage_count);
    std::sort(out.drawn_layers.begin(), out.drawn_layers.end());
    out.schedule = solve_schedule(budget, initial_vision, total_layers, out.drawn_layers, policy);
    return out;
}

} // namespace vtprune
