#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vtprune/errors.hpp"
#include "vtprune/model.hpp"
#include "vtprune/prune.hpp"
#include "vtprune/rng.hpp"

using namespace vtprune;

namespace {

// Exhaustive oracle: among all k-subsets, the one with maximal total score;
// ties resolve to the lexicographically smallest sorted index set. Scores
// are drawn from a dyadic grid so subset sums compare exactly.
std::vector<std::size_t> best_subset_oracle(const Vector& scores, std::size_t k) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> best;
    double best_sum = -1.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcountll(mask)) != k) {
            continue;
        }
        std::vector<std::size_t> subset;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (std::uint64_t{1} << i)) {
                subset.push_back(i);
                sum += scores[i];
            }
        }
        if (sum > best_sum || (sum == best_sum && subset < best)) {
            best_sum = sum;
            best = subset;
        }
    }
    return best;
}

Matrix causal_stochastic(SeededRng& rng, std::size_t n) {
    Matrix logits(n, n);
    for (double& x : logits.data) {
        x = rng.uniform(-2.0, 2.0);
    }
    return softmax_rows(logits, MaskKind::causal);
}

} // namespace

TEST_CASE("text prior of a single token is one") {
    const TextPrior prior = text_prior(Matrix::from_rows({{1.0}}));
    CHECK(prior.weights.size() == 1);
    CHECK(prior.weights[0] == 1.0);
}

TEST_CASE("text prior sums columns of the causal block") {
    const TextPrior prior = text_prior(Matrix::from_rows({{1.0, 0.0}, {0.4, 0.6}}));
    CHECK(prior.weights[0] == doctest::Approx(1.4));
    CHECK(prior.weights[1] == doctest::Approx(0.6));

    const TextPrior identity = text_prior(Matrix::identity(5));
    for (double w : identity.weights) {
        CHECK(w == 1.0);
    }
    CHECK_THROWS_AS(text_prior(Matrix()), InvalidArgument);
}

TEST_CASE("prior mass of a causal row-stochastic block equals the row count") {
    SeededRng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t t = 1 + rng.next_below(12);
        const TextPrior prior = text_prior(causal_stochastic(rng, t));
        double total = 0.0;
        for (double w : prior.weights) {
            total += w;
        }
        CHECK(std::abs(total - static_cast<double>(t)) < 1e-9);
    }
}

TEST_CASE("score_vision reduces to column sums under a uniform prior") {
    SeededRng rng(19);
    Matrix t2v(3, 5);
    for (double& x : t2v.data) {
        x = rng.uniform(0.0, 1.0);
    }
    const VisionScores scores = score_vision(TextPrior{0, {1.0, 1.0, 1.0}}, t2v);
    const Vector sums = column_sums(t2v);
    for (std::size_t j = 0; j < 5; ++j) {
        CHECK(scores.scores[j] == doctest::Approx(sums[j]).epsilon(1e-12));
    }
}

TEST_CASE("score_vision known value and edge cases") {
    const Matrix t2v = Matrix::from_rows({{0.1, 0.9}, {0.5, 0.5}});
    const VisionScores scores = score_vision(TextPrior{0, {2.0, 0.0}}, t2v);
    CHECK(scores.scores[0] == doctest::Approx(0.2));
    CHECK(scores.scores[1] == doctest::Approx(1.8));

    const VisionScores zeros = score_vision(TextPrior{0, {1.0, 1.0}}, Matrix(2, 3, 0.0));
    for (double s : zeros.scores) {
        CHECK(s == 0.0);
    }

    CHECK_THROWS_AS(score_vision(TextPrior{0, {1.0}}, t2v), DimensionError);
    CHECK_THROWS_AS(score_vision(TextPrior{0, {1.0, 1.0}}, t2v, {3, 1}), InvalidArgument);
}

TEST_CASE("top_k_retain picks the highest scores with the documented tie rule") {
    VisionScores scores{0, {0.1, 0.9, 0.5}, {0, 1, 2}};
    CHECK(top_k_retain(scores, 2).kept == std::vector<std::size_t>{1, 2});
    CHECK(top_k_retain(scores, 3).kept == std::vector<std::size_t>{0, 1, 2});
    CHECK(top_k_retain(scores, 0).kept.empty());

    VisionScores tied{0, {0.5, 0.5}, {0, 1}};
    CHECK(top_k_retain(tied, 1).kept == std::vector<std::size_t>{0});

    CHECK_THROWS_AS(top_k_retain(tied, 3), InvalidArgument);
}

TEST_CASE("top_k_retain matches exhaustive subset enumeration") {
    SeededRng rng(29);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t v = 1 + rng.next_below(12);
        Vector scores(v);
        for (double& s : scores) {
            // Dyadic grid with deliberate ties.
            s = static_cast<double>(rng.next_below(16)) / 16.0;
        }
        const std::size_t k = rng.next_below(v + 1);
        VisionScores vs{0, scores, {}};
        vs.origin_indices.resize(v);
        for (std::size_t i = 0; i < v; ++i) {
            vs.origin_indices[i] = i;
        }
        CHECK(top_k_retain(vs, k).kept == best_subset_oracle(scores, k));
    }
}

TEST_CASE("retained set is invariant under positive scaling of the prior") {
    SeededRng rng(37);
    Matrix t2v(4, 9);
    for (double& x : t2v.data) {
        x = rng.uniform(0.0, 1.0);
    }
    TextPrior prior{0, {0.3, 1.2, 0.8, 0.7}};
    TextPrior scaled{0, prior.weights};
    for (double& w : scaled.weights) {
        w *= 5.0;
    }
    const VisionScores a = score_vision(prior, t2v);
    const VisionScores b = score_vision(scaled, t2v);
    for (std::size_t j = 0; j < 9; ++j) {
        CHECK(b.scores[j] == doctest::Approx(5.0 * a.scores[j]).epsilon(1e-12));
    }
    CHECK(top_k_retain(a, 4).kept == top_k_retain(b, 4).kept);
}

TEST_CASE("uniform prior degenerates to raw column-sum voting") {
    SeededRng rng(41);
    Matrix t2v(5, 10);
    for (double& x : t2v.data) {
        x = rng.uniform(0.0, 1.0);
    }
    const VisionScores weighted = score_vision(TextPrior{0, Vector(5, 1.0)}, t2v);
    VisionScores unweighted{0, column_sums(t2v), weighted.origin_indices};
    CHECK(top_k_retain(weighted, 4).kept == top_k_retain(unweighted, 4).kept);
}

TEST_CASE("schedule validation rejects malformed stage lists") {
    CHECK_THROWS_AS((PruneSchedule{{{1, 10}, {1, 5}}, 8}.validate()), InvalidArgument);
    CHECK_THROWS_AS((PruneSchedule{{{1, 10}, {3, 10}}, 8}.validate()), InvalidArgument);
    CHECK_THROWS_AS((PruneSchedule{{{9, 10}}, 8}.validate()), InvalidArgument);
    CHECK_NOTHROW((PruneSchedule{{{1, 10}, {3, 5}}, 8}.validate()));
}

TEST_CASE("schedule timeline matches the worked example") {
    const PruneSchedule schedule{{{1, 58}, {10, 29}, {20, 8}}, 32};
    const auto counts = schedule_timeline(schedule, 576);
    CHECK(counts[0] == 576);
    CHECK(counts[1] == 576);
    CHECK(counts[2] == 58);
    CHECK(counts[10] == 58);
    CHECK(counts[11] == 29);
    CHECK(counts[20] == 29);
    CHECK(counts[21] == 8);
    CHECK(counts[31] == 8);
    CHECK(timeline_average(schedule, 576) == doctest::Approx(64.125));
    CHECK(post_prune_average(schedule, 576) == doctest::Approx(30.0));
}

TEST_CASE("make_hook prunes at stage layers and logs nested retained sets") {
    ModelConfig cfg{4, 8, 16, 2, 13};
    const Model model = init_model(cfg);
    const Sample sample = make_sample(cfg, SampleSpec{10, 3, 21});

    const PruneSchedule schedule{{{0, 6}, {2, 3}}, 4};
    std::vector<RetainedSet> log;
    const PrefillResult result =
        prefill(model, sample.seq, make_hook(schedule, &log), "s");

    CHECK(result.seq.vision_count == 3);
    CHECK(result.seq.text_count == 3);
    REQUIRE(log.size() == 2);
    CHECK(log[0].layer_index == 0);
    CHECK(log[0].kept.size() == 6);
    CHECK(log[1].kept.size() == 3);
    CHECK(std::includes(log[0].kept.begin(), log[0].kept.end(),
                        log[1].kept.begin(), log[1].kept.end()));
    for (const LayerAttention& layer : result.maps.per_layer) {
        if (layer.layer_index >= 3) {
            CHECK(layer.t2v.cols == 3);
        } else if (layer.layer_index >= 1) {
            CHECK(layer.t2v.cols == 6);
        }
    }
}

TEST_CASE("an empty schedule is an identity hook") {
    ModelConfig cfg{2, 8, 16, 2, 13};
    const Model model = init_model(cfg);
    const Sample sample = make_sample(cfg, SampleSpec{5, 2, 22});
    const PrefillResult result =
        prefill(model, sample.seq, make_hook(PruneSchedule{{}, 2}), "s");
    CHECK(result.seq.vision_count == 5);
}

TEST_CASE("keep count zero removes all vision tokens") {
    ModelConfig cfg{3, 8, 16, 2, 13};
    const Model model = init_model(cfg);
    const Sample sample = make_sample(cfg, SampleSpec{5, 2, 23});
    const PrefillResult result =
        prefill(model, sample.seq, make_hook(PruneSchedule{{{1, 0}}, 3}), "s");
    CHECK(result.seq.vision_count == 0);
    CHECK(result.seq.text_count == 2);
    CHECK(result.maps.per_layer.back().t2v.cols == 0);
}

TEST_CASE("solve_schedule default semantics solves the reference budgets") {
    const PruneSchedule b64 = solve_schedule(64.0, 576, 32, {1, 10, 20});
    REQUIRE(b64.stages.size() == 3);
    CHECK(b64.stages[0].keep_count == 131);
    CHECK(b64.stages[1].keep_count == 65);
    CHECK(b64.stages[2].keep_count == 8);
    CHECK(std::abs(post_prune_average(b64, 576) - 64.0) <= 1.0);

    const PruneSchedule b128 = solve_schedule(128.0, 576, 32, {1, 10, 20});
    CHECK(b128.stages[0].keep_count == 268);
    CHECK(b128.stages[1].keep_count == 134);
    CHECK(b128.stages[2].keep_count == 8);
    CHECK(std::abs(post_prune_average(b128, 576) - 128.0) <= 1.0);
}

TEST_CASE("solve_schedule under full-timeline averaging reproduces (58, 29, 8)") {
    SolvePolicy policy;
    policy.semantics = BudgetSemantics::full_timeline_average;
    const PruneSchedule schedule = solve_schedule(64.0, 576, 32, {1, 10, 20}, policy);
    REQUIRE(schedule.stages.size() == 3);
    CHECK(schedule.stages[0].keep_count == 58);
    CHECK(schedule.stages[1].keep_count == 29);
    CHECK(schedule.stages[2].keep_count == 8);
    CHECK(timeline_average(schedule, 576) == doctest::Approx(64.125));
}

TEST_CASE("solve_schedule with no stages requires budget == initial vision") {
    const PruneSchedule schedule = solve_schedule(576.0, 576, 32, {});
    CHECK(schedule.empty());
    CHECK(post_prune_average(schedule, 576) == 576.0);
    CHECK_THROWS_AS(solve_schedule(64.0, 576, 32, {}), InfeasibleBudgetError);
}

TEST_CASE("solve_schedule reports the feasible range on infeasible budgets") {
    SolvePolicy policy;
    policy.semantics = BudgetSemantics::full_timeline_average;
    try {
        solve_schedule(32.0, 576, 32, {1, 10, 20}, policy);
        FAIL("expected InfeasibleBudgetError");
    } catch (const InfeasibleBudgetError& e) {
        CHECK(e.feasible_min > 32.0);
        CHECK(e.feasible_max > e.feasible_min);
    }
    CHECK_THROWS_AS(solve_schedule(2.0, 576, 32, {1, 10, 20}), InfeasibleBudgetError);
    CHECK_THROWS_AS(solve_schedule(500.0, 576, 32, {1, 10, 20}), InfeasibleBudgetError);
}

TEST_CASE("single-stage budgets are solved directly") {
    const PruneSchedule schedule = solve_schedule(128.0, 576, 32, {1});
    REQUIRE(schedule.stages.size() == 1);
    CHECK(schedule.stages[0].keep_count == 128);
    CHECK(post_prune_average(schedule, 576) == doctest::Approx(128.0));
}

TEST_CASE("uniform baseline lays stages at the stride") {
    const PruneSchedule schedule = uniform_baseline(0, 9, 32, 128.0, 576);
    REQUIRE(schedule.stages.size() == 4);
    CHECK(schedule.stages[0].prune_after_layer == 0);
    CHECK(schedule.stages[1].prune_after_layer == 9);
    CHECK(schedule.stages[2].prune_after_layer == 18);
    CHECK(schedule.stages[3].prune_after_layer == 27);
    CHECK(std::abs(post_prune_average(schedule, 576) - 128.0) <= 1.0);
}

TEST_CASE("single baseline has one stage") {
    const PruneSchedule schedule = single_baseline(1, 32, 64.0, 576);
    CHECK(schedule.stages.size() == 1);
    CHECK(schedule.stages[0].prune_after_layer == 1);
}

TEST_CASE("random baseline draws are reproducible and in range") {
    const RandomBaseline a = random_baseline(3, 32, 99, 64.0, 576);
    const RandomBaseline b = random_baseline(3, 32, 99, 64.0, 576);
    CHECK(a.drawn_layers == b.drawn_layers);
    CHECK(a.drawn_layers.size() == 3);
    CHECK(std::is_sorted(a.drawn_layers.begin(), a.drawn_layers.end()));
    CHECK(a.drawn_layers.front() >= 1);
    CHECK(a.drawn_layers.back() <= 30);
    CHECK(std::adjacent_find(a.drawn_layers.begin(), a.drawn_layers.end()) ==
          a.drawn_layers.end());

    const RandomBaseline c = random_baseline(3, 32, 100, 64.0, 576);
    CHECK(a.drawn_layers != c.drawn_layers);
}
