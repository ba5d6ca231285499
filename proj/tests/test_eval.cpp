#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "sobd/matching.hpp"
#include "sobd/pr_eval.hpp"
#include "sobd/random.hpp"

using namespace sobd;

namespace {

BoundaryMap from_pixels(int w, int h, const std::vector<std::pair<int, int>>& px,
                        float value = 1.0f) {
    BoundaryMap m(w, h, 0.0f);
    for (const auto& [x, y] : px) m.set(x, y, value);
    return m;
}

std::vector<std::pair<int, int>> pixels_of(const BoundaryMap& m) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y) > 0.5f) out.emplace_back(x, y);
    return out;
}

// Independent maximum-matching oracle: Kuhn's augmenting paths over a
// brute-force adjacency, no shared code with the production matcher.
int kuhn_oracle(const BoundaryMap& pred, const BoundaryMap& gt, double tol) {
    const auto pp = pixels_of(pred);
    const auto gp = pixels_of(gt);
    std::vector<std::vector<int>> adj(pp.size());
    for (std::size_t i = 0; i < pp.size(); ++i)
        for (std::size_t j = 0; j < gp.size(); ++j) {
            const double dx = pp[i].first - gp[j].first;
            const double dy = pp[i].second - gp[j].second;
            if (dx * dx + dy * dy <= tol * tol) adj[i].push_back(static_cast<int>(j));
        }
    std::vector<int> match_gt(gp.size(), -1);
    std::vector<char> used;
    std::function<bool(int)> try_augment = [&](int u) {
        for (int v : adj[u]) {
            if (used[v]) continue;
            used[v] = 1;
            if (match_gt[v] < 0 || try_augment(match_gt[v])) {
                match_gt[v] = u;
                return true;
            }
        }
        return false;
    };
    int matched = 0;
    for (std::size_t u = 0; u < pp.size(); ++u) {
        used.assign(gp.size(), 0);
        if (try_augment(static_cast<int>(u))) ++matched;
    }
    return matched;
}

BoundaryMap random_binary(int w, int h, double density, Rng& rng) {
    BoundaryMap m(w, h, 0.0f);
    for (float& v : m.values) v = rng.uniform() < density ? 1.0f : 0.0f;
    return m;
}

void check_counts(const MatchResult& r, const BoundaryMap& pred, const BoundaryMap& gt) {
    REQUIRE(r.true_positives + r.false_positives ==
            static_cast<std::int64_t>(count_positive(pred)));
    REQUIRE(r.true_positives + r.false_negatives ==
            static_cast<std::int64_t>(count_positive(gt)));
    REQUIRE(r.true_positives == static_cast<std::int64_t>(r.pairs.size()));
}

}  // namespace

TEST_CASE("identical maps match perfectly") {
    const BoundaryMap m = from_pixels(10, 8, {{1, 1}, {4, 2}, {7, 5}, {2, 6}});
    const MatchResult r = match_boundaries(m, m, 1.0);
    CHECK(r.true_positives == 4);
    CHECK(r.false_positives == 0);
    CHECK(r.false_negatives == 0);
    for (const auto& [p, g] : r.pairs) CHECK(p == g);
}

TEST_CASE("one-pixel shift matches fully within tolerance 2") {
    std::vector<std::pair<int, int>> gt_px, pred_px;
    for (int y = 1; y < 7; ++y) {
        gt_px.emplace_back(3, y);
        pred_px.emplace_back(4, y);
    }
    const BoundaryMap gt = from_pixels(10, 8, gt_px);
    const BoundaryMap pred = from_pixels(10, 8, pred_px);
    const MatchResult r = match_boundaries(pred, gt, 2.0);
    CHECK(r.true_positives == 6);
    CHECK(r.false_positives == 0);
    CHECK(r.false_negatives == 0);
}

TEST_CASE("empty prediction yields only false negatives") {
    const BoundaryMap pred(9, 9, 0.0f);
    const BoundaryMap gt = from_pixels(9, 9, {{0, 0}, {2, 2}, {4, 4}, {6, 6}, {8, 8},
                                              {0, 8}, {8, 0}});
    const MatchResult r = match_boundaries(pred, gt, 2.0);
    CHECK(r.true_positives == 0);
    CHECK(r.false_positives == 0);
    CHECK(r.false_negatives == 7);
    CHECK(r.pairs.empty());
}

TEST_CASE("matched pairs stay within the tolerance radius") {
    Rng rng(404);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 4 + static_cast<int>(rng.uniform_int(5));
        const int h = 4 + static_cast<int>(rng.uniform_int(5));
        const double tol = 1.0 + rng.uniform();
        const BoundaryMap pred = random_binary(w, h, 0.3, rng);
        const BoundaryMap gt = random_binary(w, h, 0.3, rng);
        const MatchResult r = match_boundaries(pred, gt, tol);
        check_counts(r, pred, gt);
        for (const auto& [p, g] : r.pairs) {
            const double dx = p % w - g % w;
            const double dy = p / w - g / w;
            REQUIRE(dx * dx + dy * dy <= tol * tol + 1e-9);
        }
    }
}

TEST_CASE("production matcher agrees with an independent maximum-matching oracle") {
    Rng rng(2024);
    int greedy_gaps = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int w = 3 + static_cast<int>(rng.uniform_int(6));
        const int h = 3 + static_cast<int>(rng.uniform_int(6));
        const double density = 0.1 + 0.4 * rng.uniform();
        const double tol = 1.0 + rng.uniform();
        const BoundaryMap pred = random_binary(w, h, density, rng);
        const BoundaryMap gt = random_binary(w, h, density, rng);
        const int oracle = kuhn_oracle(pred, gt, tol);

        const MatchResult exact = match_boundaries(pred, gt, tol, MatchStrategy::exact);
        REQUIRE(exact.true_positives == oracle);
        check_counts(exact, pred, gt);

        const MatchResult automatic = match_boundaries(pred, gt, tol);
        REQUIRE(automatic.true_positives == oracle);

        const MatchResult greedy = match_boundaries(pred, gt, tol, MatchStrategy::greedy);
        REQUIRE(greedy.true_positives <= oracle);
        REQUIRE(greedy.true_positives >= oracle - 1);
        check_counts(greedy, pred, gt);
        if (greedy.true_positives < oracle) ++greedy_gaps;
    }
    INFO("greedy fell short on " << greedy_gaps << " of 500 trials");
    CHECK(greedy_gaps < 50);
}

TEST_CASE("swapping prediction and ground truth swaps fp and fn") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const BoundaryMap a = random_binary(8, 8, 0.3, rng);
        const BoundaryMap b = random_binary(8, 8, 0.3, rng);
        const MatchResult ab = match_boundaries(a, b, 1.5);
        const MatchResult ba = match_boundaries(b, a, 1.5);
        REQUIRE(ab.true_positives == ba.true_positives);
        REQUIRE(ab.false_positives == ba.false_negatives);
        REQUIRE(ab.false_negatives == ba.false_positives);
        REQUIRE(ab.true_positives <=
                std::min(ab.true_positives + ab.false_positives,
                         ab.true_positives + ab.false_negatives));
    }
}

TEST_CASE("widening the tolerance never loses matches") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const BoundaryMap pred = random_binary(8, 8, 0.35, rng);
        const BoundaryMap gt = random_binary(8, 8, 0.35, rng);
        const MatchResult narrow = match_boundaries(pred, gt, 1.0);
        const MatchResult wide = match_boundaries(pred, gt, 2.0);
        REQUIRE(wide.true_positives >= narrow.true_positives);
    }
}

TEST_CASE("matcher rejects mismatched dimensions") {
    CHECK_THROWS_WITH(match_boundaries(BoundaryMap(8, 8), BoundaryMap(8, 9), 1.0),
                      Catch::Matchers::ContainsSubstring("dimension"));
    CHECK_THROWS_AS(match_boundaries(BoundaryMap(8, 8), BoundaryMap(8, 8), -1.0), Error);
}

TEST_CASE("default thresholds cover (0,1] uniformly, descending") {
    const auto t = default_thresholds();
    REQUIRE(t.size() == 25);
    CHECK(t.front() == 1.0);
    CHECK(t.back() == Catch::Approx(0.04).margin(1e-15));
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(t[i] < t[i - 1]);
        CHECK(t[i] == Catch::Approx((25.0 - i) / 25.0).margin(1e-15));
    }
}

TEST_CASE("average precision matches hand-worked trapezoids") {
    SECTION("already monotone") {
        const std::vector<double> r = {0.2, 0.5, 1.0};
        const std::vector<double> p = {1.0, 0.8, 0.5};
        // 0.2*1 + 0.3*0.9 + 0.5*0.65
        CHECK(average_precision(r, p) == Catch::Approx(0.795).margin(1e-12));
        CHECK(precision_at(r, p, 0.05) == Catch::Approx(1.0).margin(1e-12));
        CHECK(precision_at(r, p, 0.20) == Catch::Approx(1.0).margin(1e-12));
        CHECK(precision_at(r, p, 0.35) == Catch::Approx(0.9).margin(1e-12));
        CHECK(precision_at(r, p, 0.50) == Catch::Approx(0.8).margin(1e-12));
        CHECK(precision_at(r, p, 1.0) == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("non-monotone raw curve is monotonized first") {
        const std::vector<double> r = {0.1, 0.4, 0.7};
        const std::vector<double> p = {0.3, 0.9, 0.2};
        // cummax from the high-recall side: 0.9, 0.9, 0.2
        CHECK(average_precision(r, p) == Catch::Approx(0.525).margin(1e-12));
        CHECK(precision_at(r, p, 0.05) == Catch::Approx(0.9).margin(1e-12));
        CHECK(precision_at(r, p, 0.55) == Catch::Approx(0.55).margin(1e-12));
        CHECK(precision_at(r, p, 0.71) == 0.0);
    }
    SECTION("ap never exceeds the maximum precision") {
        Rng rng(5150);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> r(6), p(6);
            double acc = 0;
            for (int i = 0; i < 6; ++i) {
                acc += rng.uniform() * 0.15;
                r[i] = std::min(acc, 1.0);
                p[i] = rng.uniform();
            }
            const double ap = average_precision(r, p);
            REQUIRE(ap >= 0.0);
            REQUIRE(ap <= *std::max_element(p.begin(), p.end()) + 1e-12);
        }
    }
}

TEST_CASE("perfect detector scores AP 1") {
    // Sparse isolated pixels survive thinning unchanged.
    const BoundaryMap gt = from_pixels(16, 12, {{2, 2}, {6, 3}, {10, 5}, {13, 9}, {4, 8}});
    const PRCurve c = pr_curve(gt, gt, default_thresholds(), 1.5);
    for (std::size_t t = 0; t < c.thresholds.size(); ++t) {
        REQUIRE(c.precision[t] == 1.0);
        REQUIRE(c.recall[t] == 1.0);
    }
    CHECK(c.ap == Catch::Approx(1.0).margin(1e-12));
    CHECK(c.p_at_20 == 1.0);
    CHECK(c.p_at_50 == 1.0);
}

TEST_CASE("all-zero prediction scores AP 0") {
    const BoundaryMap gt = from_pixels(10, 10, {{3, 3}, {7, 7}});
    const BoundaryMap pred(10, 10, 0.0f);
    const PRCurve c = pr_curve(pred, gt, default_thresholds(), 1.5);
    for (double rec : c.recall) REQUIRE(rec == 0.0);
    for (double prec : c.precision) REQUIRE(prec == 1.0);  // no predictions made
    CHECK(c.ap == 0.0);
}

TEST_CASE("hand-counted single-threshold curve") {
    // 4 gt pixels; prediction hits 3 of them and adds 1 distant stray.
    const BoundaryMap gt = from_pixels(16, 16, {{2, 2}, {6, 6}, {10, 10}, {14, 2}});
    const BoundaryMap pred =
        from_pixels(16, 16, {{2, 3}, {6, 6}, {10, 9}, {2, 12}}, 0.9f);
    const PRCurve c = pr_curve(pred, gt, {0.5}, 1.5);
    REQUIRE(c.precision.size() == 1);
    CHECK(c.precision[0] == Catch::Approx(0.75).margin(1e-12));
    CHECK(c.recall[0] == Catch::Approx(0.75).margin(1e-12));
}

TEST_CASE("pr_curve validates its inputs") {
    const BoundaryMap gt = from_pixels(8, 8, {{4, 4}});
    const BoundaryMap pred(8, 8, 0.0f);
    CHECK_THROWS_AS(pr_curve(pred, BoundaryMap(8, 8, 0.0f), {0.5}, 1.0), Error);  // empty gt
    CHECK_THROWS_AS(pr_curve(pred, gt, {}, 1.0), Error);
    CHECK_THROWS_AS(pr_curve(pred, gt, {0.5, 0.5}, 1.0), Error);
    CHECK_THROWS_AS(pr_curve(pred, gt, {0.5, 0.7}, 1.0), Error);
    CHECK_THROWS_AS(pr_curve(pred, gt, {1.2}, 1.0), Error);
    CHECK_THROWS_AS(pr_curve(pred, gt, {0.5, 0.0}, 1.0), Error);
}

TEST_CASE("dataset of one image reproduces its own curve") {
    const BoundaryMap gt = from_pixels(20, 15, {{3, 3}, {9, 7}, {15, 11}, {5, 12}});
    const BoundaryMap pred = from_pixels(20, 15, {{3, 4}, {9, 7}, {16, 3}}, 0.8f);
    const double frac = 0.01;
    const double tol = tolerance_radius(20, 15, frac);
    const PRCurve single = pr_curve(pred, gt, default_thresholds(), tol);
    const PRCurve data = dataset_eval({pred}, {gt}, frac, default_thresholds());
    REQUIRE(data.precision == single.precision);
    REQUIRE(data.recall == single.recall);
    CHECK(data.ap == single.ap);
}

TEST_CASE("identical images average to the same curve") {
    const BoundaryMap gt = from_pixels(12, 12, {{2, 2}, {8, 4}, {5, 9}});
    const BoundaryMap pred = from_pixels(12, 12, {{2, 2}, {8, 5}, {10, 10}}, 0.6f);
    const PRCurve one = dataset_eval({pred}, {gt}, 0.05, {0.5, 0.25});
    const PRCurve two = dataset_eval({pred, pred}, {gt, gt}, 0.05, {0.5, 0.25});
    REQUIRE(one.precision == two.precision);
    REQUIRE(one.recall == two.recall);
    CHECK(one.ap == two.ap);
}

TEST_CASE("perfect image averaged with an all-miss image") {
    const BoundaryMap gt_a = from_pixels(16, 16, {{3, 3}, {8, 8}, {13, 3}});
    const BoundaryMap gt_b = from_pixels(16, 16, {{2, 2}, {2, 13}});
    // B predicts only far from its ground truth: zero tp, nonzero fp.
    const BoundaryMap pred_b = from_pixels(16, 16, {{13, 13}, {9, 6}}, 0.9f);
    const PRCurve c = dataset_eval({gt_a, pred_b}, {gt_a, gt_b}, 0.08, {0.5});
    CHECK(c.precision[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(c.recall[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(c.ap == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("empty-ground-truth images are skipped with a warning") {
    const BoundaryMap gt = from_pixels(10, 10, {{3, 3}, {6, 6}});
    const BoundaryMap empty_gt(10, 10, 0.0f);
    const BoundaryMap pred = from_pixels(10, 10, {{3, 3}}, 0.9f);

    std::vector<std::string> warnings;
    const PRCurve with_skip =
        dataset_eval({pred, pred}, {gt, empty_gt}, 0.1, {0.5},
                     [&](const std::string& msg) { warnings.push_back(msg); });
    const PRCurve alone = dataset_eval({pred}, {gt}, 0.1, {0.5});
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("skipped") != std::string::npos);
    REQUIRE(with_skip.precision == alone.precision);
    REQUIRE(with_skip.recall == alone.recall);

    CHECK_THROWS_WITH(dataset_eval({pred}, {empty_gt}, 0.1, {0.5}),
                      Catch::Matchers::ContainsSubstring("empty ground truth"));
    CHECK_THROWS_AS(dataset_eval({}, {}, 0.1, {0.5}), Error);
    CHECK_THROWS_AS(dataset_eval({pred}, {gt, gt}, 0.1, {0.5}), Error);
}

TEST_CASE("per-class scoring pools counts and averages class APs") {
    const BoundaryMap gt1 = from_pixels(16, 16, {{4, 4}, {11, 6}, {7, 12}});
    const BoundaryMap gt2 = from_pixels(16, 16, {{3, 9}, {12, 12}});
    const BoundaryMap half2 = from_pixels(16, 16, {{3, 9}}, 0.9f);  // 1 of 2, no strays

    SECTION("perfect class scores 1, pooled partial class is hand-checkable") {
        SbdClassInput perfect{7, {gt1, gt2}, {gt1, gt2}};
        SbdClassInput partial{9, {half2, half2}, {gt2, gt2}};
        const SbdResult r = sbd_eval({perfect, partial}, 0.1, {0.5});
        REQUIRE(r.classes.size() == 2);
        CHECK(r.classes[0].class_id == 7);
        CHECK(r.classes[0].ap == Catch::Approx(1.0).margin(1e-12));
        // pooled: tp=2, fp=0, fn=2 -> precision 1, recall 0.5, ap 0.5
        CHECK(r.classes[1].ap == Catch::Approx(0.5).margin(1e-12));
        CHECK(r.mean_ap == Catch::Approx(0.75).margin(1e-12));
        CHECK(r.excluded_classes.empty());
    }
    SECTION("classes without ground truth are excluded and logged") {
        const BoundaryMap none(16, 16, 0.0f);
        SbdClassInput present{1, {gt1}, {gt1}};
        SbdClassInput absent{2, {half2}, {none}};
        std::vector<std::string> warnings;
        const SbdResult r =
            sbd_eval({present, absent}, 0.1, {0.5},
                     [&](const std::string& msg) { warnings.push_back(msg); });
        REQUIRE(r.classes.size() == 1);
        REQUIRE(r.excluded_classes == std::vector<int>{2});
        REQUIRE(warnings.size() == 1);
        CHECK(r.mean_ap == Catch::Approx(1.0).margin(1e-12));

        CHECK_THROWS_WITH(sbd_eval({absent}, 0.1, {0.5}),
                          Catch::Matchers::ContainsSubstring("no class"));
    }
}

TEST_CASE("tolerance radius follows the image diagonal") {
    CHECK(tolerance_radius(300, 400, 0.0075) == Catch::Approx(3.75).margin(1e-12));
    CHECK_THROWS_AS(tolerance_radius(10, 10, 0.0), Error);
}
