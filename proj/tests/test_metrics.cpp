#include "catch.hpp"

#include <vector>

#include "glacier/error.hpp"
#include "glacier/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace glacier;
using namespace glacier::metrics;

namespace {

geodata::LabelGrid grid(std::initializer_list<int> v, std::int64_t h, std::int64_t w) {
    return {torch::tensor(std::vector<int>(v)).to(torch::kUInt8).reshape({h, w})};
}

}  // namespace

TEST_CASE("perfect and disjoint predictions") {
    const auto g = grid({1, 0, 1, 2, 3, 1, 0, 0, 1}, 3, 3);
    const auto r = evaluate(g.indicator(1), g, 1);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.iou == 1.0);
    const auto d = evaluate(1.0 - g.indicator(1), g, 1);
    CHECK(d.precision == 0.0);
    CHECK(d.recall == 0.0);
    CHECK(d.iou == 0.0);
}

TEST_CASE("constructed 3x3 grid with tp 3 fp 1 fn 2") {
    // Truth: clean at the first five pixels. Prediction: three of them plus one background pixel.
    const auto g = grid({1, 1, 1, 1, 1, 0, 0, 0, 0}, 3, 3);
    const auto pred = torch::tensor({0.9f, 0.8f, 0.7f, 0.1f, 0.2f, 0.6f, 0.f, 0.f, 0.f}).reshape({3, 3});
    const auto r = evaluate(pred, g, 1);
    CHECK(r.tp == 3);
    CHECK(r.fp == 1);
    CHECK(r.fn == 2);
    CHECK(r.tn == 3);
    CHECK(r.precision == 0.75);
    CHECK(r.recall == 0.6);
    CHECK(r.iou == 0.5);
    CHECK(r.class_name == "clean");
}

TEST_CASE("threshold is inclusive and masked pixels are ignored") {
    const auto g = grid({2, 0, 3, 3}, 2, 2);
    const auto pred = torch::tensor({0.5f, 0.49f, 1.f, 0.f}).reshape({2, 2});
    const auto r = evaluate(pred, g, 2);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
    CHECK(r.tn == 1);
    CHECK(r.fn == 0);
}

TEST_CASE("evaluate agrees with a per-pixel counting oracle") {
    Rng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        const auto labels = testing::random_labels(rng, 16, 16);
        const auto prob = testing::random_uniform(rng, {16, 16});
        const int cls = 1 + static_cast<int>(rng.index(2));
        const double thr = trial % 2 == 0 ? 0.5 : rng.uniform(0.05, 0.95);
        const auto r = evaluate(prob, labels, cls, thr);
        const auto c = oracle::count(prob, labels.classes, cls, thr);
        CHECK(r.tp == c.tp);
        CHECK(r.fp == c.fp);
        CHECK(r.fn == c.fn);
        CHECK(r.tn == c.tn);
    }
}

TEST_CASE("iou never exceeds precision or recall") {
    for (int tp = 0; tp <= 20; ++tp)
        for (int fp = 0; fp <= 20; ++fp)
            for (int fn = 0; fn <= 20; ++fn) {
                const auto r = from_counts(tp, fp, fn, 0, "debris");
                REQUIRE(r.iou <= std::min(r.precision, r.recall));
                REQUIRE(r.iou >= 0.0);
                REQUIRE(r.precision <= 1.0);
            }
}

TEST_CASE("fusion rule") {
    const auto clean = torch::tensor({1, 1, 0, 0}).to(torch::kBool);
    const auto debris = torch::tensor({1, 0, 1, 0}).to(torch::kBool);
    const auto fused = fuse_labels(clean, debris);
    CHECK(torch::equal(fused, torch::tensor({2, 1, 2, 0}).to(torch::kUInt8)));
    CHECK_THROWS_AS(fuse_labels(clean, torch::zeros({3}, torch::kBool)), Error);
}

TEST_CASE("aggregation pools counts") {
    const auto a = from_counts(1, 0, 0, 5, "debris");
    const auto b = from_counts(0, 1, 1, 5, "debris");
    const std::vector<MetricsReport> both{a, b};
    const auto p = aggregate(both);
    CHECK(p.precision == 0.5);
    CHECK(p.recall == 0.5);
    CHECK(p.iou == Catch::Approx(1.0 / 3.0));
    const std::vector<MetricsReport> one{b};
    CHECK(aggregate(one) == b);
    const std::vector<MetricsReport> copies(7, from_counts(3, 1, 2, 4, "clean"));
    const auto c = aggregate(copies);
    CHECK(c.precision == 0.75);
    CHECK(c.recall == 0.6);
    CHECK(c.iou == 0.5);
    CHECK_THROWS_AS(aggregate(std::vector<MetricsReport>{}), Error);
    CHECK_THROWS_AS(aggregate(std::vector<MetricsReport>{a, from_counts(1, 1, 1, 1, "clean")}), Error);
}

TEST_CASE("evaluate input checks") {
    const auto g = grid({0, 1, 2, 3}, 2, 2);
    CHECK_THROWS_AS(evaluate(torch::zeros({3, 3}), g, 1), Error);
    CHECK_THROWS_AS(evaluate(torch::zeros({2, 2}), g, 3), Error);
    CHECK_THROWS_AS(evaluate(torch::zeros({2, 2}), g, 1, 1.5), Error);
}

TEST_CASE("json and table output") {
    const auto r = from_counts(3, 1, 2, 4, "clean");
    const auto j = to_json(r, "test");
    CHECK(j.at("split") == "test");
    CHECK(j.at("counts").at("fn") == 2);
    CHECK(j.at("iou") == 0.5);
    std::vector<TableRow> rows{{"slba", "dynamic", r, from_counts(1, 1, 1, 1, "debris")}};
    const auto table = format_table(rows);
    CHECK(table.find("slba") != std::string::npos);
    CHECK(table.find("50.00%") != std::string::npos);
    CHECK(table.find("75.00%") != std::string::npos);
}
