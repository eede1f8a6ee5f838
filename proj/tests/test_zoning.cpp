#include <doctest.h>

#include <algorithm>
#include <random>

#include "coalab/rng.hpp"
#include "coalab/zoning.hpp"
#include "oracles.hpp"

using namespace coalab;

namespace {

MeanShiftConfig cfg(double r) { return MeanShiftConfig{}.with_radius(r); }

bool same_set(std::vector<Vec2> a, std::vector<Vec2> b, double tol) {
    if (a.size() != b.size()) {
        return false;
    }
    for (const auto& p : a) {
        auto it = std::find_if(b.begin(), b.end(), [&](const Vec2& q) {
            return std::abs(p.x - q.x) <= tol && std::abs(p.y - q.y) <= tol;
        });
        if (it == b.end()) {
            return false;
        }
        b.erase(it);
    }
    return true;
}

std::vector<Vec2> random_points(Rng& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i < n; ++i) {
        pts.push_back({u(rng), u(rng)});
    }
    return pts;
}

}  // namespace

TEST_CASE("mean_shift examples") {
    const std::vector<Vec2> one{{0, 0}};
    auto c = mean_shift(one, cfg(0.5));
    REQUIRE(c.size() == 1);
    CHECK(c[0].x == 0.0);
    CHECK(c[0].y == 0.0);

    const std::vector<Vec2> pair{{0, 0}, {0.1, 0}};
    c = mean_shift(pair, cfg(0.2));
    REQUIRE(c.size() == 1);
    CHECK(c[0].x == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(c[0].y == 0.0);

    const std::vector<Vec2> apart{{0, 0}, {1, 1}};
    c = mean_shift(apart, cfg(0.2));
    CHECK(same_set(c, apart, 0.0));
}

TEST_CASE("mean_shift rejects empty input and bad configs") {
    CHECK_THROWS_AS(mean_shift(std::vector<Vec2>{}, cfg(1.0)), std::invalid_argument);
    MeanShiftConfig bad;
    bad.radius = 0.0;
    CHECK_THROWS_AS(mean_shift(std::vector<Vec2>{{0, 0}}, bad), std::invalid_argument);
    bad = MeanShiftConfig{};
    bad.max_iterations = 0;
    CHECK_THROWS_AS(mean_shift(std::vector<Vec2>{{0, 0}}, bad), std::invalid_argument);
}

TEST_CASE("points exactly at the radius are inside the window") {
    const std::vector<Vec2> pts{{0, 0}, {0.5, 0}};
    const auto c = mean_shift(pts, cfg(0.5));
    REQUIRE(c.size() == 1);
    CHECK(c[0].x == doctest::Approx(0.25));
}

TEST_CASE("mean_shift matches the brute-force oracle") {
    Rng rng = make_rng(77);
    std::uniform_int_distribution<std::size_t> count(1, 20);
    std::uniform_real_distribution<double> radius(0.1, 0.8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto pts = random_points(rng, count(rng));
        const auto c = cfg(radius(rng));
        std::vector<oracle::Pt> raw;
        for (const auto& p : pts) {
            raw.push_back({p.x, p.y});
        }
        const auto want = oracle::mean_shift(raw, c.radius, c.shift_tolerance, c.max_iterations, c.merge_tolerance);
        const auto got = mean_shift(pts, c);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(std::abs(got[k].x - want[k].first) <= 1e-9);
            CHECK(std::abs(got[k].y - want[k].second) <= 1e-9);
        }
    }
}

TEST_CASE("mean_shift on its own output returns the same set") {
    Rng rng = make_rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pts = random_points(rng, 12);
        const auto c = cfg(0.4);
        const auto once = mean_shift(pts, c);
        const auto twice = mean_shift(once, c);
        // Distinct fixed points more than R apart are stable; closer ones may merge.
        bool separated = true;
        for (std::size_t i = 0; i < once.size(); ++i) {
            for (std::size_t j = i + 1; j < once.size(); ++j) {
                separated = separated && distance(once[i], once[j]) > c.radius;
            }
        }
        if (separated) {
            CHECK(same_set(once, twice, 1e-12));
        }
    }
}

TEST_CASE("assign_zones examples") {
    CHECK(assign_zones(std::vector<Vec2>{}, cfg(1.0)).empty());

    const std::vector<Vec2> five{{0, 0}, {0.1, 0}, {0, 0.1}, {-0.1, 0}, {0, -0.1}};
    auto z = assign_zones(five, cfg(0.25));
    REQUIRE(z.size() == 1);
    CHECK(z.members[0].size() == 5);

    const std::vector<Vec2> two{{0, 0}, {0.05, 0}, {0, 0.05}, {5, 5}, {5.05, 5}, {5, 5.05}};
    z = assign_zones(two, cfg(0.2));
    REQUIRE(z.size() == 2);
    CHECK(z.members[0].size() == 3);
    CHECK(z.members[1].size() == 3);
    CHECK(zones_cover(z, two, 0.2));
    for (std::size_t k = 0; k < 2; ++k) {
        for (auto i : z.members[k]) {
            CHECK(distance(two[i], z.centers[k]) <= 0.2);
        }
    }
}

TEST_CASE("densest cluster is discovered first") {
    const std::vector<Vec2> pts{{5, 5}, {0, 0}, {0.05, 0}, {0, 0.05}, {0.05, 0.05}};
    const auto z = assign_zones(pts, cfg(0.2));
    REQUIRE(z.size() == 2);
    CHECK(z.members[0].size() == 4);
}

TEST_CASE("assign_zones covers every point exactly once on random instances") {
    Rng rng = make_rng(11);
    std::uniform_int_distribution<std::size_t> count(1, 20);
    for (int trial = 0; trial < 500; ++trial) {
        const auto pts = random_points(rng, count(rng));
        const auto z = assign_zones(pts, cfg(0.3));
        REQUIRE(zones_cover(z, pts, 0.3));
        for (std::size_t i = 0; i < z.size(); ++i) {
            for (std::size_t j = i + 1; j < z.size(); ++j) {
                CHECK(distance(z.centers[i], z.centers[j]) > 0.0);
            }
        }
    }
}

TEST_CASE("permuting the input keeps coverage") {
    Rng rng = make_rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pts = random_points(rng, 15);
        auto shuffled = pts;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(zones_cover(assign_zones(pts, cfg(0.35)), pts, 0.35));
        CHECK(zones_cover(assign_zones(shuffled, cfg(0.35)), shuffled, 0.35));
    }
}

TEST_CASE("zone_count_lower_bound") {
    CHECK(zone_count_lower_bound(std::vector<Vec2>{{0, 0}}, 0.1) == 1);
    CHECK(zone_count_lower_bound(std::vector<Vec2>{{0, 0}, {1, 0}}, 0.4) == 2);
    CHECK(zone_count_lower_bound(std::vector<Vec2>{}, 0.4) == 0);
    CHECK_THROWS_AS(zone_count_lower_bound(std::vector<Vec2>{{0, 0}}, 0.0), std::invalid_argument);
}
