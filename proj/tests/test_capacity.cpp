#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "macalloc/capacity.hpp"

using namespace macalloc;

namespace {

Scenario two_user_unit() { return Scenario{2, {1.0, 1.0}, 1.0}; }

PolymatroidRegion symmetric_region() {
    return instantaneous_region(two_user_unit(), ChannelState{{1.0, 1.0}});
}

PolymatroidRegion random_region(int m, Rng& rng) {
    Scenario s{m, std::vector<double>(static_cast<std::size_t>(m)), rng.uniform(0.5, 2.0)};
    ChannelState h{std::vector<double>(static_cast<std::size_t>(m))};
    for (double& p : s.powers) p = rng.uniform(0.5, 2.0);
    for (double& g : h.gains) g = rng.uniform(0.0, 2.0);
    return instantaneous_region(s, h);
}

// exhaustive submodularity scan, kept independent of the region validator
bool submodular_table(const PolymatroidRegion& r) {
    const std::uint32_t full = r.full_mask();
    for (std::uint32_t s = 1; s <= full; ++s) {
        for (std::uint32_t t = 1; t <= full; ++t) {
            const std::uint32_t un = s | t;
            const std::uint32_t in = s & t;
            const double lhs = r.rank(s) + r.rank(t);
            const double rhs = r.rank(un) + (in == 0 ? 0.0 : r.rank(in));
            if (lhs + 1e-9 < rhs) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("awgn capacity follows the half-log law in nats") {
    CHECK(awgn_capacity(0.0, 1.0) == 0.0);
    CHECK(awgn_capacity(1.0, 1.0) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-15));
    CHECK(awgn_capacity(3.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(awgn_capacity(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(awgn_capacity(-1.0, 1.0), DomainError);
}

TEST_CASE("instantaneous region of the symmetric two-user channel") {
    const PolymatroidRegion r = symmetric_region();
    CHECK(r.rank(0b01) == doctest::Approx(0.5 * std::log(2.0)));
    CHECK(r.rank(0b10) == doctest::Approx(0.5 * std::log(2.0)));
    CHECK(r.rank(0b11) == doctest::Approx(0.5 * std::log(3.0)));

    const PolymatroidRegion dead =
        instantaneous_region(two_user_unit(), ChannelState{{0.0, 0.0}});
    for (std::uint32_t mask = 1; mask <= 3; ++mask) CHECK(dead.rank(mask) == 0.0);

    CHECK_THROWS_AS(instantaneous_region(two_user_unit(), ChannelState{{1.0}}), DomainError);
}

TEST_CASE("random three-user regions are monotone and submodular") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const PolymatroidRegion r = random_region(3, rng);
        CHECK(submodular_table(r));
        for (std::uint32_t s = 1; s <= r.full_mask(); ++s)
            for (std::uint32_t t = s; t <= r.full_mask(); ++t)
                if ((s & t) == s) CHECK(r.rank(s) <= r.rank(t) + 1e-12);
    }
    // five users exercised once as well
    const PolymatroidRegion big = random_region(5, rng);
    CHECK(submodular_table(big));
}

TEST_CASE("averaged region: point mass, determinism, closed-form mean") {
    const Scenario s = two_user_unit();
    const FadingModel pm = FadingModel::independent(
        {Marginal::point_mass(0.7), Marginal::point_mass(1.3)});
    const AveragedRegion avg = averaged_region(s, pm, 57, 5);
    const PolymatroidRegion inst = instantaneous_region(s, ChannelState{{0.7, 1.3}});
    for (std::uint32_t mask = 1; mask <= 3; ++mask) {
        CHECK(avg.region.rank(mask) == doctest::Approx(inst.rank(mask)).epsilon(1e-15));
        CHECK(avg.rank_se[mask - 1] == doctest::Approx(0.0));
    }

    const FadingModel uni =
        FadingModel::independent({Marginal::uniform(1.0, 2.0)});
    const Scenario s1{1, {1.0}, 1.0};
    const AveragedRegion a = averaged_region(s1, uni, 100000, 99);
    const AveragedRegion b = averaged_region(s1, uni, 100000, 99);
    CHECK(a.region.rank_table() == b.region.rank_table());

    // closed form: integral of 0.5 log(1+h) over Uniform(1,2)
    const double expect = 0.5 * (3.0 * std::log(3.0) - 2.0 * std::log(2.0) - 1.0);
    CHECK(std::abs(a.region.rank(1) - expect) <= 3.0 * a.rank_se[0]);

    CHECK_THROWS_AS(averaged_region(s1, uni, 0, 1), DomainError);
}

TEST_CASE("membership honors every subset constraint plus slack") {
    const PolymatroidRegion r = symmetric_region();
    CHECK(r.contains(std::vector<double>{0.0, 0.0}, 0.0));
    CHECK(r.contains(std::vector<double>{0.3, 0.2}, 0.0));
    CHECK_FALSE(r.contains(std::vector<double>{0.35, 0.25}, 0.0));  // 0.6 > rank(full)
    CHECK_FALSE(r.contains(std::vector<double>{-0.01, 0.0}, 0.0));
    CHECK(r.contains(std::vector<double>{0.35, 0.25}, 0.2));
    CHECK_THROWS_AS(r.contains(std::vector<double>{0.1}, 0.0), DomainError);
    CHECK_THROWS_AS(r.contains(std::vector<double>{0.1, 0.1}, -1.0), DomainError);
}

TEST_CASE("dominant face vertices enumerate the decode orders") {
    const Scenario s1{1, {1.0}, 1.0};
    const PolymatroidRegion single = instantaneous_region(s1, ChannelState{{1.0}});
    const auto v1 = single.dominant_face_vertices();
    REQUIRE(v1.size() == 1);
    CHECK(v1[0][0] == doctest::Approx(0.5 * std::log(2.0)));

    const PolymatroidRegion r = symmetric_region();
    const auto v2 = r.dominant_face_vertices();
    REQUIRE(v2.size() == 2);
    const double lo = 0.5 * std::log(3.0) - 0.5 * std::log(2.0);  // 0.5 log 1.5
    const double hi = 0.5 * std::log(2.0);
    CHECK(v2[0][0] == doctest::Approx(lo));
    CHECK(v2[0][1] == doctest::Approx(hi));
    CHECK(v2[1][0] == doctest::Approx(hi));
    CHECK(v2[1][1] == doctest::Approx(lo));

    Rng rng(11);
    for (int m : {2, 3, 4}) {
        const PolymatroidRegion reg = random_region(m, rng);
        for (const RateVector& v : reg.dominant_face_vertices()) {
            CHECK(reg.contains(v, 1e-12));
            double total = 0.0;
            for (double x : v) total += x;
            CHECK(total == doctest::Approx(reg.total_rank()).epsilon(1e-12));
        }
    }

    std::vector<double> rank((1u << 9) - 1, 0.0);
    double level = 0.0;
    for (std::uint32_t mask = 1; mask < (1u << 9); ++mask) {
        // concave-in-cardinality table, valid polymatroid
        level = std::sqrt(static_cast<double>(__builtin_popcount(mask)));
        rank[mask - 1] = level;
    }
    const PolymatroidRegion nine(9, rank);
    CHECK_THROWS_AS(nine.dominant_face_vertices(), DomainError);
}

TEST_CASE("expansion shifts every nonempty rank uniformly") {
    Rng rng(3);
    const PolymatroidRegion r = random_region(3, rng);
    const PolymatroidRegion same = r.expand(0.0);
    CHECK(same.rank_table() == r.rank_table());

    const PolymatroidRegion wider = r.expand(0.1);
    for (std::uint32_t mask = 1; mask <= r.full_mask(); ++mask)
        CHECK(wider.rank(mask) == doctest::Approx(r.rank(mask) + 0.1).epsilon(1e-15));
    for (const RateVector& v : r.dominant_face_vertices()) CHECK(wider.contains(v, 0.0));

    CHECK_THROWS_AS(r.expand(-0.1), DomainError);
}

TEST_CASE("rank-table distance: identity, expansion, exhaustive oracle, metric axioms") {
    Rng rng(17);
    const PolymatroidRegion a = random_region(3, rng);
    CHECK(hausdorff_distance(a, a) == 0.0);
    CHECK(hausdorff_distance(a, a.expand(0.25)) == doctest::Approx(0.25).epsilon(1e-15));

    const PolymatroidRegion b = random_region(3, rng);
    double expect = 0.0;
    for (std::uint32_t mask = 1; mask <= a.full_mask(); ++mask)
        expect = std::max(expect, std::abs(a.rank(mask) - b.rank(mask)));
    CHECK(hausdorff_distance(a, b) == doctest::Approx(expect).epsilon(1e-15));

    for (int trial = 0; trial < 25; ++trial) {
        const PolymatroidRegion x = random_region(3, rng);
        const PolymatroidRegion y = random_region(3, rng);
        const PolymatroidRegion z = random_region(3, rng);
        const double dxy = hausdorff_distance(x, y);
        const double dyx = hausdorff_distance(y, x);
        CHECK(dxy == dyx);
        CHECK(hausdorff_distance(x, z) <= dxy + hausdorff_distance(y, z) + 1e-12);
        CHECK(dxy >= 0.0);
    }

    const PolymatroidRegion other(2, {0.1, 0.1, 0.2});
    CHECK_THROWS_AS(hausdorff_distance(a, other), DomainError);
}

TEST_CASE("rank tables serialize to the documented JSON schema") {
    const PolymatroidRegion r = symmetric_region();
    const nlohmann::json j = r.to_json();
    CHECK(j.at("M") == 2);
    CHECK(j.at("rank").size() == 3);
    CHECK(j.at("rank").contains("1"));
    CHECK(j.at("rank").contains("2"));
    CHECK(j.at("rank").contains("1,2"));
    CHECK(j.at("rank").at("1,2").get<double>() == doctest::Approx(0.5 * std::log(3.0)));

    const PolymatroidRegion back = PolymatroidRegion::from_json(j);
    CHECK(back.rank_table() == r.rank_table());

    nlohmann::json bad = j;
    bad["rank"].erase("2");
    CHECK_THROWS_AS(PolymatroidRegion::from_json(bad), DomainError);
}

TEST_CASE("region validation rejects broken tables") {
    // not monotone
    CHECK_THROWS_AS(PolymatroidRegion(2, {0.5, 0.5, 0.4}), DomainError);
    // not submodular: f(1)+f(2) < f(12)
    CHECK_THROWS_AS(PolymatroidRegion(2, {0.1, 0.1, 0.3}), DomainError);
    // negative
    CHECK_THROWS_AS(PolymatroidRegion(2, {-0.1, 0.1, 0.15}), DomainError);
}
