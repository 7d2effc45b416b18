#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "macalloc/core.hpp"
#include "macalloc/fading.hpp"

#include "json.hpp"

namespace macalloc {

using RateVector = std::vector<double>;

// Static channel setup: user count, transmit powers (watts) and receiver
// noise power (watts).
struct Scenario {
    int num_users = 0;
    std::vector<double> powers;
    double noise = 1.0;

    void validate() const;
};

// One realization of the per-user fading power gains.
struct ChannelState {
    std::vector<double> gains;

    void validate_for(const Scenario& s) const;
};

// Single-user AWGN capacity in nats.
double awgn_capacity(double power, double noise);

// A capacity region stored as its rank function over all nonempty user
// subsets: { R >= 0 : sum_{i in S} R_i <= rank(S) }. Rank tables are dense,
// so the user count is capped at 16; vertex enumeration is capped at 8.
class PolymatroidRegion {
  public:
    static constexpr int kMaxUsers = 16;
    static constexpr int kMaxVertexUsers = 8;

    // trivial single-user zero region
    PolymatroidRegion() : num_users_(1), rank_{0.0}, expanded_(false) {}

    // `rank` is indexed by mask-1 for mask in [1, 2^M - 1]. Validates
    // nonnegativity, monotonicity and submodularity up to `tol`.
    PolymatroidRegion(int num_users, std::vector<double> rank, bool expanded = false,
                      double tol = 1e-9);

    int num_users() const { return num_users_; }
    std::uint32_t full_mask() const { return (1u << num_users_) - 1u; }
    double rank(std::uint32_t mask) const;
    double total_rank() const { return rank(full_mask()); }
    const std::vector<double>& rank_table() const { return rank_; }
    bool expanded() const { return expanded_; }

    bool contains(std::span<const double> rates, double slack) const;

    // Vertex for a decoding order: users earlier in `order` take their
    // marginal rank increment first.
    RateVector vertex(std::span<const int> order) const;

    // All dominant-face vertices (one per user ordering, duplicates removed).
    std::vector<RateVector> dominant_face_vertices() const;

    PolymatroidRegion expand(double delta) const;

    nlohmann::json to_json() const;
    static PolymatroidRegion from_json(const nlohmann::json& j);

  private:
    int num_users_;
    std::vector<double> rank_;
    bool expanded_;
};

// Max over nonempty subsets of |rank_a(S) - rank_b(S)|: the least uniform
// constraint relaxation making each region contain the other.
double hausdorff_distance(const PolymatroidRegion& a, const PolymatroidRegion& b);

PolymatroidRegion instantaneous_region(const Scenario& s, const ChannelState& h);

// Rank table averaged over a fading law, with per-subset standard errors.
struct AveragedRegion {
    PolymatroidRegion region;
    std::vector<double> rank_se;  // indexed like the rank table
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

AveragedRegion averaged_region(const Scenario& s, const FadingModel& fm,
                               std::size_t n_samples, std::uint64_t seed);

// Same averaging applied to an already materialized trace (used when several
// consumers must share one set of draws).
AveragedRegion averaged_region_from_trace(const Scenario& s, const FadingTrace& trace);

}  // namespace macalloc
