#include "macalloc/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace macalloc {

void Scenario::validate() const {
    if (num_users < 1) throw DomainError("scenario requires at least one user");
    if (num_users > PolymatroidRegion::kMaxUsers)
        throw DomainError("scenario exceeds the supported user count");
    if (static_cast<int>(powers.size()) != num_users)
        throw DomainError("power vector length does not match the user count");
    for (double p : powers)
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("powers must be nonnegative and finite");
    if (!(noise > 0.0) || !std::isfinite(noise)) throw DomainError("noise power must be positive");
}

void ChannelState::validate_for(const Scenario& s) const {
    if (static_cast<int>(gains.size()) != s.num_users)
        throw DomainError("channel state length does not match the user count");
    for (double g : gains)
        if (!(g >= 0.0) || !std::isfinite(g)) throw DomainError("gains must be nonnegative and finite");
}

double awgn_capacity(double power, double noise) {
    if (!(noise > 0.0)) throw DomainError("awgn_capacity requires positive noise power");
    if (power < 0.0) throw DomainError("awgn_capacity requires nonnegative power");
    return 0.5 * std::log1p(power / noise);
}

PolymatroidRegion::PolymatroidRegion(int num_users, std::vector<double> rank, bool expanded,
                                     double tol)
    : num_users_(num_users), rank_(std::move(rank)), expanded_(expanded) {
    if (num_users_ < 1 || num_users_ > kMaxUsers)
        throw DomainError("polymatroid region supports 1..16 users");
    const std::uint32_t full = full_mask();
    if (rank_.size() != full) throw DomainError("rank table has the wrong size");
    for (double v : rank_)
        if (!(v >= -tol) || !std::isfinite(v)) throw DomainError("rank values must be nonnegative and finite");

    // monotonicity: dropping any one user may not increase the rank
    for (std::uint32_t s = 1; s <= full; ++s) {
        for (int i = 0; i < num_users_; ++i) {
            const std::uint32_t bit = 1u << i;
            if ((s & bit) == 0 || s == bit) continue;
            if (rank_[(s ^ bit) - 1] > rank_[s - 1] + tol)
                throw DomainError("rank function is not monotone");
        }
    }
    // submodularity via diminishing returns: f(S+i) - f(S) >= f(T+i) - f(T)
    // checked in the equivalent pairwise form f(S)+f(T) >= f(S|T)+f(S&T).
    if (num_users_ <= 10) {
        for (std::uint32_t s = 1; s <= full; ++s) {
            for (std::uint32_t t = s + 1; t <= full; ++t) {
                const std::uint32_t u = s | t;
                const std::uint32_t x = s & t;
                if (u == s || u == t) continue;
                if (expanded_ && x == 0) continue;  // expansion shifts only nonempty rows
                const double lhs = rank_[s - 1] + rank_[t - 1];
                const double rhs = rank_[u - 1] + (x == 0 ? 0.0 : rank_[x - 1]);
                if (lhs + tol < rhs) throw DomainError("rank function is not submodular");
            }
        }
    }
}

double PolymatroidRegion::rank(std::uint32_t mask) const {
    if (mask == 0 || mask > full_mask()) throw DomainError("subset mask out of range");
    return rank_[mask - 1];
}

bool PolymatroidRegion::contains(std::span<const double> rates, double slack) const {
    if (static_cast<int>(rates.size()) != num_users_)
        throw DomainError("rate vector length does not match the region");
    if (slack < 0.0) throw DomainError("containment slack must be nonnegative");
    for (double r : rates)
        if (r < -slack) return false;
    const std::uint32_t full = full_mask();
    for (std::uint32_t s = 1; s <= full; ++s) {
        double sum = 0.0;
        for (int i = 0; i < num_users_; ++i)
            if (s & (1u << i)) sum += rates[static_cast<std::size_t>(i)];
        if (sum > rank_[s - 1] + slack) return false;
    }
    return true;
}

RateVector PolymatroidRegion::vertex(std::span<const int> order) const {
    if (static_cast<int>(order.size()) != num_users_)
        throw DomainError("ordering length does not match the region");
    RateVector r(static_cast<std::size_t>(num_users_), 0.0);
    std::uint32_t prefix = 0;
    double prev = 0.0;
    for (int idx : order) {
        if (idx < 0 || idx >= num_users_ || (prefix & (1u << idx)))
            throw DomainError("ordering must be a permutation of the users");
        prefix |= 1u << idx;
        const double cur = rank_[prefix - 1];
        r[static_cast<std::size_t>(idx)] = cur - prev;
        prev = cur;
    }
    return r;
}

std::vector<RateVector> PolymatroidRegion::dominant_face_vertices() const {
    if (num_users_ > kMaxVertexUsers)
        throw DomainError("vertex enumeration is limited to 8 users; use the greedy oracle instead");
    std::vector<int> order(static_cast<std::size_t>(num_users_));
    std::iota(order.begin(), order.end(), 0);
    std::vector<RateVector> vertices;
    do {
        vertices.push_back(vertex(order));
    } while (std::next_permutation(order.begin(), order.end()));
    std::sort(vertices.begin(), vertices.end());
    vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
    return vertices;
}

PolymatroidRegion PolymatroidRegion::expand(double delta) const {
    if (delta < 0.0) throw DomainError("expansion requires delta >= 0");
    std::vector<double> shifted = rank_;
    for (double& v : shifted) v += delta;
    return PolymatroidRegion(num_users_, std::move(shifted), /*expanded=*/true);
}

nlohmann::json PolymatroidRegion::to_json() const {
    nlohmann::json ranks = nlohmann::json::object();
    for (std::uint32_t s = 1; s <= full_mask(); ++s) ranks[subset_key(s)] = rank_[s - 1];
    return nlohmann::json{{"M", num_users_}, {"rank", ranks}};
}

PolymatroidRegion PolymatroidRegion::from_json(const nlohmann::json& j) {
    const int m = j.at("M").get<int>();
    if (m < 1 || m > kMaxUsers) throw DomainError("rank table user count out of range");
    const std::uint32_t full = (1u << m) - 1u;
    std::vector<double> rank(full, -1.0);
    for (const auto& [key, value] : j.at("rank").items())
        rank[parse_subset_key(key, m) - 1] = value.get<double>();
    for (double v : rank)
        if (v < 0.0) throw DomainError("rank table is missing a subset entry");
    return PolymatroidRegion(m, std::move(rank));
}

double hausdorff_distance(const PolymatroidRegion& a, const PolymatroidRegion& b) {
    if (a.num_users() != b.num_users())
        throw DomainError("regions must have the same number of users");
    double d = 0.0;
    for (std::uint32_t s = 1; s <= a.full_mask(); ++s)
        d = std::max(d, std::abs(a.rank(s) - b.rank(s)));
    return d;
}

PolymatroidRegion instantaneous_region(const Scenario& s, const ChannelState& h) {
    s.validate();
    h.validate_for(s);
    const std::uint32_t full = (1u << s.num_users) - 1u;
    std::vector<double> rank(full);
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        double received = 0.0;
        for (int i = 0; i < s.num_users; ++i)
            if (mask & (1u << i))
                received += h.gains[static_cast<std::size_t>(i)] * s.powers[static_cast<std::size_t>(i)];
        rank[mask - 1] = awgn_capacity(received, s.noise);
    }
    return PolymatroidRegion(s.num_users, std::move(rank));
}

AveragedRegion averaged_region_from_trace(const Scenario& s, const FadingTrace& trace) {
    s.validate();
    if (trace.num_users != s.num_users)
        throw DomainError("trace user count does not match the scenario");
    if (trace.n_samples < 1) throw DomainError("averaging requires at least one sample");
    const std::uint32_t full = (1u << s.num_users) - 1u;
    const std::size_t n = trace.n_samples;

    // rank per subset per sample, then a deterministic pairwise reduction
    std::vector<double> table(full * n);
    parallel_for(n, [&](std::size_t k) {
        const auto h = trace.row(k);
        for (std::uint32_t mask = 1; mask <= full; ++mask) {
            double received = 0.0;
            for (int i = 0; i < s.num_users; ++i)
                if (mask & (1u << i))
                    received += h[static_cast<std::size_t>(i)] * s.powers[static_cast<std::size_t>(i)];
            table[(mask - 1) * n + k] = awgn_capacity(received, s.noise);
        }
    });

    std::vector<double> rank(full), se(full);
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        const MeanVar mv = mean_var({table.data() + (mask - 1) * n, n});
        rank[mask - 1] = mv.mean;
        se[mask - 1] = mv.se;
    }
    return AveragedRegion{PolymatroidRegion(s.num_users, std::move(rank)), std::move(se),
                          n, trace.seed};
}

AveragedRegion averaged_region(const Scenario& s, const FadingModel& fm,
                               std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw DomainError("averaging requires at least one sample");
    if (fm.num_users() != s.num_users)
        throw DomainError("fading model user count does not match the scenario");
    return averaged_region_from_trace(s, fm.sample(n_samples, seed));
}

}  // namespace macalloc
