#include "coevolve/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "coevolve/rng.hpp"

namespace coevolve {

namespace {

void check_same_dim(const std::vector<Vec>& pts, const char* who) {
    for (const auto& p : pts) {
        if (p.size() != pts.front().size()) {
            throw std::domain_error(std::string(who) + ": mixed dimensions");
        }
    }
}

double euclidean(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

class HashedBagEmbedder final : public Embedder {
public:
    HashedBagEmbedder(std::size_t dim, std::uint64_t seed)
        : dim_(dim), salt_(rng::splitmix64(seed ^ 0xa5c3b1e9d2f47681ull)) {}

    Vec embed(const std::string& text) const override {
        Vec v(dim_, 0.0);
        std::istringstream in(text);
        std::string token;
        while (in >> token) {
            std::uint64_t h = rng::splitmix64(rng::fnv1a(token) ^ salt_);
            double sign = (h >> 32) & 1 ? 1.0 : -1.0;
            v[h % dim_] += sign;
        }
        double norm = std::sqrt(
            std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm == 0.0) {
            // Empty input, or signs cancelled exactly: fixed basis vector.
            v.assign(dim_, 0.0);
            v[0] = 1.0;
            return v;
        }
        for (auto& x : v) x /= norm;
        return v;
    }

    std::size_t dimension() const override { return dim_; }

private:
    std::size_t dim_;
    std::uint64_t salt_;
};

}  // namespace

std::unique_ptr<Embedder> default_embedder(std::size_t dim, std::uint64_t seed) {
    if (dim < 8) throw std::domain_error("default_embedder: dim must be >= 8");
    return std::make_unique<HashedBagEmbedder>(dim, seed);
}

double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw std::domain_error("cosine_similarity: dimension mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::domain_error("cosine_similarity: zero vector");
    }
    return dot / std::sqrt(na * nb);
}

double sr_at_k(const std::vector<Vec>& points, int k) {
    if (k < 1) throw std::domain_error("sr_at_k: k must be >= 1");
    if (points.size() < static_cast<std::size_t>(k) + 1) {
        throw std::domain_error("sr_at_k: need at least k+1 points");
    }
    check_same_dim(points, "sr_at_k");
    double acc = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> sims;
        sims.reserve(points.size() - 1);
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j == i) continue;
            sims.emplace_back(cosine_similarity(points[i], points[j]), j);
        }
        std::partial_sort(sims.begin(), sims.begin() + k, sims.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return a.second < b.second;
                          });
        double mean = 0.0;
        for (int t = 0; t < k; ++t) mean += sims[static_cast<std::size_t>(t)].first;
        acc += mean / k;
    }
    return acc / static_cast<double>(points.size());
}

double energy_distance(const std::vector<Vec>& x, const std::vector<Vec>& y) {
    if (x.empty() || y.empty()) throw std::domain_error("energy_distance: empty set");
    check_same_dim(x, "energy_distance");
    check_same_dim(y, "energy_distance");
    if (x.front().size() != y.front().size()) {
        throw std::domain_error("energy_distance: mixed dimensions");
    }
    double m = static_cast<double>(x.size());
    double n = static_cast<double>(y.size());
    double cross = 0.0, within_x = 0.0, within_y = 0.0;
    for (const auto& a : x)
        for (const auto& b : y) cross += euclidean(a, b);
    for (const auto& a : x)
        for (const auto& b : x) within_x += euclidean(a, b);
    for (const auto& a : y)
        for (const auto& b : y) within_y += euclidean(a, b);
    return 2.0 / (m * n) * cross - within_x / (m * m) - within_y / (n * n);
}

double ed_rel(const std::vector<Vec>& x, const std::vector<Vec>& y) {
    if (x.size() < 2) {
        throw std::domain_error("ed_rel: reference set needs at least two points");
    }
    double within = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (i != j) within += euclidean(x[i], x[j]);
        }
    }
    double denom = within / (static_cast<double>(x.size()) *
                             static_cast<double>(x.size() - 1));
    if (denom == 0.0) {
        throw std::domain_error("ed_rel: reference set has zero spread");
    }
    return energy_distance(x, y) / denom;
}

std::vector<long long> max_similarity_distribution(const std::vector<Vec>& synth,
                                                   const std::vector<Vec>& ref,
                                                   int bins) {
    if (bins < 1) throw std::domain_error("max_similarity_distribution: bins >= 1");
    if (ref.empty()) throw std::domain_error("max_similarity_distribution: empty ref");
    std::vector<long long> counts(static_cast<std::size_t>(bins), 0);
    for (const auto& s : synth) {
        double best = -1.0;
        for (const auto& r : ref) best = std::max(best, cosine_similarity(s, r));
        double clamped = std::clamp(best, 0.0, 1.0);
        auto bin = static_cast<std::size_t>(
            std::min<int>(static_cast<int>(clamped * bins), bins - 1));
        counts[bin] += 1;
    }
    return counts;
}

}  // namespace coevolve
