#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace coevolve {

using Vec = std::vector<double>;

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Vec embed(const std::string& text) const = 0;
    virtual std::size_t dimension() const = 0;
};

// Hashed signed bag-of-tokens, L2-normalized. Tokens split on whitespace;
// each token adds +/-1 (sign from its hash) to a hashed coordinate. Empty or
// fully cancelled inputs map to the first basis vector. dim < 8 is a domain
// error.
std::unique_ptr<Embedder> default_embedder(std::size_t dim, std::uint64_t seed);

double cosine_similarity(const Vec& a, const Vec& b);

// Mean over points of the mean cosine similarity to their k nearest
// neighbours (self excluded, ties by lower index). Requires at least k+1
// points, k >= 1.
double sr_at_k(const std::vector<Vec>& points, int k);

// Energy distance
//   2/(mn) sum||x-y|| - 1/m^2 sum||x-x'|| - 1/n^2 sum||y-y'||
// with self-pairs included in the within-set sums. Empty sets or mixed
// dimensions are domain errors.
double energy_distance(const std::vector<Vec>& x, const std::vector<Vec>& y);

// energy_distance normalized by the mean pairwise distance within x over
// distinct pairs. |x| < 2 or an all-identical x is a domain error.
double ed_rel(const std::vector<Vec>& x, const std::vector<Vec>& y);

// Per synth point, the maximum cosine similarity against ref, binned over
// [0, 1] (values clamped; 1.0 lands in the last bin). Counts sum to |synth|.
std::vector<long long> max_similarity_distribution(const std::vector<Vec>& synth,
                                                   const std::vector<Vec>& ref,
                                                   int bins);

}  // namespace coevolve
