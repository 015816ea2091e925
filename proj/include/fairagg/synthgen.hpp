#pragma once

// Seeded generators for synthetic and semi-synthetic experiments.
//
// Randomness is organized in counter-based substreams derived from one root
// seed: voter parameters use stream (kVoterStream, i), task soft labels use
// (kTaskStream, j) and each label uses (kLabelStream, i, j). Changing the
// number of tasks therefore leaves every voter's parameters untouched, and
// changing the number of voters leaves every task's soft label untouched.

#include "fairagg/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <utility>

namespace fairagg {

/// SplitMix64; a UniformRandomBitGenerator usable with <random> distributions.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

enum class Stream : std::uint64_t {
    voter = 1,
    task = 2,
    label = 3,
    flip = 4,
    subsample = 5,
};

/// Seed of substream (stream, a, b) under `root`.
std::uint64_t substream_seed(std::uint64_t root, Stream stream, std::uint64_t a, std::uint64_t b = 0);

struct GenSpec {
    std::array<int, 2> num_voters_per_attr{1000, 0};
    int num_tasks = 100;
    int num_classes = 2;
    std::array<double, 2> diag_beta{18.0, 2.0};
    std::array<double, 2> z_beta{10.0, 10.0};
    std::optional<std::array<ConfusionMatrix, 2>> group_matrices;
    int num_spammers = 0;
    std::uint64_t seed = 0;

    int num_normal_voters() const { return num_voters_per_attr[0] + num_voters_per_attr[1]; }
    /// Throws ConfigError on invalid sizes or shapes.
    void validate() const;
};

struct GroundTruthBundle {
    LabelMatrix labels;
    AttributeTable attrs;
    SoftLabels true_soft;
    /// Matrices the labels were actually drawn from (pi, or pi-tilde for
    /// attribute-biased data).
    std::vector<ConfusionMatrix> true_confusions;
    /// Individual pi^(i) before group mixing; equals true_confusions when no
    /// group matrices are involved.
    std::vector<ConfusionMatrix> individual_confusions;
};

/// Every (i, j) observed, X_ij ~ Categorical(pi^(i)^T Z_j), pi diagonals ~
/// Beta(diag_beta), Z_j1 ~ Beta(z_beta). The first I^(0) voters get a = 0.
GroundTruthBundle gen_softds_data(const GenSpec& spec);

/// gen_softds_data plus `num_spammers` voters whose confusion is all 1/K.
GroundTruthBundle gen_spammer_data(const GenSpec& spec);

/// Labels drawn from pi-tilde = (pi^(i) + P^(a_i)) / 2.
GroundTruthBundle gen_biased_data(const GenSpec& spec);

/// With probability `flip_rate` each label is replaced by the class preferred
/// by the voter's attribute (0-based `class_for_attr[a]`), otherwise kept.
LabelMatrix flip_labels(const LabelMatrix& data, const AttributeTable& attrs, std::array<int, 2> class_for_attr,
                        double flip_rate, std::uint64_t seed);

/// Keeps round(fraction * n_a) uniformly chosen voters of each attribute
/// group and reindexes voters densely (tasks keep their indices).
std::pair<LabelMatrix, AttributeTable> subsample_voters(const LabelMatrix& data, const AttributeTable& attrs,
                                                         std::array<double, 2> keep_fraction, std::uint64_t seed);

}  // namespace fairagg
