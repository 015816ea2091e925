#include "fairagg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fairagg {
namespace {

double sample_beta(SplitMix64& rng, std::array<double, 2> shape) {
    std::gamma_distribution<double> ga(shape[0], 1.0);
    std::gamma_distribution<double> gb(shape[1], 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

int sample_categorical(double u, const Eigen::VectorXd& probs) {
    double cumulative = 0.0;
    for (Eigen::Index k = 0; k + 1 < probs.size(); ++k) {
        cumulative += probs[k];
        if (u < cumulative) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size() - 1);
}

double cell_uniform(std::uint64_t root, Stream stream, int i, int j) {
    SplitMix64 rng(substream_seed(root, stream, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)));
    return rng.uniform();
}

ConfusionMatrix sample_voter_confusion(const GenSpec& spec, int voter) {
    SplitMix64 rng(substream_seed(spec.seed, Stream::voter, static_cast<std::uint64_t>(voter)));
    ConfusionMatrix pi(2, 2);
    pi(0, 0) = sample_beta(rng, spec.diag_beta);
    pi(1, 1) = sample_beta(rng, spec.diag_beta);
    pi(0, 1) = 1.0 - pi(0, 0);
    pi(1, 0) = 1.0 - pi(1, 1);
    return pi;
}

SoftLabels sample_soft_labels(const GenSpec& spec) {
    SoftLabels z(spec.num_tasks, 2);
    for (int j = 0; j < spec.num_tasks; ++j) {
        SplitMix64 rng(substream_seed(spec.seed, Stream::task, static_cast<std::uint64_t>(j)));
        z(j, 0) = sample_beta(rng, spec.z_beta);
        z(j, 1) = 1.0 - z(j, 0);
    }
    return z;
}

/// Draws every (i, j) label from confusions[i]^T z_j.
LabelMatrix sample_labels(const GenSpec& spec, const std::vector<ConfusionMatrix>& confusions, const SoftLabels& z) {
    const int voters = static_cast<int>(confusions.size());
    std::vector<Observation> obs;
    obs.reserve(static_cast<std::size_t>(voters) * static_cast<std::size_t>(spec.num_tasks));
    for (int j = 0; j < spec.num_tasks; ++j) {
        for (int i = 0; i < voters; ++i) {
            const Eigen::VectorXd probs = confusions[static_cast<std::size_t>(i)].transpose() * z.row(j).transpose();
            obs.push_back({i, j, sample_categorical(cell_uniform(spec.seed, Stream::label, i, j), probs)});
        }
    }
    return LabelMatrix(voters, spec.num_tasks, spec.num_classes, std::move(obs));
}

AttributeTable attributes_by_index(const GenSpec& spec, int extra_voters) {
    std::vector<int> attrs(static_cast<std::size_t>(spec.num_normal_voters() + extra_voters), 0);
    for (int i = spec.num_voters_per_attr[0]; i < spec.num_normal_voters(); ++i) attrs[static_cast<std::size_t>(i)] = 1;
    return AttributeTable(std::move(attrs));
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t root, Stream stream, std::uint64_t a, std::uint64_t b) {
    SplitMix64 h(root);
    std::uint64_t s = h() ^ (static_cast<std::uint64_t>(stream) * 0xD6E8FEB86659FD93ULL);
    s = SplitMix64(s)() ^ (a * 0xA0761D6478BD642FULL);
    s = SplitMix64(s)() ^ (b * 0xE7037ED1A0B428DBULL);
    return SplitMix64(s)();
}

void GenSpec::validate() const {
    if (num_voters_per_attr[0] < 0 || num_voters_per_attr[1] < 0 || num_normal_voters() == 0) {
        throw ConfigError("generator needs at least one voter");
    }
    if (num_tasks < 1) throw ConfigError("generator needs at least one task");
    if (num_classes != 2) throw ConfigError("Beta-based generators require exactly 2 classes");
    if (num_spammers < 0) throw ConfigError("number of spammers must be non-negative");
    for (double s : {diag_beta[0], diag_beta[1], z_beta[0], z_beta[1]}) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("Beta shape parameters must be positive");
    }
    if (group_matrices) {
        for (const auto& p : *group_matrices) {
            if (p.rows() != num_classes || p.cols() != num_classes || !is_row_stochastic(p)) {
                throw ConfigError("group matrices must be row-stochastic K x K");
            }
        }
    }
}

GroundTruthBundle gen_softds_data(const GenSpec& spec) {
    spec.validate();
    GroundTruthBundle bundle;
    bundle.true_soft = sample_soft_labels(spec);
    for (int i = 0; i < spec.num_normal_voters(); ++i) bundle.true_confusions.push_back(sample_voter_confusion(spec, i));
    bundle.individual_confusions = bundle.true_confusions;
    bundle.labels = sample_labels(spec, bundle.true_confusions, bundle.true_soft);
    bundle.attrs = attributes_by_index(spec, 0);
    return bundle;
}

GroundTruthBundle gen_spammer_data(const GenSpec& spec) {
    spec.validate();
    GroundTruthBundle bundle;
    bundle.true_soft = sample_soft_labels(spec);
    for (int i = 0; i < spec.num_normal_voters(); ++i) bundle.true_confusions.push_back(sample_voter_confusion(spec, i));
    const ConfusionMatrix spammer = ConfusionMatrix::Constant(spec.num_classes, spec.num_classes, 1.0 / spec.num_classes);
    bundle.true_confusions.insert(bundle.true_confusions.end(), static_cast<std::size_t>(spec.num_spammers), spammer);
    bundle.individual_confusions = bundle.true_confusions;
    bundle.labels = sample_labels(spec, bundle.true_confusions, bundle.true_soft);
    bundle.attrs = attributes_by_index(spec, spec.num_spammers);
    return bundle;
}

GroundTruthBundle gen_biased_data(const GenSpec& spec) {
    if (!spec.group_matrices) throw ConfigError("attribute-biased generation needs group matrices");
    spec.validate();
    GroundTruthBundle bundle;
    bundle.true_soft = sample_soft_labels(spec);
    bundle.attrs = attributes_by_index(spec, 0);
    for (int i = 0; i < spec.num_normal_voters(); ++i) {
        auto pi = sample_voter_confusion(spec, i);
        bundle.true_confusions.push_back(0.5 * (pi + (*spec.group_matrices)[static_cast<std::size_t>(bundle.attrs[i])]));
        bundle.individual_confusions.push_back(std::move(pi));
    }
    bundle.labels = sample_labels(spec, bundle.true_confusions, bundle.true_soft);
    return bundle;
}

LabelMatrix flip_labels(const LabelMatrix& data, const AttributeTable& attrs, std::array<int, 2> class_for_attr,
                        double flip_rate, std::uint64_t seed) {
    validate(data, attrs);
    if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) throw DomainError("flip rate must lie in [0, 1]");
    for (int c : class_for_attr) {
        if (c < 0 || c >= data.num_classes()) throw DomainError("preferred class out of range");
    }
    std::vector<Observation> obs(data.observations().begin(), data.observations().end());
    for (auto& o : obs) {
        // the same uniform is reused across flip rates, so flips are nested in r
        if (cell_uniform(seed, Stream::flip, o.voter, o.task) < flip_rate) {
            o.label = class_for_attr[static_cast<std::size_t>(attrs[o.voter])];
        }
    }
    return LabelMatrix(data.num_voters(), data.num_tasks(), data.num_classes(), std::move(obs), data.voter_ids(),
                       data.task_ids());
}

std::pair<LabelMatrix, AttributeTable> subsample_voters(const LabelMatrix& data, const AttributeTable& attrs,
                                                         std::array<double, 2> keep_fraction, std::uint64_t seed) {
    validate(data, attrs);
    std::vector<char> keep(static_cast<std::size_t>(data.num_voters()), 0);
    for (int a = 0; a < 2; ++a) {
        const double fraction = keep_fraction[static_cast<std::size_t>(a)];
        if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("keep fractions must lie in (0, 1]");
        std::vector<int> group;
        for (int i = 0; i < attrs.size(); ++i) {
            if (attrs[i] == a) group.push_back(i);
        }
        if (group.empty()) continue;
        const auto kept = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(group.size())));
        if (kept == 0) throw DomainError("subsampling leaves attribute group " + std::to_string(a) + " without voters");
        SplitMix64 rng(substream_seed(seed, Stream::subsample, static_cast<std::uint64_t>(a)));
        // Fisher-Yates prefix
        for (std::size_t n = 0; n < kept; ++n) {
            const auto span = static_cast<std::uint64_t>(group.size() - n);
            const auto pick = n + static_cast<std::size_t>(rng() % span);
            std::swap(group[n], group[pick]);
        }
        for (std::size_t n = 0; n < kept; ++n) keep[static_cast<std::size_t>(group[n])] = 1;
    }

    std::vector<int> new_index(static_cast<std::size_t>(data.num_voters()), -1);
    std::vector<std::string> voter_ids;
    std::vector<int> new_attrs;
    for (int i = 0; i < data.num_voters(); ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;
        new_index[static_cast<std::size_t>(i)] = static_cast<int>(voter_ids.size());
        voter_ids.push_back(data.voter_ids()[static_cast<std::size_t>(i)]);
        new_attrs.push_back(attrs[i]);
    }
    std::vector<Observation> obs;
    for (const auto& o : data.observations()) {
        const int v = new_index[static_cast<std::size_t>(o.voter)];
        if (v >= 0) obs.push_back({v, o.task, o.label});
    }
    const auto num_voters = static_cast<int>(voter_ids.size());
    LabelMatrix sub(num_voters, data.num_tasks(), data.num_classes(), std::move(obs), std::move(voter_ids),
                    data.task_ids());
    return {std::move(sub), AttributeTable(std::move(new_attrs), attrs.ideal_dist)};
}

}  // namespace fairagg
