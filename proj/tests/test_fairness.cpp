#include "fairagg/fairness.hpp"
#include "fairagg/metrics.hpp"
#include "fairagg/synthgen.hpp"
#include "support.hpp"

#include <doctest.h>

#include <limits>
#include <map>

using namespace fairagg;
using namespace fairagg::testing;

namespace {

// voters 0..n0-1 have attribute 0, the rest attribute 1; all label task 0
std::pair<LabelMatrix, AttributeTable> one_task(const std::vector<int>& labels0, const std::vector<int>& labels1) {
    std::vector<Observation> obs;
    std::vector<int> attrs;
    for (int l : labels0) {
        obs.push_back({static_cast<int>(attrs.size()), 0, l});
        attrs.push_back(0);
    }
    for (int l : labels1) {
        obs.push_back({static_cast<int>(attrs.size()), 0, l});
        attrs.push_back(1);
    }
    const int n = static_cast<int>(attrs.size());
    return {LabelMatrix(n, 1, 2, obs), AttributeTable(attrs)};
}

std::vector<double> task_weights(const WeightedLabels& w, int task) {
    std::vector<double> out;
    const auto begin = w.labels().task_offset(task);
    for (std::size_t e = begin; e < begin + w.labels().task_observations(task).size(); ++e) out.push_back(w.weight(e));
    return out;
}

GenSpec biased_spec(std::array<int, 2> voters, int tasks, const ConfusionMatrix& p0, const ConfusionMatrix& p1,
                    std::uint64_t seed) {
    GenSpec g;
    g.num_voters_per_attr = voters;
    g.num_tasks = tasks;
    g.group_matrices = std::array<ConfusionMatrix, 2>{p0, p1};
    g.seed = seed;
    return g;
}

}  // namespace

TEST_CASE("balanced task gets unit weights") {
    const auto [m, a] = one_task({0, 1}, {1, 0});
    for (double w : task_weights(sample_weights(m, a), 0)) CHECK(w == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("three to one task") {
    const auto [m, a] = one_task({0, 0, 1}, {1});
    const auto w = task_weights(sample_weights(m, a), 0);
    for (int e = 0; e < 3; ++e) CHECK(std::abs(w[static_cast<std::size_t>(e)] - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(w[3] - 2.0) < 1e-15);
}

TEST_CASE("single-attribute task gets unit weights") {
    const LabelMatrix m(3, 1, 2, {{0, 0, 0}, {1, 0, 1}});
    const auto w = task_weights(sample_weights(m, AttributeTable({0, 0, 1})), 0);
    CHECK(w == std::vector<double>{1.0, 1.0});
}

TEST_CASE("weights sum to the label count of each task") {
    Rng rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        const int voters = uniform_int(rng, 2, 15);
        const auto m = random_labels(rng, voters, uniform_int(rng, 1, 20), uniform_int(rng, 2, 4), 0.5);
        const double p = uniform(rng, 0.05, 0.95);
        const auto w = sample_weights(m, random_attrs(rng, voters, {p, 1.0 - p}));
        for (int j = 0; j < m.num_tasks(); ++j) {
            double total = 0.0;
            for (double x : task_weights(w, j)) total += x;
            CHECK(std::abs(total - m.task_count(j)) <= 1e-12);
        }
    }
}

TEST_CASE("weighted MV of the three to one task") {
    const auto [m, a] = one_task({0, 0, 0}, {1});
    const auto z = weighted_mv(m, a);
    CHECK(std::abs(z(0, 0) - 0.5) < 1e-14);
}

TEST_CASE("splitting with equal split estimates returns that estimate") {
    Rng rng(2);
    const AttributeTable attrs({0, 1, 0, 1});
    const auto m = covering_labels(rng, attrs, 6, 3, 0.5);
    const SoftLabels fixed = random_stochastic(rng, 6, 3);
    std::map<std::string, int> index;
    for (int j = 0; j < 6; ++j) index[m.task_ids()[static_cast<std::size_t>(j)]] = j;
    Aggregator model = [&](const WeightedLabels& w) {
        SoftLabels z(w.num_tasks(), 3);
        for (int t = 0; t < w.num_tasks(); ++t) z.row(t) = fixed.row(index.at(w.labels().task_ids()[static_cast<std::size_t>(t)]));
        return z;
    };
    const auto r = split_aggregate(m, attrs, model);
    CHECK((r.soft_labels - fixed).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(r.warnings.empty());
}

TEST_CASE("splitting opposed groups gives the midpoint") {
    const auto [m, a] = one_task({0, 0}, {1});
    const auto r = split_aggregate(m, a, mv_aggregate);
    CHECK(r.soft_labels.row(0).isApprox(Eigen::RowVector2d(0.5, 0.5)));
}

TEST_CASE("splitting with MV equals weighted MV") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const double p = uniform(rng, 0.05, 0.95);
        const auto attrs = random_attrs(rng, uniform_int(rng, 2, 12), {p, 1.0 - p});
        const auto m = covering_labels(rng, attrs, uniform_int(rng, 1, 15), uniform_int(rng, 2, 4), 0.5);
        const auto split = split_aggregate(m, attrs, mv_aggregate);
        CHECK((split.soft_labels - weighted_mv(m, attrs)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("task missing from one split falls back with a warning") {
    // task 1 only has a label from attribute 0
    const LabelMatrix m(2, 2, 2, {{0, 0, 0}, {1, 0, 1}, {0, 1, 1}});
    const auto r = split_aggregate(m, AttributeTable({0, 1}), mv_aggregate);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].task == 1);
    CHECK(r.warnings[0].missing_attribute == 1);
    CHECK(r.soft_labels.row(1).isApprox(Eigen::RowVector2d(0, 1)));
    CHECK(r.soft_labels.row(0).isApprox(Eigen::RowVector2d(0.5, 0.5)));
}

TEST_CASE("groupanno_combine") {
    Eigen::Matrix2d pi;
    pi << 0.7, 0.3, 0.2, 0.8;
    CHECK(groupanno_combine(pi, pi).isApprox(pi));
    Eigen::Matrix2d expected;
    expected << 0.75, 0.25, 0.25, 0.75;
    CHECK(groupanno_combine(Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Constant(0.5)).isApprox(expected));
    Rng rng(4);
    for (int rep = 0; rep < 50; ++rep) {
        const int k = uniform_int(rng, 2, 5);
        CHECK(is_row_stochastic(groupanno_combine(random_stochastic(rng, k, k), random_stochastic(rng, k, k))));
    }
}

TEST_CASE("weighted MV is unbiased for the ideal mixture") {
    // each task: n0 labels from Z0, n1 labels from Z1
    Rng rng(5);
    const int tasks = 6, replicates = 2000;
    const std::array<double, 2> ideal{0.5, 0.5};
    std::vector<std::array<int, 2>> counts;
    std::vector<std::array<double, 2>> z1;
    for (int j = 0; j < tasks; ++j) {
        const int n0 = std::vector<int>{5, 3, 9, 2, 4, 6}[static_cast<std::size_t>(j)];
        const int n1 = std::vector<int>{5, 9, 1, 6, 4, 2}[static_cast<std::size_t>(j)];
        counts.push_back({n0, n1});
        z1.push_back({uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9)});
    }
    std::vector<int> attrs;
    std::vector<std::pair<int, int>> slots;  // (voter, task)
    int voter = 0;
    for (int j = 0; j < tasks; ++j) {
        for (int a = 0; a < 2; ++a) {
            for (int n = 0; n < counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)]; ++n) {
                attrs.push_back(a);
                slots.push_back({voter++, j});
            }
        }
    }
    const AttributeTable table(attrs, ideal);
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(tasks), sum_sq = Eigen::ArrayXd::Zero(tasks);
    for (int r = 0; r < replicates; ++r) {
        std::vector<Observation> obs;
        for (const auto& [v, j] : slots) {
            const double p = z1[static_cast<std::size_t>(j)][static_cast<std::size_t>(attrs[static_cast<std::size_t>(v)])];
            obs.push_back({v, j, uniform(rng) < p ? 0 : 1});
        }
        const auto z = weighted_mv(LabelMatrix(voter, tasks, 2, obs), table);
        sum += z.col(0).array();
        sum_sq += z.col(0).array().square();
    }
    for (int j = 0; j < tasks; ++j) {
        const double mean = sum[j] / replicates;
        const double se = std::sqrt((sum_sq[j] / replicates - mean * mean) / (replicates - 1));
        const double target = ideal[0] * z1[static_cast<std::size_t>(j)][0] + ideal[1] * z1[static_cast<std::size_t>(j)][1];
        CHECK(std::abs(mean - target) <= 3.0 * se);
    }
}

// ---------------------------------------------------------------------------
// GroupAnno

TEST_CASE("GroupAnno with uniform P and D&S is EM on the mixed confusions") {
    Rng rng(6);
    for (int rep = 0; rep < 5; ++rep) {
        const auto attrs = random_attrs(rng, 8);
        const auto m = covering_labels(rng, attrs, 12, 2, 0.7);
        GroupAnnoOptions opts;
        opts.update_group = false;
        opts.tol = 1e-9;
        opts.max_iter = 2000;
        const auto r = groupanno_fit(m, attrs, BaseModel::dawid_skene, DirichletHyper::flat(2),
                                     GroupAnnoOutput::converged, opts);
        const Eigen::Matrix2d uniform_p = Eigen::Matrix2d::Constant(0.5);
        for (const auto& g : r.state.group) CHECK(g.isApprox(uniform_p));
        for (std::size_t i = 0; i < r.state.individual.size(); ++i) {
            CHECK(r.state.effective[i].isApprox(groupanno_combine(r.state.individual[i], uniform_p)));
        }
        // converged q is the E-step of the mixed confusions
        const auto q = ds_e_step(r.state.effective, r.prior, WeightedLabels::unit(m));
        CHECK((q - r.soft_labels).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("GroupAnno with uniform P and Soft D&S matches direct maximization") {
    Rng rng(7);
    for (int rep = 0; rep < 3; ++rep) {
        const auto attrs = random_attrs(rng, 5);
        const auto m = covering_labels(rng, attrs, 8, 2, 0.8);
        const auto data = WeightedLabels::unit(m);
        GroupAnnoOptions opts;
        opts.update_group = false;
        opts.tol = 1e-12;
        opts.max_iter = 2000;
        const auto r = groupanno_fit(m, attrs, BaseModel::soft_dawid_skene, DirichletHyper::flat(2),
                                     GroupAnnoOutput::converged, opts);
        const Eigen::Matrix2d uniform_p = Eigen::Matrix2d::Constant(0.5);
        // each voter's pi is a grid maximizer of its likelihood under (pi + U) / 2
        for (int i = 0; i < m.num_voters(); ++i) {
            const auto at = [&](double a, double b) {
                ConfusionMatrix pi(2, 2);
                pi << a, 1 - a, b, 1 - b;
                return detail::voter_likelihood(data, i, groupanno_combine(pi, uniform_p), r.soft_labels, nullptr);
            };
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a <= 100; ++a) {
                for (int b = 0; b <= 100; ++b) best = std::max(best, at(a / 100.0, b / 100.0));
            }
            const auto& pi = r.state.individual[static_cast<std::size_t>(i)];
            CHECK(at(pi(0, 0), pi(1, 0)) >= best - 1e-6);
        }
        // and Z does not move under another soft-label update
        SimplexOptions inner;
        inner.ftol = 1e-15;
        const auto z = detail::update_soft_labels(data, r.state.effective, r.soft_labels, Eigen::Vector2d::Ones(), inner);
        CHECK((z - r.soft_labels).cwiseAbs().maxCoeff() <= 1e-4);
    }
}

TEST_CASE("GroupAnno effective matrices stay row-stochastic") {
    Rng rng(8);
    const auto attrs = random_attrs(rng, 6);
    const auto m = covering_labels(rng, attrs, 10, 3, 0.6);
    for (auto base : {BaseModel::dawid_skene, BaseModel::soft_dawid_skene}) {
        for (int iters = 1; iters <= 8; ++iters) {
            GroupAnnoOptions opts;
            opts.max_iter = iters;
            const auto r = groupanno_fit(m, attrs, base, DirichletHyper::flat(3), GroupAnnoOutput::converged, opts);
            for (const auto& e : r.state.effective) CHECK(is_row_stochastic(e));
            for (const auto& g : r.state.group) CHECK(is_row_stochastic(g));
            CHECK(is_row_stochastic(r.soft_labels));
        }
    }
}

// Known to fail: with a shared P, option 2 swaps every voter's confusion for
// the group average, which by itself moves Z (option 2 wins by about 0.13 MAE).
TEST_CASE("GroupAnno options agree when both groups share P" * doctest::should_fail()) {
    // paired two-sided t-test on per-seed MAE, 20 seeds
    Eigen::Matrix2d p;
    p << 0.8, 0.2, 0.2, 0.8;
    const int seeds = 20;
    Eigen::ArrayXd diff(seeds);
    for (int s = 0; s < seeds; ++s) {
        const auto b = gen_biased_data(biased_spec({10, 10}, 30, p, p, static_cast<std::uint64_t>(s)));
        const auto h = DirichletHyper::flat(2);
        const auto r1 = groupanno_fit(b.labels, b.attrs, BaseModel::soft_dawid_skene, h, GroupAnnoOutput::converged);
        const auto r2 = groupanno_fit(b.labels, b.attrs, BaseModel::soft_dawid_skene, h,
                                      GroupAnnoOutput::group_confusion_reweighted);
        diff[s] = mae(r1.soft_labels, b.true_soft) - mae(r2.soft_labels, b.true_soft);
    }
    const double mean = diff.mean();
    const double se = std::sqrt((diff - mean).square().sum() / (seeds - 1) / seeds);
    MESSAGE("mean MAE difference " << mean << ", se " << se);
    CHECK(std::abs(mean) <= 2.093 * se);  // t(19) 97.5% quantile
}

TEST_CASE("GroupAnno option 1 is close to Soft D&S on biased data") {
    Eigen::Matrix2d p0, p1;
    p0 << 1, 0, 1, 0;
    p1 << 0, 1, 0, 1;
    double total = 0.0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        const auto b = gen_biased_data(biased_spec({20, 40}, 60, p0, p1, static_cast<std::uint64_t>(s)));
        const auto h = DirichletHyper::flat(2);
        const auto ga = groupanno_fit(b.labels, b.attrs, BaseModel::soft_dawid_skene, h, GroupAnnoOutput::converged);
        const auto sd = soft_ds_fit(WeightedLabels::unit(b.labels), h);
        total += mae(ga.soft_labels, b.true_soft) - mae(sd.state.posteriors, b.true_soft);
    }
    MESSAGE("mean MAE(GroupAnno 1) - MAE(Soft D&S) = " << total / seeds);
    CHECK(std::abs(total / seeds) <= 0.03);
}
