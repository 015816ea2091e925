// Acceptance suite: one PASS/FAIL line per criterion, details indented below.

#include "fairagg/aggregation.hpp"
#include "fairagg/fairness.hpp"
#include "fairagg/metrics.hpp"
#include "fairagg/pipeline.hpp"
#include "fairagg/synthgen.hpp"
#include "support.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

using namespace fairagg;
using namespace fairagg::testing;

namespace {

// ---- pinned tolerances ----------------------------------------------------
constexpr int kSeeds1 = 10;
constexpr double kMvLow = 0.015, kMvHigh = 0.03, kDsMin = 0.3;
constexpr double kSharpTol = 1e-6;
constexpr int kReplicates3 = 2000, kTasks3 = 10;
constexpr double kSe3 = 3.0;
constexpr int kInstances4 = 50;
constexpr double kTol4 = 1e-12;
constexpr int kSeeds5 = 20, kSeeds6 = 20, kSeeds7 = 10;
constexpr double kAlphaLevel = 0.05;
constexpr double kBias7 = 0.02;
constexpr int kInstances8 = 20;
constexpr double kGridTol8 = 0.05;
constexpr int kInstances9 = 100;
constexpr double kMonotoneTol = 1e-9;
constexpr int kPoints10 = 100;
constexpr double kFdStep = 1e-6, kFdTol = 1e-4;

DirichletHyper peaked_prior() {
    Eigen::MatrixXd a(2, 2);
    a << 4, 1, 1, 4;
    return DirichletHyper(a, Eigen::Vector2d::Ones());
}

std::array<ConfusionMatrix, 2> paper_groups() {
    Eigen::Matrix2d p0, p1;
    p0 << 1, 0, 1, 0;
    p1 << 0, 1, 0, 1;
    return {p0, p1};
}

struct Stats {
    double mean = 0.0, se = 0.0;
};

Stats stats(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double m = 0.0;
    for (double v : x) m += v;
    m /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {m, std::sqrt(ss / (n - 1) / n)};
}

// one-sided p-value of H1: mean > 0
double p_greater(const std::vector<double>& diff) {
    const auto s = stats(diff);
    if (s.se == 0.0) return s.mean > 0.0 ? 0.0 : 1.0;
    boost::math::students_t dist(static_cast<double>(diff.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, s.mean / s.se));
}

double mae_of(const LabelMatrix& labels, const AttributeTable& attrs, ModelKind model, FairnessOption option,
              const ModelSettings& settings, const SoftLabels& truth) {
    return mae(aggregate(labels, &attrs, model, option, settings).soft_labels, truth);
}

struct Verdict {
    bool pass = false;
    std::vector<std::string> details;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// ---- criteria -------------------------------------------------------------

Verdict table1() {
    ModelSettings st;
    st.hyper = peaked_prior();
    std::vector<double> mv, sd, ds;
    for (int s = 0; s < kSeeds1; ++s) {
        GenSpec g;
        g.num_voters_per_attr = {1000, 0};
        g.num_tasks = 100;
        g.seed = static_cast<std::uint64_t>(s);
        const auto b = gen_softds_data(g);
        mv.push_back(mae_of(b.labels, b.attrs, ModelKind::mv, FairnessOption::none, st, b.true_soft));
        sd.push_back(mae_of(b.labels, b.attrs, ModelKind::soft_ds, FairnessOption::none, st, b.true_soft));
        ds.push_back(mae_of(b.labels, b.attrs, ModelKind::ds, FairnessOption::none, st, b.true_soft));
    }
    const double m = stats(mv).mean, s = stats(sd).mean, d = stats(ds).mean;
    return {m >= kMvLow && m <= kMvHigh && s < m && d > kDsMin,
            {fmt("mean MAE over %g seeds: MV %.4f, Soft D&S %.4f, D&S %.4f", kSeeds1, m, s, d)}};
}

Verdict sharpness() {
    std::vector<Observation> obs;
    for (int i = 0; i < 10; ++i) obs.push_back({i, 0, i < 6 ? 0 : 1});
    ConfusionMatrix pi(2, 2);
    pi << 0.9, 0.1, 0.1, 0.9;
    const std::vector<ConfusionMatrix> conf(10, pi);
    const auto q = ds_e_step(conf, Eigen::Vector2d(0.5, 0.5), WeightedLabels::unit(LabelMatrix(10, 1, 2, obs)));
    const double e0 = 0.987804878048780, e1 = 0.012195121951220;
    return {std::abs(q(0, 0) - e0) <= kSharpTol && std::abs(q(0, 1) - e1) <= kSharpTol,
            {fmt("q = (%.9f, %.9f)", q(0, 0), q(0, 1))}};
}

Verdict unbiasedness() {
    Verdict v{true, {}};
    Rng rng(2024);
    for (int ratio : {1, 3, 9}) {
        // per task: n0 voters of attribute 0, ratio * n0 of attribute 1
        const std::array<double, 2> ideal{0.5, 0.5};
        std::vector<int> attrs;
        std::vector<std::pair<int, int>> slots;
        std::vector<std::array<double, 2>> z1(kTasks3);
        for (int j = 0; j < kTasks3; ++j) {
            z1[static_cast<std::size_t>(j)] = {uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)};
            const int n0 = uniform_int(rng, 1, 4);
            for (int a = 0; a < 2; ++a) {
                for (int n = 0; n < (a == 0 ? n0 : ratio * n0); ++n) {
                    slots.push_back({static_cast<int>(attrs.size()), j});
                    attrs.push_back(a);
                }
            }
        }
        const int voters = static_cast<int>(attrs.size());
        const AttributeTable table(attrs, ideal);
        Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(kTasks3, 2), sq = Eigen::ArrayXXd::Zero(kTasks3, 2);
        for (int r = 0; r < kReplicates3; ++r) {
            std::vector<Observation> obs;
            for (const auto& [i, j] : slots) {
                const double p = z1[static_cast<std::size_t>(j)][static_cast<std::size_t>(attrs[static_cast<std::size_t>(i)])];
                obs.push_back({i, j, uniform(rng) < p ? 0 : 1});
            }
            const auto z = weighted_mv(LabelMatrix(voters, kTasks3, 2, obs), table);
            sum += z.array();
            sq += z.array().square();
        }
        double worst = 0.0;
        for (int j = 0; j < kTasks3; ++j) {
            for (int c = 0; c < 2; ++c) {
                const double mean = sum(j, c) / kReplicates3;
                const double se = std::sqrt(std::max(0.0, sq(j, c) / kReplicates3 - mean * mean) / (kReplicates3 - 1));
                const double t0 = z1[static_cast<std::size_t>(j)][0], t1 = z1[static_cast<std::size_t>(j)][1];
                const double target = c == 0 ? ideal[0] * t0 + ideal[1] * t1 : ideal[0] * (1 - t0) + ideal[1] * (1 - t1);
                const double score = std::abs(mean - target) / se;
                worst = std::max(worst, score);
                if (score > kSe3) v.pass = false;
            }
        }
        v.details.push_back(fmt("imbalance 1:%g, worst |mean - target| / se = %.2f", ratio, worst));
    }
    return v;
}

Verdict split_equivalence() {
    Rng rng(7);
    double worst = 0.0;
    for (int n = 0; n < kInstances4; ++n) {
        const double p = uniform(rng, 0.05, 0.95);
        const auto attrs = random_attrs(rng, uniform_int(rng, 2, 30), {p, 1.0 - p});
        const auto m = covering_labels(rng, attrs, uniform_int(rng, 1, 40), uniform_int(rng, 2, 5), 0.4);
        const auto split = split_aggregate(m, attrs, mv_aggregate).soft_labels;
        worst = std::max(worst, (split - weighted_mv(m, attrs)).cwiseAbs().maxCoeff());
    }
    return {worst <= kTol4, {fmt("max entrywise difference %.3g over %g instances", worst, kInstances4)}};
}

Verdict spammers() {
    ModelSettings st;
    st.hyper = peaked_prior();
    const std::vector<int> counts{0, 50, 200, 500};
    std::vector<std::vector<double>> mv(counts.size()), sd(counts.size());
    for (int s = 0; s < kSeeds5; ++s) {
        for (std::size_t c = 0; c < counts.size(); ++c) {
            GenSpec g;
            g.num_voters_per_attr = {200, 0};
            g.num_tasks = 300;
            g.num_spammers = counts[c];
            g.seed = static_cast<std::uint64_t>(s);
            const auto b = gen_spammer_data(g);
            mv[c].push_back(mae_of(b.labels, b.attrs, ModelKind::mv, FairnessOption::none, st, b.true_soft));
            sd[c].push_back(mae_of(b.labels, b.attrs, ModelKind::soft_ds, FairnessOption::none, st, b.true_soft));
        }
    }
    Verdict v;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        v.details.push_back(fmt("%g spammers: mean MAE MV %.4f, Soft D&S %.4f", counts[c], stats(mv[c]).mean, stats(sd[c]).mean));
    }
    std::vector<double> diff;
    for (int s = 0; s < kSeeds5; ++s) {
        const auto u = static_cast<std::size_t>(s);
        diff.push_back((mv.back()[u] - mv.front()[u]) - (sd.back()[u] - sd.front()[u]));
    }
    const double p = p_greater(diff);
    const auto st5 = stats(diff);
    v.details.push_back(fmt("increase 0->500: MV minus Soft D&S = %.5f (se %.5f), one-sided p = %.4f", st5.mean, st5.se, p));
    v.pass = p < kAlphaLevel;
    return v;
}

Verdict fairness_synthetic() {
    ModelSettings st;  // flat prior
    Verdict v{true, {}};
    std::vector<double> diff100;
    double wmv300 = 0.0, split300 = 0.0;
    for (int s = 0; s < kSeeds6; ++s) {
        for (int tasks : {100, 300}) {
            GenSpec g;
            g.num_voters_per_attr = {200, 400};
            g.num_tasks = tasks;
            g.group_matrices = paper_groups();
            g.seed = static_cast<std::uint64_t>(s);
            const auto b = gen_biased_data(g);
            const double wmv = mae_of(b.labels, b.attrs, ModelKind::mv, FairnessOption::weighting, st, b.true_soft);
            if (tasks == 100) {
                diff100.push_back(mae_of(b.labels, b.attrs, ModelKind::mv, FairnessOption::none, st, b.true_soft) - wmv);
            } else {
                wmv300 += wmv / kSeeds6;
                split300 += mae_of(b.labels, b.attrs, ModelKind::soft_ds, FairnessOption::splitting, st, b.true_soft) / kSeeds6;
            }
        }
    }
    const double p = p_greater(diff100);
    v.details.push_back(fmt("J=100: MV minus weighted MV = %.4f, one-sided p = %.4g", stats(diff100).mean, p));
    v.details.push_back(fmt("J=300: mean MAE Soft D&S + splitting %.4f, weighted MV %.4f", split300, wmv300));
    v.pass = p < kAlphaLevel && split300 <= wmv300;
    return v;
}

Verdict flip_surrogate() {
    ModelSettings st;
    st.hyper = peaked_prior();
    const std::vector<double> rates{0.0, 0.5, 1.0};
    std::vector<double> mv_abs(rates.size(), 0.0);
    double worst_wmv = 0.0, worst_split = 0.0;
    for (int s = 0; s < kSeeds7; ++s) {
        GenSpec g;
        g.num_voters_per_attr = {100, 100};
        g.num_tasks = 100;
        g.seed = static_cast<std::uint64_t>(s);
        const auto b = gen_softds_data(g);
        for (std::size_t r = 0; r < rates.size(); ++r) {
            const auto flipped = flip_labels(b.labels, b.attrs, {0, 1}, rates[r], g.seed);
            const auto reference = mv_aggregate(WeightedLabels::unit(flipped));
            const auto [sub, attrs] = subsample_voters(flipped, b.attrs, {1.0, 0.5}, g.seed);
            auto bias_of = [&](ModelKind m, FairnessOption f) {
                return bias(aggregate(sub, &attrs, m, f, st).soft_labels, reference, 0);
            };
            mv_abs[r] += std::abs(bias_of(ModelKind::mv, FairnessOption::none)) / kSeeds7;
            worst_wmv = std::max(worst_wmv, std::abs(bias_of(ModelKind::mv, FairnessOption::weighting)));
            worst_split = std::max(worst_split, std::abs(bias_of(ModelKind::soft_ds, FairnessOption::splitting)));
        }
    }
    bool growing = true;
    for (std::size_t r = 1; r < rates.size(); ++r) growing = growing && mv_abs[r] > mv_abs[r - 1];
    return {growing && worst_wmv <= kBias7 && worst_split <= kBias7,
            {fmt("MV mean |bias| at r = 0, 0.5, 1: %.4f, %.4f, %.4f", mv_abs[0], mv_abs[1], mv_abs[2]),
             fmt("worst |bias|: weighted MV %.4f, Soft D&S + splitting %.4f", worst_wmv, worst_split)}};
}

Verdict grid_oracle() {
    Rng rng(8);
    double worst = 0.0;
    for (int n = 0; n < kInstances8; ++n) {
        Eigen::MatrixXd a(2, 2);
        for (auto& x : a.reshaped()) x = uniform(rng, 1.0, 5.0);
        const Eigen::Vector2d rho(uniform(rng, 1.0, 5.0), uniform(rng, 1.0, 5.0));
        const DirichletHyper hyper(a, rho);
        const std::array<int, 2> labels{uniform_int(rng, 0, 1), uniform_int(rng, 0, 1)};
        const auto data = WeightedLabels::unit(LabelMatrix(2, 1, 2, {{0, 0, labels[0]}, {1, 0, labels[1]}}));
        const double fitted = soft_ds_fit(data, hyper).objective_trace.back();

        // Z on a 0.01 grid; for fixed Z each voter's confusion rows are separable
        const auto ln = [](double x) { return std::log(std::max(x, 1e-12)); };
        double best = -std::numeric_limits<double>::infinity();
        for (int zg = 0; zg <= 100; ++zg) {
            const double z[2] = {zg / 100.0, 1.0 - zg / 100.0};
            double total = (rho[0] - 1) * ln(z[0]) + (rho[1] - 1) * ln(z[1]);
            for (int l : labels) {
                double voter_best = -std::numeric_limits<double>::infinity();
                for (int u = 0; u < 100; ++u) {
                    const double r0 = 0.005 + u * 0.01;  // pi row 1 = (r0, 1 - r0)
                    for (int w = 0; w < 100; ++w) {
                        const double r1 = 0.005 + w * 0.01;  // pi row 2 = (r1, 1 - r1)
                        const double kernel = (a(0, 0) - 1) * ln(r0) + (a(0, 1) - 1) * ln(1 - r0) +
                                              (a(1, 0) - 1) * ln(r1) + (a(1, 1) - 1) * ln(1 - r1);
                        const double p = l == 0 ? r0 * z[0] + r1 * z[1] : (1 - r0) * z[0] + (1 - r1) * z[1];
                        voter_best = std::max(voter_best, kernel + ln(p));
                    }
                }
                total += voter_best;
            }
            best = std::max(best, total);
        }
        worst = std::max(worst, std::abs(fitted - best));
    }
    return {worst <= kGridTol8, {fmt("max |fit - grid| in log posterior: %.4f", worst)}};
}

Verdict monotone() {
    Rng rng(9);
    double worst_ds = 0.0, worst_sd = 0.0;
    for (int n = 0; n < kInstances9; ++n) {
        const int k = uniform_int(rng, 2, 4);
        const auto data = WeightedLabels::unit(random_labels(rng, uniform_int(rng, 2, 10), uniform_int(rng, 2, 20), k, 0.6));
        const auto ds = ds_fit(data);
        for (std::size_t t = 1; t < ds.objective_trace.size(); ++t) {
            worst_ds = std::max(worst_ds, ds.objective_trace[t - 1] - ds.objective_trace[t]);
        }
        Eigen::MatrixXd a(k, k);
        for (auto& x : a.reshaped()) x = uniform(rng, 1.0, 5.0);
        Eigen::VectorXd rho(k);
        for (auto& x : rho) x = uniform(rng, 1.0, 3.0);
        const auto sd = soft_ds_fit(data, DirichletHyper(a, rho));
        for (std::size_t t = 1; t < sd.objective_trace.size(); ++t) {
            worst_sd = std::max(worst_sd, sd.objective_trace[t - 1] - sd.objective_trace[t]);
        }
    }
    return {worst_ds <= kMonotoneTol && worst_sd <= kMonotoneTol,
            {fmt("largest decrease: D&S bound %.3g, Soft D&S posterior %.3g", worst_ds, worst_sd)}};
}

Verdict gradients() {
    Rng rng(10);
    double worst = 0.0;
    for (int n = 0; n < kPoints10; ++n) {
        const int k = uniform_int(rng, 2, 4);
        const auto data = WeightedLabels::unit(random_labels(rng, uniform_int(rng, 1, 5), uniform_int(rng, 1, 5), k, 0.7));
        DsModelState s;
        for (int i = 0; i < data.num_voters(); ++i) s.confusions.push_back(random_stochastic(rng, k, k, 0.05));
        s.posteriors = random_stochastic(rng, data.num_tasks(), k, 0.05);
        Eigen::MatrixXd a(k, k);
        for (auto& x : a.reshaped()) x = uniform(rng, 0.5, 5.0);
        Eigen::VectorXd rho(k);
        for (auto& x : rho) x = uniform(rng, 0.5, 5.0);
        const DirichletHyper h(a, rho);
        const auto g = log_posterior_gradient(s, data, h);
        const auto fd = [&](double& x) {
            const double keep = x;
            x = keep + kFdStep;
            const double up = log_posterior(s, data, h);
            x = keep - kFdStep;
            const double down = log_posterior(s, data, h);
            x = keep;
            return (up - down) / (2 * kFdStep);
        };
        double err = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < s.confusions.size(); ++i) {
            for (int r = 0; r < k; ++r) {
                for (int c = 0; c < k; ++c) {
                    const double d = fd(s.confusions[i](r, c)) - g.confusions[i](r, c);
                    err += d * d;
                    norm += g.confusions[i](r, c) * g.confusions[i](r, c);
                }
            }
        }
        for (int j = 0; j < data.num_tasks(); ++j) {
            for (int c = 0; c < k; ++c) {
                const double d = fd(s.posteriors(j, c)) - g.soft_labels(j, c);
                err += d * d;
                norm += g.soft_labels(j, c) * g.soft_labels(j, c);
            }
        }
        worst = std::max(worst, std::sqrt(err / norm));
    }
    return {worst <= kFdTol, {fmt("max relative error %.3g over %g points", worst, kPoints10)}};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"soft-label estimation ordering (MV, Soft D&S, D&S)", table1},
        {"D&S E-step sharpness example", sharpness},
        {"weighted MV unbiasedness", unbiasedness},
        {"splitting + MV equals weighting + MV", split_equivalence},
        {"spammer robustness", spammers},
        {"fairness on attribute-biased synthetic data", fairness_synthetic},
        {"flip-rate surrogate bias", flip_surrogate},
        {"Soft D&S against a grid-search oracle", grid_oracle},
        {"objective monotonicity", monotone},
        {"posterior gradient check", gradients},
    };
    int failed = 0;
    for (std::size_t n = 0; n < criteria.size(); ++n) {
        const auto start = std::chrono::steady_clock::now();
        const auto v = criteria[n].second();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %zu: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", n + 1, criteria[n].first, secs);
        for (const auto& d : v.details) std::printf("    %s\n", d.c_str());
        std::fflush(stdout);
        failed += !v.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
