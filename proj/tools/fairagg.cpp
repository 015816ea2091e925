// fairagg command-line interface.

#include "fairagg/experiment.hpp"
#include "fairagg/io.hpp"
#include "fairagg/metrics.hpp"
#include "fairagg/mm_preprocess.hpp"
#include "fairagg/pipeline.hpp"
#include "fairagg/synthgen.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fairagg;

namespace {

constexpr int kExitFailure = 1;  // comparison over threshold
constexpr int kExitError = 2;    // bad input, config or I/O

DirichletHyper hyper_from_flags(const std::vector<double>& alpha, const std::vector<double>& rho, int k) {
    if (alpha.empty() && rho.empty()) return DirichletHyper::flat(k);
    if (alpha.size() != static_cast<std::size_t>(k * k) || rho.size() != static_cast<std::size_t>(k)) {
        throw ConfigError("--alpha needs K*K values (row-major) and --rho K values, with K = " + std::to_string(k));
    }
    Eigen::MatrixXd a = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        alpha.data(), k, k);
    return DirichletHyper(a, Eigen::Map<const Eigen::VectorXd>(rho.data(), k));
}

void write_bundle(const GroundTruthBundle& b, const fs::path& dir) {
    fs::create_directories(dir);
    save_labels(b.labels, dir / "labels.csv");
    save_attributes(b.attrs, b.labels.voter_ids(), dir / "attributes.csv");
    save_truth(b.true_soft, dir / "truth.csv", b.labels.task_ids());
    save_metadata(b.labels, dir / "metadata.json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fair opinion aggregation: soft-label models, fairness options and experiments"};
    app.set_version_flag("--version", std::string(library_version()));
    app.require_subcommand(1);

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "Aggregate a labels CSV into soft labels");
    fs::path labels_path, attrs_path, agg_out;
    std::string model_name = "mv", fairness_name = "none";
    std::vector<double> alpha, rho;
    std::array<double, 2> ideal{0.5, 0.5};
    double tol = -1.0;
    int max_iter = 0;
    agg->add_option("--labels", labels_path, "voter_id,task_id,label CSV")->required()->check(CLI::ExistingFile);
    agg->add_option("--attributes", attrs_path, "voter_id,attribute CSV")->check(CLI::ExistingFile);
    agg->add_option("--model", model_name, "mv, ds or soft_ds")->capture_default_str();
    agg->add_option("--fairness", fairness_name, "none, weighting, splitting, groupanno_1 or groupanno_2")
        ->capture_default_str();
    agg->add_option("--alpha", alpha, "confusion prior, K*K values row-major (default all ones)")->delimiter(',');
    agg->add_option("--rho", rho, "soft-label prior, K values (default all ones)")->delimiter(',');
    agg->add_option("--ideal-dist", ideal, "ideal attribute distribution p(a=0),p(a=1)")->delimiter(',');
    agg->add_option("--tol", tol, "convergence tolerance of the iterative models");
    agg->add_option("--max-iter", max_iter, "iteration cap of the iterative models");
    agg->add_option("--out", agg_out, "soft-label CSV to write (default: stdout)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with its ground truth");
    std::string kind_name = "soft_label";
    fs::path synth_config, synth_out = "synth";
    std::uint64_t synth_seed = 0;
    GenSpec gen;
    synth->add_option("--kind", kind_name, "soft_label, spammer or fairness_synthetic")->capture_default_str();
    synth->add_option("--config", synth_config, "experiment config whose generator section is used")
        ->check(CLI::ExistingFile);
    synth->add_option("--voters", gen.num_voters_per_attr, "voters with attribute 0 and 1")->delimiter(',');
    synth->add_option("--tasks", gen.num_tasks, "number of tasks");
    synth->add_option("--spammers", gen.num_spammers, "spammers appended (spammer kind)");
    synth->add_option("--seed", synth_seed, "root seed")->capture_default_str();
    synth->add_option("--out", synth_out, "output directory")->capture_default_str();

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a configured experiment sweep");
    fs::path exp_config, exp_out;
    std::vector<std::uint64_t> exp_seed;
    int workers = 1;
    bool emit = false;
    exp->add_option("--config", exp_config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    exp->add_option("--seed", exp_seed, "run only this seed (repeatable)");
    exp->add_option("--workers", workers, "parallel sweep points")->check(CLI::PositiveNumber)->capture_default_str();
    exp->add_flag("--emit-soft-labels", emit, "write the soft labels of every run");
    exp->add_option("--out", exp_out, std::string("output directory (default: config, then $") + kOutDirEnv + ")");

    // metrics
    auto* met = app.add_subcommand("metrics", "MAE and bias of soft labels against a reference");
    fs::path estimate_path, reference_path;
    int class_index = 1;
    met->add_option("--estimate", estimate_path)->required()->check(CLI::ExistingFile);
    met->add_option("--reference", reference_path)->required()->check(CLI::ExistingFile);
    met->add_option("--class", class_index, "1-based class for mae_class and bias")->capture_default_str();

    // preprocess-mm
    auto* mm = app.add_subcommand("preprocess-mm", "Build a gender corpus from Moral Machine survey responses");
    fs::path mm_input, mm_out = "mm";
    MmOptions mm_options;
    std::string default_value;
    mm->add_option("--input", mm_input, "SharedResponsesSurvey CSV")->required()->check(CLI::ExistingFile);
    mm->add_option("--out", mm_out, "output directory")->capture_default_str();
    mm->add_option("--min-female-labels", mm_options.min_labels_female_voter)->capture_default_str();
    mm->add_option("--min-task-labels", mm_options.min_labels_task)->capture_default_str();
    mm->add_option("--default-value", default_value, "value of an untouched survey field (default: \"default\")");

    // compare
    auto* cmp = app.add_subcommand("compare", "Compare two metrics CSVs");
    fs::path report_a, report_b;
    double threshold = 0.0;
    cmp->add_option("report_a", report_a)->required()->check(CLI::ExistingFile);
    cmp->add_option("report_b", report_b)->required()->check(CLI::ExistingFile);
    cmp->add_option("--threshold", threshold, "largest tolerated |delta| of mae or bias")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*agg) {
            const LabelMatrix labels = load_labels(labels_path);
            ModelSettings settings;
            settings.hyper = hyper_from_flags(alpha, rho, labels.num_classes());
            if (tol >= 0.0) settings.ds.tol = settings.soft_ds.tol = settings.groupanno.tol = tol;
            if (max_iter > 0) settings.ds.max_iter = settings.soft_ds.max_iter = settings.groupanno.max_iter = max_iter;
            std::optional<AttributeTable> attrs;
            if (!attrs_path.empty()) attrs = load_attributes(attrs_path, labels, ideal);
            const auto result = aggregate(labels, attrs ? &*attrs : nullptr, parse_model(model_name),
                                          parse_fairness(fairness_name), settings);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
            if (agg_out.empty()) {
                std::cout << "task_id";
                for (int k = 1; k <= labels.num_classes(); ++k) std::cout << ",class_" << k;
                std::cout << '\n';
                for (int j = 0; j < labels.num_tasks(); ++j) {
                    std::cout << labels.task_ids()[static_cast<std::size_t>(j)];
                    for (int k = 0; k < labels.num_classes(); ++k) {
                        std::cout << ',' << format_real(result.soft_labels(j, k));
                    }
                    std::cout << '\n';
                }
            } else {
                save_soft_labels(result.soft_labels, agg_out, labels.task_ids());
            }
        } else if (*synth) {
            ExperimentKind kind = parse_experiment(kind_name);
            GenSpec spec = gen;
            if (!synth_config.empty()) {
                const auto config = load_config(synth_config);
                kind = config.kind;
                spec = config.generator;
            } else if (kind == ExperimentKind::fairness_synthetic) {
                Eigen::MatrixXd p0(2, 2), p1(2, 2);
                p0 << 1, 0, 1, 0;
                p1 << 0, 1, 0, 1;
                spec.group_matrices = std::array<ConfusionMatrix, 2>{p0, p1};
            }
            spec.seed = synth_seed;
            switch (kind) {
                case ExperimentKind::soft_label: write_bundle(gen_softds_data(spec), synth_out); break;
                case ExperimentKind::spammer: write_bundle(gen_spammer_data(spec), synth_out); break;
                case ExperimentKind::fairness_synthetic: write_bundle(gen_biased_data(spec), synth_out); break;
                default: throw ConfigError("synth supports soft_label, spammer and fairness_synthetic");
            }
            std::cout << "wrote " << (synth_out / "labels.csv").string() << '\n';
        } else if (*exp) {
            auto config = load_config(exp_config);
            if (!exp_seed.empty()) config.seeds = exp_seed;
            RunOptions options;
            options.workers = workers;
            options.emit_soft_labels = emit;
            options.out_dir = exp_out;
            const auto report = run(config, options);
            int failed = 0;
            for (const auto& r : report.rows) failed += r.status != "ok";
            std::cout << report.rows.size() << " rows (" << failed << " failed) written to "
                      << (report.out_dir / "metrics.csv").string() << '\n';
        } else if (*met) {
            const auto est = load_soft_labels(estimate_path);
            const auto ref = load_soft_labels(reference_path);
            if (est.task_ids != ref.task_ids) throw ValidationError("estimate and reference list different tasks");
            const int c = class_index - 1;
            std::cout << "mae,mae_class,bias\n"
                      << format_real(mae(est.values, ref.values)) << ','
                      << format_real(mae_class(est.values, ref.values, c)) << ','
                      << format_real(bias(est.values, ref.values, c)) << '\n';
        } else if (*mm) {
            if (!default_value.empty()) {
                for (auto& [column, value] : mm_options.default_values) value = default_value;
            }
            const auto result = preprocess_mm(mm_input, mm_options);
            fs::create_directories(mm_out);
            save_labels(result.labels, mm_out / "labels.csv");
            save_attributes(result.attrs, result.labels.voter_ids(), mm_out / "attributes.csv");
            save_metadata(result.labels, mm_out / "metadata.json");
            std::ofstream(mm_out / "retention.json") << to_json(result.report) << '\n';
            std::cout << to_json(result.report) << '\n';
        } else if (*cmp) {
            const auto result = compare(report_a, report_b, threshold);
            for (const auto& r : result.rows) {
                if (r.exceeds) {
                    std::cout << "exceeds: " << r.key << " mae_delta=" << format_real(r.mae_delta)
                              << " bias_delta=" << format_real(r.bias_delta) << '\n';
                }
            }
            std::cout << result.rows.size() << " rows, max |delta| " << format_real(result.max_delta) << '\n';
            return result.ok ? 0 : kExitFailure;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return 0;
}
