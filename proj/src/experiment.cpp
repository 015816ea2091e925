#include "fairagg/experiment.hpp"

#include "fairagg/io.hpp"
#include "fairagg/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace fairagg {
namespace {

using nlohmann::json;

const char* const kMetricsHeader =
    "experiment,model,fairness,seed,num_tasks,num_spammers,voters0,voter_ratio,flip_rate,mae,mae_class1,bias,status,"
    "message";
constexpr std::size_t kKeyColumns = 9;

[[noreturn]] void config_error(const std::string& what) { throw ConfigError("config: " + what); }

void check_keys(const json& object, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!object.is_object()) config_error(where + " must be an object");
    for (const auto& [key, value] : object.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            config_error("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
T get(const json& object, const char* key, const std::string& where) {
    try {
        return object.at(key).get<T>();
    } catch (const json::exception&) {
        config_error("'" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

template <typename T>
void read_opt(const json& object, const char* key, const std::string& where, T& out) {
    if (object.contains(key)) out = get<T>(object, key, where);
}

Eigen::MatrixXd read_matrix(const json& value, const std::string& where) {
    std::vector<std::vector<double>> rows;
    try {
        rows = value.get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
        config_error(where + " must be a matrix (array of rows)");
    }
    if (rows.empty() || rows.front().empty()) config_error(where + " is empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) config_error(where + " has ragged rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

template <typename T>
std::vector<T> sorted_axis(const json& sweep, const char* key) {
    auto values = get<std::vector<T>>(sweep, key, "sweep");
    if (values.empty()) config_error(std::string("sweep axis '") + key + "' is empty");
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

std::vector<std::string> allowed_axes(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::soft_label: return {"num_tasks"};
        case ExperimentKind::spammer: return {"num_tasks", "num_spammers"};
        case ExperimentKind::fairness_synthetic: return {"num_tasks", "voters0", "voter_ratio"};
        case ExperimentKind::flip_semi_synthetic: return {"flip_rate"};
        case ExperimentKind::aggregate_file: return {};
    }
    return {};
}

Sweep default_sweep(ExperimentKind kind) {
    Sweep s;
    switch (kind) {
        case ExperimentKind::spammer: s.num_spammers = {1, 10, 50, 100, 200, 500, 1000}; break;
        case ExperimentKind::fairness_synthetic:
            for (int j = 100; j <= 500; j += 50) s.num_tasks.push_back(j);
            break;
        case ExperimentKind::flip_semi_synthetic:
            for (int r = 0; r <= 10; ++r) s.flip_rate.push_back(r / 10.0);
            break;
        default: break;
    }
    return s;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

template <typename T>
std::string opt_field(const std::optional<T>& v) {
    if (!v) return {};
    if constexpr (std::is_floating_point_v<T>) {
        return format_real(*v);
    } else {
        return std::to_string(*v);
    }
}

std::string point_tag(const SweepPoint& p) {
    std::string tag;
    auto add = [&](const char* name, const std::string& v) {
        if (v.empty()) return;
        if (!tag.empty()) tag += '_';
        tag += name + v;
    };
    add("tasks", opt_field(p.num_tasks));
    add("spammers", opt_field(p.num_spammers));
    add("voters0-", opt_field(p.voters0));
    add("ratio", opt_field(p.voter_ratio));
    add("flip", opt_field(p.flip_rate));
    return tag.empty() ? "all" : tag;
}

GenSpec spec_for(const ExperimentConfig& config, const SweepPoint& p, std::uint64_t seed) {
    GenSpec g = config.generator;
    if (p.num_tasks) g.num_tasks = *p.num_tasks;
    if (p.num_spammers) g.num_spammers = *p.num_spammers;
    if (p.voters0) g.num_voters_per_attr[0] = *p.voters0;
    if (p.voter_ratio) g.num_voters_per_attr[1] = g.num_voters_per_attr[0] * *p.voter_ratio;
    g.seed = seed;
    return g;
}

struct Job {
    SweepPoint point;
    std::uint64_t seed = 0;
};

struct JobOutput {
    std::vector<MetricsRow> rows;
    std::vector<std::filesystem::path> files;
};

}  // namespace

std::string_view library_version() { return FAIRAGG_VERSION; }

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::soft_label: return "soft_label";
        case ExperimentKind::spammer: return "spammer";
        case ExperimentKind::fairness_synthetic: return "fairness_synthetic";
        case ExperimentKind::flip_semi_synthetic: return "flip_semi_synthetic";
        case ExperimentKind::aggregate_file: return "aggregate_file";
    }
    return "?";
}

ExperimentKind parse_experiment(std::string_view name) {
    for (auto k : {ExperimentKind::soft_label, ExperimentKind::spammer, ExperimentKind::fairness_synthetic,
                   ExperimentKind::flip_semi_synthetic, ExperimentKind::aggregate_file}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    check_keys(doc, "config",
               {"version", "experiment", "generator", "methods", "hyper", "solver", "sweep", "seeds", "inputs",
                "ideal_dist", "flip", "output_dir"});
    if (!doc.contains("version") || get<int>(doc, "version", "config") != kConfigVersion) {
        config_error("'version' must be " + std::to_string(kConfigVersion));
    }
    if (!doc.contains("experiment")) config_error("'experiment' is required");

    ExperimentConfig config;
    config.canonical = doc.dump();
    config.kind = parse_experiment(get<std::string>(doc, "experiment", "config"));

    if (config.kind == ExperimentKind::fairness_synthetic) {
        Eigen::MatrixXd p0(2, 2), p1(2, 2);
        p0 << 1, 0, 1, 0;
        p1 << 0, 1, 0, 1;
        config.generator.group_matrices = std::array<ConfusionMatrix, 2>{p0, p1};
        config.generator.num_voters_per_attr = {200, 400};
    }
    if (doc.contains("generator")) {
        const auto& g = doc["generator"];
        const std::string where = "generator";
        check_keys(g, where,
                   {"num_voters_per_attr", "num_tasks", "num_classes", "diag_beta", "z_beta", "group_matrices",
                    "num_spammers"});
        read_opt(g, "num_voters_per_attr", where, config.generator.num_voters_per_attr);
        read_opt(g, "num_tasks", where, config.generator.num_tasks);
        read_opt(g, "num_classes", where, config.generator.num_classes);
        read_opt(g, "diag_beta", where, config.generator.diag_beta);
        read_opt(g, "z_beta", where, config.generator.z_beta);
        read_opt(g, "num_spammers", where, config.generator.num_spammers);
        if (g.contains("group_matrices")) {
            const auto& gm = g["group_matrices"];
            if (!gm.is_array() || gm.size() != 2) config_error("generator.group_matrices needs two matrices");
            config.generator.group_matrices = std::array<ConfusionMatrix, 2>{
                read_matrix(gm[0], "generator.group_matrices[0]"), read_matrix(gm[1], "generator.group_matrices[1]")};
        }
    }
    if (config.kind == ExperimentKind::fairness_synthetic && !config.generator.group_matrices) {
        config_error("fairness_synthetic needs generator.group_matrices");
    }

    if (!doc.contains("methods") || !doc["methods"].is_array() || doc["methods"].empty()) {
        config_error("'methods' must be a non-empty array");
    }
    for (const auto& m : doc["methods"]) {
        check_keys(m, "methods[]", {"model", "fairness"});
        Method method;
        method.model = parse_model(get<std::string>(m, "model", "methods[]"));
        if (m.contains("fairness")) method.fairness = parse_fairness(get<std::string>(m, "fairness", "methods[]"));
        check_combination(method.model, method.fairness);
        config.methods.push_back(method);
    }

    if (doc.contains("hyper")) {
        const auto& h = doc["hyper"];
        check_keys(h, "hyper", {"alpha", "rho"});
        if (!h.contains("alpha") || !h.contains("rho")) config_error("hyper needs alpha and rho");
        const Eigen::MatrixXd alpha = read_matrix(h["alpha"], "hyper.alpha");
        const auto rho = get<std::vector<double>>(h, "rho", "hyper");
        try {
            config.settings.hyper =
                DirichletHyper(alpha, Eigen::Map<const Eigen::VectorXd>(rho.data(), static_cast<Eigen::Index>(rho.size())));
        } catch (const Error& e) {
            config_error(std::string("hyper: ") + e.what());
        }
    }
    if (doc.contains("solver")) {
        const auto& s = doc["solver"];
        check_keys(s, "solver", {"ds", "soft_ds", "groupanno"});
        auto read_pair = [&](const char* key, double& tol, int& max_iter) {
            if (!s.contains(key)) return;
            const std::string where = std::string("solver.") + key;
            check_keys(s[key], where, {"tol", "max_iter"});
            read_opt(s[key], "tol", where, tol);
            read_opt(s[key], "max_iter", where, max_iter);
            if (!(tol >= 0.0) || max_iter < 1) config_error(where + " needs tol >= 0 and max_iter >= 1");
        };
        read_pair("ds", config.settings.ds.tol, config.settings.ds.max_iter);
        read_pair("soft_ds", config.settings.soft_ds.tol, config.settings.soft_ds.max_iter);
        read_pair("groupanno", config.settings.groupanno.tol, config.settings.groupanno.max_iter);
    }

    if (doc.contains("sweep")) {
        const auto& s = doc["sweep"];
        if (!s.is_object()) config_error("sweep must be an object");
        const auto allowed = allowed_axes(config.kind);
        for (const auto& [key, value] : s.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                config_error("sweep axis '" + key + "' does not apply to " + std::string(to_string(config.kind)));
            }
        }
        if (s.contains("num_tasks")) config.sweep.num_tasks = sorted_axis<int>(s, "num_tasks");
        if (s.contains("num_spammers")) config.sweep.num_spammers = sorted_axis<int>(s, "num_spammers");
        if (s.contains("voters0")) config.sweep.voters0 = sorted_axis<int>(s, "voters0");
        if (s.contains("voter_ratio")) config.sweep.voter_ratio = sorted_axis<int>(s, "voter_ratio");
        if (s.contains("flip_rate")) config.sweep.flip_rate = sorted_axis<double>(s, "flip_rate");
    } else {
        config.sweep = default_sweep(config.kind);
    }
    for (double r : config.sweep.flip_rate) {
        if (!(r >= 0.0 && r <= 1.0)) config_error("flip_rate values must lie in [0, 1]");
    }
    for (int v : config.sweep.num_tasks) {
        if (v < 1) config_error("num_tasks values must be positive");
    }
    for (int v : config.sweep.num_spammers) {
        if (v < 0) config_error("num_spammers values must be non-negative");
    }
    for (int v : config.sweep.voters0) {
        if (v < 1) config_error("voters0 values must be positive");
    }
    for (int v : config.sweep.voter_ratio) {
        if (v < 0) config_error("voter_ratio values must be non-negative");
    }

    if (doc.contains("seeds")) {
        const auto& s = doc["seeds"];
        if (s.is_array()) {
            config.seeds = get<std::vector<std::uint64_t>>(doc, "seeds", "config");
        } else {
            check_keys(s, "seeds", {"start", "count"});
            std::uint64_t start = 0;
            int n = 1;
            read_opt(s, "start", "seeds", start);
            read_opt(s, "count", "seeds", n);
            if (n < 1) config_error("seeds.count must be positive");
            config.seeds.clear();
            for (int k = 0; k < n; ++k) config.seeds.push_back(start + static_cast<std::uint64_t>(k));
        }
        if (config.seeds.empty()) config_error("seeds must not be empty");
    }

    if (doc.contains("inputs")) {
        const auto& in = doc["inputs"];
        check_keys(in, "inputs", {"labels", "attributes", "truth"});
        auto path = [&](const char* key) {
            std::filesystem::path p = get<std::string>(in, key, "inputs");
            return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        };
        if (in.contains("labels")) config.labels_path = path("labels");
        if (in.contains("attributes")) config.attributes_path = path("attributes");
        if (in.contains("truth")) config.truth_path = path("truth");
    }
    read_opt(doc, "ideal_dist", "config", config.ideal_dist);
    if (doc.contains("flip")) {
        const auto& f = doc["flip"];
        check_keys(f, "flip", {"class_for_attr", "keep_fraction"});
        read_opt(f, "class_for_attr", "flip", config.flip_class);
        read_opt(f, "keep_fraction", "flip", config.keep_fraction);
        for (double k : config.keep_fraction) {
            if (!(k > 0.0 && k <= 1.0)) config_error("flip.keep_fraction values must lie in (0, 1]");
        }
    }
    read_opt(doc, "output_dir", "config", config.output_dir);

    const bool needs_attrs = std::any_of(config.methods.begin(), config.methods.end(),
                                         [](const Method& m) { return m.fairness != FairnessOption::none; });
    if (config.kind == ExperimentKind::flip_semi_synthetic &&
        (config.labels_path.empty() || config.attributes_path.empty())) {
        config_error("flip_semi_synthetic requires inputs.labels and inputs.attributes");
    }
    if (config.kind == ExperimentKind::aggregate_file) {
        if (config.labels_path.empty()) config_error("aggregate_file requires inputs.labels");
        if (needs_attrs && config.attributes_path.empty()) {
            config_error("fairness options other than none require inputs.attributes");
        }
    }
    const bool generated = config.kind == ExperimentKind::soft_label || config.kind == ExperimentKind::spammer ||
                           config.kind == ExperimentKind::fairness_synthetic;
    if (generated) {
        for (const auto& p : sweep_points(config)) {
            spec_for(config, p, 0).validate();
        }
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path());
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& config) {
    std::vector<SweepPoint> points{SweepPoint{}};
    auto expand = [&](const auto& values, auto member) {
        if (values.empty()) return;
        std::vector<SweepPoint> next;
        for (const auto& p : points) {
            for (const auto& v : values) {
                SweepPoint q = p;
                q.*member = v;
                next.push_back(q);
            }
        }
        points = std::move(next);
    };
    expand(config.sweep.num_tasks, &SweepPoint::num_tasks);
    expand(config.sweep.num_spammers, &SweepPoint::num_spammers);
    expand(config.sweep.voters0, &SweepPoint::voters0);
    expand(config.sweep.voter_ratio, &SweepPoint::voter_ratio);
    expand(config.sweep.flip_rate, &SweepPoint::flip_rate);
    return points;
}

std::filesystem::path resolve_out_dir(const ExperimentConfig& config, const std::filesystem::path& override_dir) {
    if (!override_dir.empty()) return override_dir;
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
    return "fairagg-out";
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = kMetricsHeader;
    out += '\n';
    for (const auto& r : rows) {
        const bool ok = r.status == "ok" && r.scored;
        out += r.experiment + ',' + std::string(to_string(r.method.model)) + ',' +
               std::string(to_string(r.method.fairness)) + ',' + std::to_string(r.seed) + ',' +
               opt_field(r.point.num_tasks) + ',' + opt_field(r.point.num_spammers) + ',' +
               opt_field(r.point.voters0) + ',' + opt_field(r.point.voter_ratio) + ',' +
               opt_field(r.point.flip_rate) + ',' + (ok ? format_real(r.mae) : "") + ',' +
               (ok ? format_real(r.mae_class1) : "") + ',' + (ok ? format_real(r.bias) : "") + ',' + r.status + ',' +
               csv_field(r.message) + '\n';
    }
    return out;
}

RunReport run(const ExperimentConfig& config, const RunOptions& options) {
    RunReport report;
    report.out_dir = resolve_out_dir(config, options.out_dir);
    std::filesystem::create_directories(report.out_dir);
    const bool emit = options.emit_soft_labels || config.kind == ExperimentKind::aggregate_file;
    if (emit) std::filesystem::create_directories(report.out_dir / "soft_labels");

    // file-based inputs are loaded once and shared read-only by the workers
    LabelMatrix input;
    AttributeTable input_attrs;
    bool have_attrs = false;
    SoftLabels truth;
    if (!config.labels_path.empty()) {
        input = load_labels(config.labels_path);
        if (!config.attributes_path.empty()) {
            input_attrs = load_attributes(config.attributes_path, input, config.ideal_dist);
            have_attrs = true;
        }
        if (!config.truth_path.empty()) truth = load_soft_labels(config.truth_path).values;
    }

    std::vector<Job> jobs;
    if (config.kind == ExperimentKind::aggregate_file) {
        jobs.push_back({SweepPoint{}, config.seeds.front()});
    } else {
        for (const auto& p : sweep_points(config)) {
            for (auto seed : config.seeds) jobs.push_back({p, seed});
        }
    }

    const std::string experiment(to_string(config.kind));
    auto run_job = [&](const Job& job) {
        JobOutput out;
        auto base_row = [&](const Method& m) {
            MetricsRow row;
            row.experiment = experiment;
            row.method = m;
            row.seed = job.seed;
            row.point = job.point;
            return row;
        };
        LabelMatrix data;
        AttributeTable attrs;
        SoftLabels reference;
        try {
            switch (config.kind) {
                case ExperimentKind::soft_label:
                case ExperimentKind::spammer:
                case ExperimentKind::fairness_synthetic: {
                    const GenSpec spec = spec_for(config, job.point, job.seed);
                    auto bundle = config.kind == ExperimentKind::soft_label ? gen_softds_data(spec)
                                  : config.kind == ExperimentKind::spammer  ? gen_spammer_data(spec)
                                                                            : gen_biased_data(spec);
                    data = std::move(bundle.labels);
                    attrs = AttributeTable(std::move(bundle.attrs.attributes), config.ideal_dist);
                    reference = std::move(bundle.true_soft);
                    break;
                }
                case ExperimentKind::flip_semi_synthetic: {
                    const double rate = job.point.flip_rate.value_or(0.0);
                    const auto flipped = flip_labels(
                        input, input_attrs, {config.flip_class[0] - 1, config.flip_class[1] - 1}, rate, job.seed);
                    reference = mv_aggregate(WeightedLabels::unit(flipped));
                    std::tie(data, attrs) = subsample_voters(flipped, input_attrs, config.keep_fraction, job.seed);
                    break;
                }
                case ExperimentKind::aggregate_file:
                    data = input;
                    if (have_attrs) attrs = input_attrs;
                    reference = truth;
                    break;
            }
        } catch (const std::exception& e) {
            for (const auto& m : config.methods) {
                auto row = base_row(m);
                row.status = "error";
                row.message = e.what();
                out.rows.push_back(std::move(row));
            }
            return out;
        }
        const bool attrs_ok = config.kind != ExperimentKind::aggregate_file || have_attrs;
        for (const auto& m : config.methods) {
            auto row = base_row(m);
            try {
                const auto result = aggregate(data, attrs_ok ? &attrs : nullptr, m.model, m.fairness, config.settings);
                row.scored = reference.size() > 0;
                if (row.scored) {
                    row.mae = mae(result.soft_labels, reference);
                    row.mae_class1 = mae_class(result.soft_labels, reference, 0);
                    row.bias = bias(result.soft_labels, reference, 0);
                }
                for (const auto& w : result.warnings) {
                    if (!row.message.empty()) row.message += "; ";
                    row.message += w;
                }
                if (emit) {
                    const auto name = std::filesystem::path("soft_labels") /
                                      (std::string(to_string(m.model)) + '_' + std::string(to_string(m.fairness)) +
                                       '_' + point_tag(job.point) + "_seed" + std::to_string(job.seed) + ".csv");
                    save_soft_labels(result.soft_labels, report.out_dir / name, data.task_ids());
                    out.files.push_back(name);
                }
            } catch (const std::exception& e) {
                row.status = "error";
                row.message = e.what();
            }
            out.rows.push_back(std::move(row));
        }
        return out;
    };

    std::vector<JobOutput> outputs(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t n = next++; n < jobs.size(); n = next++) outputs[n] = run_job(jobs[n]);
    };
    const int workers = std::clamp(options.workers, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    for (auto& o : outputs) {
        for (auto& r : o.rows) report.rows.push_back(std::move(r));
        for (auto& f : o.files) report.files.push_back(std::move(f));
    }

    {
        std::ofstream csv(report.out_dir / "metrics.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write metrics.csv in '" + report.out_dir.string() + "'");
        csv << metrics_csv(report.rows);
    }
    report.files.insert(report.files.begin(), "metrics.csv");

    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(config.canonical)));
    json manifest;
    manifest["format_version"] = 1;
    manifest["fairagg_version"] = FAIRAGG_VERSION;
    manifest["experiment"] = experiment;
    manifest["config_hash"] = std::string("fnv1a64:") + hash;
    manifest["config"] = json::parse(config.canonical);
    manifest["seeds"] = config.seeds;
    manifest["files"] = json::array();
    for (const auto& f : report.files) manifest["files"].push_back(f.generic_string());
    std::ofstream(report.out_dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
    report.files.push_back("manifest.json");
    return report;
}

namespace {

struct ParsedReport {
    std::vector<std::string> keys;
    std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> values;
};

ParsedReport parse_report(const std::string& csv, const std::string& name) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) {
        throw ValidationError(name + " is not a metrics CSV (unexpected header)");
    }
    ParsedReport out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 14) throw ParseError(name + ": expected 14 fields", line_no);
        std::string key;
        for (std::size_t c = 0; c < kKeyColumns; ++c) key += (c ? "," : "") + f[c];
        auto number = [&](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            try {
                return std::stod(s);
            } catch (const std::exception&) {
                throw ParseError(name + ": bad number '" + s + "'", line_no);
            }
        };
        if (!out.values.emplace(key, std::pair{number(f[9]), number(f[11])}).second) {
            throw ValidationError(name + ": duplicate row " + key);
        }
        out.keys.push_back(key);
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

CompareResult compare_csv(const std::string& csv_a, const std::string& csv_b, double threshold) {
    const auto a = parse_report(csv_a, "report A");
    const auto b = parse_report(csv_b, "report B");
    for (const auto& k : a.keys) {
        if (!b.values.count(k)) throw ValidationError("row only in report A: " + k);
    }
    for (const auto& k : b.keys) {
        if (!a.values.count(k)) throw ValidationError("row only in report B: " + k);
    }
    CompareResult result;
    for (const auto& k : a.keys) {
        const auto& [mae_a, bias_a] = a.values.at(k);
        const auto& [mae_b, bias_b] = b.values.at(k);
        CompareRow row;
        row.key = k;
        if (mae_a.has_value() != mae_b.has_value() || bias_a.has_value() != bias_b.has_value()) {
            row.mae_delta = row.bias_delta = std::numeric_limits<double>::infinity();
        } else {
            if (mae_a) row.mae_delta = *mae_b - *mae_a;
            if (bias_a) row.bias_delta = *bias_b - *bias_a;
        }
        const double worst = std::max(std::abs(row.mae_delta), std::abs(row.bias_delta));
        row.exceeds = worst > threshold;
        result.max_delta = std::max(result.max_delta, worst);
        result.ok = result.ok && !row.exceeds;
        result.rows.push_back(std::move(row));
    }
    return result;
}

CompareResult compare(const std::filesystem::path& report_a, const std::filesystem::path& report_b,
                      double threshold) {
    return compare_csv(read_file(report_a), read_file(report_b), threshold);
}

}  // namespace fairagg
