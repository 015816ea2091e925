#include "fairagg/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace fairagg {
namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t n = 0; n < line.size(); ++n) {
        const char c = line[n];
        if (quoted) {
            if (c == '"') {
                if (n + 1 < line.size() && line[n + 1] == '"') {
                    current.push_back('"');
                    ++n;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r' && c != '\n') {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string format_real(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw IoError("cannot format real value");
    return std::string(buf, ptr);
}

LabelMatrix read_labels(std::istream& in, const LabelsFormat& format) {
    struct Raw {
        int voter;
        int task;
        int label;
        std::size_t line;
    };
    std::unordered_map<std::string, int> voter_index;
    std::unordered_map<std::string, int> task_index;
    std::vector<std::string> voter_ids;
    std::vector<std::string> task_ids;
    std::vector<Raw> raw;

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    int max_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        auto fields = split_csv_line(line, format.delimiter);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() == 3 && trim(fields[0]) == "voter_id") continue;
        }
        if (fields.size() != 3) throw ParseError("expected 3 fields (voter_id,task_id,label)", line_no);
        const auto voter = trim(fields[0]);
        const auto task = trim(fields[1]);
        if (voter.empty() || task.empty()) throw ParseError("empty voter or task id", line_no);
        int label = 0;
        if (!parse_number(trim(fields[2]), label)) throw ParseError("label is not an integer", line_no);
        if (label < 1 || (format.num_classes > 0 && label > format.num_classes)) {
            throw ValidationError("label " + std::to_string(label) + " out of range on line " +
                                  std::to_string(line_no));
        }
        max_label = std::max(max_label, label);
        auto [vit, vnew] = voter_index.try_emplace(voter, static_cast<int>(voter_ids.size()));
        if (vnew) voter_ids.push_back(voter);
        auto [tit, tnew] = task_index.try_emplace(task, static_cast<int>(task_ids.size()));
        if (tnew) task_ids.push_back(task);
        raw.push_back({vit->second, tit->second, label - 1, line_no});
    }
    if (raw.empty()) throw ValidationError("label file contains no labels (empty matrix)");

    const int k = format.num_classes > 0 ? format.num_classes : std::max(2, max_label);
    // duplicates are reported with the line of the second occurrence
    std::unordered_map<long long, std::size_t> seen;
    std::vector<Observation> obs;
    obs.reserve(raw.size());
    for (const auto& r : raw) {
        const long long key = static_cast<long long>(r.voter) * static_cast<long long>(task_ids.size()) + r.task;
        if (!seen.emplace(key, r.line).second) {
            throw ValidationError("duplicate label for voter '" + voter_ids[static_cast<std::size_t>(r.voter)] +
                                  "' and task '" + task_ids[static_cast<std::size_t>(r.task)] + "' on line " +
                                  std::to_string(r.line));
        }
        obs.push_back({r.voter, r.task, r.label});
    }
    const auto num_voters = static_cast<int>(voter_ids.size());
    const auto num_tasks = static_cast<int>(task_ids.size());
    return LabelMatrix(num_voters, num_tasks, k, std::move(obs), std::move(voter_ids), std::move(task_ids));
}

LabelMatrix load_labels(const std::filesystem::path& path, const LabelsFormat& format) {
    auto in = open_input(path);
    return read_labels(in, format);
}

void save_labels(const LabelMatrix& labels, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "voter_id,task_id,label\n";
    for (const auto& o : labels.observations()) {
        out << labels.voter_ids()[static_cast<std::size_t>(o.voter)] << ','
            << labels.task_ids()[static_cast<std::size_t>(o.task)] << ',' << (o.label + 1) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

AttributeTable read_attributes(std::istream& in, const LabelMatrix& labels, std::array<double, 2> ideal_dist) {
    std::unordered_map<std::string, int> index;
    for (int i = 0; i < labels.num_voters(); ++i) index.emplace(labels.voter_ids()[static_cast<std::size_t>(i)], i);
    std::vector<int> attrs(static_cast<std::size_t>(labels.num_voters()), -1);

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        auto fields = split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() == 2 && trim(fields[0]) == "voter_id") continue;
        }
        if (fields.size() != 2) throw ParseError("expected 2 fields (voter_id,attribute)", line_no);
        int a = 0;
        if (!parse_number(trim(fields[1]), a)) throw ParseError("attribute is not an integer", line_no);
        if (a != 0 && a != 1) {
            throw ValidationError("attribute " + std::to_string(a) + " is not 0 or 1 on line " + std::to_string(line_no));
        }
        auto it = index.find(trim(fields[0]));
        if (it == index.end()) continue;
        auto& slot = attrs[static_cast<std::size_t>(it->second)];
        if (slot != -1 && slot != a) {
            throw ValidationError("conflicting attributes for voter '" + it->first + "' on line " +
                                  std::to_string(line_no));
        }
        slot = a;
    }
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (attrs[i] == -1) throw ValidationError("no attribute for voter '" + labels.voter_ids()[i] + "'");
    }
    return AttributeTable(std::move(attrs), ideal_dist);
}

AttributeTable load_attributes(const std::filesystem::path& path, const LabelMatrix& labels,
                               std::array<double, 2> ideal_dist) {
    auto in = open_input(path);
    return read_attributes(in, labels, ideal_dist);
}

void save_attributes(const AttributeTable& attrs, const std::vector<std::string>& voter_ids,
                     const std::filesystem::path& path) {
    if (voter_ids.size() != attrs.attributes.size()) throw ValidationError("voter id count does not match attributes");
    auto out = open_output(path);
    out << "voter_id,attribute\n";
    for (std::size_t i = 0; i < voter_ids.size(); ++i) out << voter_ids[i] << ',' << attrs.attributes[i] << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

void write_matrix_csv(const SoftLabels& m, const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const std::string& column_prefix) {
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(m.rows())) {
        throw ValidationError("task id count does not match soft-label rows");
    }
    auto out = open_output(path);
    out << "task_id";
    for (Eigen::Index k = 0; k < m.cols(); ++k) out << ',' << column_prefix << (k + 1);
    out << '\n';
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
        out << (ids.empty() ? "t" + std::to_string(j + 1) : ids[static_cast<std::size_t>(j)]);
        for (Eigen::Index k = 0; k < m.cols(); ++k) out << ',' << format_real(m(j, k));
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void save_soft_labels(const SoftLabels& labels, const std::filesystem::path& path,
                      const std::vector<std::string>& task_ids) {
    check_soft_labels(labels);
    write_matrix_csv(labels, path, task_ids, "class_");
}

void save_truth(const SoftLabels& truth, const std::filesystem::path& path, const std::vector<std::string>& task_ids) {
    check_soft_labels(truth, "ground truth");
    write_matrix_csv(truth, path, task_ids, "true_class_");
}

LoadedSoftLabels load_soft_labels(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    LoadedSoftLabels result;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        auto fields = split_csv_line(line);
        if (columns == 0) {
            if (fields.size() < 3) throw ParseError("soft-label header needs at least two classes", line_no);
            columns = fields.size();
            continue;
        }
        if (fields.size() != columns) throw ParseError("wrong number of fields", line_no);
        result.task_ids.push_back(trim(fields[0]));
        std::vector<double> row(columns - 1);
        for (std::size_t k = 1; k < columns; ++k) {
            if (!parse_number(trim(fields[k]), row[k - 1])) throw ParseError("value is not a real number", line_no);
        }
        rows.push_back(std::move(row));
    }
    if (columns == 0) throw ValidationError("soft-label file is empty");
    result.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns - 1));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (std::size_t k = 0; k + 1 < columns; ++k) {
            result.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = rows[j][k];
        }
    }
    check_soft_labels(result.values, path.string());
    return result;
}

void save_metadata(const LabelMatrix& labels, const std::filesystem::path& path) {
    nlohmann::json meta;
    meta["format_version"] = 1;
    meta["num_classes"] = labels.num_classes();
    meta["num_voters"] = labels.num_voters();
    meta["num_tasks"] = labels.num_tasks();
    meta["num_labels"] = labels.size();
    meta["voter_ids"] = labels.voter_ids();
    meta["task_ids"] = labels.task_ids();
    auto out = open_output(path);
    out << meta.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fairagg
