#pragma once

// File formats:
//   labels CSV       "voter_id,task_id,label"   label in 1..K
//   attributes CSV   "voter_id,attribute"       attribute in {0,1}
//   soft-label CSV   "task_id,class_1,...,class_K"
//   truth CSV        "task_id,true_class_1,...,true_class_K"
//   metadata JSON    sidecar with K, I, J and the dense id maps

#include "fairagg/types.hpp"

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace fairagg {

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line, char delimiter = ',');

/// Shortest decimal representation that round-trips to the same double.
std::string format_real(double value);

struct LabelsFormat {
    /// Number of classes; 0 infers K from the largest label in the file.
    int num_classes = 0;
    char delimiter = ',';
};

/// Loads a labels CSV. Voter and task ids are mapped to dense indices in
/// order of first appearance.
LabelMatrix load_labels(const std::filesystem::path& path, const LabelsFormat& format = {});
LabelMatrix read_labels(std::istream& in, const LabelsFormat& format = {});
void save_labels(const LabelMatrix& labels, const std::filesystem::path& path);

/// Loads attributes for the voters of `labels`; every voter must be present.
/// Rows for voters absent from `labels` are ignored.
AttributeTable load_attributes(const std::filesystem::path& path, const LabelMatrix& labels,
                               std::array<double, 2> ideal_dist = {0.5, 0.5});
AttributeTable read_attributes(std::istream& in, const LabelMatrix& labels,
                               std::array<double, 2> ideal_dist = {0.5, 0.5});
void save_attributes(const AttributeTable& attrs, const std::vector<std::string>& voter_ids,
                     const std::filesystem::path& path);

/// Validates and writes soft labels; `task_ids` may be empty ("t1".."tJ").
void save_soft_labels(const SoftLabels& labels, const std::filesystem::path& path,
                      const std::vector<std::string>& task_ids = {});

struct LoadedSoftLabels {
    std::vector<std::string> task_ids;
    SoftLabels values;
};

/// Reads a soft-label or truth CSV (the header names are not interpreted
/// beyond their count).
LoadedSoftLabels load_soft_labels(const std::filesystem::path& path);

void save_truth(const SoftLabels& truth, const std::filesystem::path& path,
                const std::vector<std::string>& task_ids = {});

/// Sidecar recording K, I, J and the id maps of a label matrix.
void save_metadata(const LabelMatrix& labels, const std::filesystem::path& path);

}  // namespace fairagg
