#pragma once

// Conversion of Moral Machine survey responses into a two-class gender
// corpus.
//
// Input is the published SharedResponsesSurvey CSV: one row per scenario
// side, two rows per ResponseID, with the character count columns, a Saved
// flag and the Review_* survey answers of the session. Only rows with
// ScenarioType "Gender" are used. Class 1 (label 1 in files) means the male
// side was saved; attribute 0 is a male voter, attribute 1 a female voter.

#include "fairagg/types.hpp"

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace fairagg {

struct MmOptions {
    int min_labels_female_voter = 10;
    int min_labels_task = 10;
    /// Survey columns compared across sessions; missing columns are ignored.
    std::vector<std::string> survey_columns = {"Review_gender",   "Review_age",       "Review_education",
                                               "Review_income",   "Review_political", "Review_religious"};
    /// Value each survey column holds when the voter left it untouched.
    /// Columns not listed here have no default value.
    std::map<std::string, std::string> default_values = {
        {"Review_gender", "default"},    {"Review_age", "default"},       {"Review_education", "default"},
        {"Review_income", "default"},    {"Review_political", "default"}, {"Review_religious", "default"}};
    std::string male_value = "male";
    std::string female_value = "female";
    char delimiter = ',';
};

/// Counts after one pipeline step.
struct MmStepCount {
    std::string step;
    long long voters = 0;
    long long tasks = 0;
    long long labels = 0;
};

struct MmReport {
    long long rows_read = 0;
    long long rows_skipped = 0;         ///< unparseable rows
    long long responses_skipped = 0;    ///< responses without exactly one male and one female side
    long long duplicate_answers = 0;    ///< repeated voter-task answers (first one kept)
    std::vector<MmStepCount> steps;     ///< after steps 1 to 7, in order
};

struct MmResult {
    LabelMatrix labels;
    AttributeTable attrs;
    MmReport report;
};

/// Runs the seven preprocessing steps. Throws ParseError when the header
/// lacks a required column and ValidationError when no task survives.
MmResult preprocess_mm(std::istream& in, const MmOptions& options = {});
MmResult preprocess_mm(const std::filesystem::path& path, const MmOptions& options = {});

/// Canonical task key: the male side's nonzero character counts, then the
/// female side's, e.g. "Man:1,Boy:1|Woman:1,Girl:1".
std::string mm_task_key(const std::vector<int>& male_counts, const std::vector<int>& female_counts);

/// Character columns in the order used by the task key.
const std::vector<std::string>& mm_character_columns();

std::string to_json(const MmReport& report);

}  // namespace fairagg
