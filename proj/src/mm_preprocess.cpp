#include "fairagg/mm_preprocess.hpp"

#include "fairagg/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace fairagg {
namespace {

const std::vector<std::string> kCharacters = {
    "Man",         "Woman",         "Pregnant",        "Stroller",        "OldMan",        "OldWoman",    "Boy",
    "Girl",        "Homeless",      "LargeWoman",      "LargeMan",        "Criminal",      "MaleExecutive",
    "FemaleExecutive", "FemaleAthlete", "MaleAthlete", "FemaleDoctor",    "MaleDoctor",    "Dog",         "Cat"};
const std::set<std::string> kMale = {"Man", "OldMan", "Boy", "LargeMan", "MaleExecutive", "MaleAthlete", "MaleDoctor"};
const std::set<std::string> kFemale = {"Woman",      "Pregnant",        "OldWoman",      "Girl",
                                       "LargeWoman", "FemaleExecutive", "FemaleAthlete", "FemaleDoctor"};

struct Side {
    std::string voter;
    std::string session;
    std::vector<int> counts;
    bool saved = false;
    int gender = 0;  // +1 male characters only, -1 female only, 0 otherwise
};

struct Answer {
    std::string voter;
    std::string task;
    int label = 0;  // 0: male side saved, 1: female side saved
};

bool parse_int(const std::string& s, int& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

int side_gender(const std::vector<int>& counts) {
    int male = 0;
    int female = 0;
    for (std::size_t c = 0; c < kCharacters.size(); ++c) {
        if (kMale.count(kCharacters[c])) male += counts[c];
        if (kFemale.count(kCharacters[c])) female += counts[c];
    }
    if (male > 0 && female == 0) return 1;
    if (female > 0 && male == 0) return -1;
    return 0;
}

using Survey = std::vector<std::string>;

// Step 1: the survey answer a voter is kept with, or nullopt.
std::optional<Survey> usable_survey(const std::map<std::string, Survey>& sessions, const Survey& defaults,
                                    const std::vector<bool>& has_default) {
    std::vector<const Survey*> answered;
    for (const auto& [id, s] : sessions) {
        if (std::any_of(s.begin(), s.end(), [](const std::string& v) { return !v.empty(); })) answered.push_back(&s);
    }
    if (answered.empty()) return std::nullopt;
    if (answered.size() == 1) return *answered.front();
    auto is_default = [&](const Survey& s) {
        bool any = false;
        for (std::size_t c = 0; c < s.size(); ++c) {
            if (!has_default[c]) continue;
            any = true;
            if (s[c] != defaults[c]) return false;
        }
        return any;
    };
    std::vector<const Survey*> non_default;
    for (const auto* s : answered) {
        if (!is_default(*s)) non_default.push_back(s);
    }
    if (non_default.size() == 1) return *non_default.front();
    if (std::all_of(answered.begin(), answered.end(), [&](const Survey* s) { return *s == *answered.front(); })) {
        return *answered.front();
    }
    return std::nullopt;
}

MmStepCount count(std::string step, const std::vector<Answer>& answers) {
    std::unordered_set<std::string> voters;
    std::unordered_set<std::string> tasks;
    for (const auto& a : answers) {
        voters.insert(a.voter);
        tasks.insert(a.task);
    }
    return {std::move(step), static_cast<long long>(voters.size()), static_cast<long long>(tasks.size()),
            static_cast<long long>(answers.size())};
}

template <typename Pred>
void keep_if(std::vector<Answer>& answers, Pred pred) {
    answers.erase(std::remove_if(answers.begin(), answers.end(), [&](const Answer& a) { return !pred(a); }),
                  answers.end());
}

}  // namespace

const std::vector<std::string>& mm_character_columns() { return kCharacters; }

std::string mm_task_key(const std::vector<int>& male_counts, const std::vector<int>& female_counts) {
    auto side = [](const std::vector<int>& counts) {
        std::string out;
        for (std::size_t c = 0; c < kCharacters.size() && c < counts.size(); ++c) {
            if (counts[c] == 0) continue;
            if (!out.empty()) out += ',';
            out += kCharacters[c] + ':' + std::to_string(counts[c]);
        }
        return out;
    };
    return side(male_counts) + '|' + side(female_counts);
}

MmResult preprocess_mm(std::istream& in, const MmOptions& options) {
    MmReport report;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty input", 1);
    const auto header = split_csv_line(line, options.delimiter);
    auto find = [&](const std::string& name) -> int {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    auto require = [&](const std::string& name) {
        const int idx = find(name);
        if (idx < 0) throw ParseError("missing column '" + name + "'", 1);
        return idx;
    };
    const int col_response = require("ResponseID");
    const int col_session = require("ExtendedSessionID");
    const int col_user = require("UserID");
    const int col_type = require("ScenarioType");
    const int col_saved = require("Saved");
    require("Review_gender");
    std::vector<int> col_chars;
    for (const auto& c : kCharacters) col_chars.push_back(require(c));
    std::vector<int> col_survey;
    Survey defaults;
    std::vector<bool> has_default;
    int gender_slot = -1;
    for (const auto& c : options.survey_columns) {
        const int idx = find(c);
        if (idx < 0) continue;
        if (c == "Review_gender") gender_slot = static_cast<int>(col_survey.size());
        col_survey.push_back(idx);
        const auto d = options.default_values.find(c);
        has_default.push_back(d != options.default_values.end());
        defaults.push_back(d != options.default_values.end() ? d->second : std::string());
    }
    if (gender_slot < 0) throw ConfigError("survey_columns must include Review_gender");

    std::unordered_map<std::string, Side> pending;
    std::map<std::string, std::map<std::string, Survey>> sessions;  // voter -> session -> survey
    std::vector<Answer> answers;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++report.rows_read;
        const auto f = split_csv_line(line, options.delimiter);
        if (f.size() != header.size()) {
            ++report.rows_skipped;
            continue;
        }
        Side side;
        side.voter = f[static_cast<std::size_t>(col_user)];
        side.session = f[static_cast<std::size_t>(col_session)];
        int saved = 0;
        bool ok = !side.voter.empty() && parse_int(f[static_cast<std::size_t>(col_saved)], saved) &&
                  (saved == 0 || saved == 1);
        side.saved = saved == 1;
        for (int idx : col_chars) {
            int n = 0;
            ok = ok && parse_int(f[static_cast<std::size_t>(idx)], n) && n >= 0;
            side.counts.push_back(n);
        }
        if (!ok) {
            ++report.rows_skipped;
            continue;
        }
        Survey survey;
        for (int idx : col_survey) survey.push_back(f[static_cast<std::size_t>(idx)]);
        sessions[side.voter].emplace(side.session, std::move(survey));
        if (f[static_cast<std::size_t>(col_type)] != "Gender") continue;
        side.gender = side_gender(side.counts);

        const auto& response = f[static_cast<std::size_t>(col_response)];
        auto it = pending.find(response);
        if (it == pending.end()) {
            pending.emplace(response, std::move(side));
            continue;
        }
        Side first = std::move(it->second);
        pending.erase(it);
        if (first.voter != side.voter || first.gender * side.gender != -1 || first.saved == side.saved) {
            ++report.responses_skipped;
            continue;
        }
        const Side& male = first.gender == 1 ? first : side;
        const Side& female = first.gender == 1 ? side : first;
        answers.push_back({male.voter, mm_task_key(male.counts, female.counts), male.saved ? 0 : 1});
    }
    report.responses_skipped += static_cast<long long>(pending.size());

    // steps 1 and 2
    std::unordered_map<std::string, int> attribute;
    std::unordered_set<std::string> surveyed;
    for (const auto& [voter, s] : sessions) {
        const auto survey = usable_survey(s, defaults, has_default);
        if (!survey) continue;
        surveyed.insert(voter);
        const auto& gender = (*survey)[static_cast<std::size_t>(gender_slot)];
        if (gender == options.male_value) attribute[voter] = 0;
        if (gender == options.female_value) attribute[voter] = 1;
    }
    keep_if(answers, [&](const Answer& a) { return surveyed.count(a.voter) > 0; });
    report.steps.push_back(count("usable_survey", answers));
    keep_if(answers, [&](const Answer& a) { return attribute.count(a.voter) > 0; });
    report.steps.push_back(count("binary_gender", answers));

    // steps 3 and 4: task ids and labels are assigned at parse time; repeated
    // answers to the same task keep the first one
    report.steps.push_back(count("task_ids", answers));
    {
        std::set<std::pair<std::string, std::string>> seen;
        const auto before = answers.size();
        keep_if(answers, [&](const Answer& a) { return seen.emplace(a.voter, a.task).second; });
        report.duplicate_answers = static_cast<long long>(before - answers.size());
    }
    report.steps.push_back(count("labels", answers));

    // step 5
    std::unordered_map<std::string, int> per_voter;
    for (const auto& a : answers) ++per_voter[a.voter];
    keep_if(answers, [&](const Answer& a) {
        return attribute.at(a.voter) == 0 || per_voter.at(a.voter) >= options.min_labels_female_voter;
    });
    report.steps.push_back(count("female_voter_min_labels", answers));

    // step 6
    std::unordered_map<std::string, int> female_per_task;
    for (const auto& a : answers) {
        if (attribute.at(a.voter) == 1) ++female_per_task[a.task];
    }
    keep_if(answers, [&](const Answer& a) {
        const auto it = female_per_task.find(a.task);
        return it != female_per_task.end() && it->second >= options.min_labels_task;
    });
    report.steps.push_back(count("task_min_labels", answers));

    // step 7: per task keep n voters of each gender, most labels first
    per_voter.clear();
    for (const auto& a : answers) ++per_voter[a.voter];
    auto busier = [&](const std::string& x, const std::string& y) {
        const int cx = per_voter.at(x);
        const int cy = per_voter.at(y);
        return cx != cy ? cx > cy : x < y;
    };
    std::map<std::string, std::array<std::vector<std::string>, 2>> by_task;
    for (const auto& a : answers) by_task[a.task][static_cast<std::size_t>(attribute.at(a.voter))].push_back(a.voter);
    std::set<std::pair<std::string, std::string>> selected;
    for (auto& [task, groups] : by_task) {
        const auto n = std::min(groups[0].size(), groups[1].size());
        for (auto& g : groups) {
            std::sort(g.begin(), g.end(), busier);
            for (std::size_t r = 0; r < n; ++r) selected.emplace(g[r], task);
        }
    }
    keep_if(answers, [&](const Answer& a) { return selected.count({a.voter, a.task}) > 0; });
    report.steps.push_back(count("balanced", answers));
    if (answers.empty()) throw ValidationError("no task survives preprocessing");

    std::set<std::string> voter_set;
    std::set<std::string> task_set;
    for (const auto& a : answers) {
        voter_set.insert(a.voter);
        task_set.insert(a.task);
    }
    std::vector<std::string> voter_ids(voter_set.begin(), voter_set.end());
    std::vector<std::string> task_ids(task_set.begin(), task_set.end());
    std::unordered_map<std::string, int> voter_index;
    std::unordered_map<std::string, int> task_index;
    for (std::size_t n = 0; n < voter_ids.size(); ++n) voter_index[voter_ids[n]] = static_cast<int>(n);
    for (std::size_t n = 0; n < task_ids.size(); ++n) task_index[task_ids[n]] = static_cast<int>(n);
    std::vector<Observation> obs;
    obs.reserve(answers.size());
    for (const auto& a : answers) obs.push_back({voter_index.at(a.voter), task_index.at(a.task), a.label});
    std::vector<int> attrs;
    attrs.reserve(voter_ids.size());
    for (const auto& v : voter_ids) attrs.push_back(attribute.at(v));

    const auto num_voters = static_cast<int>(voter_ids.size());
    const auto num_tasks = static_cast<int>(task_ids.size());
    LabelMatrix labels(num_voters, num_tasks, 2, std::move(obs), std::move(voter_ids), std::move(task_ids));
    return {std::move(labels), AttributeTable(std::move(attrs), {0.5, 0.5}), std::move(report)};
}

MmResult preprocess_mm(const std::filesystem::path& path, const MmOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return preprocess_mm(in, options);
}

std::string to_json(const MmReport& report) {
    nlohmann::json j;
    j["rows_read"] = report.rows_read;
    j["rows_skipped"] = report.rows_skipped;
    j["responses_skipped"] = report.responses_skipped;
    j["duplicate_answers"] = report.duplicate_answers;
    j["steps"] = nlohmann::json::array();
    for (const auto& s : report.steps) {
        j["steps"].push_back({{"step", s.step}, {"voters", s.voters}, {"tasks", s.tasks}, {"labels", s.labels}});
    }
    return j.dump(2);
}

}  // namespace fairagg
