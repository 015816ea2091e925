#include "fairagg/experiment.hpp"
#include "fairagg/io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fairagg;

namespace {

const fs::path kDir = fs::temp_directory_path() / "fairagg-test-cli";

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome cli(const std::string& args) {
    fs::create_directories(kDir);
    const auto out = kDir / "stdout.txt";
    const auto cmd = std::string(FAIRAGG_CLI) + " " + args + " > " + out.string() + " 2> " + (kDir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream s;
    s << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("version and usage") {
    const auto v = cli("--version");
    CHECK(v.code == 0);
    CHECK(v.out.find(std::string(library_version())) != std::string::npos);
    CHECK(cli("").code != 0);
    CHECK(cli("frobnicate").code != 0);
}

TEST_CASE("aggregate to stdout and file") {
    const auto labels = kDir / "agg" / "labels.csv";
    write(labels, "voter_id,task_id,label\nv1,t1,1\nv2,t1,1\nv3,t1,2\nv1,t2,2\n");
    const auto r = cli("aggregate --labels " + labels.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("task_id,class_1,class_2\n") == 0);
    CHECK(r.out.find("t2,0,1\n") != std::string::npos);
    const auto out = kDir / "agg" / "soft.csv";
    CHECK(cli("aggregate --labels " + labels.string() + " --model soft_ds --alpha 4,1,1,4 --rho 1,1 --out " + out.string()).code == 0);
    CHECK(load_soft_labels(out).values.rows() == 2);
    CHECK(cli("aggregate --labels " + labels.string() + " --model nope").code == 2);
    CHECK(cli("aggregate --labels " + labels.string() + " --fairness weighting").code == 2);
    write(kDir / "agg" / "bad.csv", "v1,t1,x\n");
    CHECK(cli("aggregate --labels " + (kDir / "agg" / "bad.csv").string()).code == 2);
}

TEST_CASE("synth then metrics") {
    const auto dir = kDir / "synth";
    fs::remove_all(dir);
    CHECK(cli("synth --kind fairness_synthetic --voters 10,20 --tasks 15 --seed 4 --out " + dir.string()).code == 0);
    for (const auto* f : {"labels.csv", "attributes.csv", "truth.csv", "metadata.json"}) CHECK(fs::exists(dir / f));
    const auto est = dir / "est.csv";
    CHECK(cli("aggregate --labels " + (dir / "labels.csv").string() + " --attributes " + (dir / "attributes.csv").string() +
              " --fairness splitting --out " + est.string()).code == 0);
    const auto m = cli("metrics --estimate " + est.string() + " --reference " + (dir / "truth.csv").string());
    CHECK(m.code == 0);
    CHECK(m.out.find("mae,mae_class,bias\n") == 0);
}

TEST_CASE("experiment and compare exit codes") {
    const auto dir = kDir / "exp";
    fs::remove_all(dir);
    write(dir / "config.json", R"({"version": 1, "experiment": "soft_label",
        "generator": {"num_voters_per_attr": [15, 0]},
        "methods": [{"model": "mv"}, {"model": "ds"}],
        "sweep": {"num_tasks": [10, 20]}, "seeds": [0, 1]})");
    CHECK(cli("experiment --config " + (dir / "config.json").string() + " --workers 2 --out " + (dir / "a").string()).code == 0);
    CHECK(cli("experiment --config " + (dir / "config.json").string() + " --seed 0 --seed 1 --out " + (dir / "b").string()).code == 0);
    const auto a = (dir / "a" / "metrics.csv").string(), b = (dir / "b" / "metrics.csv").string();
    CHECK(cli("compare " + a + " " + b).code == 0);
    // perturb one row
    std::ifstream in(a);
    std::stringstream s;
    s << in.rdbuf();
    auto text = s.str();
    const auto row = text.find("\nsoft_label,mv,none,0,10,");
    REQUIRE(row != std::string::npos);
    const auto row_end = text.find('\n', row + 1);
    auto fields = split_csv_line(text.substr(row + 1, row_end - row - 1));
    fields[9] = format_real(std::stod(fields[9]) + 0.05);  // mae
    std::string changed;
    for (const auto& f : fields) changed += (changed.empty() ? "" : ",") + f;
    text.replace(row + 1, row_end - row - 1, changed);
    write(dir / "c.csv", text);
    const auto c = (dir / "c.csv").string();
    const auto fail = cli("compare " + a + " " + c + " --threshold 0.01");
    CHECK(fail.code == 1);
    CHECK(fail.out.find("soft_label,mv,none,0,10") != std::string::npos);
    CHECK(cli("compare " + a + " " + c + " --threshold 0.1").code == 0);
    write(dir / "short.csv", text.substr(0, row + 1));
    CHECK(cli("compare " + a + " " + (dir / "short.csv").string()).code == 2);
}

TEST_CASE("preprocess-mm writes a corpus and retention report") {
    const auto dir = kDir / "mm";
    fs::remove_all(dir);
    std::ostringstream csv;
    csv << "ResponseID,ExtendedSessionID,UserID,ScenarioType,Saved,Review_gender";
    const std::vector<std::string> chars = {"Man", "Woman", "Pregnant", "Stroller", "OldMan", "OldWoman", "Boy",
                                            "Girl", "Homeless", "LargeWoman", "LargeMan", "Criminal", "MaleExecutive",
                                            "FemaleExecutive", "FemaleAthlete", "MaleAthlete", "FemaleDoctor",
                                            "MaleDoctor", "Dog", "Cat"};
    for (const auto& c : chars) csv << ',' << c;
    csv << '\n';
    int id = 0;
    for (const auto* user : {"a", "b"}) {
        const std::string gender = std::string(user) == "a" ? "male" : "female";
        for (int side = 0; side < 2; ++side) {
            csv << 'r' << id << ",s" << user << ',' << user << ",Gender," << (side == 0) << ',' << gender;
            for (std::size_t c = 0; c < chars.size(); ++c) csv << ',' << (c == static_cast<std::size_t>(side));
            csv << '\n';
        }
        ++id;
    }
    write(dir / "in.csv", csv.str());
    const auto r = cli("preprocess-mm --input " + (dir / "in.csv").string() + " --min-female-labels 1 --min-task-labels 1 --out " +
                       (dir / "out").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("balanced") != std::string::npos);
    for (const auto* f : {"labels.csv", "attributes.csv", "metadata.json", "retention.json"}) CHECK(fs::exists(dir / "out" / f));
    CHECK(cli("preprocess-mm --input " + (dir / "in.csv").string() + " --out " + (dir / "out2").string()).code == 2);
}
