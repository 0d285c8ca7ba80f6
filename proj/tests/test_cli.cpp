// Integration tests for the ddet command line tool.
// argv[1] = path to the ddet binary, argv[2] = golden file directory.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

#define CHECK(cond)                                                              \
    do {                                                                         \
        if (!(cond)) {                                                           \
            ++g_failures;                                                        \
            std::cerr << "FAILED at " << __FILE__ << ":" << __LINE__ << ": "     \
                      << #cond << "\n";                                          \
        }                                                                        \
    } while (0)

struct RunResult {
    int exit_code;
    std::string output;  // stdout + stderr
};

std::string g_cli;
fs::path g_work;

RunResult run(const std::string& args) {
    fs::path cap = g_work / "capture.txt";
    std::string cmd = g_cli + " " + args + " > " + cap.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(cap);
    std::ostringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) return "<missing: " + p.string() + ">";
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool trees_identical(const fs::path& a, const fs::path& b) {
    std::set<fs::path> rel_a, rel_b;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel_a.insert(fs::relative(e.path(), a));
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) rel_b.insert(fs::relative(e.path(), b));
    if (rel_a != rel_b) return false;
    for (const fs::path& r : rel_a)
        if (slurp(a / r) != slurp(b / r)) return false;
    return true;
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

void test_synth_determinism() {
    std::string common = "synth --seed 7 --train-images 6 --test-images 3";
    RunResult r1 = run(common + " --out " + (g_work / "synth_a").string());
    CHECK(r1.exit_code == 0);
    CHECK(r1.output.find("wrote 6 train / 3 test") != std::string::npos);
    RunResult r2 = run(common + " --out " + (g_work / "synth_b").string());
    CHECK(r2.exit_code == 0);
    CHECK(trees_identical(g_work / "synth_a", g_work / "synth_b"));

    RunResult r3 = run("synth --seed 8 --train-images 6 --test-images 3 --out " +
                       (g_work / "synth_c").string());
    CHECK(r3.exit_code == 0);
    CHECK(!trees_identical(g_work / "synth_a", g_work / "synth_c"));
}

void test_train_eval_pipeline() {
    fs::path data = g_work / "data";
    CHECK(run("synth --seed 3 --train-images 8 --test-images 4 --out " + data.string())
              .exit_code == 0);

    fs::path cfg_path = g_work / "tiny.cfg";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[optim]\nsteps = 10\nbatch_size = 2\n[run]\nseed = 3\n";
    }
    fs::path out = g_work / "run";
    RunResult tr = run("train --dataset " + data.string() + " --config " + cfg_path.string() +
                       " --out " + out.string());
    CHECK(tr.exit_code == 0);
    CHECK(fs::exists(out / "checkpoint.ddet"));
    std::string log = slurp(out / "loss_log.csv");
    CHECK(log.rfind("step,total,cls,reg,n_pos", 0) == 0);
    CHECK(count_lines(log) >= 2);

    // flags override the config file
    fs::path out2 = g_work / "run2";
    RunResult tr2 = run("train --dataset " + data.string() + " --config " + cfg_path.string() +
                        " --steps 4 --out " + out2.string());
    CHECK(tr2.exit_code == 0);
    std::string log2 = slurp(out2 / "loss_log.csv");
    CHECK(count_lines(log2) < count_lines(log));

    std::string ckpt = (out / "checkpoint.ddet").string();
    RunResult ev = run("eval --dataset " + data.string() + " --checkpoint " + ckpt +
                       " --split test --out " + (g_work / "eval").string());
    CHECK(ev.exit_code == 0);
    CHECK(ev.output.find("mAP@0.5 = ") != std::string::npos);
    std::string eval_csv = slurp(g_work / "eval" / "eval.csv");
    CHECK(eval_csv.rfind("class,ap,n_gt", 0) == 0);
    CHECK(eval_csv.find("mAP,") != std::string::npos);
    CHECK(fs::exists(g_work / "eval" / "pr.csv"));

    RunResult de = run("detect --dataset " + data.string() + " --checkpoint " + ckpt +
                       " --split test --out " + (g_work / "det").string());
    CHECK(de.exit_code == 0);
    CHECK(slurp(g_work / "det" / "detections.csv").rfind("frame,class,score,x1,y1,x2,y2", 0) == 0);
    CHECK(fs::exists(g_work / "det" / "frame_0.ppm"));
    CHECK(fs::exists(g_work / "det" / "frame_0.svg"));

    RunResult cdf = run("cdf --dataset " + data.string() + " --checkpoint " + ckpt +
                        " --split test --gammas 0,0.5,1,2 --out " + (g_work / "cdf").string());
    CHECK(cdf.exit_code == 0);
    CHECK(cdf.output.find("wrote 8 curves") != std::string::npos);
    std::string cdf_csv = slurp(g_work / "cdf" / "cdf.csv");
    CHECK(cdf_csv.rfind("population,gamma,sample_fraction,cumulative_loss_share", 0) == 0);
    std::set<std::string> keys;
    std::istringstream is(cdf_csv);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        std::size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
        keys.insert(line.substr(0, c2));
    }
    CHECK(keys.size() == 8);

    RunResult bench = run("bench --checkpoint " + ckpt +
                          " --image-size 32 --warmup 1 --runs 3 --out " +
                          (g_work / "bench").string());
    CHECK(bench.exit_code == 0);
    CHECK(bench.output.find("mean_fps = ") != std::string::npos);
    std::string fps_csv = slurp(g_work / "bench" / "fps.csv");
    CHECK(fps_csv.rfind("metric,value", 0) == 0);
    CHECK(fps_csv.find("measured_runs,3") != std::string::npos);
}

void test_exit_codes() {
    CHECK(run("").exit_code == 1);                       // missing subcommand
    CHECK(run("trian").exit_code == 1);                  // unknown subcommand
    CHECK(run("train").exit_code == 1);                  // missing required --dataset
    CHECK(run("synth --no-such-flag").exit_code == 1);   // unknown flag

    fs::path bad_cfg = g_work / "bad.cfg";
    { std::ofstream c(bad_cfg); c << "[optim]\nlearning_rat = 0.1\n"; }
    RunResult r = run("train --dataset x --config " + bad_cfg.string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("unknown key 'learning_rat' in [optim]") != std::string::npos);

    // data errors are exit code 2
    RunResult missing = run("eval --dataset " + (g_work / "nope").string() +
                            " --checkpoint " + (g_work / "nope.ddet").string());
    CHECK(missing.exit_code == 2);
    CHECK(missing.output.rfind("error: ", 0) == 0);

    fs::path data = g_work / "data";  // from the pipeline test
    RunResult bad_ckpt = run("eval --dataset " + data.string() + " --checkpoint " +
                             (data / "classes.txt").string() + " --split test");
    CHECK(bad_ckpt.exit_code == 2);
    CHECK(bad_ckpt.output.find("magic") != std::string::npos);
}

void test_help_goldens(const fs::path& golden_dir) {
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"--help", "help.txt"},          {"synth --help", "help_synth.txt"},
        {"train --help", "help_train.txt"}, {"eval --help", "help_eval.txt"},
        {"detect --help", "help_detect.txt"}, {"bench --help", "help_bench.txt"},
        {"cdf --help", "help_cdf.txt"},
    };
    for (const auto& [args, file] : cases) {
        RunResult r = run(args);
        CHECK(r.exit_code == 0);
        std::string want = slurp(golden_dir / file);
        if (r.output != want) {
            ++g_failures;
            std::cerr << "FAILED: `" << args << "` output differs from golden " << file << "\n"
                      << "---- got ----\n" << r.output << "---- want ----\n" << want;
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: test_cli <ddet-binary> <golden-dir>\n";
        return 2;
    }
    g_cli = argv[1];
    g_work = fs::temp_directory_path() / ("ddet_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    test_synth_determinism();
    test_train_eval_pipeline();
    test_exit_codes();
    test_help_goldens(argv[2]);

    fs::remove_all(g_work);
    if (g_failures == 0) {
        std::cout << "test_cli: all checks passed\n";
        return 0;
    }
    std::cerr << "test_cli: " << g_failures << " check(s) failed\n";
    return 1;
}
