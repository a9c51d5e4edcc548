// End-to-end checks of the installed command surface: exit codes, file
// outputs, and byte-level determinism. Each case shells out to the real
// binary (path injected at compile time) inside its own temp directory.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const std::string kCli = DEBIAS_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("debias_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

std::string drop_last_column(const std::string& csv) {
    std::string out;
    for (const std::string& line : lines_of(csv)) {
        out += line.substr(0, line.rfind(','));
        out += '\n';
    }
    return out;
}

// tiny dataset + arch every case shares: fast and exercises the full path
const std::string kGen = "gen-data --data.samples=96 --data.image_size=16 --data.group_size=4 "
                         "--data.seed=5 ";
const std::string kArch = "--arch.image_size=16 --arch.conv_channels=[8,16] --arch.latent_dim=16 "
                          "--arch.adv_hidden=16 ";
const std::string kTrain = "--train.epochs=2 --train.batch_size=32 --train.adv_pretrain_steps=5 ";

} // namespace

TEST_CASE("gen-data writes a dataset and reruns byte-identically") {
    TempDir tmp;
    CHECK(run(kGen + "--out_dir=" + (tmp / "a")) == 0);
    CHECK(fs::exists(tmp / "a/dataset.dbds"));
    CHECK(fs::exists(tmp / "a/resolved_config.json"));
    CHECK(run(kGen + "--out_dir=" + (tmp / "b")) == 0);
    CHECK(slurp(tmp / "a/dataset.dbds") == slurp(tmp / "b/dataset.dbds"));
}

TEST_CASE("train produces a deterministic checkpoint and a full history") {
    TempDir tmp;
    REQUIRE(run(kGen + "--out_dir=" + (tmp / "d")) == 0);
    const std::string train_cmd = "train --data.path=" + (tmp / "d/dataset.dbds") + " " + kArch +
                                  kTrain;
    CHECK(run(train_cmd + "--out_dir=" + (tmp / "t1")) == 0);
    CHECK(run(train_cmd + "--out_dir=" + (tmp / "t2")) == 0);
    CHECK(slurp(tmp / "t1/checkpoint.dbck") == slurp(tmp / "t2/checkpoint.dbck"));

    // history matches except the wall-time column
    const std::string h1 = slurp(tmp / "t1/history.csv");
    CHECK(drop_last_column(h1) == drop_last_column(slurp(tmp / "t2/history.csv")));
    const std::vector<std::string> lines = lines_of(h1);
    REQUIRE(lines.size() == 3); // header + 2 epochs
    CHECK(lines[0] == "epoch,l_cae,l_adv,e_lambda,seconds");
    CHECK(split_csv(lines[1])[0] == "1");
    CHECK(split_csv(lines[2])[0] == "2");
}

TEST_CASE("eval reports both probes with self-consistent fold changes") {
    TempDir tmp;
    REQUIRE(run(kGen + "--out_dir=" + (tmp / "d")) == 0);
    REQUIRE(run("train --data.path=" + (tmp / "d/dataset.dbds") + " " + kArch + kTrain +
                "--out_dir=" + (tmp / "t")) == 0);
    CHECK(run("eval --checkpoint " + (tmp / "t/checkpoint.dbck") + " --data.path=" +
              (tmp / "d/dataset.dbds") + " --out_dir=" + (tmp / "e")) == 0);

    const std::vector<std::string> lines = lines_of(slurp(tmp / "e/reports.csv"));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "probe,k,n,accuracy,null,fold_change");
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = split_csv(lines[i]);
        REQUIRE(f.size() == 6);
        const double acc = std::stod(f[3]), null = std::stod(f[4]), fc = std::stod(f[5]);
        CHECK(std::fabs(fc - acc / null) < 1e-6);
    }
    CHECK(split_csv(lines[1])[0] == "moa");
    CHECK(split_csv(lines[2])[0] == "batch");
}

TEST_CASE("sweep writes one row per lambda plus the null row") {
    TempDir tmp;
    REQUIRE(run(kGen + "--out_dir=" + (tmp / "d")) == 0);
    const std::string sweep_cmd = "sweep --data.path=" + (tmp / "d/dataset.dbds") + " " + kArch +
                                  kTrain + "--train.cae_pretrain_epochs=1 --sweep=0,2 --out_dir=" +
                                  (tmp / "s");
    CHECK(run(sweep_cmd) == 0);
    const std::vector<std::string> lines = lines_of(slurp(tmp / "s/sweep.csv"));
    REQUIRE(lines.size() == 4); // header + 2 lambdas + null
    CHECK(lines[0] == "lambda,moa_accuracy,moa_fc,batch_accuracy,batch_fc");
    CHECK(split_csv(lines[1])[0] == "0");
    CHECK(split_csv(lines[2])[0] == "2");
    CHECK(split_csv(lines[3])[0] == "null");
    for (size_t i = 1; i + 1 < lines.size(); ++i) {
        const std::vector<std::string> f = split_csv(lines[i]);
        const std::vector<std::string> null_row = split_csv(lines[3]);
        CHECK(std::fabs(std::stod(f[2]) - std::stod(f[1]) / std::stod(null_row[1])) < 1e-6);
        CHECK(std::fabs(std::stod(f[4]) - std::stod(f[3]) / std::stod(null_row[3])) < 1e-6);
    }
    CHECK(fs::exists(tmp / "s/checkpoint_pretrain.dbck"));
    CHECK(fs::exists(tmp / "s/checkpoint_lambda0.dbck"));
    CHECK(fs::exists(tmp / "s/checkpoint_lambda2.dbck"));
}

TEST_CASE("embed writes coordinates, labels, and a KL sidecar, deterministically") {
    TempDir tmp;
    REQUIRE(run(kGen + "--out_dir=" + (tmp / "d")) == 0);
    REQUIRE(run("train --data.path=" + (tmp / "d/dataset.dbds") + " " + kArch + kTrain +
                "--out_dir=" + (tmp / "t")) == 0);
    const std::string embed_cmd = "embed --checkpoint " + (tmp / "t/checkpoint.dbck") +
                                  " --data.path=" + (tmp / "d/dataset.dbds") +
                                  " --eval.tsne_perplexity=5 --eval.tsne_iters=60 --out_dir=";
    CHECK(run(embed_cmd + (tmp / "m1")) == 0);
    CHECK(run(embed_cmd + (tmp / "m2")) == 0);
    CHECK(slurp(tmp / "m1/embedding.csv") == slurp(tmp / "m2/embedding.csv"));
    CHECK(slurp(tmp / "m1/embedding.json") == slurp(tmp / "m2/embedding.json"));

    const std::vector<std::string> lines = lines_of(slurp(tmp / "m1/embedding.csv"));
    CHECK(lines[0] == "row_id,x,y,m_label,s_value");
    // aggregation on by default: one row per group
    CHECK(lines.size() > 10);
    CHECK(lines.size() < 90);
    CHECK(slurp(tmp / "m1/embedding.json").find("final_kl") != std::string::npos);
}

TEST_CASE("exit codes follow the error taxonomy") {
    TempDir tmp;
    CHECK(run("gen-data --data.samples=0 --out_dir=" + (tmp / "x")) == 1);   // config
    CHECK(run("train --data.path=" + (tmp / "nope.dbds")) == 2);             // data
    CHECK(run("train --bogus.key=1") == 1);                                  // unknown key
    CHECK(run("not-a-command") == 1);                                        // usage
    CHECK(run("eval --data.path=x.dbds") == 1);                              // missing --checkpoint

    // corrupted magic bytes -> data error
    REQUIRE(run(kGen + "--out_dir=" + (tmp / "d")) == 0);
    std::string bytes = slurp(tmp / "d/dataset.dbds");
    bytes[0] ^= 0x5a;
    std::ofstream(tmp / "d/bad.dbds", std::ios::binary) << bytes;
    CHECK(run("train --data.path=" + (tmp / "d/bad.dbds")) == 2);

    CHECK(run("gradcheck") == 0);
    CHECK(run("gradcheck --corrupt-op relu") == 3); // negative control must fail
}

TEST_CASE("config files merge under overrides and are persisted resolved") {
    TempDir tmp;
    std::ofstream(tmp / "cfg.json") << R"({"data": {"samples": 96, "image_size": 16,)"
                                    << R"( "group_size": 4}, "out_dir": ")" << (tmp / "o")
                                    << R"("})";
    CHECK(run("gen-data --config " + (tmp / "cfg.json") + " --data.samples=64") == 0);
    const std::string resolved = slurp(tmp / "o/resolved_config.json");
    CHECK(resolved.find("\"samples\": 64") != std::string::npos);   // override wins
    CHECK(resolved.find("\"image_size\": 16") != std::string::npos); // file wins over default
    CHECK(resolved.find("\"n_classes\": 4") != std::string::npos);   // default filled in

    std::ofstream(tmp / "bad.json") << R"({"data": {"sample_count": 5}})";
    CHECK(run("gen-data --config " + (tmp / "bad.json")) == 1); // unknown key rejected
}
