#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmbridge/cli.hpp"

using namespace mmbridge;
namespace fs = std::filesystem;

namespace {

struct CoutCapture {
    std::stringstream buf;
    std::streambuf* old;
    CoutCapture() : old(std::cout.rdbuf(buf.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(old); }
    std::string text() const { return buf.str(); }
};

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<std::string> tiny_overrides() {
    return {"--set",
            "dataset.per_class=4",
            "dataset.duration=0.65",
            "dataset.split_train=0.5",
            "dataset.split_val=0.25",
            "dataset.split_test=0.25",
            "radar.frames=32",
            "radar.chirps_per_frame=32",
            "radar.adc_samples=32",
            "radar.idle_time=609.5e-6",
            "dataset.heatmap_rows=32",
            "dataset.heatmap_cols=32",
            "dataset.store_cubes=1"};
}

std::vector<std::string> with_tiny(std::vector<std::string> args) {
    for (const auto& a : tiny_overrides()) args.push_back(a);
    return args;
}

bool trees_identical(const fs::path& a, const fs::path& b) {
    std::vector<std::string> ra, rb;
    for (auto& p : fs::recursive_directory_iterator(a))
        if (p.is_regular_file()) ra.push_back(fs::relative(p.path(), a).string());
    for (auto& p : fs::recursive_directory_iterator(b))
        if (p.is_regular_file()) rb.push_back(fs::relative(p.path(), b).string());
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    if (ra != rb) return false;
    for (const auto& rel : ra) {
        std::ifstream fa(a / rel, std::ios::binary), fb(b / rel, std::ios::binary);
        std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        if (ba != bb) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("unknown commands exit with a usage error listing the commands") {
    CoutCapture cap;
    CHECK(cli::run({"frobnicate"}) == 1);
    CHECK(cli::run(std::vector<std::string>{}) == 1);
}

TEST_CASE("selfcheck aggregates the oracle suite and exits zero") {
    CoutCapture cap;
    CHECK(cli::run({"selfcheck"}) == 0);
    CHECK(cap.text().find("[PASS]") != std::string::npos);
    CHECK(cap.text().find("[FAIL]") == std::string::npos);
}

TEST_CASE("synth is reproducible and prints its digest and seed") {
    TempDir root("mmb_cli_synth");
    const auto d1 = (root.path / "a").string();
    const auto d2 = (root.path / "b").string();
    std::string digest1;
    {
        CoutCapture cap;
        REQUIRE(cli::run(with_tiny({"synth", "--out", d1, "--seed", "7"})) == 0);
        const auto text = cap.text();
        CHECK(text.find("config digest: ") != std::string::npos);
        CHECK(text.find("master seed:   7") != std::string::npos);
        digest1 = text.substr(text.find("config digest: ") + 15, 16);
    }
    {
        CoutCapture cap;
        REQUIRE(cli::run(with_tiny({"synth", "--out", d2, "--seed", "7"})) == 0);
        CHECK(cap.text().find(digest1) != std::string::npos);
    }
    CHECK(trees_identical(d1, d2));
}

TEST_CASE("the digest changes iff an effective setting changes") {
    cfg::Config a, b;
    CHECK(a.digest_hex() == b.digest_hex());
    b.set("diffusion.steps", "123");
    CHECK(a.digest_hex() != b.digest_hex());
    b.set("diffusion.steps", a.get("diffusion.steps"));
    CHECK(a.digest_hex() == b.digest_hex());
}

TEST_CASE("config files reject unknown keys with the line number") {
    TempDir root("mmb_cli_cfg");
    const auto path = (root.path / "bad.cfg").string();
    {
        std::ofstream f(path);
        f << "# comment\n";
        f << "diffusion.steps = 100\n";
        f << "nonsense.key = 1\n";
    }
    cfg::Config config;
    try {
        config.load_file(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("nonsense.key") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }
    CoutCapture cap;
    CHECK(cli::run({"synth", "--out", (root.path / "x").string(), "--config", path}) == 1);
}

TEST_CASE("config files apply settings and comments are ignored") {
    TempDir root("mmb_cli_cfg2");
    const auto path = (root.path / "ok.cfg").string();
    {
        std::ofstream f(path);
        f << "diffusion.steps = 77  # inline comment\n\n";
        f << "classifier.epochs = 5\n";
    }
    cfg::Config config;
    config.load_file(path);
    CHECK(config.get_int("diffusion.steps") == 77);
    CHECK(config.get_int("classifier.epochs") == 5);
}

TEST_CASE("missing files map to the I/O exit code") {
    CoutCapture cap;
    CHECK(cli::run({"render", "--in", "does_not_exist.irad", "--out", "x.pgm"}) == 2);
    CHECK(cli::run(with_tiny({"train-i2r", "--data", "no_such_dir", "--out", "x.irad"})) == 2);
}

TEST_CASE("the full pipeline runs end to end in process") {
    TempDir root("mmb_cli_e2e");
    const auto ds = (root.path / "ds").string();
    CoutCapture cap;
    REQUIRE(cli::run(with_tiny({"synth", "--out", ds, "--seed", "3"})) == 0);

    // process a stored cube into a fresh heatmap, then enhance it
    const auto cube = ds + "/samples/push_0000/cube.irad";
    const auto hm = (root.path / "hm.irad").string();
    const auto enh = (root.path / "enh.irad").string();
    const auto mask = (root.path / "mask.irad").string();
    REQUIRE(cli::run(with_tiny({"process", "--in", cube, "--out", hm})) == 0);
    REQUIRE(cli::run(with_tiny({"enhance", "--in", hm, "--out", enh, "--mask", mask})) == 0);
    auto processed = irad::read_heatmap(hm);
    auto stored = irad::read_heatmap(ds + "/samples/push_0000/heatmap.irad");
    REQUIRE(processed.rows == stored.rows);
    // The regenerated enhanced heatmap must equal the one written by synth.
    auto enhanced = irad::read_heatmap(enh);
    CHECK(enhanced.v == stored.v);

    // train both models briefly and evaluate
    const auto i2r = (root.path / "i2r.irad").string();
    const auto clf = (root.path / "clf.irad").string();
    const auto report = (root.path / "report.json").string();
    REQUIRE(cli::run(with_tiny({"train-i2r", "--data", ds, "--out", i2r, "--T", "20", "--epochs",
                                "2", "--seed", "4",
                                "--set", "diffusion.unet_base=4", "diffusion.batch=4"})) == 0);
    REQUIRE(cli::run(with_tiny({"train-clf", "--data", ds, "--out", clf, "--epochs", "8", "--seed",
                                "5", "--set", "classifier.chunk=4"})) == 0);
    REQUIRE(cli::run(with_tiny({"eval", "--clf", clf, "--i2r", i2r, "--data", ds, "--report",
                                report, "--stride", "5"})) == 0);

    std::ifstream rf(report);
    nlohmann::json j;
    rf >> j;
    const double t1 = j["real"]["top1"], t2 = j["real"]["top2"], t3 = j["real"]["top3"];
    CHECK(t1 <= t2);
    CHECK(t2 <= t3);
    CHECK(j.contains("generative"));

    // translate one held-out spectrogram and render everything
    const auto tr = (root.path / "tr.irad").string();
    REQUIRE(cli::run({"translate", "--ckpt", i2r, "--in", ds + "/samples/front_raise_0001/spectrogram.irad",
                      "--out", tr, "--stride", "4", "--seed", "6"}) == 0);
    const auto pgm = (root.path / "map.pgm").string();
    REQUIRE(cli::run({"render", "--in", tr, "--out", pgm}) == 0);
    std::ifstream pf(pgm, std::ios::binary);
    std::string header;
    pf >> header;
    CHECK(header == "P5");

    // translate twice with one seed -> identical bytes
    const auto tr2 = (root.path / "tr2.irad").string();
    REQUIRE(cli::run({"translate", "--ckpt", i2r, "--in", ds + "/samples/front_raise_0001/spectrogram.irad",
                      "--out", tr2, "--stride", "4", "--seed", "6"}) == 0);
    std::ifstream f1(tr, std::ios::binary), f2(tr2, std::ios::binary);
    std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
}
