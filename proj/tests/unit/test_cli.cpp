#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nvmri/commands.hpp"
#include "nvmri/manifest.hpp"

using namespace nvmri;
namespace fs = std::filesystem;

namespace {

const std::string kSrc = NVMRI_SOURCE_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nvmri-cli-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string writeJson(const fs::path& dir, const std::string& name, const Json& j) {
    const auto p = (dir / name).string();
    std::ofstream f(p);
    f << j.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream b;
    b << f.rdbuf();
    return b.str();
}

Json smallQuench() {
    return Json::parse(R"({
        "seed": 11,
        "workers": 1,
        "ensemble": {"boundary": "periodic", "extent_nm": [45, 45, 45], "count": 40, "uv_cutoff_nm": 2.2},
        "model": {"ratio_gz_gxx": -1.0},
        "protocol": {"theta_rad": 0.7853981633974483, "Q_rad_per_nm": [0.1396, 0.1396, 0.1396],
                     "quench_times_us": {"start": 0, "stop": 0.5, "count": 4}, "trajectories": 70,
                     "dt_factor": 0.2}
    })");
}

struct Run {
    int code;
    std::string out, err;
};

Run run(Invocation inv) {
    std::ostringstream o, e;
    const int c = execute(inv, o, e);
    return {c, o.str(), e.str()};
}

int shell(const std::string& args) {
    const int s = std::system((std::string(NVMRI_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("missing key exits 2 and names the key") {
    const auto d = scratch("missing");
    auto j = smallQuench();
    j["protocol"].erase("trajectories");
    const auto r = run({"simulate-quench", writeJson(d, "c.json", j), (d / "out").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("protocol.trajectories") != std::string::npos);
    auto u = smallQuench();
    u["protocol"]["trajectories_typo"] = 3;
    const auto r2 = run({"simulate-quench", writeJson(d, "u.json", u), (d / "out").string()});
    CHECK(r2.code == 2);
    CHECK(r2.err.find("unknown key 'protocol.trajectories_typo'") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "out" / "manifest.json"));
    fs::remove_all(d);
}

TEST_CASE("empty grid exits 2") {
    const auto d = scratch("empty");
    auto j = smallQuench();
    j["scan"] = Json::parse(R"({"type": "anisotropy", "ratios": []})");
    Invocation inv{"scan", writeJson(d, "c.json", j), (d / "out").string()};
    const auto r = run(inv);
    CHECK(r.code == 2);
    CHECK(r.err.find("scan.ratios") != std::string::npos);
    j["scan"]["ratios"] = Json::parse(R"({"start": -1, "stop": 1, "count": 0})");
    inv.configPath = writeJson(d, "c2.json", j);
    CHECK(run(inv).code == 2);
    fs::remove_all(d);
}

TEST_CASE("compile-sequence reports and rejects malformed programs") {
    const auto d = scratch("seq");
    Invocation inv{"compile-sequence", "", (d / "xy4").string()};
    inv.pulsesPath = kSrc + "/sequences/xy4.txt";
    REQUIRE(run(inv).code == 0);
    const Json xy4 = Json::parse(slurp(d / "xy4" / "sequence.json"));
    CHECK(xy4["disorder_residual_norm"].get<double>() == 0.0);
    CHECK(xy4["net_rotation_identity"].get<bool>());

    inv.outDir = (d / "droid").string();
    inv.pulsesPath = kSrc + "/sequences/cxy4_droid_vxy4_symm.txt";
    REQUIRE(run(inv).code == 0);
    const Json dr = Json::parse(slurp(d / "droid" / "sequence.json"));
    const auto c = dr["c_triple"].get<std::vector<double>>();
    CHECK(std::abs(c[0] - c[1]) < 1e-12);
    CHECK(std::abs(c[1] - c[2]) < 1e-12);
    CHECK(dr["heisenberg"].get<bool>());

    {
        std::ofstream f(d / "bad.txt");
        f << "+X 180 30\n+Q 180 30\nEND 0\n";
    }
    inv.pulsesPath = (d / "bad.txt").string();
    inv.outDir = (d / "bad").string();
    const auto r = run(inv);
    CHECK(r.code == 2);
    CHECK(r.err.find("bad.txt:2:") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("fit-pumping accepts two columns and rejects three") {
    const auto d = scratch("fit");
    const std::string cfg = kSrc + "/configs/fit_pumping.json";
    Invocation inv{"fit-pumping", cfg, (d / "ok").string()};
    inv.dataPath = kSrc + "/data/pumping_synthetic.csv";
    REQUIRE(run(inv).code == 0);
    const Json fit = Json::parse(slurp(d / "ok" / "fit.json"));
    CHECK(std::abs(fit["tau_s"].get<double>() / 2.5 - 1.0) < 0.02);

    {
        std::ofstream f(d / "three.csv");
        f << "tau_s,contrast,sigma\n0.1,1,0.1\n0.2,2,0.1\n0.4,3,0.1\n0.8,3.5,0.1\n";
    }
    inv.dataPath = (d / "three.csv").string();
    inv.outDir = (d / "three").string();
    const auto r = run(inv);
    CHECK(r.code == 2);
    CHECK(r.err.find("found 3") != std::string::npos);

    {
        std::ofstream f(d / "flat.csv");
        f << "tau_s,contrast\n0.1,1\n0.2,1\n0.4,1\n0.8,1\n";
    }
    inv.dataPath = (d / "flat.csv").string();
    inv.outDir = (d / "flat").string();
    const auto rf = run(inv);
    CHECK(rf.code == 2);
    CHECK(rf.err.find("degenerate") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("verify passes on a fresh run and flags drift") {
    const auto d = scratch("verify");
    Invocation inv{"compile-sequence", "", (d / "out").string()};
    inv.pulsesPath = kSrc + "/sequences/cxy4_droid_vxy4_symm.txt";
    REQUIRE(run(inv).code == 0);
    inv.verify = true;
    const auto ok = run(inv);
    CHECK(ok.code == 0);
    CHECK(ok.out.find("outputs match manifest") != std::string::npos);
    {
        std::ofstream f(d / "out" / "frames.csv", std::ios::app);
        f << "tampered\n";
    }
    const auto bad = run(inv);
    CHECK(bad.code == 3);
    CHECK(bad.err.find("frames.csv") != std::string::npos);

    // recomputing from a changed input file drifts as well
    inv.verify = false;
    inv.command = "fit-pumping";
    inv.configPath = kSrc + "/configs/fit_pumping.json";
    inv.pulsesPath.clear();
    inv.dataPath = (d / "data.csv").string();
    {
        std::ofstream f(inv.dataPath);
        f << slurp(kSrc + "/data/pumping_synthetic.csv");
    }
    inv.outDir = (d / "fit").string();
    REQUIRE(run(inv).code == 0);
    inv.verify = true;
    CHECK(run(inv).code == 0);
    {
        std::ofstream f(inv.dataPath, std::ios::app);
        f << "60,1e8\n";
    }
    CHECK(run(inv).code == 3);
    fs::remove_all(d);
}

TEST_CASE("worker count does not change outputs") {
    const auto d = scratch("workers");
    const auto cfg = writeJson(d, "q.json", smallQuench());
    Invocation a{"simulate-quench", cfg, (d / "w1").string()};
    a.workers = 1;
    Invocation b = a;
    b.outDir = (d / "w3").string();
    b.workers = 3;
    REQUIRE(run(a).code == 0);
    REQUIRE(run(b).code == 0);
    const RunManifest m1 = readManifest(a.outDir), m3 = readManifest(b.outDir);
    REQUIRE(m1.outputs.size() == m3.outputs.size());
    REQUIRE_FALSE(m1.outputs.empty());
    int csvs = 0;
    for (std::size_t k = 0; k < m1.outputs.size(); ++k) {
        const auto& p = m1.outputs[k].path;
        CHECK(p == m3.outputs[k].path);
        if (fs::path(p).extension() != ".csv") continue;
        ++csvs;
        CHECK(slurp(fs::path(a.outDir) / p) == slurp(fs::path(b.outDir) / p));
    }
    CHECK(csvs > 0);
    CHECK(m3.workers == 3);

    Invocation s = a;
    s.outDir = (d / "seed").string();
    s.seed = 12;
    REQUIRE(run(s).code == 0);
    const RunManifest ms = readManifest(s.outDir);
    CHECK(ms.seed == 12);
    bool differs = false;
    for (std::size_t k = 0; k < ms.outputs.size(); ++k)
        if (fs::path(ms.outputs[k].path).extension() == ".csv" && ms.outputs[k].sha256 != m1.outputs[k].sha256)
            differs = true;
    CHECK(differs);
    fs::remove_all(d);
}

TEST_CASE("process exit codes") {
    const auto d = scratch("proc");
    CHECK(shell("--help") == 0);
    CHECK(shell("") == 2);
    CHECK(shell("no-such-command") == 2);
    CHECK(shell("simulate-quench") == 2);
    CHECK(shell("simulate-quench --config /nonexistent.json") == 2);
    CHECK(shell("scan --type bogus --config " + kSrc + "/configs/anisotropy.json") == 2);
    CHECK(shell("compile-sequence " + kSrc + "/sequences/xy4.txt --out " + (d / "a").string()) == 0);
    CHECK(shell("compile-sequence " + kSrc + "/sequences/xy4.txt --verify --out " + (d / "a").string()) == 0);
    CHECK(shell("compile-sequence " + kSrc + "/sequences/xy4.txt --verify --out " + (d / "none").string()) == 2);
    fs::remove_all(d);
}

}  // TEST_SUITE
