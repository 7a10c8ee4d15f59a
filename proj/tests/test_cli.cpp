#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <doctest.h>
#include <cli.hpp>
#include <audita/netsim.hpp>

namespace fs = std::filesystem;

namespace {

    struct result {
        int code;
        std::string out;
        std::string err;
    };

    result run(std::vector<std::string> args)
    {
        std::ostringstream out, err;
        const int code = audita::cli::run(args, out, err);
        return { code, out.str(), err.str() };
    }

    struct scratch {
        fs::path dir;

        explicit scratch(const std::string &name):
            dir { fs::temp_directory_path() / ("audita-cli-" + name + "-" + std::to_string(::getpid())) }
        {
            fs::remove_all(dir);
            fs::create_directories(dir);
        }
        ~scratch()
        {
            fs::remove_all(dir);
        }

        std::string operator/(const std::string &leaf) const
        {
            return (dir / leaf).string();
        }
    };

    std::string slurp(const std::string &path)
    {
        std::ifstream in { path, std::ios::binary };
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void spit(const std::string &path, const std::string &text)
    {
        std::ofstream { path, std::ios::binary } << text;
    }

    std::string first_file_with(const fs::path &dir, const std::string &ext)
    {
        for (const auto &e: fs::directory_iterator { dir })
            if (e.path().extension() == ext)
                return e.path().string();
        return {};
    }

    const char *tiny_scenario = "n = 64\nm = 16\nk = 4\nd = 4\nl = 2\nnode_count = 10\n"
                                "master_seed = 5eed\nmax_timestamps = 12\nadversary = 3 outsourcer 40\n";

}

TEST_SUITE("cli") {

TEST_CASE("keygen, setup, distribute, challenge, prove and verify round-trip")
{
    scratch s { "roundtrip" };
    fs::create_directories(s / "sn");
    fs::create_directories(s / "bc");
    fs::create_directories(s / "store");
    fs::create_directories(s / "assign");
    std::string payload(5000, '\0');
    for (std::size_t i = 0; i < payload.size(); ++i)
        payload[i] = static_cast<char>((i * 131) % 251);
    spit(s / "file.dat", payload);

    REQUIRE(run({ "keygen", "--seed", "0a", "--role", "sn", "--out", s / "sn" }).code == 0);
    REQUIRE(run({ "keygen", "--seed", "0b", "--role", "bc", "--out", s / "bc" }).code == 0);
    const auto setup = run({ "setup", "--file", s / "file.dat", "--chunk-size", "256", "--seed", "f00d", "--out",
        s / "store" });
    REQUIRE(setup.code == 0);
    CHECK(setup.out.find("chunks 20\n") != std::string::npos);
    REQUIRE(run({ "distribute", "--store", s / "store/store.bin", "--node", s / "sn/sn.pub", "--m", "8", "--out",
                    s / "assign" })
                .code
        == 0);
    const auto assignment = first_file_with(s.dir / "assign", ".assign");
    REQUIRE(!assignment.empty());
    CHECK(slurp(first_file_with(s.dir / "assign", ".manifest")).find("m 8\n") != std::string::npos);

    const auto chal = run({ "challenge", "--file-pub", s / "store/file.pub", "--seed", "77", "--timestamp", "3",
        "--leader", s / "bc/bc.pub", "--node", s / "sn/sn.pub", "--m", "8", "--d", "3", "--out", s / "idstr" });
    REQUIRE(chal.code == 0);
    CHECK(chal.out.find("indexes ") != std::string::npos);

    const auto prove = run({ "prove", "--file-pub", s / "store/file.pub", "--key", s / "sn/sn.key", "--assignment",
        assignment, "--idstr", s / "idstr", "--d", "3", "--out", s / "proof" });
    REQUIRE(prove.code == 0);
    const auto verify = run({ "verify", "--file-pub", s / "store/file.pub", "--proof", s / "proof", "--idstr",
        s / "idstr", "--m", "8", "--d", "3" });
    CHECK(verify.code == 0);
    CHECK(verify.out.rfind("ok ", 0) == 0);

    // Wrong d, a tampered proof and another timestamp all fail with exit 1.
    const auto wrong_d = run({ "verify", "--file-pub", s / "store/file.pub", "--proof", s / "proof", "--idstr",
        s / "idstr", "--m", "8", "--d", "2" });
    CHECK(wrong_d.code == 1);
    CHECK(wrong_d.err.rfind("error: verification: ", 0) == 0);
    auto text = slurp(s / "proof");
    text[200] = text[200] == '0' ? '1' : '0';
    spit(s / "tampered", text);
    CHECK(run({ "verify", "--file-pub", s / "store/file.pub", "--proof", s / "tampered", "--idstr", s / "idstr",
              "--m", "8", "--d", "3" })
              .code
        == 1);
    REQUIRE(run({ "challenge", "--file-pub", s / "store/file.pub", "--seed", "77", "--timestamp", "4", "--leader",
                    s / "bc/bc.pub", "--m", "8", "--d", "3", "--out", s / "idstr4" })
                .code
        == 0);
    CHECK(run({ "verify", "--file-pub", s / "store/file.pub", "--proof", s / "proof", "--idstr", s / "idstr4",
              "--m", "8", "--d", "3" })
              .code
        == 1);
}

TEST_CASE("outputs are byte-identical for identical inputs")
{
    scratch a { "golden-a" }, b { "golden-b" };
    for (const auto *dir: { &a, &b }) {
        REQUIRE(run({ "keygen", "--seed", "0c", "--role", "sn", "--out", dir->dir.string() }).code == 0);
        spit(*dir / "tiny.cfg", tiny_scenario);
        REQUIRE(run({ "simulate", "--scenario", *dir / "tiny.cfg", "--out", dir->dir.string() }).code == 0);
    }
    for (const auto *leaf: { "sn.key", "sn.pub", "coverage.csv", "nodes.csv", "chain.txt" })
        CHECK(slurp(a / leaf) == slurp(b / leaf));
    CHECK(slurp(a / "coverage.csv").rfind("timestamp,coverage_fraction\n", 0) == 0);
    // The simulate outputs are the library's own renderings.
    const auto res = audita::netsim::run_simulation(audita::netsim::parse_scenario(tiny_scenario));
    CHECK(slurp(a / "coverage.csv") == audita::netsim::coverage_csv(res));
    CHECK(slurp(a / "chain.txt") == res.chain->export_chain());

    const auto other = run({ "simulate", "--scenario", a / "tiny.cfg", "--seed", "beef", "--out", b.dir.string() });
    REQUIRE(other.code == 0);
    CHECK(slurp(a / "chain.txt") != slurp(b / "chain.txt"));
}

TEST_CASE("export-chain writes and re-verifies a chain")
{
    scratch s { "export" };
    spit(s / "tiny.cfg", tiny_scenario);
    REQUIRE(run({ "export-chain", "--scenario", s / "tiny.cfg", "--out", s / "chain.txt" }).code == 0);
    const auto ok = run({ "export-chain", "--verify", s / "chain.txt" });
    CHECK(ok.code == 0);
    CHECK(ok.out == "ok 14 blocks\n");
    auto text = slurp(s / "chain.txt");
    const auto second_line = text.find('\n') + 1;
    text[second_line + 70] = text[second_line + 70] == 'a' ? 'b' : 'a';
    spit(s / "bad.txt", text);
    const auto bad = run({ "export-chain", "--verify", s / "bad.txt" });
    CHECK(bad.code == 1);
    CHECK(run({ "export-chain" }).code == 1);
}

TEST_CASE("solve prints the closed-form timestamp count")
{
    const auto r = run({ "solve", "--n", "68719476736", "--d", "8000", "--l", "1000", "--target", "0.9" });
    REQUIRE(r.code == 0);
    const double expected = std::ceil(std::log(0.1) / (1000.0 * std::log1p(-8000.0 / 68719476736.0)));
    CHECK(r.out == std::to_string(static_cast<long long>(expected)) + "\n");
    CHECK(std::stod(r.out) == doctest::Approx(1.98e4).epsilon(0.01));
    CHECK(run({ "solve", "--n", "65536", "--d", "1000", "--l", "1" }).out == "150\n");
    const auto never = run({ "solve", "--n", "100", "--d", "0", "--l", "1" });
    CHECK(never.code == 1);
    CHECK(never.err.rfind("error: unreachable-target: ", 0) == 0);
}

TEST_CASE("usage errors exit 2 and contract violations exit 1")
{
    CHECK(run({}).code == 2);
    CHECK(run({ "frobnicate" }).code == 2);
    CHECK(run({ "solve", "--n", "10" }).code == 2);
    CHECK(run({ "solve", "--n", "ten", "--d", "1", "--l", "1" }).code == 2);
    CHECK(run({ "keygen", "--seed", "00", "--role", "admin", "--out", "/tmp" }).code == 2);
    const auto bad_seed = run({ "keygen", "--seed", "xyz", "--role", "sn", "--out", "/tmp" });
    CHECK(bad_seed.code == 1);
    CHECK(bad_seed.err.rfind("error: ", 0) == 0);
    const auto missing = run({ "simulate", "--scenario", "/nonexistent.cfg", "--out", "/tmp" });
    CHECK(missing.code == 1);
    CHECK(missing.err.rfind("error: io: ", 0) == 0);
    scratch s { "errors" };
    spit(s / "bad.cfg", "n = 64\nwhat = 3\n");
    const auto cfg = run({ "simulate", "--scenario", s / "bad.cfg", "--out", s.dir.string() });
    CHECK(cfg.code == 1);
    CHECK(cfg.err.rfind("error: config: line 2", 0) == 0);
    spit(s / "empty.dat", "");
    CHECK(run({ "setup", "--file", s / "empty.dat", "--seed", "01", "--out", s.dir.string() }).code == 1);
}

}
