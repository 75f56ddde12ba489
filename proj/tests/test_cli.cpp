#include "doctest.h"

#include "eqlab/cli.hpp"
#include "eqlab/covering.hpp"
#include "eqlab/rep.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace eqlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto dir = fs::temp_directory_path() / ("eqlab_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text)
{
    auto path = dir / "run.cfg";
    std::ofstream(path) << text;
    return path;
}

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "eqlab");
    std::vector<const char*> argv;
    for(const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli_main(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Every record terminated by CRLF, no bare LF.
bool crlf_only(const std::string& s)
{
    if(s.empty() || s.size() < 2 || s.substr(s.size() - 2) != "\r\n")
        return false;
    for(std::size_t i = 0; i < s.size(); ++i)
        if(s[i] == '\n' && (i == 0 || s[i - 1] != '\r'))
            return false;
    return true;
}

std::vector<std::vector<std::string>> rows_of(const std::string& csv)
{
    std::vector<std::vector<std::string>> out;
    std::stringstream ss(csv);
    std::string line;
    while(std::getline(ss, line)) {
        if(!line.empty() && line.back() == '\r')
            line.pop_back();
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while(std::getline(ls, cell, ','))
            cells.push_back(cell);
        out.push_back(cells);
    }
    return out;
}

const char* flow_config = "experiment=flow\n"
                          "flow.x0=identity\n"
                          "flow.T=5\n"
                          "flow.nR=300\n"
                          "flow.nHaar=3000\n";

} // namespace

TEST_CASE("config parsing")
{
    std::stringstream ok("# comment\n\n  a.b = 3 \nname=x=y\r\n");
    auto cfg = Config::parse(ok);
    CHECK(cfg.integer("a.b") == 3);
    CHECK(cfg.str("name") == "x=y");
    CHECK(cfg.real("missing", 0.5) == 0.5);
    CHECK(cfg.resolved().at("missing") == "0.5");
    CHECK(cfg.unused().empty());

    std::stringstream dup("a=1\na=2\n");
    CHECK_THROWS_AS(Config::parse(dup), ConfigError);
    std::stringstream noeq("just a line\n");
    CHECK_THROWS_AS(Config::parse(noeq), ConfigError);
    std::stringstream bad("n=3x\nb=maybe\n");
    auto c2 = Config::parse(bad);
    CHECK_THROWS_AS(c2.integer("n"), ConfigError);
    CHECK_THROWS_AS(c2.flag("b", true), ConfigError);
    CHECK_THROWS_AS(c2.str("absent"), ConfigError);
}

TEST_CASE("exit codes")
{
    auto dir = scratch("exit");
    SUBCASE("missing key names the key")
    {
        auto cfg = write_config(dir, "experiment=flow\n");
        auto r = run({"--config", cfg.string(), "--out", (dir / "o").string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("flow.T") != std::string::npos);
    }
    SUBCASE("unknown key")
    {
        auto cfg = write_config(dir, std::string(flow_config) + "flow.Tt=4\n");
        auto r = run({"--config", cfg.string(), "--out", (dir / "o").string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("flow.Tt") != std::string::npos);
    }
    SUBCASE("bad value and unknown experiment")
    {
        auto cfg = write_config(dir, "experiment=flow\nflow.T=-1\n");
        CHECK(run({"--config", cfg.string(), "--out", (dir / "o").string()}).code == 2);
        cfg = write_config(dir, "experiment=nothing\n");
        CHECK(run({"--config", cfg.string(), "--out", (dir / "o").string()}).code == 2);
    }
    SUBCASE("empty fixture parameters")
    {
        auto cfg = write_config(dir, "experiment=fixtures\nfield.kind=real\n");
        auto r = run({"--config", cfg.string(), "--out", (dir / "o").string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("fixture.kind") != std::string::npos);
    }
    SUBCASE("precision failure is numerical")
    {
        auto cfg = write_config(dir, "experiment=proj\nfield.kind=padic\nfield.p=3\nfield.K=4\nrep.d=1\n"
                                     "fixture.kind=uniform\nfixture.n=100\nproj.k=6\n");
        CHECK(run({"--config", cfg.string(), "--out", (dir / "o").string()}).code == 3);
    }
    SUBCASE("unreadable config and unwritable output")
    {
        CHECK(run({"--config", (dir / "absent.cfg").string()}).code == 4);
        auto cfg = write_config(dir, flow_config);
        std::ofstream(dir / "file") << "x";
        CHECK(run({"--config", cfg.string(), "--out", (dir / "file" / "sub").string()}).code == 4);
    }
    SUBCASE("command line errors")
    {
        CHECK(run({}).code == 2);
        CHECK(run({"--config", "x", "--threads", "0"}).code == 2);
        CHECK(run({"--help"}).code == 0);
    }
}

TEST_CASE("flow on the H-orbit: proxies vanish")
{
    auto dir = scratch("flow");
    auto cfg = write_config(dir, flow_config);
    auto r = run({"--config", cfg.string(), "--out", (dir / "o").string(), "--seed", "7"});
    REQUIRE(r.code == 0);
    auto prox = slurp(dir / "o" / "proximity.csv");
    CHECK(crlf_only(prox));
    auto rows = rows_of(prox);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == std::vector<std::string>{"candidate", "proxy"});
    for(std::size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i][1] == "0");
    for(const char* f : {"arc.csv", "discrepancy.csv", "summary.csv"})
        CHECK(crlf_only(slurp(dir / "o" / f)));

    auto manifest = slurp(dir / "o" / "manifest.txt");
    CHECK(manifest.rfind("eqlab ", 0) == 0);
    CHECK(manifest.find("seed=7\n") != std::string::npos);
    CHECK(manifest.find("flow.nR=300\n") != std::string::npos);
    CHECK(manifest.find("flow.search_height=10\n") != std::string::npos);
    CHECK(manifest.find("proximity.csv\n") != std::string::npos);
}

TEST_CASE("determinism across runs and thread counts")
{
    auto dir = scratch("determinism");
    auto cfg = write_config(dir, "experiment=flow\nflow.x0=generic\nflow.T=6\nflow.nR=400\nflow.nHaar=2000\n");
    REQUIRE(run({"--config", cfg.string(), "--out", (dir / "a").string(), "--threads", "1"}).code == 0);
    REQUIRE(run({"--config", cfg.string(), "--out", (dir / "b").string(), "--threads", "1"}).code == 0);
    REQUIRE(run({"--config", cfg.string(), "--out", (dir / "c").string(), "--threads", "4"}).code == 0);
    REQUIRE(run({"--config", cfg.string(), "--out", (dir / "d").string(), "--seed", "2"}).code == 0);
    for(const char* f : {"arc.csv", "proximity.csv", "discrepancy.csv", "summary.csv"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
    }
    CHECK(slurp(dir / "a" / "discrepancy.csv") != slurp(dir / "d" / "discrepancy.csv"));
}

TEST_CASE("gen_fixture: planted box loads back with the box covering number")
{
    auto dir = scratch("fixture");
    auto cfg = write_config(dir, "experiment=fixtures\nfield.kind=padic\nfield.p=3\nfield.K=6\nrep.d=2\nrep.m=2\n"
                                 "fixture.kind=planted\nfixture.n=20000\nfixture.dir_k=0\nfixture.dir_u=1 5\n"
                                 "fixture.weight=0.00005\n");
    REQUIRE(run({"--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run({"--config", cfg.string(), "--out", (dir / "b").string()}).code == 0);
    auto text = slurp(dir / "a" / "fixture.csv");
    CHECK(text == slurp(dir / "b" / "fixture.csv"));
    CHECK(crlf_only(text));

    RepSpace rep{Field::padic(3, 6), 2, 2};
    std::ifstream in(dir / "a" / "fixture.csv", std::ios::binary);
    std::vector<double> w;
    auto cloud = read_cloud_csv(in, rep, &w);
    CHECK(cloud.size() == 20000);
    CHECK(w.size() == 20000);
    RepBox box{zero_point(rep), {make_direction(rep.field, FVector{{1, 5}}, 0)}};
    for(int k : {1, 2}) {
        double expect = box_covering_number(rep, box, ScaleIndex{k});
        double got = double(covering_number(cloud.view(), ScaleIndex{k}));
        CHECK(got <= 2.0 * expect);
        CHECK(got >= 0.5 * expect);
    }
}

TEST_CASE("experiments run end to end")
{
    auto dir = scratch("smoke");
    SUBCASE("proj")
    {
        auto cfg = write_config(dir, "experiment=proj\nfield.kind=real\nrep.d=2\nrep.m=1\nfixture.kind=uniform\n"
                                     "fixture.n=2000\nproj.k=3\nproj.r_samples=10\nproj.trivial_audit=true\n");
        REQUIRE(run({"--config", cfg.string(), "--out", (dir / "p").string()}).code == 0);
        CHECK(crlf_only(slurp(dir / "p" / "profile.csv")));
        CHECK(crlf_only(slurp(dir / "p" / "trivial.csv")));
        CHECK(fs::exists(dir / "p" / "box.txt"));
    }
    SUBCASE("sumprod")
    {
        auto cfg = write_config(dir, "experiment=sumprod\nfield.kind=padic\nfield.p=3\nfield.K=8\nrep.m=2\n"
                                     "fixture.kind=padic_line\nfixture.k=4\nfixture.dir_u=1 5\nsumprod.k=4\n"
                                     "sumprod.r_samples=10\n");
        REQUIRE(run({"--config", cfg.string(), "--out", (dir / "s").string()}).code == 0);
        auto rows = rows_of(slurp(dir / "s" / "exceptional.csv"));
        CHECK(rows.size() == 11);
        CHECK(slurp(dir / "s" / "box.txt").rfind("BASE1", 0) == 0);
    }
    SUBCASE("focus")
    {
        auto cfg = write_config(dir, "experiment=focus\nfield.kind=real\nrep.d=2\nrep.m=2\nfixture.kind=planted\n"
                                     "fixture.n=3000\nfixture.dir_k=1\nfixture.dir_u=0.6 0.8\nfixture.noise_k=3\n"
                                     "focus.k1=1\nfocus.k2=3\nfocus.interp_r_samples=4\n");
        REQUIRE(run({"--config", cfg.string(), "--out", (dir / "f").string()}).code == 0);
        for(const char* f : {"scan.csv", "ip.csv", "fs.csv", "negligible.csv", "interpolation.csv", "summary.csv"})
            CHECK(crlf_only(slurp(dir / "f" / f)));
        auto cfg_odd = write_config(dir, "experiment=focus\nfield.kind=real\nfixture.kind=uniform\nfixture.n=100\n"
                                         "focus.k1=1\nfocus.k2=4\n");
        CHECK(run({"--config", cfg_odd.string(), "--out", (dir / "g").string()}).code == 2);
    }
}
