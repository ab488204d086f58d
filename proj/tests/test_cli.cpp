#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "artifacts.hpp"
#include "cli.hpp"
#include "curve_expr.hpp"
#include "ovma/errors.hpp"

using namespace ovma;
using namespace ovma::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  return {code, o.str(), e.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ovma_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_CASE("curve expressions") {
  const CurveExpr e = CurveExpr::parse("1+0.15*cos(3t)");
  CHECK(e(0.4) == doctest::Approx(1.0 + 0.15 * std::cos(1.2)));
  const CurveExpr f = CurveExpr::parse(" 2*sin(t)*cos(2*t) - (0.5 + -cos(t)) ");
  const double t = 1.3;
  CHECK(f(t) == doctest::Approx(2 * std::sin(t) * std::cos(2 * t) - (0.5 - std::cos(t))));
  const spectral::TrigSeries s = f.series();
  CHECK(s.degree() <= 3);
  CHECK(s.value(t) == doctest::Approx(f(t)).epsilon(1e-14));
  CHECK_THROWS_AS(CurveExpr::parse("1+cos(3x)"), ArgumentError);
  CHECK_THROWS_AS(CurveExpr::parse("1+"), ArgumentError);
  CHECK_THROWS_AS(CurveExpr::parse("exp(t)"), ArgumentError);
  CHECK_THROWS_AS(CurveExpr::parse("(1"), ArgumentError);
}

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("identities: pass, determinism and usage errors") {
  const Run a = run({"identities", "--n", "3", "--trials", "200", "--seed", "42"});
  const Run b = run({"identities", "--n", "3", "--trials", "200", "--seed", "42"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["passed"] == true);
  CHECK(j["identities"][0]["value"].get<double>() <= 1e-8);
  CHECK(run({"identities", "--n", "1"}).code == 2);
  CHECK(run({"identities", "--n", "3", "--bogus"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("solve writes u.csv, certificate and a checksummed manifest") {
  const fs::path d = scratch("solve");
  const Run r = run({"solve", "--domain", "ellipse", "--a", "1.4142136", "--c", "1.0", "--grid", "64", "--out", d.string()});
  REQUIRE(r.code == 0);
  const auto cert = nlohmann::json::parse(slurp(d / "certificate.json"));
  CHECK(cert["resid_inf"].get<double>() <= 1e-10);
  CHECK(cert["N"] == 64);
  CHECK(cert.contains("newton_iters"));
  CHECK(cert["tol"].get<double>() == 1e-10);
  CHECK(lines(slurp(d / "u.csv")).front() == "i,j,x,y,u");
  const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  for (const char* k : {"config", "artifacts", "checksums", "version"}) CHECK(m.contains(k));
  CHECK(m["config"]["command"] == "solve");
  for (const auto& name : m["artifacts"]) {
    const std::string n = name.get<std::string>();
    CHECK(m["checksums"][n] == sha256_hex(slurp(d / n)));
  }
  fs::remove_all(d);
}

TEST_CASE("flow: non-convex start fails with exit 1, convex start records entropy") {
  const fs::path bad = scratch("flow_bad");
  const Run r = run({"flow", "--init", "1+0.15*cos(3t)", "--nodes", "256", "--dt", "1e-4", "--stop-area-frac", "0.1",
                     "--out", bad.string()});
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"]["type"] == "ConvexityError");
  CHECK(fs::exists(bad / "error.json"));
  CHECK(fs::exists(bad / "manifest.json"));
  fs::remove_all(bad);

  const fs::path d = scratch("flow");
  const Run g = run({"flow", "--init", "1+0.1*cos(3t)", "--nodes", "128", "--dt", "1e-4", "--stop-area-frac", "0.1",
                     "--svg", "--out", d.string()});
  REQUIRE(g.code == 0);
  const auto rows = lines(slurp(d / "series.csv"));
  CHECK(rows.front() == "t,area,affine_length,entropy,ellipse_fit_resid");
  double prev = -1.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string tok;
    for (int k = 0; k < 4; ++k) std::getline(in, tok, ',');
    const double e = std::stod(tok);
    CHECK(e >= prev - 1e-6);
    prev = e;
  }
  CHECK(lines(slurp(d / "curves/final.csv")).front() == "theta,h");
  CHECK(slurp(d / "flow.svg").rfind("<svg", 0) == 0);

  // replay from the manifest alone
  const fs::path d2 = scratch("flow_replay");
  CHECK(run({"flow", "--config", (d / "manifest.json").string(), "--out", d2.string()}).code == 0);
  CHECK(slurp(d / "series.csv") == slurp(d2 / "series.csv"));
  fs::remove_all(d);
  fs::remove_all(d2);
}

TEST_CASE("config file keys use underscores; explicit flags win") {
  const fs::path d = scratch("config");
  fs::create_directories(d);
  {
    std::ofstream f(d / "cfg.json");
    f << R"J({"command": "flow", "init": "1+0.05*cos(4t)", "nodes": 64, "t_end": 0.05, "cadence": 10})J";
  }
  const Run r = run({"--config", (d / "cfg.json").string(), "--out", (d / "o").string()});
  REQUIRE(r.code == 0);
  const auto m = nlohmann::json::parse(slurp(d / "o" / "manifest.json"));
  CHECK(m["config"]["t_end"].get<double>() == 0.05);
  CHECK(m["config"]["nodes"] == 64);
  const Run r2 = run({"flow", "--config", (d / "cfg.json").string(), "--nodes", "128"});
  REQUIRE(r2.code == 0);
  CHECK(run({"flow", "--config", (d / "missing.json").string()}).code == 2);
  fs::remove_all(d);
}

TEST_CASE("scan over the ellipse family") {
  const fs::path d = scratch("scan");
  const Run r = run({"scan", "--family", "ellipses:1,1.5,2", "--grid", "64", "--jobs", "2", "--out", d.string()});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(d / "scan.csv"));
  CHECK(rows.front() == "domain_id,mean_w,min_w,max_w,rel_spread,pohozaev_resid,sobolev_s,sobolev_S");
  CHECK(rows.size() == 4);
  const auto j = nlohmann::json::parse(slurp(d / "scan.json"));
  for (const auto& rep : j["reports"]) CHECK(rep["rel_spread"].get<double>() <= 0.03);
  CHECK(run({"scan", "--family", "perturbed:0.2", "--grid", "32"}).code == 1);
  CHECK(run({"scan", "--family", "circles:1"}).code == 2);
  fs::remove_all(d);
}

TEST_CASE("correspond, shape-derivative and exact") {
  const Run c = run({"correspond", "--a", "1.4142135623730951", "--nodes", "64", "--t-fraction", "0.2"});
  CHECK(c.code == 0);
  CHECK(nlohmann::json::parse(c.out)["max_distance"].get<double>() <= 1e-3);
  const Run s = run({"shape-derivative", "--v", "1", "--eps", "1e-3", "--grid", "48", "--max-rel-err", "0.03"});
  CHECK(s.code == 0);
  CHECK(run({"shape-derivative", "--v", "cos(3t)", "--eps", "0.2", "--grid", "32"}).code == 1);
  const Run e = run({"exact", "--n", "2", "--c", "1"});
  REQUIRE(e.code == 0);
  const auto j = nlohmann::json::parse(e.out);
  CHECK(j["int_minus_u"].get<double>() == doctest::Approx(M_PI / 4.0).epsilon(1e-12));
  CHECK(j["entropy"].get<double>() == doctest::Approx(2.0 * std::cbrt(M_PI * M_PI)).epsilon(1e-10));
  CHECK(run({"exact", "--n", "2", "--A", "2,0,0,2"}).code == 2);
}
