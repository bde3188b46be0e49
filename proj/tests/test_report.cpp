#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <locale>
#include <numbers>
#include <random>
#include <sstream>

#include "dfindex/format.hpp"
#include "dfindex/report.hpp"

using namespace dfindex;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dfindex_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig small(Command cmd, DomainSpec d, const fs::path& out) {
  RunConfig c;
  c.command = cmd;
  c.domain = std::move(d);
  c.numeric.samples = 400;
  c.numeric.sigma_samples = 120;
  c.numeric.search_budget = 6;
  c.numeric.restarts = 0;
  c.output.path = out.string();
  return c;
}

PsiSpec family_zero() {
  PsiSpec p;
  p.family = "default";
  p.params.assign(PsiFamily::default_family().dim(), 0.0);
  return p;
}

// Decimal comma, to catch formatting that follows the global locale.
struct CommaPunct : std::numpunct<char> {
  char do_decimal_point() const override { return ','; }
  char do_thousands_sep() const override { return '.'; }
  std::string do_grouping() const override { return "\3"; }
};

}  // namespace

TEST_CASE("config round trip keeps every resolved field") {
  const json in = {{"command", "conditions"},
                   {"domain", {{"kind", "worm"}, {"beta", 2.5 * kPi}}},
                   {"psi", {{"family", "default"}, {"params", {0, 0, 0, 0, 0, 0, 0.01, 0, 0}}}},
                   {"psi_sequence", json::array({nullptr, {{"kind", "abs2_w"}}})},
                   {"eta", 0.3},
                   {"n", 4},
                   {"numeric", {{"samples", 77}, {"tols", {{"psd_tol", 1e-9}}}}},
                   {"output", {{"path", "x"}, {"formats", {"csv"}}}}};
  const RunConfig c = RunConfig::from_json(in);
  CHECK(c.command == Command::conditions);
  CHECK(c.eta == 0.3);
  CHECK(c.n == 4);
  CHECK(c.numeric.samples == 77);
  CHECK(c.numeric.tols.psd_tol == 1e-9);
  CHECK(c.psi_sequence.size() == 2);
  CHECK_FALSE(c.output.json);
  CHECK(c.output.csv);

  const json out = c.to_json();
  CHECK(out["numeric"]["tols"]["denom_tol"] == 1e-8);  // defaults are spelled out
  CHECK(out["domain"].contains("a"));
  const RunConfig again = RunConfig::from_json(out);
  CHECK(again.to_json().dump() == out.dump());
}

TEST_CASE("config errors are rejected") {
  const json base = {{"command", "certify"}, {"domain", {{"kind", "ball"}}}};
  CHECK_NOTHROW(RunConfig::from_json(base));

  auto rejects = [&](const json& patch) {
    json j = base;
    j.merge_patch(patch);
    CHECK_THROWS_AS(RunConfig::from_json(j), SpecError);
  };
  rejects({{"typo", 1}});
  rejects({{"numeric", {{"sample", 10}}}});
  rejects({{"numeric", {{"tols", {{"psd", 1}}}}}});
  rejects({{"command", "fly"}});
  rejects({{"domain", {{"kind", "torus"}}}});
  rejects({{"domain", {{"kind", "worm"}, {"beta", 1.0}}}});
  rejects({{"psi", {{"family", "other"}}}});
  rejects({{"psi", {{"family", "default"}, {"params", {1, 2}}}}});
  rejects({{"psi_sequence", 3}});
  rejects({{"eta", "half"}});
  CHECK_THROWS_AS(RunConfig::from_json(json::array()), SpecError);

  RunConfig c = RunConfig::from_json(base);
  c.eta = 1.0;
  CHECK_THROWS_AS(validate(c), SpecError);
  c.eta = 0.5;
  c.numeric.min_depth = 1.0;
  CHECK_THROWS_AS(validate(c), SpecError);
  c.numeric.min_depth = 1e-6;
  c.command = Command::worm_sweep;
  CHECK_THROWS_AS(validate(c), SpecError);  // no betas
  c.betas = {1.0};
  CHECK_THROWS_AS(validate(c), SpecError);
  c.betas = {2.0};
  c.psi = PsiSpec::from_json({{"kind", "abs2_w"}});
  CHECK_THROWS_AS(validate(c), SpecError);  // psi must be a family member here
  c.psi = family_zero();
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("commands parse by name") {
  for (Command c : {Command::certify, Command::estimate_index, Command::conditions,
                    Command::worm_sweep}) {
    CHECK(parse_command(command_name(c)) == c);
  }
  CHECK_THROWS_AS(parse_command("estimate_index"), SpecError);
}

TEST_CASE("csv reals survive a round trip at 17 digits under any locale") {
  const std::locale saved = std::locale::global(std::locale(std::locale::classic(), new CommaPunct));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, 40.0 * u(rng));
    const std::string s = csv_real(v);
    CHECK(s.find(',') == std::string::npos);
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    double back = 0.0;
    in >> back;
    CHECK(back == v);
  }
  std::locale::global(saved);
  CHECK(csv_real(0.1) == "0.10000000000000001");
  CHECK(csv_real(1e300 * 1e10) == "inf");
  CHECK(csv_real(-1e300 * 1e10) == "-inf");
  CHECK(csv_real(std::nan("")) == "nan");
  CHECK(json_real(std::nan("")).is_null());
  CHECK(json_real(1e300 * 1e10) == "inf");
}

TEST_CASE("atomic writes replace files and leave no temporaries") {
  const fs::path dir = scratch_dir("atomic");
  const fs::path f = dir / "nested" / "a.txt";
  write_atomic(f, "first");
  CHECK(slurp(f) == "first");
  write_atomic(f, "second");
  CHECK(slurp(f) == "second");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(f.parent_path())) ++entries;
  CHECK(entries == 1);
  // A directory where the file should go cannot be replaced.
  fs::create_directories(dir / "blocked");
  fs::create_directories(dir / "blocked" / "x.txt" / "inner");
  CHECK_THROWS(write_atomic(dir / "blocked" / "x.txt", "data"));
  CHECK_FALSE(fs::exists(dir / "blocked" / "x.txt.tmp"));
}

TEST_CASE("worm upper bound") {
  CHECK(worm_upper_bound(1.5 * kPi) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(worm_upper_bound(2.5 * kPi) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(worm_upper_bound(4.5 * kPi) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("ball certify run writes a certified report") {
  const fs::path dir = scratch_dir("certify");
  RunConfig c = small(Command::certify, DomainSpec::ball(), dir);
  c.eta = 0.99;
  c.numeric.samples = 10000;
  std::ostringstream err;
  REQUIRE(run(c, err) == exit_code::ok);
  const json r = json::parse(slurp(dir / "report.json"));
  CHECK(r["command"] == "certify");
  CHECK(r["result"]["verdict"] == "certified");
  CHECK(r["config"] == c.to_json());
  // Nothing else is written for this command, and no temporaries remain.
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().filename() == "report.json");
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch_dir("exit");
  std::ostringstream err;

  RunConfig bad = small(Command::certify, DomainSpec::ball(), dir);
  bad.domain.kind = DomainKind::worm;
  bad.domain.beta = 1.0;
  CHECK(run(bad, err) == exit_code::config_error);
  CHECK(err.str().find("beta") != std::string::npos);

  RunConfig sweep = small(Command::worm_sweep, DomainSpec::ball(), dir);
  sweep.psi = family_zero();
  sweep.betas = {2.5 * kPi, 1.0};
  CHECK(run(sweep, err) == exit_code::config_error);

  // A defining function whose gradient vanishes on the boundary.
  using FP = FieldProgram;
  Box4 box;
  for (int k = 0; k < 4; ++k) {
    box.lo[k] = -2.0;
    box.hi[k] = 2.0;
  }
  const FP r = FP::abs2_z() + FP::abs2_w() - FP::constant(1.0);
  RunConfig flat = small(Command::conditions, DomainSpec::custom(r * r * r, box, {}), dir);
  flat.numeric.retries = 0;
  err.str("");
  CHECK(run(flat, err) == exit_code::numerical_failure);
  CHECK(err.str().find("numerical failure") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "report.json"));

  RunConfig blocked = small(Command::certify, DomainSpec::ball(), dir / "file");
  std::ofstream(dir / "file") << "x";
  CHECK(run(blocked, err) == exit_code::config_error);
}

TEST_CASE("reruns are byte identical") {
  const fs::path a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  RunConfig c = small(Command::conditions, DomainSpec::worm(2.5 * kPi), a);
  c.psi_sequence = {PsiSpec{}, PsiSpec::from_json({{"kind", "abs2_w"}})};
  std::ostringstream err;
  REQUIRE(run(c, err) == exit_code::ok);
  c.output.path = b.string();
  REQUIRE(run(c, err) == exit_code::ok);
  for (const char* name : {"first_condition.csv", "second_condition.csv", "sigma.csv"}) {
    CHECK(slurp(a / name) == slurp(b / name));
    CHECK_FALSE(slurp(a / name).empty());
  }
  json ra = json::parse(slurp(a / "report.json"));
  json rb = json::parse(slurp(b / "report.json"));
  CHECK(ra["result"] == rb["result"]);
  CHECK(ra["config"]["output"]["path"] == a.string());
}

TEST_CASE("conditions report carries the psi sequence") {
  const fs::path dir = scratch_dir("sequence");
  RunConfig c = small(Command::conditions, DomainSpec::worm(2.5 * kPi), dir);
  const PsiFamily fam = PsiFamily::default_family();
  for (double s : {0.0, 0.0, 0.01}) {
    PsiSpec p = family_zero();
    p.params[0] = 1.0;  // constants do not move the torsion
    p.params[6] = s;
    c.psi_sequence.push_back(p);
  }
  const RunOutput out = run_conditions(c);
  const json& res = out.report["result"];
  CHECK(res["vacuous"] == false);
  REQUIRE(res["psi_sequence"].size() == 3);
  const json& seq = res["psi_sequence"];
  CHECK(seq[0]["c1_growth"].is_null());
  CHECK(seq[0]["l1_torsion_integral"] == res["l1_torsion_integral"]);
  CHECK(seq[0]["torsion_c1_norm"] == res["first_condition"]["summary"]["torsion_c1_norm"]);
  CHECK(seq[1]["c1_growth"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(seq[1]["l1_growth"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(seq[2]["l1_torsion_integral"].get<double>() != seq[1]["l1_torsion_integral"].get<double>());
  CHECK(seq[2]["l1_growth"].get<double>() ==
        doctest::Approx(seq[2]["l1_torsion_integral"].get<double>() /
                        seq[1]["l1_torsion_integral"].get<double>()));
  CHECK(out.report["config"]["psi_sequence"].size() == 3);
}

TEST_CASE("conditions on a strictly pseudoconvex domain are vacuous") {
  const fs::path dir = scratch_dir("vacuous");
  RunConfig c = small(Command::conditions, DomainSpec::ball(), dir);
  std::ostringstream err;
  REQUIRE(run(c, err) == exit_code::ok);
  const json r = json::parse(slurp(dir / "report.json"));
  CHECK(r["result"]["vacuous"] == true);
  CHECK(r["result"]["sigma_samples"] == 0);
  CHECK(r["result"]["l1_torsion_integral"].is_null());
  CHECK(slurp(dir / "sigma.csv") == "re_z,im_z,re_w,im_w,levi,re_torsion,im_torsion,weight\n");
}

TEST_CASE("worm sweep rows") {
  const fs::path dir = scratch_dir("sweep");
  RunConfig c = small(Command::worm_sweep, DomainSpec::ball(), dir);
  c.psi = family_zero();
  c.numeric.samples = 300;
  c.betas = {kPi, 2.5 * kPi};
  const auto rows = worm_sweep(c.betas, c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].vacuous);
  CHECK(rows[0].paper_bound == doctest::Approx(2.0));
  CHECK_FALSE(rows[1].vacuous);
  CHECK(rows[1].paper_bound == doctest::Approx(0.5));
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.certified_eta_lower >= 0.0);
    CHECK(r.consistent);
  }

  std::ostringstream err;
  REQUIRE(run(c, err) == exit_code::ok);
  const std::string csv = slurp(dir / "sweep.csv");
  std::istringstream lines(csv);
  std::string header, line;
  std::getline(lines, header);
  CHECK(header ==
        "beta,certified_eta_lower,implied_eta_upper_from_first_condition,paper_bound,vacuous,"
        "consistent,status");
  int count = 0;
  while (std::getline(lines, line)) {
    ++count;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(count == 2);
  const json r = json::parse(slurp(dir / "report.json"));
  CHECK(r["result"]["rows"].size() == 2);
  CHECK(r["result"]["consistent"] == true);
  CHECK(r["config"]["betas"].size() == 2);
}
