#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "eqvar/io.hpp"
#include "eqvar/rng.hpp"

using namespace eqvar;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "eqvar_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run(const std::string& args) {
  const fs::path out = workdir() / "stdout.txt";
  const std::string cmd = std::string(EQVAR_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path path = workdir() / name;
  std::ofstream(path) << text;
  return path;
}

fs::path chain_spec(int p) {
  std::vector<Edge> e;
  for (int j = 1; j < p; ++j) e.push_back({j - 1, j});
  const fs::path path = workdir() / ("chain" + std::to_string(p) + ".json");
  write_json(sem_to_json(SemSpec::uniform_weights(Dag::from_edges(p, e), 1.0, 1.0)), path);
  return path;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("verify-theorem1") {
  SUBCASE("two-node chain") {
    const fs::path report = workdir() / "t1.json";
    const Run r = run("verify-theorem1 --sem " + chain_spec(2).string() + " --out " + report.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("verdict: true") != std::string::npos);
    CHECK(r.out.find("delta*: 0.2231435513") != std::string::npos);
    CHECK(read_json(report).at("delta_star").get<double>() == doctest::Approx(0.22314355131420982));
  }
  SUBCASE("three-node chain prints an argmin set of two") {
    const Run r = run("verify-theorem1 --sem " + chain_spec(3).string());
    CHECK(r.code == 0);
    CHECK(r.out.find("argmin set (2)") != std::string::npos);
  }
  SUBCASE("empty graph has no delta*") {
    const fs::path spec = workdir() / "empty.json";
    write_json(sem_to_json(SemSpec::uniform_weights(Dag(3), 1.0, 1.0)), spec);
    const Run r = run("verify-theorem1 --sem " + spec.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("delta*: null") != std::string::npos);
  }
  SUBCASE("bad spec") {
    const fs::path spec = write_file("bad.json", R"({"p": 2, "edges": [[0, 1]], "coefficients": [], "sigma2": 1})");
    CHECK(run("verify-theorem1 --sem " + spec.string()).code == 2);
    CHECK(run("verify-theorem1 --sem " + (workdir() / "missing.json").string()).code == 2);
  }
}

TEST_CASE("simulate then score") {
  const fs::path data = workdir() / "chain3.csv";
  REQUIRE(run("simulate --sem " + chain_spec(3).string() + " --n 5000 --seed 4 --out " + data.string()).code == 0);
  const Dataset d = load_csv(data, true);
  CHECK(d.n() == 5000);
  CHECK(d.p() == 3);

  SUBCASE("--all lists 25 DAGs whose posterior sums to one") {
    const fs::path json = workdir() / "post.json";
    const Run r = run("score --data " + data.string() + " --header --all --out " + json.string());
    CHECK(r.code == 0);
    CHECK(count(r.out, "\n") == 26);
    const Json j = read_json(json);
    REQUIRE(j.at("dags").size() == 25);
    double total = 0.0;
    for (const auto& e : j.at("dags")) total += e.at("posterior").get<double>();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(j.at("map")[0].at("edges") == Json::parse("[[0,1],[1,2]]"));
  }
  SUBCASE("single DAG mode prefers the true graph to the empty graph") {
    const fs::path truth = workdir() / "truth.json";
    const fs::path empty = workdir() / "emptydag.json";
    write_json(Json::parse(R"({"p": 3, "edges": [[0, 1], [1, 2]]})"), truth);
    write_json(Json::parse(R"({"p": 3, "edges": []})"), empty);
    const fs::path a = workdir() / "a.json";
    const fs::path b = workdir() / "b.json";
    CHECK(run("score --data " + data.string() + " --header --dag " + truth.string() + " --out " + a.string()).code ==
          0);
    CHECK(run("score --data " + data.string() + " --header --dag " + empty.string() + " --out " + b.string()).code ==
          0);
    CHECK(read_json(a).at("log_marginal").get<double>() > read_json(b).at("log_marginal").get<double>());
    CHECK(read_json(a).at("r_jn").size() == 3);
  }
  SUBCASE("posterior, DP and greedy subcommands") {
    CHECK(run("posterior --data " + data.string() + " --header --top 3 --prior edge:0.3").code == 0);
    const fs::path dp = workdir() / "dp.json";
    CHECK(run("search-dp --data " + data.string() + " --header --out " + dp.string()).code == 0);
    CHECK(read_json(dp).at("best")[0].at("edges") == Json::parse("[[0,1],[1,2]]"));
    const fs::path greedy = workdir() / "greedy.json";
    CHECK(run("search-greedy --data " + data.string() + " --header --seed 3 --out " + greedy.string()).code == 0);
    CHECK(read_json(greedy).at("best_score").get<double>() ==
          doctest::Approx(read_json(dp).at("best_score").get<double>()));
    CHECK(run("score --data " + data.string() + " --header --dp").code == 0);
  }
  SUBCASE("enumeration cap") {
    CHECK(run("score --data " + data.string() + " --header --all --cap 2").code == 4);
  }
}

TEST_CASE("exit codes") {
  SUBCASE("--dp on 25 variables is refused") {
    std::ostringstream csv;
    SequentialRng rng(1);
    for (int i = 0; i < 40; ++i)
      for (int j = 0; j < 25; ++j) csv << rng.uniform(-1, 1) << (j == 24 ? "\n" : ",");
    const fs::path data = write_file("wide.csv", csv.str());
    const Run r = run("score --data " + data.string() + " --dp");
    CHECK(r.code == 4);
    CHECK(r.out.find("MiB") != std::string::npos);
  }
  SUBCASE("malformed CSV") {
    const fs::path data = write_file("ragged.csv", "1,2\n3\n");
    const Run r = run("posterior --data " + data.string());
    CHECK(r.code == 2);
    CHECK(r.out.find("row 2") != std::string::npos);
  }
  SUBCASE("collinear data") {
    const fs::path data = write_file("collinear.csv", "1,2,0.5\n2,4,0.1\n3,6,0.7\n4,8,0.2\n");
    const fs::path dag = workdir() / "collider.json";
    write_json(Json::parse(R"({"p": 3, "edges": [[0, 2], [1, 2]]})"), dag);
    CHECK(run("score --data " + data.string() + " --dag " + dag.string()).code == 3);
  }
  SUBCASE("usage errors") {
    CHECK(run("").code == 2);
    CHECK(run("score --data x.csv --all --dp").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("--help").code == 0);
  }
}

TEST_CASE("experiment") {
  const Json config = {{"spec", read_json(chain_spec(2))},
                       {"n_grid", {50, 500}},
                       {"seeds", 5},
                       {"master_seed", 3},
                       {"families", {"gaussian", "laplace"}},
                       {"g", "n"}};
  const fs::path cfg = workdir() / "experiment.json";
  write_json(config, cfg);
  const fs::path a = workdir() / "exp_a";
  const fs::path b = workdir() / "exp_b";
  CHECK(run("experiment --config " + cfg.string() + " --out " + a.string()).code == 0);
  CHECK(run("experiment --config " + cfg.string() + " --workers 3 --out " + b.string()).code == 0);
  CHECK(fs::exists(a / "manifest.json"));
  CHECK(slurp(a / "runs.csv") == slurp(b / "runs.csv"));
  CHECK(count(slurp(a / "runs.csv"), "\n") == 21);
  CHECK(read_json(a / "report.json").at("aggregates").size() == 4);
  const fs::path stamped = workdir() / "exp_c";
  CHECK(run("experiment --config " + cfg.string() + " --timestamp --out " + stamped.string()).code == 0);
  CHECK(read_json(stamped / "report.json").contains("generated_at"));
  CHECK(run("experiment --config " + cfg.string()).code == 2);
}
