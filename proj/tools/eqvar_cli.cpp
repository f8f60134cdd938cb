// eqvar: command-line front end.
//
//   eqvar simulate --sem spec.json --n 1000 --seed 1 --out data.csv
//   eqvar verify-theorem1 --sem spec.json
//   eqvar score --data data.csv --all | --dag dag.json | --dp
//   eqvar posterior --data data.csv --top 10
//   eqvar search-dp --data data.csv
//   eqvar search-greedy --data data.csv --restarts 20
//   eqvar experiment --config experiment.json --out results/
//
// Exit codes: 0 ok, 2 input error, 3 numeric or degenerate data, 4 resource cap.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>

#include "eqvar/error.hpp"
#include "eqvar/experiment.hpp"
#include "eqvar/io.hpp"
#include "eqvar/population.hpp"
#include "eqvar/search.hpp"

using namespace eqvar;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string g = "n";
  std::string prior = "uniform";
  bool center = false;
  int cap = kDefaultEnumerationCap;
  std::string out;
};

struct DataArgs {
  std::string path;
  bool header = false;
};

void add_data_options(CLI::App* cmd, DataArgs& args) {
  cmd->add_option("--data", args.path, "CSV file, one row per observation")->required();
  cmd->add_flag("--header", args.header, "first CSV row holds column names");
}

Dataset load(const DataArgs& args, const Globals& globals) {
  return load_csv(args.path, args.header, globals.center);
}

void emit(const Json& j, const Globals& globals) {
  if (!globals.out.empty()) write_json(j, globals.out);
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string edge_list(const Dag& dag) {
  std::string s = "{";
  for (const Edge& e : dag.edges()) {
    if (s.size() > 1) s += ", ";
    s += std::to_string(e.from) + "->" + std::to_string(e.to);
  }
  return s + "}";
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int cmd_simulate(const Globals& globals, const std::string& sem_path, int n, const std::string& family) {
  SemSpec spec = sem_from_json(read_json(sem_path));
  if (!family.empty()) spec = spec.with_family(parse_error_family(family));
  const std::uint64_t seed = globals.seed.value_or(spec.seed().value_or(0));
  std::vector<std::string> names;
  for (int j = 0; j < spec.p(); ++j) names.push_back("X" + std::to_string(j));
  const Dataset data(simulate(spec, n, seed).values(), names);
  if (globals.out.empty()) {
    for (int j = 0; j < data.p(); ++j) std::cout << (j ? "," : "") << data.column_names()[static_cast<std::size_t>(j)];
    std::cout << '\n';
    for (int i = 0; i < data.n(); ++i) {
      for (int j = 0; j < data.p(); ++j) std::cout << (j ? "," : "") << format_double(data.values()(i, j));
      std::cout << '\n';
    }
  } else {
    write_csv(data, globals.out);
    std::cout << "wrote " << data.n() << " x " << data.p() << " to " << globals.out << " (seed " << seed << ")\n";
  }
  return 0;
}

int cmd_verify(const Globals& globals, const std::string& sem_path) {
  const SemSpec spec = sem_from_json(read_json(sem_path));
  const Theorem1Report r = verify_theorem1(spec, globals.cap);
  std::cout << "verdict: " << (r.verdict ? "true" : "false") << '\n';
  std::cout << "min r: " << fmt(r.min_total, "%.12g") << " (p sigma2 = " << fmt(r.expected_min, "%.12g") << ")\n";
  std::cout << "argmin set (" << r.argmin_set.size() << "):\n";
  for (const Dag& d : r.argmin_set) std::cout << "  " << edge_list(d) << '\n';
  std::cout << "det identity max rel error: " << fmt(r.det_identity_max_rel_error, "%.3g") << '\n';
  std::cout << "delta*: " << (r.delta_star ? fmt(*r.delta_star, "%.10g") : std::string("null")) << '\n';
  emit(theorem1_to_json(r), globals);
  return r.verdict ? 0 : 3;
}

int cmd_posterior(const Globals& globals, const Dataset& data, std::size_t top) {
  const double g = GPolicy::parse(globals.g).at(data.n());
  const PosteriorResult r = posterior_over_dags(data, DagPrior::parse(globals.prior), g, globals.cap);
  const auto order = r.ranking();
  const std::size_t keep = top == 0 ? order.size() : std::min(top, order.size());
  std::printf("%-5s %-14s %-18s %-16s %s\n", "rank", "posterior", "log_marginal", "bic", "edges");
  for (std::size_t k = 0; k < keep; ++k) {
    const PosteriorEntry& e = r.entries[order[k]];
    std::printf("%-5zu %-14s %-18s %-16s %s\n", k + 1, fmt(e.posterior).c_str(),
                fmt(e.score.log_marginal, "%.10g").c_str(), fmt(e.score.bic, "%.10g").c_str(),
                edge_list(e.dag).c_str());
  }
  emit(posterior_to_json(r, top), globals);
  return 0;
}

int cmd_score_dag(const Globals& globals, const Dataset& data, const std::string& dag_path) {
  const Dag dag = dag_from_json(read_json(dag_path));
  if (dag.p() != data.p())
    throw Error(ErrorKind::InvalidInput, "DAG has " + std::to_string(dag.p()) + " nodes but the data has " +
                                             std::to_string(data.p()) + " columns");
  NodeScoreTable table(data.n(), data.p(), v_n(data));
  for (int j = 0; j < dag.p(); ++j) table.ensure(data, j, dag.parent_mask(j));
  const double g = GPolicy::parse(globals.g).at(data.n());
  const Json j = dag_score_to_json(dag, table, g);
  std::cout << "dag: " << edge_list(dag) << '\n'
            << "log_marginal: " << fmt(j["log_marginal"].get<double>(), "%.12g") << '\n'
            << "bic: " << fmt(j["bic"].get<double>(), "%.12g") << '\n'
            << "R_n: " << fmt(j["r_n"].get<double>(), "%.12g") << '\n';
  for (int k = 0; k < dag.p(); ++k) std::cout << "R_" << k << ",n: " << fmt(j["r_jn"][k].get<double>(), "%.12g") << '\n';
  emit(j, globals);
  return 0;
}

void print_search(const SearchResult& r) {
  std::cout << to_string(r.method) << " (" << r.criterion.name() << "): best score " << fmt(r.best_score, "%.12g")
            << ", " << r.best_dags.size() << " optimal DAG(s)\n";
  for (const Dag& d : r.best_dags) std::cout << "  " << edge_list(d) << '\n';
  std::cout << "candidates scored: " << r.stats.candidates_scored << ", " << fmt(r.stats.wall_seconds, "%.3g")
            << " s\n";
  if (r.stats.restarts_reaching_reference)
    std::cout << "restarts reaching the reference: " << *r.stats.restarts_reaching_reference << " of "
              << r.stats.restarts << '\n';
}

int cmd_dp(const Globals& globals, const Dataset& data, int max_parents, std::size_t budget_mib) {
  const int cap = max_parents < 0 ? default_max_parents(data.p()) : max_parents;
  const std::size_t budget = budget_mib << 20;
  const std::size_t needed = dp_memory_estimate(data.p(), cap);
  if (data.p() > 30 || needed > budget)
    throw Error(ErrorKind::ResourceCap, "exact DP on " + std::to_string(data.p()) + " nodes with at most " +
                                            std::to_string(cap) + " parents needs about " +
                                            std::to_string(needed >> 20) + " MiB, over the budget of " +
                                            std::to_string(budget_mib) +
                                            " MiB; lower --max-parents, raise --memory-mib, or use search-greedy");
  const SearchResult r = exact_dp_bic(NodeScoreTable::build(data, cap), cap, budget);
  print_search(r);
  emit(search_to_json(r), globals);
  return 0;
}

int cmd_greedy(const Globals& globals, const Dataset& data, int restarts, const std::string& criterion,
               const std::string& start, int max_parents) {
  NodeScoreTable table(data.n(), data.p(), v_n(data));
  GreedyOptions o;
  o.restarts = restarts;
  o.seed = globals.seed.value_or(0);
  o.max_parents = max_parents;
  if (!start.empty()) o.initial = dag_from_json(read_json(start));
  Criterion c = Criterion::bic();
  if (criterion == "log_marginal")
    c = Criterion::log_marginal(GPolicy::parse(globals.g).at(data.n()));
  else if (criterion != "bic")
    throw Error(ErrorKind::InvalidInput, "criterion must be 'bic' or 'log_marginal', got '" + criterion + "'");
  const SearchResult r = greedy_hill_climb(data, table, c, o);
  print_search(r);
  emit(search_to_json(r), globals);
  return 0;
}

int cmd_experiment(const Globals& globals, const std::string& config_path, std::optional<int> workers,
                   bool timestamp) {
  if (globals.out.empty()) throw Error(ErrorKind::InvalidInput, "experiment needs --out DIR");
  ExperimentConfig config = experiment_config_from_json(read_json(config_path));
  if (workers) config.workers = *workers;
  if (globals.seed) config.master_seed = *globals.seed;
  config.cap = globals.cap;
  config.validate();
  const ConsistencyReport r = run_consistency_experiment(config);
  write_experiment_outputs(r, globals.out, timestamp ? utc_now() : std::string{});
  std::printf("%-9s %-7s %-5s %-12s %-12s %-9s %s\n", "family", "n", "runs", "mean_pi", "median_pi", "map_rate",
              "log_bound_term");
  for (const AggregateRow& a : r.aggregates)
    std::printf("%-9s %-7d %-5d %-12s %-12s %-9s %s\n", std::string(to_string(a.family)).c_str(), a.n, a.runs,
                fmt(a.mean_posterior_true).c_str(), fmt(a.median_posterior_true).c_str(), fmt(a.map_rate).c_str(),
                a.log_bound_term ? fmt(*a.log_bound_term).c_str() : "null");
  for (const CellFailure& f : r.failures)
    std::cerr << "failed cell " << to_string(f.family) << " n=" << f.n << " seed=" << f.seed_index << ": "
              << f.message << '\n';
  return r.complete() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal DAG discovery under equal error variances"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals globals;
  app.add_option("--seed", globals.seed, "random seed");
  app.add_option("--g", globals.g, "g-prior scale: 'n' or a positive number");
  app.add_option("--prior", globals.prior, "DAG prior: uniform or edge:q");
  app.add_flag("--center", globals.center, "subtract column means from the data");
  app.add_option("--cap", globals.cap, "largest p for full DAG enumeration");
  app.add_option("--out", globals.out, "output file (or directory for experiment)");

  auto* simulate_cmd = app.add_subcommand("simulate", "draw data from a SEM spec");
  std::string sem_path;
  int n = 0;
  std::string family;
  simulate_cmd->add_option("--sem", sem_path, "SEM spec JSON")->required();
  simulate_cmd->add_option("--n", n, "sample size")->required();
  simulate_cmd->add_option("--family", family, "override the error family");

  auto* verify_cmd = app.add_subcommand("verify-theorem1", "brute-force population identifiability check");
  verify_cmd->add_option("--sem", sem_path, "SEM spec JSON")->required();

  DataArgs data_args;
  auto* score_cmd = app.add_subcommand("score", "score every DAG, one DAG, or run the exact BIC search");
  add_data_options(score_cmd, data_args);
  bool all = false;
  bool dp = false;
  std::string dag_path;
  std::size_t top = 0;
  int max_parents = -1;
  std::size_t memory_mib = kDefaultDpMemoryBudget >> 20;
  auto* all_opt = score_cmd->add_flag("--all", all, "exact posterior over every DAG");
  auto* dag_opt = score_cmd->add_option("--dag", dag_path, "score a single DAG from JSON");
  auto* dp_opt = score_cmd->add_flag("--dp", dp, "exact dynamic-programming BIC search");
  all_opt->excludes(dag_opt)->excludes(dp_opt);
  dag_opt->excludes(dp_opt);
  score_cmd->add_option("--top", top, "print only the best K DAGs (0 = all)");
  score_cmd->add_option("--max-parents", max_parents, "in-degree cap for --dp");
  score_cmd->add_option("--memory-mib", memory_mib, "memory budget for --dp");

  auto* posterior_cmd = app.add_subcommand("posterior", "exact posterior over every DAG");
  add_data_options(posterior_cmd, data_args);
  posterior_cmd->add_option("--top", top, "print only the best K DAGs (0 = all)");

  auto* dp_cmd = app.add_subcommand("search-dp", "exact BIC minimization by subset DP");
  add_data_options(dp_cmd, data_args);
  dp_cmd->add_option("--max-parents", max_parents, "in-degree cap");
  dp_cmd->add_option("--memory-mib", memory_mib, "memory budget");

  auto* greedy_cmd = app.add_subcommand("search-greedy", "hill climbing with random restarts");
  add_data_options(greedy_cmd, data_args);
  int restarts = 10;
  std::string criterion = "bic";
  std::string start;
  greedy_cmd->add_option("--restarts", restarts, "number of restarts")->check(CLI::PositiveNumber);
  greedy_cmd->add_option("--criterion", criterion, "bic or log_marginal");
  greedy_cmd->add_option("--start", start, "starting DAG JSON for the first restart");
  greedy_cmd->add_option("--max-parents", max_parents, "in-degree cap");

  auto* experiment_cmd = app.add_subcommand("experiment", "posterior-consistency sweep");
  std::string config_path;
  std::optional<int> workers;
  bool timestamp = false;
  experiment_cmd->add_option("--config", config_path, "experiment config JSON")->required();
  experiment_cmd->add_option("--workers", workers, "worker threads");
  experiment_cmd->add_flag("--timestamp", timestamp, "record generated_at in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(globals, sem_path, n, family);
    if (*verify_cmd) return cmd_verify(globals, sem_path);
    if (*score_cmd) {
      if (dp) return cmd_dp(globals, load(data_args, globals), max_parents, memory_mib);
      if (!dag_path.empty()) return cmd_score_dag(globals, load(data_args, globals), dag_path);
      if (!all) throw Error(ErrorKind::InvalidInput, "score needs one of --all, --dag FILE, --dp");
      return cmd_posterior(globals, load(data_args, globals), top);
    }
    if (*posterior_cmd) return cmd_posterior(globals, load(data_args, globals), top);
    if (*dp_cmd) return cmd_dp(globals, load(data_args, globals), max_parents, memory_mib);
    if (*greedy_cmd) return cmd_greedy(globals, load(data_args, globals), restarts, criterion, start, max_parents);
    if (*experiment_cmd) return cmd_experiment(globals, config_path, workers, timestamp);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ErrorKind::Internal);
  }
  return 0;
}
