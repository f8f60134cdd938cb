#include "eqvar/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "eqvar/error.hpp"
#include "eqvar/population.hpp"
#include "eqvar/rng.hpp"

namespace eqvar {

std::string GPolicy::describe() const { return fixed ? format_double(*fixed) : "n"; }

GPolicy GPolicy::parse(const std::string& text) {
  if (text == "n") return {};
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !(value > 0) || !std::isfinite(value))
    throw Error(ErrorKind::InvalidInput, "g must be 'n' or a positive number, got '" + text + "'");
  return {value};
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw Error(ErrorKind::InvalidInput, "n_grid must not be empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw Error(ErrorKind::InvalidInput, "sample sizes must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw Error(ErrorKind::InvalidInput, "n_grid must be strictly increasing");
  }
  if (seeds < 1) throw Error(ErrorKind::InvalidInput, "need at least one seed");
  if (families.empty()) throw Error(ErrorKind::InvalidInput, "need at least one error family");
  if (workers < 1) throw Error(ErrorKind::InvalidInput, "need at least one worker");
  if (spec.p() > cap)
    throw Error(ErrorKind::ResourceCap, "the posterior needs every DAG on " + std::to_string(spec.p()) +
                                            " nodes, over the enumeration cap of " + std::to_string(cap));
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  try {
    ExperimentConfig config{sem_from_json(j.at("spec")), j.at("n_grid").get<std::vector<int>>()};
    config.seeds = j.value("seeds", config.seeds);
    config.master_seed = j.value("master_seed", config.master_seed);
    if (j.contains("families")) {
      config.families.clear();
      for (const auto& name : j.at("families").get<std::vector<std::string>>())
        config.families.push_back(parse_error_family(name));
    }
    if (j.contains("g")) config.g = GPolicy::parse(j.at("g").is_string() ? j.at("g").get<std::string>()
                                                                          : format_double(j.at("g").get<double>()));
    if (j.contains("prior")) config.prior = DagPrior::parse(j.at("prior").get<std::string>());
    config.center = j.value("center", config.center);
    config.workers = j.value("workers", config.workers);
    config.cap = j.value("cap", config.cap);
    config.validate();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("bad experiment config: ") + e.what());
  }
}

std::uint64_t cell_seed(std::uint64_t master_seed, ErrorFamily family, int n, int seed_index) {
  return derive_key(master_seed, {static_cast<std::uint64_t>(family), static_cast<std::uint64_t>(n),
                                  static_cast<std::uint64_t>(seed_index)});
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRow>& runs, const Dag& gamma_star, int p,
                                         std::optional<double> delta_star) {
  std::vector<AggregateRow> out;
  std::vector<std::vector<double>> posteriors;
  for (const RunRow& row : runs) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const AggregateRow& a) { return a.family == row.family && a.n == row.n; });
    if (it == out.end()) {
      AggregateRow a;
      a.family = row.family;
      a.n = row.n;
      out.push_back(a);
      posteriors.emplace_back();
      it = out.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - out.begin());
    posteriors[idx].push_back(row.posterior_true);
    ++it->runs;
    it->map_rate += row.map_correct ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    AggregateRow& a = out[i];
    double sum = 0.0;
    for (double v : posteriors[i]) sum += v;
    a.mean_posterior_true = sum / a.runs;
    a.median_posterior_true = median(posteriors[i]);
    a.map_rate /= a.runs;
    if (delta_star)
      a.log_bound_term = -0.5 * a.n * p * *delta_star + 0.5 * gamma_star.edge_count() * std::log1p(a.n);
  }
  return out;
}

ConsistencyReport run_consistency_experiment(const ExperimentConfig& config) {
  config.validate();
  ConsistencyReport report{config, delta_star(config.spec, config.cap), {}, {}, {}};
  const Dag& truth = config.spec.gamma_star();

  struct Cell {
    ErrorFamily family;
    int n;
    int seed_index;
  };
  std::vector<Cell> cells;
  for (ErrorFamily f : config.families)
    for (int n : config.n_grid)
      for (int s = 0; s < config.seeds; ++s) cells.push_back({f, n, s});

  std::vector<std::optional<RunRow>> rows(cells.size());
  std::vector<std::optional<std::string>> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      try {
        RunRow row;
        row.family = c.family;
        row.n = c.n;
        row.seed_index = c.seed_index;
        row.seed = cell_seed(config.master_seed, c.family, c.n, c.seed_index);
        Dataset data = simulate(config.spec.with_family(c.family), c.n, row.seed);
        if (config.center) data = data.centered_copy();
        const PosteriorResult post = posterior_over_dags(data, config.prior, config.g.at(c.n), config.cap);
        row.posterior_true = post.entry(truth).posterior;
        row.map_correct = post.map_dags.front() == truth;
        row.rank_true = post.rank_of(truth);
        rows[i] = row;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int threads = std::min<int>(config.workers, static_cast<int>(cells.size()));
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (rows[i]) report.runs.push_back(*rows[i]);
    if (errors[i]) report.failures.push_back({cells[i].family, cells[i].n, cells[i].seed_index, *errors[i]});
  }
  report.aggregates = aggregate_runs(report.runs, truth, config.spec.p(), report.delta_star);
  return report;
}

namespace {

Json config_to_json(const ExperimentConfig& c) {
  Json families = Json::array();
  for (ErrorFamily f : c.families) families.push_back(std::string(to_string(f)));
  return {{"n_grid", c.n_grid},         {"seeds", c.seeds},          {"master_seed", c.master_seed},
          {"families", families},       {"g", c.g.describe()},       {"prior", c.prior.describe()},
          {"center", c.center},         {"cap", c.cap}};
}

}  // namespace

Json report_to_json(const ConsistencyReport& report, const std::string& timestamp) {
  Json aggregates = Json::array();
  for (const AggregateRow& a : report.aggregates) {
    Json row = {{"family", std::string(to_string(a.family))},
                {"n", a.n},
                {"runs", a.runs},
                {"mean_posterior_true", a.mean_posterior_true},
                {"median_posterior_true", a.median_posterior_true},
                {"map_rate", a.map_rate},
                {"log_bound_term", a.log_bound_term ? Json(*a.log_bound_term) : Json(nullptr)},
                {"bound_term", a.log_bound_term ? Json(std::exp(*a.log_bound_term)) : Json(nullptr)}};
    aggregates.push_back(row);
  }
  Json runs = Json::array();
  for (const RunRow& r : report.runs)
    runs.push_back({{"family", std::string(to_string(r.family))},
                    {"n", r.n},
                    {"seed", r.seed_index},
                    {"cell_seed", r.seed},
                    {"posterior_true", r.posterior_true},
                    {"map_correct", r.map_correct},
                    {"rank_true", r.rank_true}});
  Json failures = Json::array();
  for (const CellFailure& f : report.failures)
    failures.push_back({{"family", std::string(to_string(f.family))},
                        {"n", f.n},
                        {"seed", f.seed_index},
                        {"error", f.message}});
  Json out = {{"spec", sem_to_json(report.config.spec)},
              {"config", config_to_json(report.config)},
              {"true_dag", dag_to_json(report.config.spec.gamma_star())},
              {"delta_star", report.delta_star ? Json(*report.delta_star) : Json(nullptr)},
              {"aggregates", aggregates},
              {"runs", runs},
              {"complete", report.complete()},
              {"failures", failures}};
  if (!timestamp.empty()) out["generated_at"] = timestamp;
  return out;
}

std::string runs_to_csv(const std::vector<RunRow>& runs) {
  std::ostringstream out;
  out << "family,n,seed,posterior_true,map_correct,rank_true\n";
  for (const RunRow& r : runs)
    out << to_string(r.family) << ',' << r.n << ',' << r.seed_index << ',' << format_double(r.posterior_true) << ','
        << (r.map_correct ? 1 : 0) << ',' << r.rank_true << '\n';
  return out.str();
}

std::vector<RunRow> runs_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "family,n,seed,posterior_true,map_correct,rank_true")
    throw Error(ErrorKind::Parse, "unexpected run CSV header");
  std::vector<RunRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string family, n, seed, post, map, rank;
    if (!std::getline(cells, family, ',') || !std::getline(cells, n, ',') || !std::getline(cells, seed, ',') ||
        !std::getline(cells, post, ',') || !std::getline(cells, map, ',') || !std::getline(cells, rank, ','))
      throw Error(ErrorKind::Parse, "run CSV line " + std::to_string(line_no) + " has too few cells");
    try {
      RunRow r;
      r.family = parse_error_family(family);
      r.n = std::stoi(n);
      r.seed_index = std::stoi(seed);
      r.posterior_true = std::stod(post);
      r.map_correct = map == "1";
      r.rank_true = std::stoi(rank);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Parse, "run CSV line " + std::to_string(line_no) + " is malformed");
    }
  }
  return rows;
}

void write_experiment_outputs(const ConsistencyReport& report, const std::filesystem::path& dir,
                              const std::string& timestamp) {
  std::filesystem::create_directories(dir);
  write_json(report_to_json(report, timestamp), dir / "report.json");
  {
    std::ofstream out(dir / "runs.csv");
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + (dir / "runs.csv").string());
    out << runs_to_csv(report.runs);
  }
  Json completed = Json::array();
  for (const RunRow& r : report.runs)
    completed.push_back({{"family", std::string(to_string(r.family))}, {"n", r.n}, {"seed", r.seed_index}});
  Json failed = Json::array();
  for (const CellFailure& f : report.failures)
    failed.push_back({{"family", std::string(to_string(f.family))}, {"n", f.n}, {"seed", f.seed_index},
                      {"error", f.message}});
  write_json({{"complete", report.complete()}, {"completed", completed}, {"failed", failed}}, dir / "manifest.json");
}

}  // namespace eqvar
