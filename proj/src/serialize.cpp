#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eqvar/error.hpp"
#include "eqvar/io.hpp"

namespace eqvar {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

Error parse_error(std::size_t row, std::size_t col, const std::string& what) {
  return Error(ErrorKind::Parse, "CSV row " + std::to_string(row) + ", column " + std::to_string(col) + ": " + what);
}

template <typename T>
T get_field(const Json& j, const char* name) {
  if (!j.contains(name)) throw Error(ErrorKind::InvalidInput, std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("bad field '") + name + "': " + e.what());
  }
}

}  // namespace

Dataset parse_csv(const std::string& text, bool has_header, bool center) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_cells(line);
    if (has_header && names.empty() && rows.empty()) {
      names = std::move(cells);
      width = names.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw parse_error(line_no, std::min(cells.size(), width) + 1,
                        "expected " + std::to_string(width) + " cells, found " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      double value = 0.0;
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      if (!cell.empty() && *begin == '+') ++begin;
      const auto [ptr, ec] = std::from_chars(begin, end, value);
      if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
        throw parse_error(line_no, c + 1, "not a finite number: '" + cell + "'");
      row.push_back(value);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Parse, "CSV has no data rows");

  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < width; ++c)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  Dataset data(std::move(values), std::move(names));
  return center ? data.centered_copy() : data;
}

Dataset load_csv(const std::filesystem::path& path, bool has_header, bool center) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), has_header, center);
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path.string());
  if (!data.column_names().empty()) {
    for (int j = 0; j < data.p(); ++j) out << (j ? "," : "") << data.column_names()[static_cast<std::size_t>(j)];
    out << '\n';
  }
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.p(); ++j) out << (j ? "," : "") << format_double(data.values()(i, j));
    out << '\n';
  }
}

Json dag_to_json(const Dag& dag) {
  Json edges = Json::array();
  for (const Edge& e : dag.edges()) edges.push_back({e.from, e.to});
  return {{"p", dag.p()}, {"edges", edges}};
}

Dag dag_from_json(const Json& j) {
  const int p = get_field<int>(j, "p");
  std::vector<Edge> edges;
  for (const auto& pair : get_field<std::vector<std::vector<int>>>(j, "edges")) {
    if (pair.size() != 2) throw Error(ErrorKind::InvalidInput, "edges must be [from, to] pairs");
    edges.push_back({pair[0], pair[1]});
  }
  return Dag::from_edges(p, edges);
}

Json sem_to_json(const SemSpec& spec) {
  Json out = dag_to_json(spec.gamma_star());
  Json coefficients = Json::array();
  for (const Edge& e : spec.gamma_star().edges()) {
    const auto parents = spec.gamma_star().parents(e.to);
    const auto pos = static_cast<std::size_t>(std::find(parents.begin(), parents.end(), e.from) - parents.begin());
    coefficients.push_back(spec.coefficients()[static_cast<std::size_t>(e.to)][pos]);
  }
  out["coefficients"] = coefficients;
  out["sigma2"] = spec.sigma2();
  out["family"] = std::string(to_string(spec.family()));
  out["seed"] = spec.seed() ? Json(*spec.seed()) : Json(nullptr);
  return out;
}

SemSpec sem_from_json(const Json& j) {
  const Dag dag = dag_from_json(j);
  const auto edges = dag.edges();
  const auto flat = get_field<std::vector<double>>(j, "coefficients");
  if (flat.size() != edges.size())
    throw Error(ErrorKind::InvalidInput, "need one coefficient per edge, in sorted edge order");
  std::vector<std::vector<double>> coefficients(static_cast<std::size_t>(dag.p()));
  // Sorted edges visit each child's parents in ascending order.
  std::vector<std::vector<std::pair<int, double>>> by_child(static_cast<std::size_t>(dag.p()));
  for (std::size_t t = 0; t < edges.size(); ++t)
    by_child[static_cast<std::size_t>(edges[t].to)].emplace_back(edges[t].from, flat[t]);
  for (std::size_t c = 0; c < by_child.size(); ++c) {
    std::sort(by_child[c].begin(), by_child[c].end());
    for (const auto& [from, beta] : by_child[c]) coefficients[c].push_back(beta);
  }
  const double sigma2 = get_field<double>(j, "sigma2");
  const ErrorFamily family =
      j.contains("family") ? parse_error_family(get_field<std::string>(j, "family")) : ErrorFamily::Gaussian;
  std::optional<std::uint64_t> seed;
  if (j.contains("seed") && !j.at("seed").is_null()) seed = get_field<std::uint64_t>(j, "seed");
  return SemSpec(dag, std::move(coefficients), sigma2, family, seed);
}

Json theorem1_to_json(const Theorem1Report& report) {
  Json argmin = Json::array();
  for (const Dag& d : report.argmin_set) argmin.push_back(dag_to_json(d));
  Json supergraphs = Json::array();
  for (const Dag& d : report.supergraph_set) supergraphs.push_back(dag_to_json(d));
  return {{"min_total", report.min_total},
          {"expected_min", report.expected_min},
          {"argmin", argmin},
          {"supergraphs", supergraphs},
          {"verdict", report.verdict},
          {"det_identity_max_rel_error", report.det_identity_max_rel_error},
          {"delta_star", report.delta_star ? Json(*report.delta_star) : Json(nullptr)}};
}

Json posterior_to_json(const PosteriorResult& result, std::size_t top_k) {
  Json dags = Json::array();
  const auto order = result.ranking();
  const std::size_t keep = top_k == 0 ? order.size() : std::min(top_k, order.size());
  for (std::size_t r = 0; r < keep; ++r) {
    const PosteriorEntry& e = result.entries[order[r]];
    dags.push_back({{"edges", dag_to_json(e.dag)["edges"]},
                    {"log_marginal", e.score.log_marginal},
                    {"log_prior", e.log_prior},
                    {"posterior", e.posterior},
                    {"bic", e.score.bic},
                    {"r_n", e.score.r_n_total}});
  }
  Json map = Json::array();
  for (const Dag& d : result.map_dags) map.push_back(dag_to_json(d));
  return {{"g", result.g},     {"prior", result.prior}, {"n", result.n},          {"p", result.p},
          {"centered", result.centered}, {"dags", dags}, {"map", map}};
}

Json search_to_json(const SearchResult& result) {
  Json best = Json::array();
  for (const Dag& d : result.best_dags) best.push_back(dag_to_json(d));
  Json stats = {{"candidates_scored", result.stats.candidates_scored},
                {"wall_seconds", result.stats.wall_seconds},
                {"restarts", result.stats.restarts}};
  if (result.stats.restarts_reaching_reference)
    stats["restarts_reaching_reference"] = *result.stats.restarts_reaching_reference;
  return {{"method", to_string(result.method)},
          {"criterion", result.criterion.name()},
          {"best_score", result.best_score},
          {"best", best},
          {"stats", stats}};
}

Json dag_score_to_json(const Dag& dag, const NodeScoreTable& table, double g) {
  const DagScore s = score_dag(table, dag, g);
  Json per_node = Json::array();
  for (int j = 0; j < dag.p(); ++j) per_node.push_back(table.at(j, dag.parent_mask(j)));
  return {{"edges", dag_to_json(dag)["edges"]},
          {"log_marginal", s.log_marginal},
          {"bic", s.bic},
          {"r_n", s.r_n_total},
          {"r_jn", per_node},
          {"edge_count", s.edge_count},
          {"g", g},
          {"n", s.n},
          {"p", s.p}};
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace eqvar
