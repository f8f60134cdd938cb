#pragma once

// File formats: CSV datasets and JSON documents for DAGs, SEM specs and
// reports. Doubles are written so that they read back bit-exactly.

#include <filesystem>
#include <json.hpp>
#include <string>

#include "eqvar/graph.hpp"
#include "eqvar/population.hpp"
#include "eqvar/scoring.hpp"
#include "eqvar/search.hpp"
#include "eqvar/sem.hpp"

namespace eqvar {

using Json = nlohmann::json;

/// One observation per line, comma-separated. Throws Parse with the row and
/// column of the first offending cell on ragged rows, non-numeric cells or an
/// empty body. With `center`, column means are subtracted and the dataset is
/// flagged as centered.
Dataset load_csv(const std::filesystem::path& path, bool has_header, bool center = false);
Dataset parse_csv(const std::string& text, bool has_header, bool center = false);
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// "%.17g".
std::string format_double(double value);

/// {"p": int, "edges": [[from, to], ...]} with edges sorted.
Json dag_to_json(const Dag& dag);
Dag dag_from_json(const Json& j);

/// {"p", "edges", "coefficients", "sigma2", "family", "seed"}; coefficients
/// run parallel to the sorted edge list.
Json sem_to_json(const SemSpec& spec);
SemSpec sem_from_json(const Json& j);

Json theorem1_to_json(const Theorem1Report& report);
/// top_k == 0 keeps every DAG; otherwise the best top_k by posterior.
Json posterior_to_json(const PosteriorResult& result, std::size_t top_k = 0);
Json search_to_json(const SearchResult& result);
Json dag_score_to_json(const Dag& dag, const NodeScoreTable& table, double g);

Json read_json(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);

}  // namespace eqvar
