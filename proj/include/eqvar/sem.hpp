#pragma once

// Linear recursive SEM with equal error variances: each X_j is a linear
// combination of its parents plus an independent mean-zero error of variance
// sigma2. No intercepts.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eqvar/graph.hpp"

namespace eqvar {

enum class ErrorFamily { Gaussian, Laplace, Uniform };

std::string_view to_string(ErrorFamily family);
/// Accepts "gaussian", "laplace", "uniform".
ErrorFamily parse_error_family(std::string_view name);

/// Draw of a mean-zero, variance-sigma2 error from a uniform u in (0, 1)
/// (and a second uniform u2, used only by the Gaussian).
double error_quantile(ErrorFamily family, double sigma2, double u, double u2);

class SemSpec {
 public:
  /// coefficients[j] is aligned with gamma_star.parents(j). Throws
  /// InvalidInput on length mismatch, zero coefficients, or sigma2 <= 0.
  SemSpec(Dag gamma_star, std::vector<std::vector<double>> coefficients, double sigma2,
          ErrorFamily family = ErrorFamily::Gaussian, std::optional<std::uint64_t> seed = std::nullopt);

  /// All coefficients equal to `beta`.
  static SemSpec uniform_weights(Dag gamma_star, double beta, double sigma2,
                                 ErrorFamily family = ErrorFamily::Gaussian);

  const Dag& gamma_star() const { return gamma_star_; }
  int p() const { return gamma_star_.p(); }
  const std::vector<std::vector<double>>& coefficients() const { return coefficients_; }
  double sigma2() const { return sigma2_; }
  ErrorFamily family() const { return family_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  SemSpec with_family(ErrorFamily family) const;

  /// B[j, k] = coefficient of parent k in the equation for X_j.
  Eigen::MatrixXd coefficient_matrix() const;

 private:
  Dag gamma_star_;
  std::vector<std::vector<double>> coefficients_;
  double sigma2_;
  ErrorFamily family_;
  std::optional<std::uint64_t> seed_;
};

/// n x p observation matrix, one row per observation.
class Dataset {
 public:
  /// Throws InvalidInput on an empty matrix, non-finite entries, or a
  /// column-name count that does not match p.
  explicit Dataset(Eigen::MatrixXd values, std::vector<std::string> column_names = {});

  int n() const { return static_cast<int>(values_.rows()); }
  int p() const { return static_cast<int>(values_.cols()); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  auto column(int j) const { return values_.col(j); }

  bool centered() const { return centered_; }
  /// Copy with column means subtracted; the result is flagged as centered.
  Dataset centered_copy() const;

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> column_names_;
  bool centered_ = false;
};

/// sigma2 (I - B)^{-1} (I - B)^{-T}.
Eigen::MatrixXd implied_covariance(const SemSpec& spec);

/// n iid draws. Node j's errors come from a substream keyed by (seed, j) and
/// indexed by row, so the output is independent of evaluation order and of
/// how many other nodes exist.
Dataset simulate(const SemSpec& spec, int n, std::uint64_t seed);

/// Coefficients uniform on [-hi, -lo] U [lo, hi]. Throws InvalidInput unless
/// 0 < lo <= hi.
SemSpec random_sem(const Dag& gamma_star, double lo, double hi, double sigma2, ErrorFamily family,
                   std::uint64_t seed);

/// Random DAG: a uniformly random order, each forward pair joined with
/// probability `edge_prob`.
Dag random_dag(int p, double edge_prob, std::uint64_t seed);

}  // namespace eqvar
