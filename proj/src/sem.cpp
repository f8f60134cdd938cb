#include "eqvar/sem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eqvar/error.hpp"
#include "eqvar/rng.hpp"

namespace eqvar {

std::string_view to_string(ErrorFamily family) {
  switch (family) {
    case ErrorFamily::Gaussian: return "gaussian";
    case ErrorFamily::Laplace: return "laplace";
    case ErrorFamily::Uniform: return "uniform";
  }
  return "unknown";
}

ErrorFamily parse_error_family(std::string_view name) {
  if (name == "gaussian") return ErrorFamily::Gaussian;
  if (name == "laplace") return ErrorFamily::Laplace;
  if (name == "uniform") return ErrorFamily::Uniform;
  throw Error(ErrorKind::InvalidInput, "unknown error family '" + std::string(name) + "'");
}

double error_quantile(ErrorFamily family, double sigma2, double u, double u2) {
  switch (family) {
    case ErrorFamily::Gaussian:
      return std::sqrt(sigma2) * std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * u2);
    case ErrorFamily::Laplace: {
      const double scale = std::sqrt(sigma2 / 2.0);
      const double c = u - 0.5;
      return c < 0 ? scale * std::log1p(2.0 * c) : -scale * std::log1p(-2.0 * c);
    }
    case ErrorFamily::Uniform:
      return std::sqrt(3.0 * sigma2) * (2.0 * u - 1.0);
  }
  return 0.0;
}

SemSpec::SemSpec(Dag gamma_star, std::vector<std::vector<double>> coefficients, double sigma2,
                 ErrorFamily family, std::optional<std::uint64_t> seed)
    : gamma_star_(std::move(gamma_star)),
      coefficients_(std::move(coefficients)),
      sigma2_(sigma2),
      family_(family),
      seed_(seed) {
  if (!(sigma2_ > 0) || !std::isfinite(sigma2_))
    throw Error(ErrorKind::InvalidInput, "error variance must be positive");
  if (static_cast<int>(coefficients_.size()) != p())
    throw Error(ErrorKind::InvalidInput, "need one coefficient vector per node");
  for (int j = 0; j < p(); ++j) {
    const auto& beta = coefficients_[static_cast<std::size_t>(j)];
    if (static_cast<int>(beta.size()) != mask_size(gamma_star_.parent_mask(j)))
      throw Error(ErrorKind::InvalidInput,
                  "coefficient count does not match parent count at node " + std::to_string(j));
    for (double b : beta)
      if (b == 0.0 || !std::isfinite(b))
        throw Error(ErrorKind::InvalidInput, "coefficients must be finite and non-zero (node " +
                                                 std::to_string(j) + ")");
  }
}

SemSpec SemSpec::uniform_weights(Dag gamma_star, double beta, double sigma2, ErrorFamily family) {
  std::vector<std::vector<double>> coefficients;
  for (int j = 0; j < gamma_star.p(); ++j)
    coefficients.emplace_back(static_cast<std::size_t>(mask_size(gamma_star.parent_mask(j))), beta);
  return SemSpec(std::move(gamma_star), std::move(coefficients), sigma2, family);
}

SemSpec SemSpec::with_family(ErrorFamily family) const {
  SemSpec copy = *this;
  copy.family_ = family;
  return copy;
}

Eigen::MatrixXd SemSpec::coefficient_matrix() const {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p(), p());
  for (int j = 0; j < p(); ++j) {
    const auto parents = gamma_star_.parents(j);
    for (std::size_t t = 0; t < parents.size(); ++t)
      b(j, parents[t]) = coefficients_[static_cast<std::size_t>(j)][t];
  }
  return b;
}

Dataset::Dataset(Eigen::MatrixXd values, std::vector<std::string> column_names)
    : values_(std::move(values)), column_names_(std::move(column_names)) {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw Error(ErrorKind::InvalidInput, "dataset needs at least one row and one column");
  if (!values_.allFinite()) throw Error(ErrorKind::InvalidInput, "dataset contains non-finite values");
  if (!column_names_.empty() && static_cast<int>(column_names_.size()) != p())
    throw Error(ErrorKind::InvalidInput, "column name count does not match column count");
}

Dataset Dataset::centered_copy() const {
  Eigen::MatrixXd centered = values_.rowwise() - values_.colwise().mean();
  Dataset out(std::move(centered), column_names_);
  out.centered_ = true;
  return out;
}

Eigen::MatrixXd implied_covariance(const SemSpec& spec) {
  const int p = spec.p();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p) - spec.coefficient_matrix();
  // I - B is unit triangular after a topological permutation, so the
  // inverse always exists; solve rather than invert.
  const Eigen::MatrixXd l = a.partialPivLu().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd sigma = spec.sigma2() * l * l.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

Dataset simulate(const SemSpec& spec, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::InvalidInput, "sample count must be positive");
  const int p = spec.p();
  const CausalOrder order = topological_order(spec.gamma_star());
  std::vector<CounterStream> streams;
  for (int j = 0; j < p; ++j) streams.emplace_back(derive_key(seed, {static_cast<std::uint64_t>(j)}));

  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    const auto row = static_cast<std::uint64_t>(i);
    for (int j : order.order()) {
      const CounterStream& s = streams[static_cast<std::size_t>(j)];
      double value = error_quantile(spec.family(), spec.sigma2(), s.uniform(2 * row), s.uniform(2 * row + 1));
      const auto parents = spec.gamma_star().parents(j);
      const auto& beta = spec.coefficients()[static_cast<std::size_t>(j)];
      for (std::size_t t = 0; t < parents.size(); ++t) value += beta[t] * x(i, parents[t]);
      x(i, j) = value;
    }
  }
  return Dataset(std::move(x));
}

SemSpec random_sem(const Dag& gamma_star, double lo, double hi, double sigma2, ErrorFamily family,
                   std::uint64_t seed) {
  if (!(lo > 0)) throw Error(ErrorKind::InvalidInput, "coefficient lower bound must be positive");
  if (!(lo <= hi)) throw Error(ErrorKind::InvalidInput, "coefficient range must satisfy lo <= hi");
  SequentialRng rng(derive_key(seed, {0x5E3ULL}));
  std::vector<std::vector<double>> coefficients;
  for (int j = 0; j < gamma_star.p(); ++j) {
    std::vector<double> beta;
    for (int t = 0; t < mask_size(gamma_star.parent_mask(j)); ++t) {
      const double magnitude = std::clamp(rng.uniform(lo, hi), lo, hi);
      beta.push_back(rng.coin() ? magnitude : -magnitude);
    }
    coefficients.push_back(std::move(beta));
  }
  return SemSpec(gamma_star, std::move(coefficients), sigma2, family, seed);
}

Dag random_dag(int p, double edge_prob, std::uint64_t seed) {
  SequentialRng rng(derive_key(seed, {0xDA6ULL}));
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  for (int i = p - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  std::vector<NodeMask> parents(static_cast<std::size_t>(p), 0);
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b)
      if (rng.uniform() < edge_prob)
        parents[static_cast<std::size_t>(order[static_cast<std::size_t>(b)])] |= NodeMask{1}
                                                                                << order[static_cast<std::size_t>(a)];
  return Dag::from_parent_masks(std::move(parents));
}

}  // namespace eqvar
