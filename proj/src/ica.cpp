#include "eegconn/ica.hpp"

#include <cmath>
#include <random>

#include "eegconn/connectivity.hpp"
#include "eegconn/errors.hpp"
#include "eegconn/rng.hpp"

namespace eegconn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

MatrixXd symmetric_decorrelation(const MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(w * w.transpose());
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * w;
}

}  // namespace

IcaDecomposition fast_ica(const SignalMatrix& data, const IcaOptions& options) {
  const auto c = static_cast<Index>(data.channels());
  const auto t = static_cast<Index>(data.samples());
  const Index n = options.n_components == 0 ? c : static_cast<Index>(options.n_components);
  if (n < 1 || n > c) throw ConfigError("fast_ica: n_components must lie in [1, channels]");
  if (t <= c) throw ConfigError("fast_ica: need more samples than channels");
  const Index stride = static_cast<Index>(std::max<std::size_t>(1, options.fit_stride));

  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      data.data().data(), c, t);

  IcaDecomposition dec;
  dec.mean = x.rowwise().mean();

  const Index fit_n = (t + stride - 1) / stride;
  if (fit_n <= c) throw ConfigError("fast_ica: fit_stride leaves too few samples");
  MatrixXd xf(c, fit_n);
  for (Index k = 0; k < fit_n; ++k) xf.col(k) = x.col(k * stride) - dec.mean;

  const MatrixXd cov = xf * xf.transpose() / static_cast<double>(fit_n);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
  const Eigen::VectorXd evals = es.eigenvalues();  // ascending
  const double largest = evals(c - 1);
  if (!(largest > 0.0) || evals(c - n) <= 1e-10 * largest) {
    throw NumericalError("fast_ica: covariance is rank deficient, whitening impossible");
  }
  const MatrixXd e_top = es.eigenvectors().rightCols(n);
  const Eigen::VectorXd d_top = evals.tail(n);
  dec.whitening = d_top.cwiseSqrt().cwiseInverse().asDiagonal() * e_top.transpose();
  const MatrixXd z = dec.whitening * xf;

  Rng rng(derive_seed(options.seed, "fast_ica"));
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd w(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) w(i, j) = normal(rng);
  }
  w = symmetric_decorrelation(w);

  const double inv_t = 1.0 / static_cast<double>(fit_n);
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    // tanh via the vectorized exp; saturates correctly at both ends.
    const MatrixXd g = (1.0 - 2.0 / ((2.0 * (w * z).array()).exp() + 1.0)).matrix();
    const Eigen::VectorXd g_prime_mean = (1.0 - g.array().square()).rowwise().mean();
    MatrixXd w_new = g * z.transpose() * inv_t - g_prime_mean.asDiagonal() * w;
    w_new = symmetric_decorrelation(w_new);
    const double lim = ((w_new * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = w_new;
    dec.iterations = it;
    if (lim < options.tol) {
      dec.converged = true;
      break;
    }
  }
  dec.unmixing = w;
  dec.mixing = e_top * d_top.cwiseSqrt().asDiagonal() * w.transpose();

  const MatrixXd s = (w * dec.whitening) * (x.colwise() - dec.mean);
  dec.sources = SignalMatrix(static_cast<std::size_t>(n), static_cast<std::size_t>(t));
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < t; ++k) dec.sources(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) = s(i, k);
  }
  dec.rejected.assign(static_cast<std::size_t>(n), false);
  dec.reasons.assign(static_cast<std::size_t>(n), "");
  return dec;
}

SignalMatrix reconstruct(const IcaDecomposition& dec) {
  const auto n = static_cast<Index>(dec.sources.channels());
  const auto t = static_cast<Index>(dec.sources.samples());
  const auto c = dec.mixing.rows();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> s(
      dec.sources.data().data(), n, t);
  MatrixXd mixing = dec.mixing;
  for (Index i = 0; i < n; ++i) {
    if (dec.rejected[static_cast<std::size_t>(i)]) mixing.col(i).setZero();
  }
  const MatrixXd x = (mixing * s).colwise() + dec.mean;
  SignalMatrix out(static_cast<std::size_t>(c), static_cast<std::size_t>(t));
  for (Index i = 0; i < c; ++i) {
    for (Index k = 0; k < t; ++k) out(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) = x(i, k);
  }
  return out;
}

Recording reject_artifacts(IcaDecomposition& dec, const Recording& rec, double corr_threshold) {
  if (dec.sources.samples() != rec.samples.samples() ||
      static_cast<std::size_t>(dec.mixing.rows()) != rec.samples.channels()) {
    throw DataError("reject_artifacts: decomposition does not belong to this recording");
  }
  const auto fp1 = rec.samples.row(rec.channel_index("Fp1"));
  const auto fp2 = rec.samples.row(rec.channel_index("Fp2"));
  std::size_t kept = 0;
  for (std::size_t i = 0; i < dec.sources.channels(); ++i) {
    const auto comp = dec.sources.row(i);
    const double r1 = pcc(comp, fp1);
    const double r2 = pcc(comp, fp2);
    const bool reject = std::abs(r1) > corr_threshold || std::abs(r2) > corr_threshold;
    dec.rejected[i] = reject;
    dec.reasons[i] = reject ? "ocular: |pcc(Fp1)|=" + std::to_string(std::abs(r1)) +
                                  " |pcc(Fp2)|=" + std::to_string(std::abs(r2))
                            : "";
    if (!reject) ++kept;
  }
  if (kept == 0) throw DataError("reject_artifacts: every component exceeds the threshold; refusing to emit an empty signal");
  Recording out = rec;
  out.samples = reconstruct(dec);
  return out;
}

}  // namespace eegconn
