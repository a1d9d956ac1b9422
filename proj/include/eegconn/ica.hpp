#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "eegconn/recording.hpp"

namespace eegconn {

struct IcaOptions {
  std::size_t n_components = 0;  // 0 = all channels
  std::size_t max_iter = 200;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  std::size_t fit_stride = 1;  // fit on every n-th sample, apply to all
};

struct IcaDecomposition {
  Eigen::VectorXd mean;       // per channel
  Eigen::MatrixXd whitening;  // n x C
  Eigen::MatrixXd unmixing;   // n x n, orthonormal rows
  Eigen::MatrixXd mixing;     // C x n, maps sources back to channels
  SignalMatrix sources;       // n x T
  std::vector<bool> rejected;
  std::vector<std::string> reasons;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Symmetric FastICA with the tanh contrast on PCA-whitened data.
///
/// Converges when max |1 - |<w_new, w_old>|| < tol. Throws NumericalError
/// when the covariance is rank deficient (e.g. a constant channel), and
/// ConfigError on bad sizes.
IcaDecomposition fast_ica(const SignalMatrix& data, const IcaOptions& options);

SignalMatrix reconstruct(const IcaDecomposition& dec);

/// Flags components whose |PCC| with Fp1 or Fp2 exceeds corr_threshold,
/// zeroes them and reconstructs the channels. Updates dec.rejected/reasons.
/// Throws DataError if every component would be rejected.
Recording reject_artifacts(IcaDecomposition& dec, const Recording& rec, double corr_threshold);

}  // namespace eegconn
