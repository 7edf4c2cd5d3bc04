#ifndef NMQ_KERNEL_HPP
#define NMQ_KERNEL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nmq/complex_matrix.hpp"

namespace nmq {

// Stationary bath correlation samples alpha_m = alpha(m*dt), m >= 0, with the
// Hermitian extension alpha_{-m} = conj(alpha_m) implied. Units 1/time.
struct CorrelationFunction {
    double dt = 0.0;
    std::vector<cplx> samples;

    std::size_t lags() const { return samples.size(); }
    // Hermitian-extended value at a signed lag.
    cplx at(std::ptrdiff_t m) const;
};

// Causal coupling kernel sampled at the left endpoints kappa_k = kappa(k*dt),
// k = 0..N-1; zero for negative times. Units 1/time.
struct CouplingKernel {
    double dt = 0.0;
    std::vector<cplx> samples;

    std::size_t bins() const { return samples.size(); }
    double memory_time() const { return dt * static_cast<double>(samples.size()); }
};

enum class NoiseNorm {
    bin,        // E|xi|^2 = 1 per bin
    continuum,  // E|xi|^2 = 1/dt
};

// A sampled complex noise trajectory.
struct NoisePath {
    double dt = 0.0;
    std::vector<cplx> bins;
    std::uint64_t seed = 0;
    NoiseNorm normalization = NoiseNorm::bin;

    NoisePath to_continuum() const;  // xi = xi_bin / sqrt(dt)
    NoisePath to_bin() const;
};

// Discrete correlation of a causal kernel:
//   alpha_m = dt * sum_k kappa_{m+k} conj(kappa_k),  m = 0..N-1.
CorrelationFunction reconstruct(const CouplingKernel& kappa);

struct FactorizeOptions {
    std::size_t window_factor = 8;  // Toeplitz window = window_factor * n
    double psd_rel_tol = 1e-10;     // eigenvalue clip threshold, relative to max
};

struct FactorizeResult {
    CouplingKernel kernel;
    // max |reconstruct(kernel)_m - alpha_m| over the overlapping lags.
    double residual = 0.0;
};

// Causal spectral factorization: find kappa with reconstruct(kappa) ~= alpha.
// Runs the Schur (fast Cholesky) recursion on the Hermitian Toeplitz
// covariance built from alpha over an enlarged window and reads the causal
// kernel off the final, converged factor row. The phase is fixed by making
// the first nonzero sample real positive. Throws NotFactorizableError (with
// the most negative eigenvalue) if alpha is indefinite beyond tolerance.
FactorizeResult factorize(const CorrelationFunction& alpha, std::size_t n,
                          const FactorizeOptions& opts = {});

// i.i.d. circularly symmetric complex Gaussian bins, E|xi|^2 = 1, E xi^2 = 0.
NoisePath sample_white_noise(std::size_t n, double dt, std::uint64_t seed);

// Anticipating colored noise in continuum normalization:
//   a_m = sqrt(dt) * sum_k xi_{m+k} conj(kappa_k)
// so that E[a_{t+m} conj(a_t)] = reconstruct(kappa)_m. Input must be a
// bin-normalized path of length >= output length + N - 1.
NoisePath color(const NoisePath& xi, const CouplingKernel& kappa,
                std::size_t output_length);

// Empirical lag correlation of an ensemble, E[a_{t+m} conj(a_t)], with
// per-lag standard errors estimated across paths. Performed on the stored
// bin values in whatever normalization the paths carry.
struct CorrelationEstimate {
    double dt = 0.0;
    std::vector<cplx> mean;
    std::vector<double> se_re;
    std::vector<double> se_im;
};
CorrelationEstimate estimate_correlation(const std::vector<NoisePath>& paths,
                                         std::size_t max_lag);

// Hermitian Toeplitz matrix C_ij = alpha_{j-i} (conjugated below diagonal),
// of the given size, lags beyond the sampled range extended with zero.
ComplexMatrix toeplitz_matrix(const CorrelationFunction& alpha, std::size_t size);

// True when the sample Toeplitz matrix is positive semidefinite within the
// relative tolerance (eigenvalues >= -tol * max eigenvalue).
bool is_positive_semidefinite(const CorrelationFunction& alpha, double rel_tol = 1e-10);

// --- text serialization -----------------------------------------------------
// One line per sample, "index, re, im", header carrying dt and the count.
// Round-trips doubles exactly.

void write_correlation(std::ostream& os, const CorrelationFunction& alpha);
CorrelationFunction read_correlation(std::istream& is);
void write_kernel(std::ostream& os, const CouplingKernel& kappa);
CouplingKernel read_kernel(std::istream& is);

std::uint64_t kernel_fingerprint(const CouplingKernel& kappa);

}  // namespace nmq

#endif
