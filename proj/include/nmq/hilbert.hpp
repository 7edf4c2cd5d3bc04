#ifndef NMQ_HILBERT_HPP
#define NMQ_HILBERT_HPP

#include <cstddef>
#include <vector>

#include "nmq/complex_matrix.hpp"
#include "nmq/composite_space.hpp"
#include "nmq/state_vector.hpp"

namespace nmq {

constexpr std::size_t kDefaultDimensionCap = 4096;

// Kronecker product with the factor-0-slowest convention:
// (A (x) B)(i,j) = A(i / B.rows, j / B.cols) * B(i % B.rows, j % B.cols).
// Throws DimensionCapError if a result dimension exceeds `cap`.
ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b,
                     std::size_t cap = kDefaultDimensionCap);

// Reduced density matrix over the kept factors (in their original order);
// the remaining factors are traced out. Trace is preserved.
ComplexMatrix partial_trace(const ComplexMatrix& rho, const CompositeSpace& space,
                            const std::vector<std::size_t>& keep);

// Reduced density matrix of a pure state over the kept factors.
ComplexMatrix reduced_density(const StateVector& psi, const CompositeSpace& space,
                              const std::vector<std::size_t>& keep);

// Truncated bosonic annihilation operator on the (cutoff+1)-dimensional Fock
// space: a|n> = sqrt(n)|n-1>.
ComplexMatrix ladder(int cutoff);

// Unnormalized Bargmann coherent vector, component n = xi^n / sqrt(n!).
// When |xi|^2 > cutoff / 2 the truncation is unreliable; the optional flag is
// set but the vector is still returned.
StateVector coherent(cplx xi, int cutoff, bool* truncation_warning = nullptr);

// exp(G), scaling-and-squaring on the full matrix. Throws NumericError on
// non-finite input.
ComplexMatrix expm(const ComplexMatrix& g);

// exp(G) * v.
StateVector expm_apply(const ComplexMatrix& g, const StateVector& v);

// Identity on every factor except `f`, where `op` acts. op must be square
// with dim == space.factor_dim(f).
ComplexMatrix embed_factor_op(const ComplexMatrix& op, std::size_t f,
                              const CompositeSpace& space);

// Contract one factor of a pure state against fixed coefficients:
// result(rest) = sum_n conj(coeffs[n]) * psi(..., n, ...). The factor is
// removed from the space; norm_weight is carried through unchanged.
StateVector contract_factor(const StateVector& psi, const CompositeSpace& space,
                            std::size_t f, const std::vector<cplx>& coeffs);

// Gauss-Laguerre nodes and weights on [0, inf) with weight e^{-u}:
// integral of e^{-u} f(u) du ~= sum w_j f(u_j), exact for polynomials of
// degree <= 2*order - 1.
struct GaussLaguerre {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussLaguerre gauss_laguerre(int order);

// Quadrature grid for complex-Gaussian averages over the truncated Fock
// space: radial Gauss-Laguerre in |xi|^2 times a uniform angular grid.
// measure_weight integrates against the Gaussian measure e^{-|xi|^2}/pi d2xi;
// lebesgue_weight integrates against plain d2xi. Exact (to roundoff) for
// integrands polynomial in (xi, conj xi) up to the grid degree, which covers
// all operators on the cutoff-truncated space.
struct BargmannQuadrature {
    std::vector<cplx> nodes;
    std::vector<double> measure_weight;
    std::vector<double> lebesgue_weight;
};
BargmannQuadrature bargmann_quadrature(int cutoff);

}  // namespace nmq

#endif
