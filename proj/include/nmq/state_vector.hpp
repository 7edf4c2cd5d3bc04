#ifndef NMQ_STATE_VECTOR_HPP
#define NMQ_STATE_VECTOR_HPP

#include <cstddef>
#include <vector>

#include "nmq/complex_matrix.hpp"

namespace nmq {

// Pure-state amplitudes plus a carried likelihood factor. A normalized state
// has norm() == 1 and norm_weight == accumulated likelihood; an unnormalized
// conditional branch represents the mass norm_weight * norm()^2.
struct StateVector {
    std::vector<cplx> amplitudes;
    double norm_weight = 1.0;

    StateVector() = default;
    explicit StateVector(std::size_t dim) : amplitudes(dim) {}
    StateVector(std::vector<cplx> amps, double weight = 1.0)
        : amplitudes(std::move(amps)), norm_weight(weight) {}

    std::size_t dim() const { return amplitudes.size(); }
    double norm_squared() const;
    double norm() const;
    bool is_normalized(double tol = 1e-10) const;

    // Scales amplitudes to unit norm and folds the dropped norm^2 into
    // norm_weight. Throws InvalidStateError on zero norm.
    void normalize();
};

cplx inner_product(const StateVector& bra, const StateVector& ket);

// |a> tensor |b>, factor a slowest.
StateVector tensor(const StateVector& a, const StateVector& b);

// |psi><psi| as a dense matrix (uses amplitudes only, ignores norm_weight).
ComplexMatrix outer_product(const StateVector& psi);

}  // namespace nmq

#endif
