#ifndef NMQ_COMPOSITE_SPACE_HPP
#define NMQ_COMPOSITE_SPACE_HPP

#include <cstddef>
#include <vector>

namespace nmq {

// Ordered tensor factorization of a Hilbert space. Factor 0 is the system;
// factors 1..N are memory bins ordered by exit time (factor 1 exits next).
// Flattening is row-major over factors with factor 0 slowest; this ordering
// is the single source of truth for every index computation in the library.
class CompositeSpace {
public:
    CompositeSpace() = default;
    explicit CompositeSpace(std::vector<std::size_t> factor_dims);

    const std::vector<std::size_t>& factor_dims() const { return dims_; }
    std::size_t factor_count() const { return dims_.size(); }
    std::size_t factor_dim(std::size_t f) const { return dims_.at(f); }
    std::size_t total_dim() const { return total_; }

    // Product of the dims of all factors after f (the flattened step between
    // consecutive indices of factor f).
    std::size_t stride(std::size_t f) const;

    // Space with factor f removed.
    CompositeSpace without_factor(std::size_t f) const;

    // Space with a factor of dimension d appended (new last factor).
    CompositeSpace with_appended_factor(std::size_t d) const;

    bool operator==(const CompositeSpace& other) const { return dims_ == other.dims_; }

private:
    std::vector<std::size_t> dims_;
    std::size_t total_ = 1;
};

}  // namespace nmq

#endif
