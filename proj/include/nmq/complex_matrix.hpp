#ifndef NMQ_COMPLEX_MATRIX_HPP
#define NMQ_COMPLEX_MATRIX_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace nmq {

using cplx = std::complex<double>;

// Dense complex matrix, row-major. Dimensions stay small (a few thousand at
// most), so everything is plain O(n^2)/O(n^3) dense arithmetic.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols) {}
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

    static ComplexMatrix identity(std::size_t n);
    static ComplexMatrix zero(std::size_t rows, std::size_t cols) { return {rows, cols}; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<cplx>& data() const { return data_; }
    std::vector<cplx>& data() { return data_; }

    ComplexMatrix adjoint() const;
    ComplexMatrix transpose() const;
    ComplexMatrix conjugate() const;
    cplx trace() const;

    double max_abs() const;
    double one_norm() const;        // max column sum of |.|
    double frobenius_norm() const;

    // Relative tolerance predicates; tolerance is measured against max_abs().
    bool is_hermitian(double rel_tol = 1e-12) const;
    bool is_anti_hermitian(double rel_tol = 1e-12) const;
    bool is_finite() const;

    ComplexMatrix& operator+=(const ComplexMatrix& other);
    ComplexMatrix& operator-=(const ComplexMatrix& other);
    ComplexMatrix& operator*=(cplx scalar);

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }
    friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);

// y = A x
std::vector<cplx> matvec(const ComplexMatrix& a, const std::vector<cplx>& x);

// Eigenvalues of a Hermitian matrix, ascending. Cyclic Jacobi; intended for
// the small Hermitian matrices this library works with.
std::vector<double> hermitian_eigenvalues(const ComplexMatrix& a);

// (1/2) * sum |eig(a - b)| for Hermitian a, b.
double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace nmq

#endif
