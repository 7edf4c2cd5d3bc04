#include "nmq/complex_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nmq/errors.hpp"

namespace nmq {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
        throw Error("ComplexMatrix: entry count does not match rows*cols");
    }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix m(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
    return m;
}

ComplexMatrix ComplexMatrix::transpose() const {
    ComplexMatrix m(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) m(j, i) = (*this)(i, j);
    return m;
}

ComplexMatrix ComplexMatrix::conjugate() const {
    ComplexMatrix m(rows_, cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) m.data_[k] = std::conj(data_[k]);
    return m;
}

cplx ComplexMatrix::trace() const {
    cplx t = 0.0;
    const std::size_t n = std::min(rows_, cols_);
    for (std::size_t i = 0; i < n; ++i) t += (*this)(i, i);
    return t;
}

double ComplexMatrix::max_abs() const {
    double m = 0.0;
    for (const cplx& z : data_) m = std::max(m, std::abs(z));
    return m;
}

double ComplexMatrix::one_norm() const {
    double best = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) s += std::abs((*this)(i, j));
        best = std::max(best, s);
    }
    return best;
}

double ComplexMatrix::frobenius_norm() const {
    double s = 0.0;
    for (const cplx& z : data_) s += std::norm(z);
    return std::sqrt(s);
}

bool ComplexMatrix::is_hermitian(double rel_tol) const {
    if (rows_ != cols_) return false;
    const double scale = std::max(max_abs(), 1e-300);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i; j < cols_; ++j)
            if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > rel_tol * scale) return false;
    return true;
}

bool ComplexMatrix::is_anti_hermitian(double rel_tol) const {
    if (rows_ != cols_) return false;
    const double scale = std::max(max_abs(), 1e-300);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i; j < cols_; ++j)
            if (std::abs((*this)(i, j) + std::conj((*this)(j, i))) > rel_tol * scale) return false;
    return true;
}

bool ComplexMatrix::is_finite() const {
    for (const cplx& z : data_)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw Error("ComplexMatrix: shape mismatch in +=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw Error("ComplexMatrix: shape mismatch in -=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx scalar) {
    for (cplx& z : data_) z *= scalar;
    return *this;
}

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) throw Error("ComplexMatrix: shape mismatch in *");
    ComplexMatrix c(a.rows(), b.cols());
    // i-k-j loop order keeps the inner loop streaming over rows of b.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx(0.0)) continue;
            const cplx* brow = &b(k, 0);
            cplx* crow = &c(i, 0);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

std::vector<cplx> matvec(const ComplexMatrix& a, const std::vector<cplx>& x) {
    if (a.cols() != x.size()) throw Error("ComplexMatrix: shape mismatch in apply");
    std::vector<cplx> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        cplx s = 0.0;
        const cplx* row = &a(i, 0);
        for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

namespace {

// One cyclic Jacobi sweep pass for a Hermitian matrix held in `a`.
// Returns the off-diagonal Frobenius norm before the sweep.
double jacobi_sweep(ComplexMatrix& a) {
    const std::size_t n = a.rows();
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * std::norm(a(p, q));
    off = std::sqrt(off);

    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            const cplx apq = a(p, q);
            const double mag = std::abs(apq);
            if (mag == 0.0) continue;
            const double app = a(p, p).real();
            const double aqq = a(q, q).real();
            // Unitary 2x2 rotation [ [c, s*phase], [-s*conj(phase), c] ]
            // that annihilates a(p,q).
            const cplx phase = apq / mag;
            const double tau = (aqq - app) / (2.0 * mag);
            const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                             (std::abs(tau) + std::sqrt(1.0 + tau * tau));
            const double c = 1.0 / std::sqrt(1.0 + t * t);
            const double s = t * c;

            for (std::size_t k = 0; k < n; ++k) {
                const cplx akp = a(k, p);
                const cplx akq = a(k, q);
                a(k, p) = c * akp - s * std::conj(phase) * akq;
                a(k, q) = s * phase * akp + c * akq;
            }
            for (std::size_t k = 0; k < n; ++k) {
                const cplx apk = a(p, k);
                const cplx aqk = a(q, k);
                a(p, k) = c * apk - s * phase * aqk;
                a(q, k) = s * std::conj(phase) * apk + c * aqk;
            }
            a(p, q) = 0.0;
            a(q, p) = 0.0;
        }
    }
    return off;
}

}  // namespace

std::vector<double> hermitian_eigenvalues(const ComplexMatrix& m) {
    if (m.rows() != m.cols()) throw Error("hermitian_eigenvalues: matrix not square");
    const std::size_t n = m.rows();
    if (n == 0) return {};
    ComplexMatrix a = m;
    // Symmetrize to kill roundoff-level asymmetry.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const cplx v = 0.5 * (a(i, j) + std::conj(a(j, i)));
            a(i, j) = v;
            a(j, i) = std::conj(v);
        }
        a(i, i) = a(i, i).real();
    }
    const double scale = std::max(a.max_abs(), 1e-300);
    for (int sweep = 0; sweep < 60; ++sweep) {
        const double off = jacobi_sweep(a);
        if (off <= 1e-15 * scale * static_cast<double>(n)) break;
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i).real();
    std::sort(eig.begin(), eig.end());
    return eig;
}

double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix d = a;
    d -= b;
    double s = 0.0;
    for (double ev : hermitian_eigenvalues(d)) s += std::abs(ev);
    return 0.5 * s;
}

}  // namespace nmq
