#include "nmq/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nmq/errors.hpp"

namespace nmq {

// ---------------------------------------------------------------------------
// StateVector / CompositeSpace

double StateVector::norm_squared() const {
    double s = 0.0;
    for (const cplx& z : amplitudes) s += std::norm(z);
    return s;
}

double StateVector::norm() const { return std::sqrt(norm_squared()); }

bool StateVector::is_normalized(double tol) const {
    return std::abs(norm_squared() - 1.0) <= tol;
}

void StateVector::normalize() {
    const double n2 = norm_squared();
    if (n2 <= 0.0 || !std::isfinite(n2)) {
        throw InvalidStateError("StateVector: cannot normalize zero or non-finite state");
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (cplx& z : amplitudes) z *= inv;
    norm_weight *= n2;
}

cplx inner_product(const StateVector& bra, const StateVector& ket) {
    if (bra.dim() != ket.dim()) throw Error("inner_product: dimension mismatch");
    cplx s = 0.0;
    for (std::size_t i = 0; i < bra.dim(); ++i)
        s += std::conj(bra.amplitudes[i]) * ket.amplitudes[i];
    return s;
}

StateVector tensor(const StateVector& a, const StateVector& b) {
    StateVector r(a.dim() * b.dim());
    r.norm_weight = a.norm_weight * b.norm_weight;
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < b.dim(); ++j)
            r.amplitudes[i * b.dim() + j] = a.amplitudes[i] * b.amplitudes[j];
    return r;
}

ComplexMatrix outer_product(const StateVector& psi) {
    const std::size_t d = psi.dim();
    ComplexMatrix m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            m(i, j) = psi.amplitudes[i] * std::conj(psi.amplitudes[j]);
    return m;
}

CompositeSpace::CompositeSpace(std::vector<std::size_t> factor_dims)
    : dims_(std::move(factor_dims)) {
    total_ = 1;
    for (std::size_t d : dims_) {
        if (d == 0) throw Error("CompositeSpace: zero factor dimension");
        total_ *= d;
    }
}

std::size_t CompositeSpace::stride(std::size_t f) const {
    if (f >= dims_.size()) throw IndexError("CompositeSpace: factor index out of range");
    std::size_t s = 1;
    for (std::size_t g = f + 1; g < dims_.size(); ++g) s *= dims_[g];
    return s;
}

CompositeSpace CompositeSpace::without_factor(std::size_t f) const {
    if (f >= dims_.size()) throw IndexError("CompositeSpace: factor index out of range");
    std::vector<std::size_t> d = dims_;
    d.erase(d.begin() + static_cast<std::ptrdiff_t>(f));
    return CompositeSpace(d);
}

CompositeSpace CompositeSpace::with_appended_factor(std::size_t d) const {
    std::vector<std::size_t> dims = dims_;
    dims.push_back(d);
    return CompositeSpace(dims);
}

// ---------------------------------------------------------------------------
// Tensor algebra

ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b, std::size_t cap) {
    const std::size_t rows = a.rows() * b.rows();
    const std::size_t cols = a.cols() * b.cols();
    if (rows > cap || cols > cap) throw DimensionCapError(std::max(rows, cols), cap);
    ComplexMatrix c(rows, cols);
    for (std::size_t ia = 0; ia < a.rows(); ++ia)
        for (std::size_t ja = 0; ja < a.cols(); ++ja) {
            const cplx av = a(ia, ja);
            if (av == cplx(0.0)) continue;
            for (std::size_t ib = 0; ib < b.rows(); ++ib)
                for (std::size_t jb = 0; jb < b.cols(); ++jb)
                    c(ia * b.rows() + ib, ja * b.cols() + jb) = av * b(ib, jb);
        }
    return c;
}

namespace {

void check_keep(const CompositeSpace& space, const std::vector<std::size_t>& keep) {
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i] >= space.factor_count())
            throw IndexError("partial_trace: keep index " + std::to_string(keep[i]) +
                             " out of range");
        if (i > 0 && keep[i] <= keep[i - 1])
            throw IndexError("partial_trace: keep indices must be strictly increasing");
    }
}

// Enumeration helper: walk all flattened indices whose kept-factor part is
// `kept` (a flattened index over kept factors in order) and whose traced part
// is `traced`. Returns the full flattened index.
struct FactorSplit {
    std::vector<std::size_t> keep;    // kept factor ids, ascending order as given
    std::vector<std::size_t> traced;  // the rest, ascending
    std::vector<std::size_t> stride;  // full-space stride per factor
    std::size_t keep_dim = 1;
    std::size_t traced_dim = 1;

    FactorSplit(const CompositeSpace& space, const std::vector<std::size_t>& keep_ids)
        : keep(keep_ids) {
        const std::size_t nf = space.factor_count();
        stride.resize(nf);
        for (std::size_t f = 0; f < nf; ++f) stride[f] = space.stride(f);
        std::vector<bool> kept(nf, false);
        for (std::size_t f : keep) {
            kept[f] = true;
            keep_dim *= space.factor_dim(f);
        }
        for (std::size_t f = 0; f < nf; ++f) {
            if (!kept[f]) {
                traced.push_back(f);
                traced_dim *= space.factor_dim(f);
            }
        }
    }

    // Flattened full-space offset of a multi-index over `factors` encoded as
    // a single mixed-radix integer (first factor slowest).
    std::size_t offset(const std::vector<std::size_t>& factors, std::size_t code,
                       const CompositeSpace& space) const {
        std::size_t off = 0;
        for (std::size_t r = factors.size(); r-- > 0;) {
            const std::size_t f = factors[r];
            const std::size_t d = space.factor_dim(f);
            off += (code % d) * stride[f];
            code /= d;
        }
        return off;
    }
};

}  // namespace

ComplexMatrix partial_trace(const ComplexMatrix& rho, const CompositeSpace& space,
                            const std::vector<std::size_t>& keep) {
    if (rho.rows() != rho.cols() || rho.rows() != space.total_dim())
        throw Error("partial_trace: rho dimension does not match space");
    check_keep(space, keep);
    FactorSplit split(space, keep);
    ComplexMatrix out(split.keep_dim, split.keep_dim);
    for (std::size_t i = 0; i < split.keep_dim; ++i) {
        const std::size_t ioff = split.offset(split.keep, i, space);
        for (std::size_t j = 0; j < split.keep_dim; ++j) {
            const std::size_t joff = split.offset(split.keep, j, space);
            cplx s = 0.0;
            for (std::size_t t = 0; t < split.traced_dim; ++t) {
                const std::size_t toff = split.offset(split.traced, t, space);
                s += rho(ioff + toff, joff + toff);
            }
            out(i, j) = s;
        }
    }
    return out;
}

ComplexMatrix reduced_density(const StateVector& psi, const CompositeSpace& space,
                              const std::vector<std::size_t>& keep) {
    if (psi.dim() != space.total_dim())
        throw Error("reduced_density: state dimension does not match space");
    check_keep(space, keep);
    FactorSplit split(space, keep);
    ComplexMatrix out(split.keep_dim, split.keep_dim);
    std::vector<std::size_t> keep_off(split.keep_dim);
    for (std::size_t i = 0; i < split.keep_dim; ++i)
        keep_off[i] = split.offset(split.keep, i, space);
    for (std::size_t t = 0; t < split.traced_dim; ++t) {
        const std::size_t toff = split.offset(split.traced, t, space);
        for (std::size_t i = 0; i < split.keep_dim; ++i) {
            const cplx ai = psi.amplitudes[keep_off[i] + toff];
            if (ai == cplx(0.0)) continue;
            for (std::size_t j = 0; j < split.keep_dim; ++j)
                out(i, j) += ai * std::conj(psi.amplitudes[keep_off[j] + toff]);
        }
    }
    return out;
}

ComplexMatrix ladder(int cutoff) {
    if (cutoff < 1) throw Error("ladder: cutoff must be >= 1");
    const std::size_t d = static_cast<std::size_t>(cutoff) + 1;
    ComplexMatrix a(d, d);
    for (std::size_t n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

StateVector coherent(cplx xi, int cutoff, bool* truncation_warning) {
    if (cutoff < 1) throw Error("coherent: cutoff must be >= 1");
    if (truncation_warning)
        *truncation_warning = std::norm(xi) > 0.5 * static_cast<double>(cutoff);
    StateVector v(static_cast<std::size_t>(cutoff) + 1);
    cplx term = 1.0;  // xi^n / sqrt(n!)
    v.amplitudes[0] = term;
    for (int n = 1; n <= cutoff; ++n) {
        term *= xi / std::sqrt(static_cast<double>(n));
        v.amplitudes[static_cast<std::size_t>(n)] = term;
    }
    return v;
}

ComplexMatrix expm(const ComplexMatrix& g) {
    if (g.rows() != g.cols()) throw Error("expm: matrix not square");
    if (!g.is_finite()) throw NumericError("expm: non-finite entries");
    const std::size_t n = g.rows();

    // Scale so the Taylor series converges fast, square back afterwards.
    const double nrm = g.one_norm();
    int squarings = 0;
    if (nrm > 0.25) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.25)));
    ComplexMatrix b = g;
    if (squarings > 0) b *= cplx(std::ldexp(1.0, -squarings));

    ComplexMatrix result = ComplexMatrix::identity(n);
    ComplexMatrix term = ComplexMatrix::identity(n);
    for (int k = 1; k <= 40; ++k) {
        term = term * b;
        term *= cplx(1.0 / static_cast<double>(k));
        result += term;
        if (term.max_abs() <= 1e-18 * std::max(1.0, result.max_abs())) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

StateVector expm_apply(const ComplexMatrix& g, const StateVector& v) {
    if (g.cols() != v.dim()) throw Error("expm_apply: dimension mismatch");
    StateVector out(matvec(expm(g), v.amplitudes), v.norm_weight);
    return out;
}

ComplexMatrix embed_factor_op(const ComplexMatrix& op, std::size_t f,
                              const CompositeSpace& space) {
    if (f >= space.factor_count()) throw IndexError("embed_factor_op: factor out of range");
    const std::size_t d = space.factor_dim(f);
    if (op.rows() != d || op.cols() != d)
        throw Error("embed_factor_op: operator dimension does not match factor");
    const std::size_t post = space.stride(f);
    const std::size_t pre = space.total_dim() / (post * d);
    ComplexMatrix out(space.total_dim(), space.total_dim());
    for (std::size_t p = 0; p < pre; ++p) {
        const std::size_t pbase = p * d * post;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) {
                const cplx v = op(a, b);
                if (v == cplx(0.0)) continue;
                for (std::size_t q = 0; q < post; ++q)
                    out(pbase + a * post + q, pbase + b * post + q) = v;
            }
    }
    return out;
}

StateVector contract_factor(const StateVector& psi, const CompositeSpace& space,
                            std::size_t f, const std::vector<cplx>& coeffs) {
    if (f >= space.factor_count()) throw IndexError("contract_factor: factor out of range");
    const std::size_t d = space.factor_dim(f);
    if (coeffs.size() != d) throw Error("contract_factor: coefficient count mismatch");
    if (psi.dim() != space.total_dim())
        throw Error("contract_factor: state dimension does not match space");
    const std::size_t post = space.stride(f);
    const std::size_t pre = space.total_dim() / (post * d);
    StateVector out(pre * post);
    out.norm_weight = psi.norm_weight;
    for (std::size_t p = 0; p < pre; ++p) {
        for (std::size_t q = 0; q < post; ++q) {
            cplx s = 0.0;
            const std::size_t base = p * d * post + q;
            for (std::size_t n = 0; n < d; ++n)
                s += std::conj(coeffs[n]) * psi.amplitudes[base + n * post];
            out.amplitudes[p * post + q] = s;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature

GaussLaguerre gauss_laguerre(int order) {
    if (order < 1) throw Error("gauss_laguerre: order must be >= 1");
    GaussLaguerre gl;
    gl.nodes.resize(static_cast<std::size_t>(order));
    gl.weights.resize(static_cast<std::size_t>(order));
    const int n = order;
    for (int i = 0; i < n; ++i) {
        // Stroud-Secrest style initial guesses, then Newton on L_n(x).
        double x;
        if (i == 0) {
            x = 3.0 / (1.0 + 2.4 * n);
        } else if (i == 1) {
            x = gl.nodes[0] + 15.0 / (1.0 + 2.5 * n);
        } else {
            const double prev = gl.nodes[static_cast<std::size_t>(i - 1)];
            const double prev2 = gl.nodes[static_cast<std::size_t>(i - 2)];
            x = prev + (prev - prev2) * (1.0 + 2.55 * (i - 1)) / (1.9 * (i - 1));
        }
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Recurrence for Laguerre polynomials at x.
            double p0 = 1.0, p1 = 1.0 - x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0 - x) * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (p1 - p0) / x;  // derivative of L_n
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        gl.nodes[static_cast<std::size_t>(i)] = x;
        // w_i = x_i / (n^2 [L_{n-1}(x_i)]^2).
        double p0 = 1.0, p1 = 1.0 - x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0 - x) * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        gl.weights[static_cast<std::size_t>(i)] =
            x / (static_cast<double>(n) * n * p0 * p0);
    }
    return gl;
}

BargmannQuadrature bargmann_quadrature(int cutoff) {
    if (cutoff < 1) throw Error("bargmann_quadrature: cutoff must be >= 1");
    // Radial degree must reach u^(2*cutoff) terms of the Q-polynomials; the
    // angular grid must resolve harmonics up to 2*cutoff.
    const int radial = cutoff + 2;
    const int angular = 2 * cutoff + 3;
    const GaussLaguerre gl = gauss_laguerre(radial);
    BargmannQuadrature q;
    q.nodes.reserve(static_cast<std::size_t>(radial * angular));
    q.measure_weight.reserve(q.nodes.capacity());
    q.lebesgue_weight.reserve(q.nodes.capacity());
    for (int j = 0; j < radial; ++j) {
        const double u = gl.nodes[static_cast<std::size_t>(j)];
        const double r = std::sqrt(u);
        const double wm = gl.weights[static_cast<std::size_t>(j)] / angular;
        for (int k = 0; k < angular; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / angular;
            q.nodes.push_back(cplx(r * std::cos(phi), r * std::sin(phi)));
            q.measure_weight.push_back(wm);
            q.lebesgue_weight.push_back(wm * std::numbers::pi * std::exp(u));
        }
    }
    return q;
}

}  // namespace nmq
