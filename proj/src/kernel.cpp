#include "nmq/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "nmq/errors.hpp"
#include "nmq/rng.hpp"

namespace nmq {

cplx CorrelationFunction::at(std::ptrdiff_t m) const {
    const std::size_t a = static_cast<std::size_t>(m < 0 ? -m : m);
    if (a >= samples.size()) return 0.0;
    return m < 0 ? std::conj(samples[a]) : samples[a];
}

NoisePath NoisePath::to_continuum() const {
    if (normalization == NoiseNorm::continuum) return *this;
    NoisePath out = *this;
    const double s = 1.0 / std::sqrt(dt);
    for (cplx& z : out.bins) z *= s;
    out.normalization = NoiseNorm::continuum;
    return out;
}

NoisePath NoisePath::to_bin() const {
    if (normalization == NoiseNorm::bin) return *this;
    NoisePath out = *this;
    const double s = std::sqrt(dt);
    for (cplx& z : out.bins) z *= s;
    out.normalization = NoiseNorm::bin;
    return out;
}

CorrelationFunction reconstruct(const CouplingKernel& kappa) {
    const std::size_t n = kappa.bins();
    if (n == 0) throw Error("reconstruct: empty kernel");
    CorrelationFunction alpha;
    alpha.dt = kappa.dt;
    alpha.samples.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        if (m == 0) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += std::norm(kappa.samples[k]);
            alpha.samples[0] = kappa.dt * s;
        } else {
            cplx s = 0.0;
            for (std::size_t k = 0; k + m < n; ++k)
                s += kappa.samples[m + k] * std::conj(kappa.samples[k]);
            alpha.samples[m] = kappa.dt * s;
        }
    }
    return alpha;
}

ComplexMatrix toeplitz_matrix(const CorrelationFunction& alpha, std::size_t size) {
    ComplexMatrix c(size, size);
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j)
            c(i, j) = alpha.at(static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(i));
    return c;
}

bool is_positive_semidefinite(const CorrelationFunction& alpha, double rel_tol) {
    if (alpha.samples.empty()) return true;
    const std::vector<double> eig =
        hermitian_eigenvalues(toeplitz_matrix(alpha, alpha.lags()));
    const double top = std::max(eig.back(), 0.0);
    return eig.front() >= -rel_tol * std::max(top, 1e-300);
}

namespace {

// Most negative eigenvalue of the sample Toeplitz matrix, capped in size so
// the error path stays cheap.
double min_toeplitz_eigenvalue(const CorrelationFunction& alpha) {
    const std::size_t size = std::min<std::size_t>(alpha.lags(), 256);
    if (size == 0) return 0.0;
    return hermitian_eigenvalues(toeplitz_matrix(alpha, size)).front();
}

}  // namespace

FactorizeResult factorize(const CorrelationFunction& alpha, std::size_t n,
                          const FactorizeOptions& opts) {
    if (n == 0) throw Error("factorize: kernel length must be >= 1");
    if (alpha.dt <= 0.0) throw Error("factorize: dt must be positive");
    const std::size_t m = alpha.lags();
    if (m == 0) throw Error("factorize: empty correlation function");

    const std::size_t window = std::max({opts.window_factor * n, m, n + 1});

    // Covariance of the bin process: C_ij = alpha_{j-i} / dt (zero-extended),
    // whose lower Cholesky factor rows converge to the causal kernel read
    // backwards from the diagonal. The Schur recursion produces the columns
    // of L from the rank-2 displacement generators; only the last row is
    // retained.
    std::vector<cplx> t(window);
    for (std::size_t k = 0; k < window; ++k)
        t[k] = alpha.at(static_cast<std::ptrdiff_t>(k)) / alpha.dt;

    const double t0 = t[0].real();
    const double scale = [&] {
        double s = 0.0;
        for (const cplx& z : t) s = std::max(s, std::abs(z));
        return s;
    }();
    if (scale == 0.0) {
        // All-zero correlation factorizes to the zero kernel.
        FactorizeResult r;
        r.kernel.dt = alpha.dt;
        r.kernel.samples.assign(n, 0.0);
        r.residual = 0.0;
        return r;
    }
    if (t0 <= opts.psd_rel_tol * scale) {
        if (t0 < -opts.psd_rel_tol * scale)
            throw NotFactorizableError("factorize: alpha(0) is negative",
                                       min_toeplitz_eigenvalue(alpha));
        throw NotFactorizableError(
            "factorize: alpha(0) vanishes but later lags do not",
            min_toeplitz_eigenvalue(alpha));
    }

    std::vector<cplx> g(window), h(window);
    const double sqrt_t0 = std::sqrt(t0);
    for (std::size_t i = 0; i < window; ++i) g[i] = t[i] / sqrt_t0;
    h = g;
    h[0] = 0.0;

    std::vector<cplx> last_row(window);
    last_row[0] = g[window - 1];

    // Schur recursion with hyperbolic rotations; |rho| >= 1 signals a
    // non-positive leading minor. Values within the clip tolerance are
    // treated as an exactly singular direction (innovation variance 0),
    // mirroring the eigenvalue clipping convention.
    const double rho_clip = 1e-13;
    for (std::size_t k = 1; k < window; ++k) {
        for (std::size_t i = window - 1; i >= k; --i) g[i] = g[i - 1];
        g[k - 1] = 0.0;

        const double gk = std::abs(g[k]);
        const double hk = std::abs(h[k]);
        if (gk < 1e-150) {
            if (hk > 1e-8 * scale) {
                throw NotFactorizableError(
                    "factorize: Toeplitz covariance is indefinite (pivot collapse at row " +
                        std::to_string(k) + ")",
                    min_toeplitz_eigenvalue(alpha));
            }
            last_row[k] = 0.0;
            continue;
        }
        cplx rho = h[k] / g[k];
        double d = 1.0 - std::norm(rho);
        if (d < rho_clip) {
            if (d < -1e-8) {
                throw NotFactorizableError(
                    "factorize: Toeplitz covariance is indefinite (reflection magnitude " +
                        std::to_string(std::abs(rho)) + " at row " + std::to_string(k) + ")",
                    min_toeplitz_eigenvalue(alpha));
            }
            rho *= std::sqrt(1.0 - rho_clip) / std::abs(rho);
            d = rho_clip;
        }
        const double c = 1.0 / std::sqrt(d);
        const cplx rho_conj = std::conj(rho);
        for (std::size_t i = k; i < window; ++i) {
            const cplx gi = g[i];
            const cplx hi = h[i];
            g[i] = c * (gi - rho_conj * hi);
            h[i] = c * (hi - rho * gi);
        }
        // Keep the Cholesky diagonal real positive.
        const double gk_new = std::abs(g[k]);
        if (gk_new > 0.0) {
            const cplx ph = std::conj(g[k] / gk_new);
            for (std::size_t i = k; i < window; ++i) g[i] *= ph;
        }
        last_row[k] = g[window - 1];
    }

    FactorizeResult result;
    result.kernel.dt = alpha.dt;
    result.kernel.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) result.kernel.samples[k] = last_row[window - 1 - k];

    // Phase convention: first sample above the noise floor real positive.
    double max_abs = 0.0;
    for (const cplx& z : result.kernel.samples) max_abs = std::max(max_abs, std::abs(z));
    if (max_abs > 0.0) {
        for (cplx& z : result.kernel.samples)
            if (std::abs(z) > 1e-12 * max_abs) {
                const cplx ph = std::conj(z / std::abs(z));
                if (ph != cplx(1.0))
                    for (cplx& w : result.kernel.samples) w *= ph;
                break;
            }
    }

    const CorrelationFunction back = reconstruct(result.kernel);
    double residual = 0.0;
    for (std::size_t i = 0; i < std::min(back.lags(), m); ++i)
        residual = std::max(residual, std::abs(back.samples[i] - alpha.samples[i]));
    result.residual = residual;
    return result;
}

NoisePath sample_white_noise(std::size_t n, double dt, std::uint64_t seed) {
    if (n == 0) throw Error("sample_white_noise: n must be >= 1");
    if (dt <= 0.0) throw Error("sample_white_noise: dt must be positive");
    NoisePath path;
    path.dt = dt;
    path.seed = seed;
    path.normalization = NoiseNorm::bin;
    path.bins.resize(n);
    Rng rng(seed);
    for (cplx& z : path.bins) z = rng.standard_complex_normal();
    return path;
}

NoisePath color(const NoisePath& xi, const CouplingKernel& kappa, std::size_t output_length) {
    if (xi.normalization != NoiseNorm::bin)
        throw Error("color: input path must be bin-normalized");
    if (xi.dt != kappa.dt) throw Error("color: dt mismatch between path and kernel");
    const std::size_t n = kappa.bins();
    if (output_length == 0) throw Error("color: output length must be >= 1");
    if (xi.bins.size() < output_length + n - 1) {
        throw Error("color: path too short; need " +
                    std::to_string(output_length + n - 1) + " bins, have " +
                    std::to_string(xi.bins.size()));
    }
    NoisePath out;
    out.dt = xi.dt;
    out.seed = xi.seed;
    out.normalization = NoiseNorm::continuum;
    out.bins.resize(output_length);
    const double root_dt = std::sqrt(xi.dt);
    for (std::size_t m = 0; m < output_length; ++m) {
        cplx s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            s += xi.bins[m + k] * std::conj(kappa.samples[k]);
        out.bins[m] = root_dt * s;
    }
    return out;
}

CorrelationEstimate estimate_correlation(const std::vector<NoisePath>& paths,
                                         std::size_t max_lag) {
    if (paths.empty()) throw Error("estimate_correlation: empty ensemble");
    const std::size_t len = paths.front().bins.size();
    for (const NoisePath& p : paths)
        if (p.bins.size() != len)
            throw Error("estimate_correlation: paths must have equal lengths");
    if (max_lag >= len)
        throw IndexError("estimate_correlation: max_lag must be < path length");

    CorrelationEstimate est;
    est.dt = paths.front().dt;
    est.mean.resize(max_lag + 1);
    est.se_re.resize(max_lag + 1);
    est.se_im.resize(max_lag + 1);
    const std::size_t count = paths.size();
    std::vector<cplx> per_path(count);
    for (std::size_t m = 0; m <= max_lag; ++m) {
        for (std::size_t p = 0; p < count; ++p) {
            cplx s = 0.0;
            const auto& bins = paths[p].bins;
            for (std::size_t i = 0; i + m < len; ++i) s += bins[i + m] * std::conj(bins[i]);
            per_path[p] = s / static_cast<double>(len - m);
        }
        cplx mean = 0.0;
        for (const cplx& v : per_path) mean += v;
        mean /= static_cast<double>(count);
        est.mean[m] = mean;
        if (count > 1) {
            double vr = 0.0, vi = 0.0;
            for (const cplx& v : per_path) {
                vr += (v.real() - mean.real()) * (v.real() - mean.real());
                vi += (v.imag() - mean.imag()) * (v.imag() - mean.imag());
            }
            const double norm = static_cast<double>(count) * static_cast<double>(count - 1);
            est.se_re[m] = std::sqrt(vr / norm);
            est.se_im[m] = std::sqrt(vi / norm);
        }
    }
    return est;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct SeriesFile {
    std::string kind;
    double dt = 0.0;
    std::vector<cplx> samples;
};

void write_series(std::ostream& os, const std::string& kind, double dt,
                  const std::vector<cplx>& samples) {
    os << "# nmq " << kind << " v1\n";
    os << "# dt = " << fmt_double(dt) << "\n";
    os << "# count = " << samples.size() << "\n";
    os << "index, re, im\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        os << i << ", " << fmt_double(samples[i].real()) << ", "
           << fmt_double(samples[i].imag()) << "\n";
    }
}

SeriesFile read_series(std::istream& is, const std::string& expected_kind) {
    SeriesFile f;
    std::string line;
    bool have_count = false;
    std::size_t count = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string word;
            ls >> word;
            if (word == "nmq") {
                ls >> f.kind;
            } else if (word == "dt") {
                std::string eq;
                ls >> eq;
                std::string value;
                ls >> value;
                f.dt = std::strtod(value.c_str(), nullptr);
            } else if (word == "count") {
                std::string eq;
                ls >> eq >> count;
                have_count = true;
            }
            continue;
        }
        if (line.rfind("index", 0) == 0) continue;
        std::istringstream ls(line);
        std::string tok;
        std::size_t idx = 0;
        double re = 0.0, im = 0.0;
        if (!std::getline(ls, tok, ',')) throw Error("series parse: bad line '" + line + "'");
        idx = static_cast<std::size_t>(std::strtoull(tok.c_str(), nullptr, 10));
        if (!std::getline(ls, tok, ',')) throw Error("series parse: bad line '" + line + "'");
        re = std::strtod(tok.c_str(), nullptr);
        if (!std::getline(ls, tok, ',')) throw Error("series parse: bad line '" + line + "'");
        im = std::strtod(tok.c_str(), nullptr);
        if (idx != f.samples.size())
            throw Error("series parse: non-contiguous index " + std::to_string(idx));
        f.samples.emplace_back(re, im);
    }
    if (f.kind != expected_kind)
        throw Error("series parse: expected kind '" + expected_kind + "', found '" + f.kind + "'");
    if (have_count && count != f.samples.size())
        throw Error("series parse: header count does not match sample lines");
    if (f.dt <= 0.0) throw Error("series parse: missing or non-positive dt");
    return f;
}

}  // namespace

void write_correlation(std::ostream& os, const CorrelationFunction& alpha) {
    write_series(os, "correlation", alpha.dt, alpha.samples);
}

CorrelationFunction read_correlation(std::istream& is) {
    SeriesFile f = read_series(is, "correlation");
    CorrelationFunction alpha;
    alpha.dt = f.dt;
    alpha.samples = std::move(f.samples);
    return alpha;
}

void write_kernel(std::ostream& os, const CouplingKernel& kappa) {
    write_series(os, "kernel", kappa.dt, kappa.samples);
}

CouplingKernel read_kernel(std::istream& is) {
    SeriesFile f = read_series(is, "kernel");
    CouplingKernel kappa;
    kappa.dt = f.dt;
    kappa.samples = std::move(f.samples);
    return kappa;
}

std::uint64_t kernel_fingerprint(const CouplingKernel& kappa) {
    std::uint64_t h = fnv1a64(&kappa.dt, sizeof(double));
    for (const cplx& z : kappa.samples) {
        const double re = z.real(), im = z.imag();
        h = fnv1a64(&re, sizeof(double), h);
        h = fnv1a64(&im, sizeof(double), h);
    }
    return h;
}

}  // namespace nmq
