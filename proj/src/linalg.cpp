#include "furst/linalg.hpp"

#include "furst/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

namespace furst {

namespace {

constexpr double kCanonicalTol = 1e-12;
constexpr int    kMaxSweeps    = 80;

void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDim) {
        throw InvalidInputError("dimension " + std::to_string(dim) + " outside [1, " +
                                std::to_string(kMaxDim) + "]");
    }
}

void require_same_dim(int a, int b, const char* op) {
    if (a != b) {
        throw InvalidInputError(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
    }
}

// Extend an orthonormal set of columns [0, filled) of `u` to a full basis.
void complete_basis(Matrix& u, int filled) {
    const int d = u.dim();
    int       c = filled;
    for (int e = 0; e < d && c < d; ++e) {
        Vector cand = Vector::basis(d, e);
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k < c; ++k) {
                Vector col = u.column(k);
                cand -= col.dot(cand) * col;
            }
        }
        const double n = cand.norm();
        if (n > 1e-8) {
            u.set_column(c++, (1.0 / n) * cand);
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- Vector

Vector::Vector(int dim) : dim_(dim) { check_dim(dim); }

Vector::Vector(std::initializer_list<double> values) : dim_(static_cast<int>(values.size())) {
    check_dim(dim_);
    std::copy(values.begin(), values.end(), v_.begin());
}

Vector Vector::basis(int dim, int index) {
    Vector e(dim);
    e[index] = 1.0;
    return e;
}

double Vector::norm() const noexcept {
    // Scaled accumulation so that tiny/huge components do not under/overflow.
    double scale = 0.0;
    for (int i = 0; i < dim_; ++i) scale = std::max(scale, std::abs(v_[static_cast<std::size_t>(i)]));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) {
        const double t = v_[static_cast<std::size_t>(i)] / scale;
        s += t * t;
    }
    return scale * std::sqrt(s);
}

double Vector::dot(const Vector& other) const noexcept {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += v_[static_cast<std::size_t>(i)] * other[i];
    return s;
}

Vector Vector::normalized() const {
    const double n = norm();
    if (!(n > 1e-300)) throw NumericUnderflowError("cannot normalize a vector of length ~0");
    return (1.0 / n) * (*this);
}

bool Vector::finite() const noexcept {
    for (int i = 0; i < dim_; ++i)
        if (!std::isfinite(v_[static_cast<std::size_t>(i)])) return false;
    return true;
}

Vector& Vector::operator*=(double s) noexcept {
    for (int i = 0; i < dim_; ++i) v_[static_cast<std::size_t>(i)] *= s;
    return *this;
}

Vector& Vector::operator-=(const Vector& other) noexcept {
    for (int i = 0; i < dim_; ++i) v_[static_cast<std::size_t>(i)] -= other[i];
    return *this;
}

Vector& Vector::operator+=(const Vector& other) noexcept {
    for (int i = 0; i < dim_; ++i) v_[static_cast<std::size_t>(i)] += other[i];
    return *this;
}

Vector operator*(double s, Vector v) noexcept { return v *= s; }
Vector operator-(Vector a, const Vector& b) noexcept { return a -= b; }
Vector operator+(Vector a, const Vector& b) noexcept { return a += b; }

// ---------------------------------------------------------------- Matrix

Matrix::Matrix(int dim) : dim_(dim) { check_dim(dim); }

Matrix Matrix::identity(int dim) {
    Matrix m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(static_cast<int>(diag.size()));
    for (int i = 0; i < m.dim(); ++i) m(i, i) = diag[static_cast<std::size_t>(i)];
    return m;
}

Matrix Matrix::from_rows(int dim, std::span<const double> rowMajor) {
    if (rowMajor.size() != static_cast<std::size_t>(dim * dim)) {
        throw InvalidInputError("expected " + std::to_string(dim * dim) + " entries, got " +
                                std::to_string(rowMajor.size()));
    }
    Matrix m(dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) m(r, c) = rowMajor[static_cast<std::size_t>(r * dim + c)];
    return m;
}

Matrix Matrix::rotation2(double angle) { return plane_rotation(2, 0, 1, angle); }

Matrix Matrix::plane_rotation(int dim, int i, int j, double angle) {
    Matrix m = identity(dim);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    m(i, i) = c;
    m(i, j) = -s;
    m(j, i) = s;
    m(j, j) = c;
    return m;
}

Vector Matrix::column(int c) const {
    Vector v(dim_);
    for (int r = 0; r < dim_; ++r) v[r] = (*this)(r, c);
    return v;
}

void Matrix::set_column(int c, const Vector& v) {
    for (int r = 0; r < dim_; ++r) (*this)(r, c) = v[r];
}

Vector Matrix::row(int r) const {
    Vector v(dim_);
    for (int c = 0; c < dim_; ++c) v[c] = (*this)(r, c);
    return v;
}

Matrix Matrix::transpose() const {
    Matrix t(dim_);
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double Matrix::determinant() const {
    Matrix lu  = *this;
    double det = 1.0;
    for (int k = 0; k < dim_; ++k) {
        int piv = k;
        for (int r = k + 1; r < dim_; ++r)
            if (std::abs(lu(r, k)) > std::abs(lu(piv, k))) piv = r;
        if (lu(piv, k) == 0.0) return 0.0;
        if (piv != k) {
            for (int c = 0; c < dim_; ++c) std::swap(lu(k, c), lu(piv, c));
            det = -det;
        }
        det *= lu(k, k);
        for (int r = k + 1; r < dim_; ++r) {
            const double f = lu(r, k) / lu(k, k);
            for (int c = k; c < dim_; ++c) lu(r, c) -= f * lu(k, c);
        }
    }
    return det;
}

Matrix Matrix::inverse() const {
    Matrix a   = *this;
    Matrix inv = identity(dim_);
    for (int k = 0; k < dim_; ++k) {
        int piv = k;
        for (int r = k + 1; r < dim_; ++r)
            if (std::abs(a(r, k)) > std::abs(a(piv, k))) piv = r;
        if (a(piv, k) == 0.0) throw InvalidInputError("matrix is singular");
        if (piv != k) {
            for (int c = 0; c < dim_; ++c) {
                std::swap(a(k, c), a(piv, c));
                std::swap(inv(k, c), inv(piv, c));
            }
        }
        const double p = a(k, k);
        for (int c = 0; c < dim_; ++c) {
            a(k, c) /= p;
            inv(k, c) /= p;
        }
        for (int r = 0; r < dim_; ++r) {
            if (r == k) continue;
            const double f = a(r, k);
            if (f == 0.0) continue;
            for (int c = 0; c < dim_; ++c) {
                a(r, c) -= f * a(k, c);
                inv(r, c) -= f * inv(k, c);
            }
        }
    }
    return inv;
}

double Matrix::frobenius() const noexcept {
    double s = 0.0;
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c) s += (*this)(r, c) * (*this)(r, c);
    return std::sqrt(s);
}

bool Matrix::finite() const noexcept {
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c)
            if (!std::isfinite((*this)(r, c))) return false;
    return true;
}

std::vector<double> Matrix::row_major() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(dim_ * dim_));
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c) out.push_back((*this)(r, c));
    return out;
}

Matrix& Matrix::operator*=(double s) noexcept {
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c) (*this)(r, c) *= s;
    return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) noexcept {
    const int d = a.dim_;
    Matrix    out;
    out.dim_ = d;
    for (int r = 0; r < d; ++r) {
        for (int k = 0; k < d; ++k) {
            const double ark = a(r, k);
            if (ark == 0.0) continue;
            for (int c = 0; c < d; ++c) out(r, c) += ark * b(k, c);
        }
    }
    return out;
}

Vector operator*(const Matrix& a, const Vector& v) noexcept {
    Vector out;
    out = Vector(a.dim_);
    for (int r = 0; r < a.dim_; ++r) {
        double s = 0.0;
        for (int c = 0; c < a.dim_; ++c) s += a(r, c) * v[c];
        out[r] = s;
    }
    return out;
}

double Matrix::max_abs_diff(const Matrix& other) const noexcept {
    double m = 0.0;
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c) m = std::max(m, std::abs((*this)(r, c) - other(r, c)));
    return m;
}

Matrix block_diagonal(const Matrix& upper, const Matrix& lower) {
    const int p = upper.dim();
    Matrix    m(p + lower.dim());
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) m(r, c) = upper(r, c);
    for (int r = 0; r < lower.dim(); ++r)
        for (int c = 0; c < lower.dim(); ++c) m(p + r, p + c) = lower(r, c);
    return m;
}

// ---------------------------------------------------------------- projective / Grassmann types

ProjectivePoint::ProjectivePoint(const Vector& v) {
    rep_ = v.normalized();
    for (int i = 0; i < rep_.dim(); ++i) {
        if (std::abs(rep_[i]) > kCanonicalTol) {
            if (rep_[i] < 0.0) rep_ *= -1.0;
            break;
        }
    }
}

ProjectivePoint ProjectivePoint::from_angle(double angle) {
    return ProjectivePoint(Vector{std::cos(angle), std::sin(angle)});
}

Subspace::Subspace(std::span<const Vector> spanning) {
    if (spanning.empty()) throw InvalidInputError("subspace needs at least one spanning vector");
    const int d = spanning.front().dim();
    frame_      = Matrix(d);
    rank_       = 0;
    for (const Vector& v0 : spanning) {
        require_same_dim(d, v0.dim(), "Subspace");
        const double scale = v0.norm();
        Vector       v     = v0;
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k < rank_; ++k) {
                const Vector q = frame_.column(k);
                v -= q.dot(v) * q;
            }
        }
        const double n = v.norm();
        if (!(n > 1e-13 * scale) || !(scale > 0.0)) {
            throw DegenerateFrameError("spanning vectors are numerically dependent");
        }
        frame_.set_column(rank_++, (1.0 / n) * v);
    }
    if (rank_ >= d) throw InvalidInputError("subspace rank must be below the ambient dimension");
}

Subspace Subspace::span_of(std::initializer_list<Vector> vectors) {
    std::vector<Vector> v(vectors);
    return Subspace(v);
}

Matrix Subspace::projector() const {
    const int d = dim();
    Matrix    p(d);
    for (int k = 0; k < rank_; ++k) {
        const Vector q = frame_.column(k);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) p(r, c) += q[r] * q[c];
    }
    return p;
}

double Subspace::residual(const Vector& x) const {
    Vector r = x;
    for (int k = 0; k < rank_; ++k) {
        const Vector q = frame_.column(k);
        r -= q.dot(x) * q;
    }
    return r.norm();
}

// ---------------------------------------------------------------- SVD

SingularData svd(const Matrix& a) {
    if (!a.finite()) throw InvalidInputError("svd: non-finite matrix entries");
    const int d = a.dim();
    Matrix    w = a;
    Matrix    v = Matrix::identity(d);

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < d - 1; ++p) {
            for (int q = p + 1; q < d; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int i = 0; i < d; ++i) {
                    alpha += w(i, p) * w(i, p);
                    beta += w(i, q) * w(i, q);
                    gamma += w(i, p) * w(i, q);
                }
                if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
                rotated            = true;
                const double zeta  = (beta - alpha) / (2.0 * gamma);
                const double t     = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c     = 1.0 / std::sqrt(1.0 + t * t);
                const double s     = c * t;
                for (int i = 0; i < d; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p)         = c * wp - s * wq;
                    w(i, q)         = s * wp + c * wq;
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p)         = c * vp - s * vq;
                    v(i, q)         = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    std::array<double, kMaxDim> norms{};
    std::array<int, kMaxDim>    order{};
    for (int c = 0; c < d; ++c) {
        norms[static_cast<std::size_t>(c)] = w.column(c).norm();
        order[static_cast<std::size_t>(c)] = c;
    }
    std::stable_sort(order.begin(), order.begin() + d, [&](int x, int y) {
        return norms[static_cast<std::size_t>(x)] > norms[static_cast<std::size_t>(y)];
    });

    SingularData out{Vector(d), Matrix(d), Matrix(d)};
    int          filled = 0;
    for (int k = 0; k < d; ++k) {
        const int    c = order[static_cast<std::size_t>(k)];
        const double s = norms[static_cast<std::size_t>(c)];
        out.sigma[k]   = s;
        out.right.set_column(k, v.column(c));
        if (s > 0.0 && filled == k) {
            out.left.set_column(k, (1.0 / s) * w.column(c));
            ++filled;
        }
    }
    if (filled < d) complete_basis(out.left, filled);
    return out;
}

double operator_norm(const Matrix& a) {
    if (a.dim() == 2) {
        if (!a.finite()) throw InvalidInputError("operator_norm: non-finite matrix entries");
        // sigma_1 = (|z1| + |z2|) / 2 with z1 = (a+d, c-b), z2 = (a-d, b+c).
        const double p = std::hypot(a(0, 0) + a(1, 1), a(1, 0) - a(0, 1));
        const double q = std::hypot(a(0, 0) - a(1, 1), a(1, 0) + a(0, 1));
        return 0.5 * (p + q);
    }
    return svd(a).sigma[0];
}

double condition_number(const Matrix& a) {
    const SingularData s = svd(a);
    const double       lo = s.sigma[a.dim() - 1];
    return lo > 0.0 ? s.sigma[0] / lo : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------- actions

ProjectivePoint projective_apply(const Matrix& a, const ProjectivePoint& x) {
    require_same_dim(a.dim(), x.dim(), "projective_apply");
    const Vector y = a * x.rep();
    if (!(y.norm() >= 1e-300)) throw NumericUnderflowError("projective_apply: image vector underflow");
    return ProjectivePoint(y);
}

double projective_jacobian(const Matrix& a, const ProjectivePoint& x) {
    require_same_dim(a.dim(), x.dim(), "projective_jacobian");
    return std::pow((a * x.rep()).norm(), -static_cast<double>(a.dim()));
}

double theta(const Matrix& b, const Vector& u) {
    require_same_dim(b.dim(), u.dim(), "theta");
    const double t = std::log(operator_norm(b)) - std::log((b * u).norm() / u.norm());
    return std::max(0.0, t);
}

Subspace grassmann_apply(const Matrix& a, const Subspace& l) {
    require_same_dim(a.dim(), l.dim(), "grassmann_apply");
    std::vector<Vector> images;
    images.reserve(static_cast<std::size_t>(l.rank()));
    for (int k = 0; k < l.rank(); ++k) images.push_back(a * l.basis(k));
    return Subspace(images);
}

double proj_distance(const ProjectivePoint& x, const Subspace& l) {
    require_same_dim(x.dim(), l.dim(), "proj_distance");
    return std::clamp(l.residual(x.rep()), 0.0, 1.0);
}

double point_distance(const ProjectivePoint& x, const ProjectivePoint& y) {
    require_same_dim(x.dim(), y.dim(), "point_distance");
    const double c = x.rep().dot(y.rep());
    const Vector r = x.rep() - c * y.rep();
    return std::clamp(r.norm(), 0.0, 1.0);
}

double subspace_distance(const Subspace& a, const Subspace& b) {
    require_same_dim(a.dim(), b.dim(), "subspace_distance");
    if (a.rank() != b.rank()) throw InvalidInputError("subspace_distance: rank mismatch");
    const int d = a.dim();
    // Columns of E are (I - P_b) q_k for the basis of a; sin(theta_max) = sigma_max(E).
    Matrix e(d);
    for (int k = 0; k < a.rank(); ++k) {
        Vector q = a.basis(k);
        Vector r = q;
        for (int j = 0; j < b.rank(); ++j) {
            const Vector p = b.basis(j);
            r -= p.dot(q) * p;
        }
        e.set_column(k, r);
    }
    return std::clamp(svd(e).sigma[0], 0.0, 1.0);
}

void require_special_linear(const Matrix& a, const std::string& what) {
    if (!a.finite()) throw ValidationError(what + ": non-finite entry");
    const double det   = a.determinant();
    const double kappa = condition_number(a);
    if (!(std::abs(det - 1.0) <= 1e-9 * kappa)) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": determinant " << det << " is not 1 (|det-1| > 1e-9 * kappa, kappa = " << kappa
           << ")";
        throw ValidationError(os.str());
    }
}

std::string to_string(const Matrix& a) {
    std::ostringstream os;
    os.precision(6);
    os << '[';
    for (int r = 0; r < a.dim(); ++r) {
        os << (r ? "; " : "");
        for (int c = 0; c < a.dim(); ++c) os << (c ? " " : "") << a(r, c);
    }
    os << ']';
    return os.str();
}

}  // namespace furst
