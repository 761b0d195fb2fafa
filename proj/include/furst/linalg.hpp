#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace furst {

/// Largest supported dimension. Storage is inline so matrices never allocate.
inline constexpr int kMaxDim = 8;

class Vector {
public:
    Vector() = default;
    explicit Vector(int dim);
    Vector(std::initializer_list<double> values);
    static Vector basis(int dim, int index);

    int dim() const noexcept { return dim_; }
    double  operator[](int i) const noexcept { return v_[static_cast<std::size_t>(i)]; }
    double& operator[](int i) noexcept { return v_[static_cast<std::size_t>(i)]; }

    double norm() const noexcept;
    double dot(const Vector& other) const noexcept;
    Vector normalized() const;
    bool   finite() const noexcept;

    Vector& operator*=(double s) noexcept;
    Vector& operator-=(const Vector& other) noexcept;
    Vector& operator+=(const Vector& other) noexcept;

private:
    int                           dim_ = 0;
    std::array<double, kMaxDim>   v_{};
};

Vector operator*(double s, Vector v) noexcept;
Vector operator-(Vector a, const Vector& b) noexcept;
Vector operator+(Vector a, const Vector& b) noexcept;

/// Square d x d real matrix, row-major, inline storage.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(int dim);
    static Matrix identity(int dim);
    static Matrix diagonal(std::span<const double> diag);
    static Matrix from_rows(int dim, std::span<const double> rowMajor);
    static Matrix rotation2(double angle);
    /// Rotation by `angle` in the (i, j) coordinate plane of R^dim.
    static Matrix plane_rotation(int dim, int i, int j, double angle);

    int dim() const noexcept { return dim_; }
    double  operator()(int r, int c) const noexcept { return a_[idx(r, c)]; }
    double& operator()(int r, int c) noexcept { return a_[idx(r, c)]; }

    Vector column(int c) const;
    void   set_column(int c, const Vector& v);
    Vector row(int r) const;

    Matrix transpose() const;
    Matrix inverse() const;
    double determinant() const;
    double frobenius() const noexcept;
    bool   finite() const noexcept;
    std::vector<double> row_major() const;

    Matrix& operator*=(double s) noexcept;
    friend Matrix operator*(const Matrix& a, const Matrix& b) noexcept;
    friend Vector operator*(const Matrix& a, const Vector& v) noexcept;
    friend Matrix operator*(double s, Matrix m) noexcept { m *= s; return m; }

    /// Largest entrywise difference; dimensions must agree.
    double max_abs_diff(const Matrix& other) const noexcept;

private:
    static constexpr std::size_t idx(int r, int c) noexcept {
        return static_cast<std::size_t>(r * kMaxDim + c);
    }

    int                                   dim_ = 0;
    std::array<double, kMaxDim * kMaxDim> a_{};
};

Matrix block_diagonal(const Matrix& upper, const Matrix& lower);

/// A point of RP^{d-1}: unit representative with canonical sign.
class ProjectivePoint {
public:
    ProjectivePoint() = default;
    /// Normalizes and canonicalizes `v`; throws NumericUnderflowError if |v| is ~0.
    explicit ProjectivePoint(const Vector& v);
    static ProjectivePoint from_angle(double angle);

    int           dim() const noexcept { return rep_.dim(); }
    const Vector& rep() const noexcept { return rep_; }

private:
    Vector rep_;
};

/// An m-dimensional subspace of R^d stored as an orthonormal d x m frame.
class Subspace {
public:
    Subspace() = default;
    /// Orthonormalizes the given spanning vectors; throws DegenerateFrameError on rank collapse.
    explicit Subspace(std::span<const Vector> spanning);
    static Subspace span_of(std::initializer_list<Vector> vectors);

    int dim() const noexcept { return frame_.dim(); }
    int rank() const noexcept { return rank_; }
    /// Column `c` (< rank) of the frame.
    Vector basis(int c) const { return frame_.column(c); }
    /// Orthogonal projector onto the subspace.
    Matrix projector() const;
    /// |(I - P) x| for a vector x.
    double residual(const Vector& x) const;

private:
    Matrix frame_;
    int    rank_ = 0;
};

struct SingularData {
    Vector sigma;   // descending
    Matrix left;    // columns are left singular vectors
    Matrix right;   // columns are right singular vectors
};

/// One-sided Jacobi SVD, A = U diag(sigma) V^T. Throws InvalidInputError on non-finite input.
SingularData svd(const Matrix& a);
double       operator_norm(const Matrix& a);
/// sigma_1 / sigma_d (infinite if singular).
double       condition_number(const Matrix& a);

ProjectivePoint projective_apply(const Matrix& a, const ProjectivePoint& x);
/// |A rep(x)|^{-d}: Jacobian of the projective map at x.
double          projective_jacobian(const Matrix& a, const ProjectivePoint& x);
/// Norm defect log||B|| - log|B u| for unit u.
double          theta(const Matrix& b, const Vector& u);
Subspace        grassmann_apply(const Matrix& a, const Subspace& l);
/// Sine of the angle between x and the subspace L.
double          proj_distance(const ProjectivePoint& x, const Subspace& l);

/// sin of the angle between two projective points. Stable near zero.
double point_distance(const ProjectivePoint& x, const ProjectivePoint& y);
/// sin of the largest principal angle between two equal-rank subspaces.
double subspace_distance(const Subspace& a, const Subspace& b);

/// Throws ValidationError naming `what` unless the matrix is finite with |det-1| <= 1e-9 * kappa.
void require_special_linear(const Matrix& a, const std::string& what);

std::string to_string(const Matrix& a);

}  // namespace furst
