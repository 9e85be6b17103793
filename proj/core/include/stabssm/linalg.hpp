#pragma once

#include <Eigen/Dense>
#include <vector>

#include "stabssm/errors.hpp"

namespace stabssm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Symmetric positive-definite matrix carried together with its lower
/// Cholesky factor. Symmetry is enforced exactly on construction (the lower
/// triangle is mirrored).
class SpdMatrix {
  public:
    /// Factor a dense symmetric matrix. Throws NotPositiveDefinite when the
    /// pivoted diagonal drops below `pivot_tol * max|diag|`.
    static SpdMatrix from_matrix(const MatrixXd& m, double pivot_tol = 1e-12);

    /// Build from a lower-triangular factor with strictly positive diagonal.
    static SpdMatrix from_cholesky(const MatrixXd& lower);

    /// Build P from the lower Cholesky factor of its inverse, i.e. from L
    /// with P^{-1} = L L^T.
    static SpdMatrix from_inverse_cholesky(const MatrixXd& lower);

    static SpdMatrix identity(int n);
    static SpdMatrix scaled_identity(int n, double s);

    int dim() const { return static_cast<int>(data_.rows()); }
    const MatrixXd& matrix() const { return data_; }
    const MatrixXd& cholesky() const { return chol_; }

    MatrixXd inverse() const;

    /// Lower Cholesky factor of the inverse.
    MatrixXd inverse_cholesky() const;

    /// X = P^{-1} B via two triangular solves.
    MatrixXd solve(const MatrixXd& b) const;

    double log_det() const;
    double min_eigenvalue() const;
    double condition_number() const;

  private:
    SpdMatrix(MatrixXd data, MatrixXd chol);
    MatrixXd data_;
    MatrixXd chol_;
};

/// Skew-symmetric matrix stored as the packed vector of its below-diagonal
/// entries, column by column.
class SkewMatrix {
  public:
    explicit SkewMatrix(int dim);
    SkewMatrix(int dim, VectorXd packed);

    /// Packs the below-diagonal entries of a square matrix; the caller is
    /// responsible for the matrix being (numerically) skew-symmetric.
    static SkewMatrix pack(const MatrixXd& s);

    static int packed_size(int dim) { return dim * (dim - 1) / 2; }

    int dim() const { return dim_; }
    const VectorXd& packed() const { return packed_; }
    VectorXd& packed() { return packed_; }

    /// Dense matrix with S + S^T = 0 exactly by construction.
    MatrixXd unpack() const;

  private:
    int dim_;
    VectorXd packed_;
};

/// Matrix with orthonormal columns (rows >= cols). Construction validates
/// ||Q^T Q - I||_F <= tol.
class OrthogonalMatrix {
  public:
    explicit OrthogonalMatrix(MatrixXd data, double tol = 1e-10);

    int rows() const { return static_cast<int>(data_.rows()); }
    int cols() const { return static_cast<int>(data_.cols()); }
    const MatrixXd& matrix() const { return data_; }

  private:
    MatrixXd data_;
};

/// Report of the mean-square stability test.
struct StabilityReport {
    bool stable = false;
    /// Largest real part over the spectrum of I(x)A + A(x)I + F(x)F.
    double abscissa = 0.0;
};

MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

/// Solves A^T P + P A + F^T P F = -Q through the dense n^2 x n^2 Kronecker
/// vectorization. Intended for small systems; throws DimensionMismatch above
/// `max_dim` and SingularSystem when the vectorized operator is singular
/// (marginally stable pair). The result is symmetrized but not checked for
/// positive definiteness; Proposition-1-style callers test that themselves.
MatrixXd solve_gen_lyapunov(const MatrixXd& a, const MatrixXd& f, const SpdMatrix& q,
                            int max_dim = 64);

/// Mean-square stability of the pair (A, F): spectral abscissa of the
/// second-moment operator I(x)A + A(x)I + F(x)F must be negative.
StabilityReport is_mean_square_stable(const MatrixXd& a, const MatrixXd& f);

/// Largest eigenvalue of a symmetric matrix; the input is symmetrized as
/// (M + M^T)/2 before factorization.
double max_eig_sym(const MatrixXd& m);
double min_eig_sym(const MatrixXd& m);

/// Cayley transform E (I - S)(I + S)^{-1} with E a +-1 diagonal. Always
/// defined for skew-symmetric S; the result is orthogonal.
OrthogonalMatrix cayley(const SkewMatrix& s, const VectorXd& signs);
OrthogonalMatrix cayley(const SkewMatrix& s);

/// Inverse of the Cayley transform with E = I: recovers S from U = (I-S)(I+S)^{-1}.
/// Throws DomainError when I + U is (numerically) singular.
SkewMatrix cayley_inverse(const MatrixXd& u);

/// Orthonormal Q factor of a full-column-rank matrix, with the sign
/// convention that R has positive diagonal. Throws RankDeficient when a
/// pivot magnitude falls below `pivot_tol`.
OrthogonalMatrix qr_orthonormal(const MatrixXd& x, double pivot_tol = 1e-12);

/// m x n rectangular diagonal matrix with `values` on the (i,i) entries.
MatrixXd rect_diag(int m, int n, const VectorXd& values);

}  // namespace stabssm
