#include "stabssm/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace stabssm {

namespace {

MatrixXd mirror_lower(const MatrixXd& m) {
    MatrixXd out = m;
    const int n = static_cast<int>(m.rows());
    for (int j = 0; j < n; ++j)
        for (int i = j + 1; i < n; ++i) out(j, i) = out(i, j);
    return out;
}

}  // namespace

SpdMatrix::SpdMatrix(MatrixXd data, MatrixXd chol)
    : data_(std::move(data)), chol_(std::move(chol)) {}

SpdMatrix SpdMatrix::from_matrix(const MatrixXd& m, double pivot_tol) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw DimensionMismatch("SpdMatrix: matrix must be square and non-empty");
    const MatrixXd sym = mirror_lower(m);
    Eigen::LLT<MatrixXd> llt(sym);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("SpdMatrix: Cholesky factorization failed");
    MatrixXd lower = llt.matrixL();
    const double max_diag = lower.diagonal().cwiseAbs().maxCoeff();
    if (lower.diagonal().minCoeff() <= pivot_tol * max_diag)
        throw NotPositiveDefinite("SpdMatrix: Cholesky pivot below tolerance");
    return SpdMatrix(sym, std::move(lower));
}

SpdMatrix SpdMatrix::from_cholesky(const MatrixXd& lower) {
    if (lower.rows() != lower.cols() || lower.rows() < 1)
        throw DimensionMismatch("SpdMatrix: factor must be square and non-empty");
    if (lower.diagonal().minCoeff() <= 0.0)
        throw NotPositiveDefinite("SpdMatrix: factor diagonal must be positive");
    MatrixXd tri = lower.triangularView<Eigen::Lower>();
    MatrixXd data = tri * tri.transpose();
    return SpdMatrix(mirror_lower(data), std::move(tri));
}

SpdMatrix SpdMatrix::from_inverse_cholesky(const MatrixXd& lower) {
    if (lower.rows() != lower.cols() || lower.rows() < 1)
        throw DimensionMismatch("SpdMatrix: factor must be square and non-empty");
    if (lower.diagonal().minCoeff() <= 0.0)
        throw NotPositiveDefinite("SpdMatrix: factor diagonal must be positive");
    const int n = static_cast<int>(lower.rows());
    // P = (L L^T)^{-1} = L^{-T} L^{-1}
    MatrixXd linv = lower.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n, n));
    MatrixXd p = linv.transpose() * linv;
    return from_matrix(p);
}

SpdMatrix SpdMatrix::identity(int n) { return scaled_identity(n, 1.0); }

SpdMatrix SpdMatrix::scaled_identity(int n, double s) {
    if (n < 1) throw DimensionMismatch("SpdMatrix: dimension must be positive");
    if (!(s > 0.0)) throw NotPositiveDefinite("SpdMatrix: scale must be positive");
    return SpdMatrix(s * MatrixXd::Identity(n, n),
                     std::sqrt(s) * MatrixXd::Identity(n, n));
}

MatrixXd SpdMatrix::inverse() const { return solve(MatrixXd::Identity(dim(), dim())); }

MatrixXd SpdMatrix::inverse_cholesky() const {
    Eigen::LLT<MatrixXd> llt(inverse());
    if (llt.info() != Eigen::Success)
        throw CholeskyFailure("SpdMatrix: factorization of inverse failed");
    return llt.matrixL();
}

MatrixXd SpdMatrix::solve(const MatrixXd& b) const {
    if (b.rows() != dim()) throw DimensionMismatch("SpdMatrix::solve: row mismatch");
    MatrixXd y = chol_.triangularView<Eigen::Lower>().solve(b);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double SpdMatrix::log_det() const {
    return 2.0 * chol_.diagonal().array().log().sum();
}

double SpdMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(data_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalFailure("SpdMatrix: eigensolver failed");
    return es.eigenvalues().minCoeff();
}

double SpdMatrix::condition_number() const {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(data_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalFailure("SpdMatrix: eigensolver failed");
    return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

SkewMatrix::SkewMatrix(int dim) : dim_(dim), packed_(VectorXd::Zero(packed_size(dim))) {
    if (dim < 1) throw DimensionMismatch("SkewMatrix: dimension must be positive");
}

SkewMatrix::SkewMatrix(int dim, VectorXd packed) : dim_(dim), packed_(std::move(packed)) {
    if (dim < 1) throw DimensionMismatch("SkewMatrix: dimension must be positive");
    if (packed_.size() != packed_size(dim))
        throw DimensionMismatch("SkewMatrix: packed length != dim(dim-1)/2");
}

SkewMatrix SkewMatrix::pack(const MatrixXd& s) {
    if (s.rows() != s.cols()) throw DimensionMismatch("SkewMatrix::pack: matrix not square");
    const int n = static_cast<int>(s.rows());
    VectorXd packed(packed_size(n));
    int k = 0;
    for (int j = 0; j < n; ++j)
        for (int i = j + 1; i < n; ++i) packed(k++) = s(i, j);
    return SkewMatrix(n, std::move(packed));
}

MatrixXd SkewMatrix::unpack() const {
    MatrixXd s = MatrixXd::Zero(dim_, dim_);
    int k = 0;
    for (int j = 0; j < dim_; ++j)
        for (int i = j + 1; i < dim_; ++i) {
            s(i, j) = packed_(k);
            s(j, i) = -packed_(k);
            ++k;
        }
    return s;
}

OrthogonalMatrix::OrthogonalMatrix(MatrixXd data, double tol) : data_(std::move(data)) {
    if (data_.rows() < data_.cols())
        throw DimensionMismatch("OrthogonalMatrix: rows must be >= cols");
    const int c = static_cast<int>(data_.cols());
    const double err = (data_.transpose() * data_ - MatrixXd::Identity(c, c)).norm();
    if (!(err <= tol))
        throw NumericalFailure("OrthogonalMatrix: columns not orthonormal");
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

MatrixXd solve_gen_lyapunov(const MatrixXd& a, const MatrixXd& f, const SpdMatrix& q,
                            int max_dim) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n || f.rows() != n || f.cols() != n || q.dim() != n)
        throw DimensionMismatch("solve_gen_lyapunov: A, F, Q must share dimension");
    if (n > max_dim)
        throw DimensionMismatch("solve_gen_lyapunov: dimension exceeds dense-solve cap");

    const MatrixXd eye = MatrixXd::Identity(n, n);
    // vec(A^T P) + vec(P A) + vec(F^T P F) = (I(x)A^T + A^T(x)I + F^T(x)F^T) vec(P)
    MatrixXd k = kron(eye, a.transpose()) + kron(a.transpose(), eye) +
                 kron(f.transpose(), f.transpose());
    Eigen::FullPivLU<MatrixXd> lu(k);
    // Pivots are judged against the scale of the inputs, not of K itself:
    // a marginally stable pair collapses K to roundoff size.
    const double scale = 2.0 * a.norm() + f.norm() * f.norm();
    const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!lu.isInvertible() || min_pivot <= 1e-12 * scale)
        throw SingularSystem("solve_gen_lyapunov: vectorized operator is singular");
    VectorXd rhs = -Eigen::Map<const VectorXd>(q.matrix().data(), n * n);
    VectorXd vec_p = lu.solve(rhs);
    Eigen::Map<const MatrixXd> p(vec_p.data(), n, n);
    return 0.5 * (p + p.transpose());
}

StabilityReport is_mean_square_stable(const MatrixXd& a, const MatrixXd& f) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n || f.rows() != n || f.cols() != n)
        throw DimensionMismatch("is_mean_square_stable: shape mismatch");
    const MatrixXd eye = MatrixXd::Identity(n, n);
    MatrixXd op = kron(eye, a) + kron(a, eye) + kron(f, f);
    Eigen::EigenSolver<MatrixXd> es(op, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw NumericalFailure("is_mean_square_stable: eigensolver failed");
    const double abscissa = es.eigenvalues().real().maxCoeff();
    return {abscissa < 0.0, abscissa};
}

double max_eig_sym(const MatrixXd& m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("max_eig_sym: matrix not square");
    MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalFailure("max_eig_sym: no convergence");
    return es.eigenvalues().maxCoeff();
}

double min_eig_sym(const MatrixXd& m) { return -max_eig_sym(-m); }

OrthogonalMatrix cayley(const SkewMatrix& s, const VectorXd& signs) {
    const int n = s.dim();
    if (signs.size() != n) throw DimensionMismatch("cayley: sign vector length mismatch");
    const MatrixXd sd = s.unpack();
    const MatrixXd eye = MatrixXd::Identity(n, n);
    // (I - S) and (I + S)^{-1} commute, both being rational in S.
    MatrixXd u = Eigen::PartialPivLU<MatrixXd>(eye + sd).solve(eye - sd);
    u = signs.asDiagonal() * u;
    return OrthogonalMatrix(std::move(u), 1e-10);
}

OrthogonalMatrix cayley(const SkewMatrix& s) {
    return cayley(s, VectorXd::Ones(s.dim()));
}

SkewMatrix cayley_inverse(const MatrixXd& u) {
    if (u.rows() != u.cols()) throw DimensionMismatch("cayley_inverse: matrix not square");
    const int n = static_cast<int>(u.rows());
    const MatrixXd eye = MatrixXd::Identity(n, n);
    Eigen::FullPivLU<MatrixXd> lu(eye + u);
    if (!lu.isInvertible())
        throw DomainError("cayley_inverse: U has an eigenvalue at -1");
    MatrixXd s = lu.solve(eye - u);
    s = 0.5 * (s - s.transpose());
    return SkewMatrix::pack(s);
}

OrthogonalMatrix qr_orthonormal(const MatrixXd& x, double pivot_tol) {
    if (x.rows() < x.cols())
        throw DimensionMismatch("qr_orthonormal: rows must be >= cols");
    const int cols = static_cast<int>(x.cols());
    Eigen::HouseholderQR<MatrixXd> qr(x);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(x.rows(), cols);
    MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (int i = 0; i < cols; ++i) {
        if (std::abs(r(i, i)) < pivot_tol)
            throw RankDeficient("qr_orthonormal: rank-deficient input");
        if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    }
    return OrthogonalMatrix(std::move(q), 1e-10);
}

MatrixXd rect_diag(int m, int n, const VectorXd& values) {
    if (m < 1 || n < 1) throw DimensionMismatch("rect_diag: dimensions must be positive");
    if (values.size() != std::min(m, n))
        throw DimensionMismatch("rect_diag: need min(m,n) values");
    MatrixXd out = MatrixXd::Zero(m, n);
    for (int i = 0; i < values.size(); ++i) out(i, i) = values(i);
    return out;
}

}  // namespace stabssm
