#include "stabssm/model.hpp"

namespace stabssm {

Ssm Ssm::zero(int n, int l, int q) {
    Ssm s;
    s.n = n;
    s.l = l;
    s.q = q;
    s.A = MatrixXd::Zero(n, n);
    s.B = MatrixXd::Zero(n, l);
    s.C = MatrixXd::Zero(q, n);
    s.D = MatrixXd::Zero(q, l);
    s.F = MatrixXd::Zero(n, n);
    s.G = MatrixXd::Zero(n, l);
    return s;
}

void Ssm::check_dims() const {
    if (n < 1 || l < 1 || q < 1)
        throw DimensionMismatch("Ssm: dimensions must be positive");
    const bool ok = A.rows() == n && A.cols() == n && B.rows() == n && B.cols() == l &&
                    C.rows() == q && C.cols() == n && D.rows() == q && D.cols() == l &&
                    F.rows() == n && F.cols() == n && G.rows() == n && G.cols() == l;
    if (!ok) throw DimensionMismatch("Ssm: matrix shapes inconsistent with (n, l, q)");
    if (rho < -1.0 || rho > 1.0)
        throw DomainError("Ssm: rho must lie in [-1, 1]");
}

MatrixXd lyapunov_residual(const MatrixXd& a, const MatrixXd& f, const MatrixXd& p,
                           const MatrixXd& q) {
    return a.transpose() * p + p * a + f.transpose() * p * f + q;
}

MatrixXd assemble_brl_matrix(const Ssm& s, const SpdMatrix& p, double gamma) {
    s.check_dims();
    if (p.dim() != s.n) throw DimensionMismatch("assemble_brl_matrix: P dimension");
    const MatrixXd& pm = p.matrix();
    MatrixXd m11 = pm * s.A + s.A.transpose() * pm + s.F.transpose() * pm * s.F +
                   s.C.transpose() * s.C;
    m11 = 0.5 * (m11 + m11.transpose());
    MatrixXd m12 = pm * s.B + s.rho * s.F.transpose() * pm * s.G + s.C.transpose() * s.D;
    MatrixXd m22 = s.D.transpose() * s.D - gamma * gamma * MatrixXd::Identity(s.l, s.l) +
                   s.G.transpose() * pm * s.G;
    m22 = 0.5 * (m22 + m22.transpose());

    MatrixXd m(s.n + s.l, s.n + s.l);
    m.topLeftCorner(s.n, s.n) = m11;
    m.topRightCorner(s.n, s.l) = m12;
    m.bottomLeftCorner(s.l, s.n) = m12.transpose();
    m.bottomRightCorner(s.l, s.l) = m22;
    return m;
}

}  // namespace stabssm
