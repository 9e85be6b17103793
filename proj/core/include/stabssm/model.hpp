#pragma once

#include <Eigen/Dense>

#include "stabssm/linalg.hpp"

namespace stabssm {

/// Continuous-time stochastic state-space model
///   dx = (A x + B u) dt + F x dw1 + G u dw2,   y = C x + D u,
/// with correlated scalar Wiener processes, corr(dw1, dw2) = rho dt.
struct Ssm {
    int n = 0;  // states
    int l = 0;  // inputs
    int q = 0;  // outputs
    MatrixXd A, B, C, D, F, G;
    double rho = 0.0;

    static Ssm zero(int n, int l, int q);
    void check_dims() const;
};

/// Residual A^T P + P A + F^T P F + Q of the internal-stability certificate.
MatrixXd lyapunov_residual(const MatrixXd& a, const MatrixXd& f, const MatrixXd& p,
                           const MatrixXd& q);

/// Block matrix of the dissipation test for gain gamma:
///   [ PA + A^T P + F^T P F + C^T C      PB + rho F^T P G + C^T D ]
///   [            (.)^T               D^T D - gamma^2 I + G^T P G ]
/// Negative definiteness certifies internal stability with L2 gain < gamma.
MatrixXd assemble_brl_matrix(const Ssm& s, const SpdMatrix& p, double gamma);

}  // namespace stabssm
