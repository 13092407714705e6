#pragma once

#include "core/consensus_ops.hpp"
#include "core/game.hpp"

namespace sgne {

struct OracleOptions {
  double tol = 1e-10;
  long max_iters = 1000000;
};

struct VgneSolution {
  VectorXd x;
  VectorXd lambda;
  long iterations = 0;
  double kkt_residual = 0.0;
};

/// Full-information projected primal-dual iteration on the KKT operator of the
/// expected game. Deterministic.
VgneSolution solve_vgne(const GameModel& game, const OracleOptions& options = {});

struct KktReport {
  bool pass = false;
  double stationarity = 0.0;        // ‖x − P(x − α(F + Aᵀλ))‖∞ / α
  double dual_feasibility = 0.0;    // max(0, −min λ)
  double primal_feasibility = 0.0;  // ‖max(Ax − b, 0)‖∞
  double complementarity = 0.0;     // |λᵀ(Ax − b)|
};

KktReport kkt_check(const GameModel& game, const VectorXd& x, const VectorXd& lambda, double tol,
                    double alpha = 1e-2);

/// Solves Φw + B(w) ∋ Φy by damped projected Jacobi sweeps on the assembled
/// matrices. Independent of the closed-form backward sweep.
VectorXd oracle_resolvent(const ExtendedOperator& op, const Preconditioner& phi, const VectorXd& y,
                          double tol = 1e-12, long max_iters = 100000);

}  // namespace sgne
