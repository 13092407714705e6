#include "core/oracle.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace sgne {

namespace {

double natural_residual(const GameModel& game, const MatrixXd& a, const VectorXd& x,
                        const VectorXd& lambda) {
  const VectorXd g = game.pseudogradient(x) + a.transpose() * lambda;
  double r = (x - game.project(x - g)).cwiseAbs().maxCoeff();
  if (lambda.size() > 0) {
    const VectorXd s = a * x - game.rhs();
    r = std::max(r, (lambda - (lambda + s).cwiseMax(0.0)).cwiseAbs().maxCoeff());
  }
  return r;
}

}  // namespace

VgneSolution solve_vgne(const GameModel& game, const OracleOptions& opt) {
  const GameConstants& gc = game.constants();
  if (!(gc.eta > 0.0) || !(gc.lip_F > 0.0))
    throw Error("oracle needs positive strong-monotonicity and Lipschitz constants");
  const MatrixXd a = game.coupling_matrix();
  const double a_norm = a.size() ? a.jacobiSvd().singularValues()(0) : 0.0;
  const double step = 1.0 / (gc.lip_F * gc.lip_F / gc.eta + a_norm + 1.0);

  VgneSolution sol;
  VectorXd x = VectorXd::Zero(game.total_dim());
  for (int i = 0; i < game.agents(); ++i)
    x.segment(game.offset(i), game.dim(i)) = 0.5 * (game.box(i).lo + game.box(i).hi);
  VectorXd lambda = VectorXd::Zero(game.constraints());
  for (long k = 1; k <= opt.max_iters; ++k) {
    const VectorXd x_next = game.project(x - step * (game.pseudogradient(x) + a.transpose() * lambda));
    if (lambda.size() > 0)
      lambda = (lambda + step * (a * (2.0 * x_next - x) - game.rhs())).cwiseMax(0.0);
    x = x_next;
    if (k % 10 == 0 || k == opt.max_iters) {
      const double r = natural_residual(game, a, x, lambda);
      if (!std::isfinite(r)) throw ConvergenceError("oracle iteration produced non-finite values");
      if (r < opt.tol) {
        sol.x = x;
        sol.lambda = lambda;
        sol.iterations = k;
        sol.kkt_residual = r;
        return sol;
      }
    }
  }
  throw ConvergenceError("oracle did not reach KKT residual " + std::to_string(opt.tol) + " in " +
                         std::to_string(opt.max_iters) + " iterations");
}

KktReport kkt_check(const GameModel& game, const VectorXd& x, const VectorXd& lambda, double tol,
                    double alpha) {
  if (x.size() != game.total_dim() || lambda.size() != game.constraints())
    throw DimensionError("kkt_check: wrong sizes");
  const MatrixXd a = game.coupling_matrix();
  KktReport r;
  const VectorXd g = game.pseudogradient(x) + a.transpose() * lambda;
  r.stationarity = (x - game.project(x - alpha * g)).cwiseAbs().maxCoeff() / alpha;
  if (lambda.size() > 0) {
    r.dual_feasibility = std::max(0.0, -lambda.minCoeff());
    const VectorXd s = a * x - game.rhs();
    r.primal_feasibility = std::max(0.0, s.maxCoeff());
    r.complementarity = std::abs(lambda.dot(s));
  }
  r.pass = r.stationarity <= tol && r.dual_feasibility <= tol && r.primal_feasibility <= tol &&
           r.complementarity <= tol;
  return r;
}

VectorXd oracle_resolvent(const ExtendedOperator& op, const Preconditioner& phi, const VectorXd& y,
                          double tol, long max_iters) {
  const SparseMatrix m = phi.matrix() + op.skew_matrix();
  const VectorXd d = m.diagonal();
  if (!(d.array() > 0.0).all()) throw PreconditionerError("resolvent oracle needs a positive diagonal");
  const VectorXd rhs = phi.matrix() * y;
  VectorXd w = op.project_domain(y);
  for (long it = 0; it < max_iters; ++it) {
    const VectorXd jacobi = op.project_domain((rhs - m * w + d.cwiseProduct(w)).cwiseQuotient(d));
    const VectorXd next = 0.5 * w + 0.5 * jacobi;
    const double change = (next - w).cwiseAbs().maxCoeff();
    w = next;
    if (change < tol) return w;
  }
  throw ConvergenceError("resolvent oracle did not converge");
}

}  // namespace sgne
