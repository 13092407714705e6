#include "core/consensus_ops.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "core/errors.hpp"

namespace sgne {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Appends (scale * M) ⊗ I_width at (row0, col0).
void add_kron_identity(Triplets& t, const Eigen::MatrixXd& m, int width, Eigen::Index row0,
                       Eigen::Index col0, double scale = 1.0) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) == 0.0) continue;
      for (int k = 0; k < width; ++k)
        t.emplace_back(row0 + r * width + k, col0 + c * width + k, scale * m(r, c));
    }
}

// Appends scale * S at (row0, col0).
void add_block(Triplets& t, const SparseMatrix& s, Eigen::Index row0, Eigen::Index col0,
               double scale) {
  for (int k = 0; k < s.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(s, k); it; ++it)
      t.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
}

double max_col_abs_sum(const MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
}
double max_row_abs_sum(const MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace

SelectionMatrices SelectionMatrices::make(const GameModel& game) {
  const int n = game.total_dim();
  const int agents = game.agents();
  SelectionMatrices out;
  out.R.resize(n, static_cast<Eigen::Index>(agents) * n);
  out.S.resize(static_cast<Eigen::Index>(agents) * n - n, static_cast<Eigen::Index>(agents) * n);
  Triplets r, s;
  Eigen::Index s_row = 0;
  for (int i = 0; i < agents; ++i) {
    const Eigen::Index base = static_cast<Eigen::Index>(i) * n;
    for (int k = 0; k < n; ++k) {
      const bool own = k >= game.offset(i) && k < game.offset(i) + game.dim(i);
      if (own)
        r.emplace_back(k, base + k, 1.0);
      else
        s.emplace_back(s_row++, base + k, 1.0);
    }
  }
  out.R.setFromTriplets(r.begin(), r.end());
  out.S.setFromTriplets(s.begin(), s.end());
  return out;
}

StepSizeProfile StepSizeProfile::scaled(double factor) const {
  StepSizeProfile p = *this;
  p.alpha *= factor;
  p.nu *= factor;
  p.delta *= factor;
  p.gamma *= factor;
  return p;
}

StepSizeBounds step_size_bounds(Variant variant, const Graph& graph, const GameModel& game,
                                double tau) {
  if (!(tau > 0.0)) throw ConfigError("step_sizes.tau", "must be positive");
  if (graph.node_count() != game.agents())
    throw DimensionError("graph and game disagree on the number of agents");
  const int agents = game.agents();
  StepSizeBounds b;
  b.alpha.resize(agents);
  b.nu.resize(agents);
  b.delta.resize(agents);
  for (int i = 0; i < agents; ++i) {
    const double spread = is_edge(variant) ? graph.sqrt_weight_sum(i) : 2.0 * graph.degree(i);
    b.alpha(i) = 1.0 / (tau + max_col_abs_sum(game.coupling(i)));
    b.nu(i) = 1.0 / (tau + spread);
    b.delta(i) = 1.0 / (tau + spread + max_row_abs_sum(game.coupling(i)));
  }
  return b;
}

StepSizeProfile default_profile(Variant variant, const Graph& graph, const GameModel& game,
                                double tau, double safety, double c) {
  if (!(safety > 0.0 && safety <= 1.0))
    throw ConfigError("step_sizes.safety_factor", "must lie in (0, 1]");
  const StepSizeBounds b = step_size_bounds(variant, graph, game, tau);
  StepSizeProfile p;
  p.alpha = safety * b.alpha;
  p.delta = safety * b.delta;
  p.nu = safety * b.nu;
  if (is_edge(variant)) p.nu.setConstant(safety * b.nu.minCoeff());
  p.gamma = is_aggregative(variant) ? safety / (tau + 2.0 * graph.max_degree()) : 0.0;
  p.c = c;
  p.tau = tau;
  p.safety = safety;
  return p;
}

std::vector<BoundViolation> bound_violations(const StepSizeProfile& p, const StepSizeBounds& b) {
  std::vector<BoundViolation> out;
  auto scan = [&](const char* name, const VectorXd& v, const VectorXd& bound) {
    for (Eigen::Index i = 0; i < v.size() && i < bound.size(); ++i)
      if (!(v(i) < bound(i))) out.push_back({name, static_cast<int>(i), v(i), bound(i)});
  };
  scan("alpha", p.alpha, b.alpha);
  scan("nu", p.nu, b.nu);
  scan("delta", p.delta, b.delta);
  return out;
}

void validate_profile(Variant variant, const StepSizeProfile& p, int agents) {
  auto check = [&](const char* key, const VectorXd& v) {
    if (v.size() != agents)
      throw ConfigError(std::string("step_sizes.") + key, "needs one entry per agent");
    if (!(v.array() > 0.0).all() || !v.allFinite())
      throw ConfigError(std::string("step_sizes.") + key, "must be positive");
  };
  check("alpha", p.alpha);
  check("nu", p.nu);
  check("delta", p.delta);
  if (is_edge(variant) && (p.nu.array() != p.nu(0)).any())
    throw ConfigError("step_sizes.nu", "edge-based variants need a uniform nu");
  if (is_aggregative(variant) && !(p.gamma > 0.0))
    throw ConfigError("step_sizes.gamma", "must be positive");
  if (!(p.c > 0.0)) throw ConfigError("step_sizes.c", "consensus gain must be positive");
}

Preconditioner::Preconditioner(Variant variant, SparseMatrix matrix)
    : variant_(variant), matrix_(std::move(matrix)), diagonal_(matrix_.diagonal()) {}

double Preconditioner::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(MatrixXd(matrix_), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool Preconditioner::positive_definite() const {
  Eigen::SimplicialLLT<SparseMatrix> llt(matrix_);
  return llt.info() == Eigen::Success;
}

double Preconditioner::inverse_norm() const {
  const double lmin = min_eigenvalue();
  return lmin > 0.0 ? 1.0 / lmin : std::numeric_limits<double>::infinity();
}

VectorXd Preconditioner::solve(const VectorXd& rhs) const {
  Eigen::SimplicialLLT<SparseMatrix> llt(matrix_);
  if (llt.info() != Eigen::Success) throw PreconditionerError("preconditioner is not positive definite");
  return llt.solve(rhs);
}

double Preconditioner::norm(const VectorXd& v) const {
  return std::sqrt(std::max(0.0, v.dot(matrix_ * v)));
}

ExtendedOperator::ExtendedOperator(Variant variant, const GameModel& game, const Graph& graph,
                                   double c)
    : variant_(variant),
      form_(is_edge(variant) ? AuxForm::edge_v : AuxForm::node),
      game_(game),
      graph_(graph),
      c_(c),
      layout_(StateLayout::make(variant, form_, game, graph)) {
  const int agents = layout_.agents;
  const int m = layout_.constraints;
  const MatrixXd lap = graph.laplacian();

  Triplets t;
  add_kron_identity(t, lap, layout_.primal_width, 0, 0);
  primal_laplacian_.resize(static_cast<Eigen::Index>(agents) * layout_.primal_width,
                           static_cast<Eigen::Index>(agents) * layout_.primal_width);
  primal_laplacian_.setFromTriplets(t.begin(), t.end());

  t.clear();
  dual_coupling_.resize(static_cast<Eigen::Index>(agents) * m,
                        static_cast<Eigen::Index>(agents) * layout_.primal_width);
  for (int i = 0; i < agents; ++i) {
    const MatrixXd& a = game.coupling(i);
    const Eigen::Index col0 = static_cast<Eigen::Index>(i) * layout_.primal_width +
                              (is_aggregative(variant) ? 0 : game.offset(i));
    for (int r = 0; r < a.rows(); ++r)
      for (int cidx = 0; cidx < a.cols(); ++cidx)
        if (a(r, cidx) != 0.0) t.emplace_back(static_cast<Eigen::Index>(i) * m + r, col0 + cidx, a(r, cidx));
  }
  dual_coupling_.setFromTriplets(t.begin(), t.end());

  t.clear();
  const MatrixXd k = is_edge(variant) ? graph.incidence() : lap;
  add_kron_identity(t, k, m, 0, 0);
  aux_coupling_.resize(k.rows() * m, static_cast<Eigen::Index>(agents) * m);
  aux_coupling_.setFromTriplets(t.begin(), t.end());

  local_rhs_.resize(static_cast<Eigen::Index>(agents) * m);
  const VectorXd bi = game.local_rhs();
  for (int i = 0; i < agents; ++i) local_rhs_.segment(static_cast<Eigen::Index>(i) * m, m) = bi;
}

SparseMatrix ExtendedOperator::skew_matrix() const {
  const StateLayout& l = layout_;
  Triplets t;
  const SparseMatrix ar_t = dual_coupling_.transpose();
  const SparseMatrix k_t = aux_coupling_.transpose();
  add_block(t, ar_t, l.primal_offset, l.dual_offset, 1.0);
  add_block(t, dual_coupling_, l.dual_offset, l.primal_offset, -1.0);
  add_block(t, aux_coupling_, l.aux_offset, l.dual_offset, 1.0);
  add_block(t, k_t, l.dual_offset, l.aux_offset, -1.0);
  SparseMatrix s(l.size, l.size);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

Preconditioner ExtendedOperator::assemble(const StepSizeProfile& p) const {
  validate_profile(variant_, p, layout_.agents);
  const StateLayout& l = layout_;
  Triplets t;
  for (int i = 0; i < l.agents; ++i) {
    for (int k = 0; k < l.primal_width; ++k)
      t.emplace_back(l.primal_offset + i * l.primal_width + k,
                     l.primal_offset + i * l.primal_width + k, 1.0 / p.alpha(i));
    for (int k = 0; k < l.tracking_width; ++k)
      t.emplace_back(l.tracking_offset + i * l.tracking_width + k,
                     l.tracking_offset + i * l.tracking_width + k, 1.0 / p.gamma);
    for (int k = 0; k < l.constraints; ++k)
      t.emplace_back(l.dual_offset + i * l.constraints + k, l.dual_offset + i * l.constraints + k,
                     1.0 / p.delta(i));
  }
  for (int r = 0; r < l.aux_rows; ++r) {
    const double nu = form_ == AuxForm::edge_v ? p.nu(0) : p.nu(r);
    for (int k = 0; k < l.constraints; ++k)
      t.emplace_back(l.aux_offset + r * l.constraints + k, l.aux_offset + r * l.constraints + k,
                     1.0 / nu);
  }
  const SparseMatrix ar_t = dual_coupling_.transpose();
  const SparseMatrix k_t = aux_coupling_.transpose();
  add_block(t, ar_t, l.primal_offset, l.dual_offset, -1.0);
  add_block(t, dual_coupling_, l.dual_offset, l.primal_offset, -1.0);
  add_block(t, aux_coupling_, l.aux_offset, l.dual_offset, -1.0);
  add_block(t, k_t, l.dual_offset, l.aux_offset, -1.0);
  SparseMatrix phi(l.size, l.size);
  phi.setFromTriplets(t.begin(), t.end());
  return Preconditioner(variant_, std::move(phi));
}

void ExtendedOperator::forward(const VectorXd& w, const ForwardSampling& fs, long k,
                               VectorXd& out) const {
  const StateLayout& l = layout_;
  if (w.size() != l.size) throw DimensionError("forward: state has the wrong size");
  out.setZero(l.size);
  const Eigen::Index np = static_cast<Eigen::Index>(l.agents) * l.primal_width;
  const auto primal = w.segment(l.primal_offset, np);
  const long batch = fs.exact ? 1 : batch_size(fs.schedule, k);

  if (!is_aggregative(variant_)) {
    const int n = l.primal_width;
    for (int i = 0; i < l.agents; ++i) {
      const auto est = primal.segment(static_cast<Eigen::Index>(i) * n, n);
      const auto own = est.segment(game_.offset(i), game_.dim(i));
      auto g = out.segment(l.primal_offset + static_cast<Eigen::Index>(i) * n + game_.offset(i),
                           game_.dim(i));
      if (fs.exact) {
        game_.sampler().exact_grad(i, own, est, g);
      } else {
        Rng rng = agent_stream(fs.seed, i, k);
        sa_pseudogradient(game_, i, own, est, batch, rng, g, fs.sampling);
      }
    }
    out.segment(l.primal_offset, np) += c_ * (primal_laplacian_ * primal);
  } else {
    const int n = l.primal_width;
    const VectorXd u = primal + w.segment(l.tracking_offset, np);
    const VectorXd lu = primal_laplacian_ * u;
    for (int i = 0; i < l.agents; ++i) {
      const Eigen::Index at = static_cast<Eigen::Index>(i) * n;
      auto g = out.segment(l.primal_offset + at, n);
      if (fs.exact) {
        game_.sampler().exact_grad(i, primal.segment(at, n), u.segment(at, n), g);
      } else {
        Rng rng = agent_stream(fs.seed, i, k);
        sa_pseudogradient(game_, i, primal.segment(at, n), u.segment(at, n), batch, rng, g,
                          fs.sampling);
      }
    }
    out.segment(l.primal_offset, np) += c_ * lu;
    out.segment(l.tracking_offset, np) = lu;
  }
  out.segment(l.dual_offset, local_rhs_.size()) = local_rhs_;
}

VectorXd ExtendedOperator::forward(const VectorXd& w, const ForwardSampling& fs, long k) const {
  VectorXd out;
  forward(w, fs, k, out);
  return out;
}

void ExtendedOperator::prox_primal(Eigen::Ref<VectorXd> primal) const {
  const int n = layout_.primal_width;
  for (int i = 0; i < layout_.agents; ++i) {
    const Eigen::Index base = static_cast<Eigen::Index>(i) * n;
    if (is_aggregative(variant_))
      game_.box(i).clamp(primal.segment(base, n));
    else
      game_.box(i).clamp(primal.segment(base + game_.offset(i), game_.dim(i)));
  }
}

VectorXd ExtendedOperator::backward_rhs(const Preconditioner& phi, const VectorXd& rhs) const {
  const StateLayout& l = layout_;
  const VectorXd& d = phi.diagonal();
  VectorXd out = rhs.cwiseQuotient(d);
  const Eigen::Index np = static_cast<Eigen::Index>(l.agents) * l.primal_width;
  prox_primal(out.segment(l.primal_offset, np));
  const Eigen::Index nd = static_cast<Eigen::Index>(l.agents) * l.constraints;
  const Eigen::Index na = static_cast<Eigen::Index>(l.aux_rows) * l.constraints;
  VectorXd dual = rhs.segment(l.dual_offset, nd) +
                  2.0 * (dual_coupling_ * out.segment(l.primal_offset, np)) +
                  2.0 * (aux_coupling_.transpose() * out.segment(l.aux_offset, na));
  out.segment(l.dual_offset, nd) =
      dual.cwiseQuotient(d.segment(l.dual_offset, nd)).cwiseMax(0.0);
  return out;
}

VectorXd ExtendedOperator::backward(const Preconditioner& phi, const VectorXd& y) const {
  return backward_rhs(phi, phi.matrix() * y);
}

VectorXd ExtendedOperator::step(const Preconditioner& phi, const VectorXd& w,
                                const ForwardSampling& fs, long k) const {
  VectorXd a;
  forward(w, fs, k, a);
  return backward_rhs(phi, phi.matrix() * w - a);
}

double ExtendedOperator::residual(const Preconditioner& phi, const VectorXd& w) const {
  const VectorXd next = step(phi, w, ForwardSampling{}, 1);
  return phi.norm(w - next);
}

VectorXd ExtendedOperator::project_domain(const VectorXd& w) const {
  const StateLayout& l = layout_;
  VectorXd out = w;
  prox_primal(out.segment(l.primal_offset, static_cast<Eigen::Index>(l.agents) * l.primal_width));
  auto dual = out.segment(l.dual_offset, static_cast<Eigen::Index>(l.agents) * l.constraints);
  dual = dual.cwiseMax(0.0);
  return out;
}

Preconditioner assemble_preconditioner(Variant variant, const StepSizeProfile& profile,
                                       const Graph& graph, const GameModel& game) {
  ExtendedOperator op(variant, game, graph, profile.c);
  Preconditioner phi = op.assemble(profile);
  if (phi.positive_definite()) return phi;
  const auto violations =
      bound_violations(profile, step_size_bounds(variant, graph, game, profile.tau));
  std::string msg = "preconditioner is not positive definite (lambda_min = " +
                    std::to_string(phi.min_eigenvalue()) + ")";
  if (!violations.empty()) {
    const BoundViolation& v = violations.front();
    msg += ": " + v.step + "[" + std::to_string(v.agent) + "] = " + std::to_string(v.value) +
           " exceeds its bound " + std::to_string(v.bound);
    if (violations.size() > 1)
      msg += " (" + std::to_string(violations.size() - 1) + " more)";
  }
  throw PreconditionerError(msg);
}

VectorXd equilibrium_state(const ExtendedOperator& op, const GameModel& game, const Graph& graph,
                           const VectorXd& x_star, const VectorXd& lambda_star) {
  const StateLayout& l = op.layout();
  const int agents = l.agents;
  const int m = l.constraints;
  if (x_star.size() != game.total_dim() || lambda_star.size() != m)
    throw DimensionError("equilibrium_state: wrong solution size");
  VectorXd w = VectorXd::Zero(l.size);
  const int n = l.primal_width;
  if (is_aggregative(op.variant())) {
    const VectorXd avg = game.average(x_star);
    for (int i = 0; i < agents; ++i) {
      const auto xi = x_star.segment(game.offset(i), n);
      w.segment(l.primal_offset + static_cast<Eigen::Index>(i) * n, n) = xi;
      w.segment(l.tracking_offset + static_cast<Eigen::Index>(i) * n, n) = avg - xi;
    }
  } else {
    for (int i = 0; i < agents; ++i)
      w.segment(l.primal_offset + static_cast<Eigen::Index>(i) * n, n) = x_star;
  }
  for (int i = 0; i < agents; ++i)
    w.segment(l.dual_offset + static_cast<Eigen::Index>(i) * m, m) = lambda_star;

  // K^T aux = col((A x*)/N - A_i x_i*), solved in the range of the Laplacian.
  VectorXd rhs(static_cast<Eigen::Index>(agents) * m);
  const VectorXd ax = game.coupling_matrix() * x_star;
  for (int i = 0; i < agents; ++i)
    rhs.segment(static_cast<Eigen::Index>(i) * m, m) =
        ax / agents - game.coupling(i) * x_star.segment(game.offset(i), game.dim(i));
  const MatrixXd lap = graph.laplacian();
  const MatrixXd lap_pinv =
      lap.completeOrthogonalDecomposition().pseudoInverse();
  VectorXd z(static_cast<Eigen::Index>(agents) * m);
  for (int k = 0; k < m; ++k) {
    VectorXd col(agents);
    for (int i = 0; i < agents; ++i) col(i) = rhs(static_cast<Eigen::Index>(i) * m + k);
    const VectorXd zk = lap_pinv * col;
    for (int i = 0; i < agents; ++i) z(static_cast<Eigen::Index>(i) * m + k) = zk(i);
  }
  if (op.aux_form() == AuxForm::edge_v) {
    const MatrixXd v_inc = graph.incidence();
    const Eigen::Index edges = graph.edge_count();
    VectorXd v(edges * m);
    for (int k = 0; k < m; ++k) {
      VectorXd col(agents);
      for (int i = 0; i < agents; ++i) col(i) = z(static_cast<Eigen::Index>(i) * m + k);
      const VectorXd vk = v_inc * col;
      for (Eigen::Index e = 0; e < edges; ++e) v(e * m + k) = vk(e);
    }
    w.segment(l.aux_offset, v.size()) = v;
  } else {
    w.segment(l.aux_offset, z.size()) = z;
  }
  return w;
}

TheoryConstants theory_constants(Variant variant, const GameConstants& g,
                                 const SpectralSummary& spec, int agents, double c) {
  if (!(g.eta > 0.0)) throw Error("strong monotonicity constant eta must be positive");
  TheoryConstants t;
  t.eta = g.eta;
  t.lip_F = g.lip_F;
  t.lip_p = g.lip_p;
  t.lip_ax = g.lip_ax;
  t.lip_au = g.lip_au;
  t.lambda2 = spec.lambda2;
  t.d_max = spec.max_degree;
  t.c = c;
  if (!is_aggregative(variant)) {
    const double lsum = g.lip_p + g.lip_F;
    t.c_min = (lsum * lsum / (4.0 * g.eta) + g.lip_p) / spec.lambda2;
    const double off = -lsum / (2.0 * std::sqrt(static_cast<double>(agents)));
    t.upsilon << g.eta / agents, off, off, c * spec.lambda2 - g.lip_p;
    t.theta = g.lip_p + 2.0 * c * spec.max_degree;
    if (!(c > t.c_min))
      t.warnings.push_back("consensus gain c = " + std::to_string(c) +
                           " does not exceed c_min = " + std::to_string(t.c_min));
  } else {
    t.c_min = std::numeric_limits<double>::quiet_NaN();
    t.upsilon << g.eta, -g.lip_au / 2.0, -g.lip_au / 2.0, spec.lambda2;
    t.theta = std::max(4.0 * g.lip_ax * g.lip_ax, 4.0 * g.lip_au * g.lip_au + 3.0 * spec.lambda2);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(t.upsilon, Eigen::EigenvaluesOnly);
  t.mu = es.eigenvalues()(0);
  if (!(t.mu > 0.0)) t.warnings.push_back("mu = " + std::to_string(t.mu) + " is not positive");
  t.beta = is_aggregative(variant) ? t.mu / t.theta : t.mu / (t.theta * t.theta);
  return t;
}

MetricDiagnostic metric_diagnostic(const Preconditioner& phi, const TheoryConstants& theory) {
  MetricDiagnostic d;
  d.inverse_norm = phi.inverse_norm();
  d.two_beta = 2.0 * theory.beta;
  d.holds = theory.beta > 0.0 && d.inverse_norm < d.two_beta;
  return d;
}

}  // namespace sgne
