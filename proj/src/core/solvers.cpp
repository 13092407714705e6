#include "core/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "core/errors.hpp"

namespace sgne {

namespace {

double max_abs_diff(const ExtendedState& a, const ExtendedState& b) {
  double d = 0.0;
  if (a.primal.size()) d = std::max(d, (a.primal - b.primal).cwiseAbs().maxCoeff());
  if (a.tracking.size()) d = std::max(d, (a.tracking - b.tracking).cwiseAbs().maxCoeff());
  if (a.aux.size()) d = std::max(d, (a.aux - b.aux).cwiseAbs().maxCoeff());
  if (a.dual.size()) d = std::max(d, (a.dual - b.dual).cwiseAbs().maxCoeff());
  return d;
}

double max_abs(const ExtendedState& a) {
  double d = 0.0;
  for (const RowMatrix* m : {&a.primal, &a.tracking, &a.aux, &a.dual})
    if (m->size()) d = std::max(d, m->cwiseAbs().maxCoeff());
  return d;
}

void check_finite(const ExtendedState& s, long k) {
  const std::pair<const RowMatrix*, const char*> blocks[] = {
      {&s.primal, "primal"}, {&s.tracking, "tracking"}, {&s.aux, "auxiliary"}, {&s.dual, "dual"}};
  for (const auto& [m, name] : blocks)
    if (!m->allFinite()) throw DivergenceError(k, std::string("non-finite entry in the ") + name + " block");
}

double max_pairwise(const RowMatrix& rows) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = i + 1; j < rows.rows(); ++j)
      best = std::max(best, (rows.row(i) - rows.row(j)).norm());
  return best;
}

}  // namespace

ConsensusGaps consensus_gaps(const ExtendedState& s) {
  ConsensusGaps g;
  g.primal = is_aggregative(s.variant) ? max_pairwise(s.aggregate_estimates()) : max_pairwise(s.primal);
  g.dual = max_pairwise(s.dual);
  return g;
}

ExtendedState init_state(Variant variant, AuxForm form, const GameModel& game, const Graph& graph,
                         std::uint64_t seed) {
  ExtendedState s = make_state(variant, form, game, graph);
  VectorXd x(game.total_dim());
  for (int i = 0; i < game.agents(); ++i) {
    Rng rng = agent_stream(seed, i, 0, StreamTag::initial_state);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Box& b = game.box(i);
    for (int j = 0; j < b.size(); ++j)
      x(game.offset(i) + j) = b.lo(j) + unit(rng) * (b.hi(j) - b.lo(j));
  }
  for (int i = 0; i < game.agents(); ++i) {
    if (is_aggregative(variant))
      s.primal.row(i) = x.segment(game.offset(i), game.dim(i)).transpose();
    else
      s.primal.row(i) = x.transpose();
  }
  return s;
}

ExtendedState init_state(Variant variant, AuxForm form, const GameModel& game, const Graph& graph,
                         const VectorXd& stacked) {
  ExtendedState s = make_state(variant, form, game, graph);
  s.assign(stacked);
  if ((s.dual.array() < 0.0).any()) throw Error("initial multipliers must be nonnegative");
  if (!game.feasible_boxes(s.decisions(game)))
    throw Error("initial decisions must lie in the local boxes");
  return s;
}

VectorXd to_operator_layout(const ExtendedState& s, const Graph& graph) {
  if (s.aux_form != AuxForm::edge_z) return s.stacked();
  // z stays in range(L); v = V L⁺ z is the per-edge variable that generated it.
  ExtendedState copy = s;
  const MatrixXd lap_pinv = graph.laplacian().completeOrthogonalDecomposition().pseudoInverse();
  copy.aux = graph.incidence() * lap_pinv * s.aux;
  copy.aux_form = AuxForm::edge_v;
  return copy.stacked();
}

Eigen::Ref<const Eigen::RowVectorXd> Exchange::read(int reader, int owner) {
  ++reads_;
  if (reader != owner && !graph_.adjacent(reader, owner)) {
    ++violations_;
#ifndef NDEBUG
    throw Error("agent " + std::to_string(reader) + " read state of non-neighbor " +
                std::to_string(owner));
#endif
  }
  return buffer_.row(owner);
}

DistributedSolver::DistributedSolver(Variant variant, const GameModel& game, const Graph& graph,
                                     StepSizeProfile profile, SolverOptions options)
    : variant_(variant),
      game_(game),
      graph_(graph),
      profile_(std::move(profile)),
      options_(options),
      local_rhs_(game.local_rhs()) {
  check_aux_form(variant_, options_.aux_form);
  StateLayout::make(variant_, options_.aux_form, game_, graph_);
  validate_profile(variant_, profile_, game_.agents());
  validate_schedule(options_.schedule);
}

void DistributedSolver::step(ExtendedState& s, long k) {
  if (s.variant != variant_ || s.aux_form != options_.aux_form)
    throw DimensionError("state does not match the solver variant");
  if (is_aggregative(variant_))
    step_aggregative(s, k);
  else
    step_network(s, k);
  check_finite(s, k);
}

void DistributedSolver::step_network(ExtendedState& s, long k) {
  const ExtendedState old = s;
  const int n = game_.total_dim();
  const int m = game_.constraints();
  const double c = profile_.c;
  const long batch = options_.exact_gradients ? 1 : batch_size(options_.schedule, k);

  Exchange estimates(graph_), duals(graph_);
  estimates.publish(old.primal);
  duals.publish(old.dual);

  RowMatrix coupled(game_.agents(), m);
  Eigen::RowVectorXd cons(n);
  VectorXd grad;
  for (int i = 0; i < game_.agents(); ++i) {
    const int off = game_.offset(i);
    const int ni = game_.dim(i);
    cons.setZero();
    for (const Neighbor& nb : graph_.neighbors(i))
      cons += nb.weight * (old.primal.row(i) - estimates.read(i, nb.node));

    const auto est = old.primal.row(i).transpose();
    const auto own = est.segment(off, ni);
    grad.resize(ni);
    if (options_.exact_gradients) {
      game_.sampler().exact_grad(i, own, est, grad);
    } else {
      Rng rng = agent_stream(options_.seed, i, k);
      sa_pseudogradient(game_, i, own, est, batch, rng, grad, options_.sampling);
    }

    const double a = profile_.alpha(i);
    s.primal.row(i) = old.primal.row(i) - a * c * cons;
    VectorXd x_next = own - a * (grad + game_.coupling(i).transpose() * old.dual.row(i).transpose() +
                                 c * cons.segment(off, ni).transpose());
    game_.box(i).clamp(x_next);
    s.primal.row(i).segment(off, ni) = x_next.transpose();
    coupled.row(i) = (game_.coupling(i) * (2.0 * x_next - own)).transpose();
  }
  audit_violations_ += estimates.violations();
  update_aux_and_dual(s, old, coupled, duals);
}

void DistributedSolver::step_aggregative(ExtendedState& s, long k) {
  const ExtendedState old = s;
  const int n = game_.common_dim();
  const int m = game_.constraints();
  const double c = profile_.c;
  const double gamma = profile_.gamma;
  const long batch = options_.exact_gradients ? 1 : batch_size(options_.schedule, k);

  Exchange aggregates(graph_), duals(graph_);
  aggregates.publish(old.primal + old.tracking);
  duals.publish(old.dual);

  RowMatrix coupled(game_.agents(), m);
  Eigen::RowVectorXd cons(n);
  VectorXd grad(n);
  for (int i = 0; i < game_.agents(); ++i) {
    const Eigen::RowVectorXd u_i = aggregates.read(i, i);
    cons.setZero();
    for (const Neighbor& nb : graph_.neighbors(i)) cons += nb.weight * (u_i - aggregates.read(i, nb.node));

    const VectorXd x_i = old.primal.row(i).transpose();
    const VectorXd u = u_i.transpose();
    if (options_.exact_gradients) {
      game_.sampler().exact_grad(i, x_i, u, grad);
    } else {
      Rng rng = agent_stream(options_.seed, i, k);
      sa_pseudogradient(game_, i, x_i, u, batch, rng, grad, options_.sampling);
    }
    VectorXd x_next = x_i - profile_.alpha(i) *
                                (grad + game_.coupling(i).transpose() * old.dual.row(i).transpose() +
                                 c * cons.transpose());
    game_.box(i).clamp(x_next);
    s.primal.row(i) = x_next.transpose();
    s.tracking.row(i) = old.tracking.row(i) - gamma * cons;
    coupled.row(i) = (game_.coupling(i) * (2.0 * x_next - x_i)).transpose();
  }
  audit_violations_ += aggregates.violations();
  update_aux_and_dual(s, old, coupled, duals);
}

void DistributedSolver::update_aux_and_dual(ExtendedState& s, const ExtendedState& old,
                                            const RowMatrix& coupled, Exchange& duals) {
  const int agents = game_.agents();
  const int m = game_.constraints();
  const double sign =
      is_edge(variant_) && options_.edge_dual == EdgeDualSign::printed ? -1.0 : 1.0;
  RowMatrix reflected_term(agents, m);

  if (options_.aux_form == AuxForm::edge_v) {
    for (int l = 0; l < graph_.edge_count(); ++l) {
      const Edge& e = graph_.edges()[l];
      const Eigen::RowVectorXd diff = duals.read(e.tail, e.tail) - duals.read(e.tail, e.head);
      s.aux.row(l) = old.aux.row(l) - profile_.nu(0) * std::sqrt(e.weight) * diff;
    }
    for (int i = 0; i < agents; ++i) {
      reflected_term.row(i).setZero();
      for (const Neighbor& nb : graph_.neighbors(i)) {
        const double v_entry = (graph_.edges()[nb.edge].tail == i ? 1.0 : -1.0) * std::sqrt(nb.weight);
        reflected_term.row(i) += v_entry * (2.0 * s.aux.row(nb.edge) - old.aux.row(nb.edge));
      }
    }
  } else {
    for (int i = 0; i < agents; ++i) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(m);
      for (const Neighbor& nb : graph_.neighbors(i))
        acc += nb.weight * (duals.read(i, i) - duals.read(i, nb.node));
      s.aux.row(i) = old.aux.row(i) - profile_.nu(i) * acc;
    }
    const RowMatrix reflected = 2.0 * s.aux - old.aux;
    if (options_.aux_form == AuxForm::edge_z) {
      reflected_term = reflected;
    } else {
      Exchange second(graph_);
      second.publish(reflected);
      for (int i = 0; i < agents; ++i) {
        reflected_term.row(i).setZero();
        for (const Neighbor& nb : graph_.neighbors(i))
          reflected_term.row(i) += nb.weight * (second.read(i, i) - second.read(i, nb.node));
      }
      audit_violations_ += second.violations();
    }
  }
  audit_violations_ += duals.violations();

  for (int i = 0; i < agents; ++i) {
    const Eigen::RowVectorXd raw =
        old.dual.row(i) + profile_.delta(i) * (coupled.row(i) - local_rhs_.transpose() +
                                               sign * reflected_term.row(i));
    s.dual.row(i) = raw.cwiseMax(0.0);
  }
}

RunResult DistributedSolver::run(ExtendedState initial, const RunControls& rc) {
  RunResult out;
  out.state = std::move(initial);
  if (rc.max_iters <= 0) return out;
  out.trace.records.reserve(static_cast<std::size_t>(std::min<long>(rc.max_iters, 1 << 20)));

  std::optional<ExtendedOperator> op;
  std::optional<Preconditioner> phi;
  const bool residual = rc.residual && !(is_edge(variant_) && options_.edge_dual == EdgeDualSign::printed);
  if (residual) {
    op.emplace(variant_, game_, graph_, profile_.c);
    phi.emplace(op->assemble(profile_));
  }

  const auto start = std::chrono::steady_clock::now();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (long k = 1; k <= rc.max_iters; ++k) {
    const ExtendedState prev = out.state;
    step(out.state, k);
    const VectorXd x = out.state.decisions(game_);
    const ConsensusGaps gaps = consensus_gaps(out.state);
    IterationRecord r;
    r.iter = k;
    r.dist_to_ref = rc.reference ? (x - *rc.reference).norm() : nan;
    r.primal_consensus_gap = gaps.primal;
    r.dual_consensus_gap = gaps.dual;
    r.constraint_violation = constraint_violation(game_, x);
    r.residual = residual ? op->residual(*phi, to_operator_layout(out.state, graph_)) : nan;
    r.batch_size = options_.exact_gradients ? 1 : batch_size(options_.schedule, k);
    r.wallclock_ms =
        rc.record_wallclock
            ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()
            : 0.0;
    out.trace.records.push_back(r);
    out.iterations = k;
    const double increment = max_abs_diff(out.state, prev);
    if (std::max({increment, gaps.dual, r.constraint_violation}) < rc.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

namespace {

bool probe_stable(Variant variant, const GameModel& game, const Graph& graph,
                  const StepSizeProfile& profile, long iters) {
  SolverOptions o;
  o.aux_form = default_aux_form(variant);
  o.exact_gradients = true;
  DistributedSolver solver(variant, game, graph, profile, o);
  ExtendedState s = init_state(variant, o.aux_form, game, graph, 0);
  const double bound = 1e8 * std::max(1.0, max_abs(s));
  double early = std::numeric_limits<double>::infinity();
  double last = 0.0;
  try {
    for (long k = 1; k <= iters; ++k) {
      const ExtendedState prev = s;
      solver.step(s, k);
      last = max_abs_diff(s, prev);
      if (max_abs(s) > bound) return false;
      if (k == iters / 2) early = last;
    }
  } catch (const DivergenceError&) {
    return false;
  }
  // a bounded oscillation keeps a constant increment; demand real decay
  return last <= 0.1 * early + 1e-12;
}

}  // namespace

CalibrationResult calibrate_profile(Variant variant, const GameModel& game, const Graph& graph,
                                    const StepSizeProfile& base, long probe_iters) {
  const StepSizeBounds bounds = step_size_bounds(variant, graph, game, base.tau);
  auto with_scale = [&](double s) {
    StepSizeProfile p = base;
    p.alpha = s * bounds.alpha;
    return p;
  };
  CalibrationResult r;
  r.ceiling_stable = probe_stable(variant, game, graph, with_scale(1.0), probe_iters);
  if (r.ceiling_stable) {
    r.threshold_scale = 1.0;
  } else {
    // Tiny scales look unstable too (slow, not divergent), so scan down
    // from the ceiling and stop at the first scale that settles.
    constexpr double ratio = 0.8;
    double fail = 1.0, pass = 0.0;
    for (double t = ratio; t >= 1e-5; t *= ratio) {
      if (probe_stable(variant, game, graph, with_scale(t), probe_iters)) {
        pass = t;
        break;
      }
      fail = t;
    }
    if (pass == 0.0) throw Error("step-size calibration found no stable scale");
    for (int it = 0; it < 6; ++it) {
      const double mid = std::sqrt(pass * fail);
      if (probe_stable(variant, game, graph, with_scale(mid), probe_iters))
        pass = mid;
      else
        fail = mid;
    }
    r.threshold_scale = pass;
  }
  r.profile = with_scale(base.safety * r.threshold_scale);
  return r;
}

StepSizeProfile theory_profile(Variant variant, const GameModel& game, const Graph& graph,
                               const StepSizeProfile& base) {
  const TheoryConstants th =
      theory_constants(variant, game.constants(), graph.spectral_summary(), game.agents(), base.c);
  if (!(th.beta > 0.0)) throw Error("theory step sizes need a positive beta");
  ExtendedOperator op(variant, game, graph, base.c);
  auto holds = [&](double t) {
    const Preconditioner phi = op.assemble(base.scaled(t));
    return metric_diagnostic(phi, th).holds;
  };
  if (holds(1.0)) return base;
  double lo = 1e-14, hi = 1.0;
  if (!holds(lo)) throw Error("no step-size scale satisfies the metric condition");
  for (int it = 0; it < 200 && hi / lo > 1.0001; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (holds(mid))
      lo = mid;
    else
      hi = mid;
  }
  return base.scaled(0.9 * lo);
}

}  // namespace sgne
