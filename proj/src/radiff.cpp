#include "padj/radiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace padj::radiff {

void RadDiffConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("RadDiffConfig: ") + name + " must be positive");
    }
  };
  if (n < 3) throw std::invalid_argument("RadDiffConfig: n must be at least 3");
  positive(length, "length");
  positive(c, "c");
  positive(a, "a");
  positive(rho, "rho");
  positive(cv, "cv");
  positive(sigma_coef, "sigma_coef");
  positive(t_drive, "t_drive");
  positive(t_floor, "t_floor");
  positive(t_init, "t_init");
}

double sigma_a(const RadDiffConfig& cfg, double t) {
  const double tf = std::max(t, cfg.t_floor);
  return cfg.sigma_coef / (tf * tf * tf);
}

double diffusion_coefficient(const RadDiffConfig& cfg, double t) {
  return (cfg.c / 3.0) / sigma_a(cfg, t);
}

namespace {

template <class Body>
void for_each_index(Exec exec, std::size_t n, Body&& body) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
}

/// Material and interface coefficients for one temperature vector.
struct Coefficients {
  Vector sigma, dsigma;       // per cell
  Vector h, dh_left, dh_right;  // per interior face f between cells f and f+1
  long floor_hits = 0;
};

Coefficients coefficients(const RadDiffConfig& cfg, std::span<const double> t) {
  const std::size_t n = cfg.n;
  if (t.size() != n) throw std::invalid_argument("radiff: temperature vector has wrong length");
  Coefficients co;
  co.sigma.resize(n);
  co.dsigma.resize(n);
  Vector diff(n), ddiff(n);
  for_each_index(cfg.exec, n, [&](std::size_t i) {
    const double ti = t[i];
    const bool floored = !(ti > cfg.t_floor);
    const double tf = floored ? cfg.t_floor : ti;
    const double s = cfg.sigma_coef / (tf * tf * tf);
    co.sigma[i] = s;
    co.dsigma[i] = floored ? 0.0 : -3.0 * s / tf;
    diff[i] = (cfg.c / 3.0) / s;
    ddiff[i] = floored ? 0.0 : 3.0 * diff[i] / tf;
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(t[i])) {
      std::ostringstream os;
      os << "radiff: non-finite temperature in cell " << i;
      throw std::domain_error(os.str());
    }
    if (!(t[i] > cfg.t_floor)) ++co.floor_hits;
  }

  const double dx = cfg.dx();
  co.h.resize(n - 1);
  co.dh_left.resize(n - 1);
  co.dh_right.resize(n - 1);
  for_each_index(cfg.exec, n - 1, [&](std::size_t f) {
    const double dl = diff[f], dr = diff[f + 1];
    const double sum = dl + dr;
    co.h[f] = 2.0 * dl * dr / (sum * dx);
    co.dh_left[f] = 2.0 * dr * dr / (sum * sum * dx) * ddiff[f];
    co.dh_right[f] = 2.0 * dl * dl / (sum * sum * dx) * ddiff[f + 1];
  });
  return co;
}

}  // namespace

AssembledOps assemble(const RadDiffConfig& cfg, std::span<const double> t) {
  cfg.validate();
  const std::size_t n = cfg.n;
  const double dx = cfg.dx();
  const Coefficients co = coefficients(cfg, t);
  AssembledOps ops{BandMatrix::diagonal(Vector(n, dx)),
                   BandMatrix::diagonal(Vector(n, cfg.rho * cfg.cv * dx)), BandMatrix(n, n, 1, 1),
                   BandMatrix(n, n, 0, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    ops.sigma.at(i, i) = dx * co.sigma[i];
    if (i + 1 < n) {
      ops.k.at(i, i + 1) = co.h[i];
      ops.k.at(i, i) -= co.h[i];
    }
    if (i > 0) {
      ops.k.at(i, i - 1) = co.h[i - 1];
      ops.k.at(i, i) -= co.h[i - 1];
    }
  }
  return ops;
}

Vector emission(const RadDiffConfig& cfg, std::span<const double> t1, std::span<const double> t2) {
  const double dx = cfg.dx(), ac = cfg.ac();
  Vector em(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double t4 = t2[i] * t2[i] * t2[i] * t2[i];
    em[i] = dx * ac * sigma_a(cfg, t1[i]) * t4;
  }
  return em;
}

// ---------------------------------------------------------------------------
// Field

RadDiffField::RadDiffField(RadDiffConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  BlockVec diag(cfg_.shape());
  for (double& v : diag.x()) v = cfg_.dx();
  for (double& v : diag.y()) v = cfg_.rho * cfg_.cv * cfg_.dx();
  mass_ = std::make_shared<DiagonalPairing>(std::move(diag));
}

void RadDiffField::mask_pinned(BlockVec& v) const {
  if (e_pinned(0)) v.x()[0] = 0.0;
  if (t_pinned(0)) v.y()[0] = 0.0;
}

BlockVec RadDiffField::value(const FieldPoint& at) const {
  require_shape(at.u1, shape(), "RadDiffField::value");
  require_shape(at.u2, shape(), "RadDiffField::value");
  const Coefficients co = coefficients(cfg_, at.u1.y());
  floor_hits_ += co.floor_hits;
  const std::size_t n = cfg_.n;
  const double dx = cfg_.dx(), ac = cfg_.ac();
  const Vector& e2 = at.u2.x();
  const Vector& t2 = at.u2.y();
  BlockVec out(shape());
  for_each_index(cfg_.exec, n, [&](std::size_t i) {
    const double t4 = t2[i] * t2[i] * t2[i] * t2[i];
    const double exchange = dx * co.sigma[i] * (e2[i] - ac * t4);
    if (!e_pinned(i)) {
      double flux = 0.0;
      if (i + 1 < n) flux += co.h[i] * (e2[i + 1] - e2[i]);
      if (i > 0) flux -= co.h[i - 1] * (e2[i] - e2[i - 1]);
      out.x()[i] = flux - exchange;
    }
    if (!t_pinned(i)) out.y()[i] = exchange;
  });
  return out;
}

BlockOp RadDiffField::jacobian(Slot slot, const FieldPoint& at) const {
  require_shape(at.u1, shape(), "RadDiffField::jacobian");
  require_shape(at.u2, shape(), "RadDiffField::jacobian");
  const Coefficients co = coefficients(cfg_, at.u1.y());
  floor_hits_ += co.floor_hits;
  const std::size_t n = cfg_.n;
  const double dx = cfg_.dx(), ac = cfg_.ac();
  const Vector& e2 = at.u2.x();
  const Vector& t2 = at.u2.y();

  if (slot == Slot::second) {
    BlockOp j{BandMatrix(n, n, 1, 1), BandMatrix(n, n, 0, 0), BandMatrix(n, n, 0, 0),
              BandMatrix(n, n, 0, 0)};
    for_each_index(cfg_.exec, n, [&](std::size_t i) {
      const double demit = 4.0 * dx * ac * co.sigma[i] * t2[i] * t2[i] * t2[i];
      if (!e_pinned(i)) {
        double diag = -dx * co.sigma[i];
        if (i + 1 < n) {
          j.xx.at(i, i + 1) = co.h[i];
          diag -= co.h[i];
        }
        if (i > 0) {
          j.xx.at(i, i - 1) = co.h[i - 1];
          diag -= co.h[i - 1];
        }
        j.xx.at(i, i) = diag;
        j.xy.at(i, i) = demit;
      }
      if (!t_pinned(i)) {
        j.yx.at(i, i) = dx * co.sigma[i];
        j.yy.at(i, i) = -demit;
      }
    });
    return j;
  }

  // Slot 1 enters only through T1: K(T1), Sigma_a(T1) and the opacity in Em.
  BlockOp j{BandMatrix::zeros(n, n), BandMatrix(n, n, 1, 1), BandMatrix::zeros(n, n),
            BandMatrix(n, n, 0, 0)};
  for_each_index(cfg_.exec, n, [&](std::size_t i) {
    const double t4 = t2[i] * t2[i] * t2[i] * t2[i];
    const double dexchange = dx * co.dsigma[i] * (e2[i] - ac * t4);
    if (!e_pinned(i)) {
      double diag = -dexchange;
      if (i + 1 < n) {
        const double grad = e2[i + 1] - e2[i];
        diag += co.dh_left[i] * grad;
        j.xy.at(i, i + 1) = co.dh_right[i] * grad;
      }
      if (i > 0) {
        const double grad = e2[i] - e2[i - 1];
        diag -= co.dh_right[i - 1] * grad;
        j.xy.at(i, i - 1) = -co.dh_left[i - 1] * grad;
      }
      j.xy.at(i, i) = diag;
    }
    if (!t_pinned(i)) j.yy.at(i, i) = dexchange;
  });
  return j;
}

BlockVec RadDiffField::jvp(Slot slot, const FieldPoint& at, const BlockVec& du) const {
  require_shape(du, shape(), "RadDiffField::jvp");
  return jacobian(slot, at).apply(du);
}

BlockVec RadDiffField::vjp(Slot slot, const FieldPoint& at, const BlockVec& w) const {
  require_shape(w, shape(), "RadDiffField::vjp");
  return jacobian(slot, at).apply_transpose(w);
}

// ---------------------------------------------------------------------------
// Problem setup and diagnostics

BlockVec equilibrium_state(const RadDiffConfig& cfg, std::span<const double> t) {
  if (t.size() != cfg.n) throw std::invalid_argument("equilibrium_state: wrong length");
  const double ac = cfg.ac();
  BlockVec u(cfg.shape());
  for (std::size_t i = 0; i < cfg.n; ++i) {
    u.y()[i] = t[i];
    u.x()[i] = ac * t[i] * t[i] * t[i] * t[i];
  }
  if (cfg.drive) {
    u.y()[0] = cfg.t_drive;
    if (cfg.e_boundary == EBoundary::dirichlet) u.x()[0] = ac * std::pow(cfg.t_drive, 4);
  }
  return u;
}

MarshakProblem marshak_problem(const RadDiffConfig& cfg) {
  auto field = std::make_shared<RadDiffField>(cfg);
  return {field, equilibrium_state(cfg, Vector(cfg.n, cfg.t_init))};
}

TerminalCost terminal_cost(const RadDiffField& field, const BlockVec& state, const BlockVec& target) {
  require_shape(state, field.shape(), "terminal_cost (state)");
  require_shape(target, field.shape(), "terminal_cost (target)");
  const double dx = field.config().dx();
  TerminalCost cost;
  cost.derivative = state - target;
  field.mask_pinned(cost.derivative);
  for (std::size_t i = 0; i < field.config().n; ++i) {
    const double de = cost.derivative.x()[i], dt = cost.derivative.y()[i];
    cost.c_e += 0.5 * dx * de * de;
    cost.c_t += 0.5 * dx * dt * dt;
  }
  cost.derivative *= dx;
  return cost;
}

double wavefront_position(const RadDiffConfig& cfg, const BlockVec& state, double threshold) {
  const Vector x = cell_centres(cfg);
  double front = 0.0;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    if (state.y()[i] > threshold) front = x[i];
  }
  return front;
}

Vector cell_centres(const RadDiffConfig& cfg) {
  Vector x(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) x[i] = (static_cast<double>(i) + 0.5) * cfg.dx();
  return x;
}

}  // namespace padj::radiff
