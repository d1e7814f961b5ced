"""Coarse and fine propagators: implicit theta methods and the exact solver.

A propagator maps ``(t0, t1, u0)`` to the state at ``t1``.  The theta family
covers Backward Euler (theta=1, order 1) and Crank-Nicolson (theta=1/2,
order 2); the exact adapter wraps the closed-form linear solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import LinearScalarModel, SplitIvp, exact_linear_propagate
from .signals import Side


class NewtonError(RuntimeError):
    """Implicit stage solve failed to converge."""


class NonFiniteStateError(RuntimeError):
    """A propagated state stopped being finite."""


NEWTON_TOL = 1e-13
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 30


class Propagator:
    """Common protocol: immutable, pure, concurrency-safe."""

    ivp: SplitIvp

    def propagate(self, t0: float, t1: float, u0: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def order(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ExactLinearPropagator(Propagator):
    """Exact segment-composed solution of a scalar linear model."""

    model: LinearScalarModel

    @property
    def ivp(self) -> SplitIvp:  # type: ignore[override]
        return self.model.ivp()

    @property
    def order(self) -> int:
        return 0  # exact: no truncation order

    def propagate(self, t0, t1, u0):
        u0 = np.atleast_1d(np.asarray(u0, dtype=float))
        return np.array([exact_linear_propagate(self.model, t0, t1, float(u0[0]))])


@dataclass(frozen=True, eq=False)
class ThetaPropagator(Propagator):
    """One-step theta method with a fixed number of equal substeps.

    Each substep solves

        u1 = u0 + h * (theta * f(t1, u1) + (1 - theta) * f(t0, u0))

    with the discontinuous input evaluated one-sidedly when a substep
    boundary coincides with a switching instant: the value governing the
    substep's interior is used (right limit at the left endpoint, left limit
    at the right endpoint), so single-step methods restart cleanly at jumps
    that lie on the grid.

    With ``discontinuity_aligned`` the substep grid is additionally split at
    every switching instant of the input.
    """

    ivp: SplitIvp
    theta: float = 1.0
    substeps: int = 1
    discontinuity_aligned: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def order(self) -> int:
        return 2 if self.theta == 0.5 else 1

    def _grid(self, t0: float, t1: float) -> np.ndarray:
        grid = np.linspace(t0, t1, self.substeps + 1)
        if not self.discontinuity_aligned:
            return grid
        switches = self.ivp.input_switching_times(t0, t1)
        if switches.size == 0:
            return grid
        merged = np.union1d(grid, switches)
        # drop near-duplicates created by roundoff-level coincidences
        keep = np.concatenate([[True], np.diff(merged) > 1e-13 * (t1 - t0)])
        return merged[keep]

    def propagate(self, t0, t1, u0):
        if not t0 < t1:
            raise ValueError(f"need t0 < t1, got ({t0}, {t1})")
        u = np.atleast_1d(np.asarray(u0, dtype=float)).copy()
        grid = self._grid(t0, t1)
        for s, e in zip(grid, grid[1:]):
            u = self._step(float(s), float(e), u)
            if not np.all(np.isfinite(u)):
                raise NonFiniteStateError(f"non-finite state after step ending at t={e}")
        return u

    def _step(self, s: float, e: float, u: np.ndarray) -> np.ndarray:
        h = e - s
        if h <= 0.0:
            raise ValueError("degenerate substep")
        ivp = self.ivp
        th = self.theta
        p_s = ivp.injection @ ivp.input_vector(s, Side.RIGHT_LIMIT)
        p_e = ivp.injection @ ivp.input_vector(e, Side.LEFT_LIMIT)

        if ivp.smooth_matrix is not None:
            A = ivp.smooth_matrix
            if ivp.dim == 1:
                a00 = float(A[0, 0])
                num = u[0] + h * ((1.0 - th) * (a00 * u[0] + p_s[0]) + th * p_e[0])
                with np.errstate(divide="ignore", invalid="ignore"):
                    return np.array([np.float64(num) / np.float64(1.0 - h * th * a00)])
            rhs = u + h * ((1.0 - th) * (A @ u + p_s) + th * p_e)
            return np.linalg.solve(np.eye(ivp.dim) - h * th * A, rhs)

        # nonlinear smooth part: damped Newton on the implicit relation
        g = u + h * ((1.0 - th) * (ivp.smooth_rhs(s, u) + p_s) + th * p_e)
        if th == 0.0:
            return g

        def residual(x):
            return x - g - h * th * ivp.smooth_rhs(e, x)

        x = u.copy()
        r = residual(x)
        for _ in range(NEWTON_MAX_ITER):
            rnorm = float(np.max(np.abs(r)))
            if rnorm <= NEWTON_TOL:
                return x
            if ivp.smooth_jac is not None:
                J = ivp.smooth_jac(e, x)
            else:
                J = _fd_jacobian(lambda y: ivp.smooth_rhs(e, y), x)
            step = np.linalg.solve(np.eye(ivp.dim) - h * th * J, -r)
            lam = 1.0
            for _ in range(NEWTON_MAX_HALVINGS):
                x_new = x + lam * step
                r_new = residual(x_new)
                if float(np.max(np.abs(r_new))) < rnorm:
                    break
                lam *= 0.5
            else:
                raise NewtonError(f"damping exhausted at t={e}")
            x, r = x_new, r_new
        if float(np.max(np.abs(r))) <= NEWTON_TOL:
            return x
        raise NewtonError(f"no convergence after {NEWTON_MAX_ITER} iterations at t={e}")


def _fd_jacobian(f, x: np.ndarray) -> np.ndarray:
    n = x.size
    fx = f(x)
    J = np.empty((n, n))
    for j in range(n):
        dx = 1e-8 * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += dx
        J[:, j] = (f(xp) - fx) / dx
    return J


def parse_propagator(spec: str, ivp: SplitIvp, model: LinearScalarModel | None = None) -> Propagator:
    """Build a propagator from its CLI name: ``be[:substeps=1]``, ``cn``, ``exact``."""
    head, _, body = spec.strip().partition(":")
    kv = {}
    for tok in body.split(","):
        if tok:
            k, v = tok.split("=", 1)
            kv[k.strip()] = v.strip()
    substeps = int(kv.get("substeps", 1))
    aligned = kv.get("aligned", "0") in ("1", "true", "yes")
    if head == "be":
        return ThetaPropagator(ivp, theta=1.0, substeps=substeps, discontinuity_aligned=aligned)
    if head == "cn":
        return ThetaPropagator(ivp, theta=0.5, substeps=substeps, discontinuity_aligned=aligned)
    if head == "exact":
        if model is None:
            raise ValueError("exact propagator needs a scalar linear model")
        return ExactLinearPropagator(model.with_signal(ivp.input_signals[0]))
    raise ValueError(f"unknown propagator {spec!r}")


@dataclass
class OrderProbe:
    """Result of a local-truncation-order measurement."""

    slope: float
    dts: list[float]
    errors: list[float]
    floor_hit: bool


def local_order_probe(
    prop: Propagator,
    reference: Propagator,
    t_start: float = 0.0,
    u_start: np.ndarray | None = None,
    n_points: int = 7,
    dt_max: float | None = None,
    floor: float = 1e-15,
) -> OrderProbe:
    """Fit the decay of the one-step defect against an exact reference.

    Measures ``||reference(t0+dt) - prop(t0+dt)||`` from a common state over a
    geometric dt ladder; the log-log slope estimates the local truncation
    order (scheme order + 1) on smooth inputs.  Points at or below ``floor``
    are flagged and excluded; if fewer than two points remain the slope is NaN.
    """
    ivp = prop.ivp
    u0 = ivp.u0 if u_start is None else np.atleast_1d(np.asarray(u_start, dtype=float))
    span = dt_max if dt_max is not None else (ivp.t_end - t_start) / 16.0
    dts, errs = [], []
    for j in range(n_points):
        dt = span / 2.0**j
        ue = reference.propagate(t_start, t_start + dt, u0)
        ua = prop.propagate(t_start, t_start + dt, u0)
        dts.append(dt)
        errs.append(float(np.max(np.abs(ue - ua))))
    good = [(d, e) for d, e in zip(dts, errs) if e > floor]
    floor_hit = len(good) < len(dts)
    if len(good) < 2:
        return OrderProbe(math.nan, dts, errs, True)
    xs = np.log([d for d, _ in good])
    ys = np.log([e for _, e in good])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return OrderProbe(slope, dts, errs, floor_hit)
