"""Quantum probability, symmetrized currents, and lambda-trajectory integration.

The velocity field is v_ell = J_ell / P where P is the expectation of the
product of cell projectors and J_ell is the (ordering-averaged) expectation
of the current operator sandwiched between the other beables' projectors.
P is constant and J_ell affine in lambda_ell inside a cell, so the ODE
right-hand side is piecewise smooth with jumps only at half-integer cell
boundaries. Integration therefore runs segment by segment with frozen cell
assignments, an embedded Dormand-Prince 4(5) pair, and boundary-crossing
events located to 1e-12 in lambda before the cells are updated and the
integration restarts.

Everything is evaluated in the Hamiltonian eigenbasis: states advance by
pure phases and the per-cell operator blocks are rotated once when a
VelocityField is built.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .beables import BeableSet, LambdaConfig, cell_index, current_operator
from .errors import InputError, NodeError, NumericError
from .linalg import Propagator, QuantumState

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-11
DEFAULT_NODE_FLOOR = 1e-12
CROSSING_TOL = 1e-12
CURRENT_IMAG_TOL = 1e-9
MAX_STEPS = 1_000_000


class Symmetrization(str, Enum):
    """How the current's operator ordering is made real."""

    SYMMETRIC_AVERAGE = "symmetric_average"
    ORDERED_REAL_PART = "ordered_real_part"


class TrajectoryStatus(str, Enum):
    COMPLETED = "completed"
    NODE_ABORTED = "node_aborted"


def _subset_weights(n_beables: int) -> list:
    """Weight of placing k of the other L-1 projectors left of the current.

    Averaging over all L! orderings of the L operators in the braces gives
    weight k! (L-1-k)! / L! to each left-subset of size k; for L = 3 these
    are 2/6, 1/6, 1/6, 2/6.
    """
    total = math.factorial(n_beables)
    return [
        math.factorial(k) * math.factorial(n_beables - 1 - k) / total
        for k in range(n_beables)
    ]


def _resolve_cells(beable_set: BeableSet, cells) -> tuple:
    out = []
    for ell, b in enumerate(beable_set):
        n = int(cells[ell])
        if n != cells[ell] or not (0 <= n < b.n_cells):
            raise InputError(
                f"cell index {cells[ell]} out of range 0..{b.n_cells - 1} "
                f"for beable '{b.label}'"
            )
        out.append(n)
    if len(cells) != len(beable_set):
        raise InputError("one cell index per beable is required")
    return tuple(out)


def _lambda_values(beable_set: BeableSet, lambdas, strict: bool = False) -> np.ndarray:
    """Coerce a lambda vector. strict=True enforces the half-open trajectory
    domain; otherwise the closed top boundary stays evaluable (boundary
    values like L = identity and J = 0 live there) and any true range
    violation surfaces through cell_index."""
    if isinstance(lambdas, LambdaConfig):
        return lambdas.values
    if strict:
        return LambdaConfig(lambdas, beable_set).values
    v = np.asarray(lambdas, dtype=float)
    if v.ndim != 1 or v.size != len(beable_set):
        raise InputError(
            f"lambda vector must have length {len(beable_set)}, got shape {v.shape}"
        )
    return v


def quantum_probability(state: QuantumState, beable_set: BeableSet, cells) -> float:
    """P(cells, t) = <t| prod_ell P_ell(n_ell) |t>.

    Real up to roundoff because the projectors commute; lies in
    [-1e-10, 1 + 1e-10] and sums to 1 over all cell tuples.
    """
    if state.dim != beable_set.dim:
        raise InputError(f"dimension mismatch: state {state.dim}, set {beable_set.dim}")
    cells = _resolve_cells(beable_set, cells)
    vec = state.amplitudes
    for ell, b in enumerate(beable_set):
        vec = b.projectors[cells[ell]].entries @ vec
    p = complex(np.vdot(state.amplitudes, vec))
    if abs(p.imag) > 1e-10:
        raise NumericError(f"probability has imaginary part {p.imag:.3e}")
    if not (-1e-10 <= p.real <= 1.0 + 1e-10):
        raise NumericError(f"probability {p.real:.12g} outside [0, 1]")
    return p.real


def all_cell_tuples(beable_set: BeableSet) -> list:
    """Every joint cell assignment, in row-major (last index fastest) order."""
    return list(itertools.product(*(range(k) for k in beable_set.cell_counts)))


def quantum_distribution(state: QuantumState, beable_set: BeableSet):
    """Exact distribution over all cell tuples; checks it sums to 1."""
    tuples = all_cell_tuples(beable_set)
    probs = np.array([quantum_probability(state, beable_set, c) for c in tuples])
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-8:
        raise NumericError(f"cell-tuple probabilities sum to {total:.12g}, not 1")
    return tuples, probs


def symmetrized_current(state: QuantumState, beable_set: BeableSet, ell: int,
                        lambdas, prop: Propagator,
                        symmetrization: Symmetrization = Symmetrization.SYMMETRIC_AVERAGE,
                        ) -> float:
    """J_ell(Lambda, t): ordering-averaged current expectation (reference path).

    For the symmetric average, each subset A of the other beables' projectors
    contributes weight |A|! (L-1-|A|)! / L! with the subset applied left of
    the current operator and the complement right. The averaged operator is
    Hermitian, so the imaginary residue must stay below 1e-9 and is asserted
    before truncation. The ordered variant takes the real part of the single
    canonical ordering instead.
    """
    lam = _lambda_values(beable_set, lambdas)
    if state.dim != beable_set.dim:
        raise InputError(f"dimension mismatch: state {state.dim}, set {beable_set.dim}")
    ell = int(ell)
    n_b = len(beable_set)
    if not 0 <= ell < n_b:
        raise InputError(f"beable index {ell} out of range")
    j_mat = current_operator(beable_set[ell], lam[ell], prop).entries
    psi = state.amplitudes
    others = [m for m in range(n_b) if m != ell]
    proj = {m: beable_set[m].projectors[cell_index(beable_set[m], lam[m])].entries
            for m in others}

    if symmetrization is Symmetrization.ORDERED_REAL_PART:
        left = psi.copy()
        for m in reversed([m for m in others if m < ell]):
            left = proj[m] @ left
        right = psi.copy()
        for m in reversed([m for m in others if m > ell]):
            right = proj[m] @ right
        return complex(np.vdot(left, j_mat @ right)).real

    weights = _subset_weights(n_b)
    value = 0.0 + 0.0j
    for mask in range(1 << len(others)):
        left = psi
        right = psi
        size = 0
        for i, m in enumerate(others):
            if mask >> i & 1:
                left = proj[m] @ left
                size += 1
            else:
                right = proj[m] @ right
        value += weights[size] * complex(np.vdot(left, j_mat @ right))
    if abs(value.imag) > CURRENT_IMAG_TOL:
        raise NumericError(
            f"symmetrized current has imaginary part {value.imag:.3e} "
            f"(must be <= {CURRENT_IMAG_TOL:g})"
        )
    return value.real


class VelocityField:
    """The deterministic guidance field v = J / P for one model.

    Immutable and shareable between trajectory workers. All per-cell
    operator blocks are pre-rotated into the Hamiltonian eigenbasis:
    with dE_jk = E_k - E_j, the current blocks are elementwise products
    ``i * P_jk * dE_jk`` because H is diagonal there.
    """

    def __init__(self, beable_set: BeableSet, propagator: Propagator,
                 symmetrization: Symmetrization = Symmetrization.SYMMETRIC_AVERAGE,
                 node_floor: float = DEFAULT_NODE_FLOOR):
        if beable_set.dim != propagator.dim:
            raise InputError(
                f"dimension mismatch: beables {beable_set.dim}, "
                f"propagator {propagator.dim}"
            )
        if node_floor < 0:
            raise InputError("node_floor must be non-negative")
        self.beable_set = beable_set
        self.propagator = propagator
        self.symmetrization = Symmetrization(symmetrization)
        self.node_floor = float(node_floor)

        v = propagator.basis
        e = propagator.energies
        phase_gap = e[None, :] - e[:, None]
        self._energies = e
        self._basis = v
        self.n_beables = len(beable_set)
        # rotated cell projectors, current slopes A = i[P, H] and offsets
        # B = i[sum_below, H], indexed [beable][cell]
        self._proj = []
        self._amat = []
        self._bmat = []
        for b in beable_set:
            pr, am, bm = [], [], []
            for n in range(b.n_cells):
                p_rot = v.conj().T @ b.projectors[n].entries @ v
                cum_rot = v.conj().T @ b._cum_below[n] @ v
                pr.append(p_rot)
                am.append(1j * p_rot * phase_gap)
                bm.append(1j * cum_rot * phase_gap)
            self._proj.append(pr)
            self._amat.append(am)
            self._bmat.append(bm)
        self._imag_tol = CURRENT_IMAG_TOL * max(1.0, float(np.max(np.abs(e))) if e.size else 1.0)
        self._tuple_cache = {}

    def state_coefficients(self, state: QuantumState) -> np.ndarray:
        """Expand a state in the Hamiltonian eigenbasis."""
        if state.dim != self.propagator.dim:
            raise InputError(
                f"dimension mismatch: state {state.dim}, field {self.propagator.dim}"
            )
        return self._basis.conj().T @ state.amplitudes

    def _chain(self, mats):
        if not mats:
            return None
        out = mats[0]
        for m in mats[1:]:
            out = out @ m
        return out

    def _tuple_ops(self, cells: tuple):
        """Projector product and per-component affine current blocks for one
        joint cell assignment; built on first use and cached."""
        ops = self._tuple_cache.get(cells)
        if ops is not None:
            return ops
        n_b = self.n_beables
        dim = self.propagator.dim
        proj = [self._proj[m][cells[m]] for m in range(n_b)]
        pi = self._chain(proj)
        affine = []
        for ell in range(n_b):
            a_blk = self._amat[ell][cells[ell]]
            b_blk = self._bmat[ell][cells[ell]]
            others = [m for m in range(n_b) if m != ell]
            if self.symmetrization is Symmetrization.ORDERED_REAL_PART:
                left = self._chain([proj[m] for m in others if m < ell])
                right = self._chain([proj[m] for m in others if m > ell])
                x_mat = self._sandwich(left, a_blk, right)
                y_mat = self._sandwich(left, b_blk, right)
            else:
                weights = _subset_weights(n_b)
                x_mat = np.zeros((dim, dim), dtype=complex)
                y_mat = np.zeros((dim, dim), dtype=complex)
                for mask in range(1 << len(others)):
                    size = 0
                    lmats, rmats = [], []
                    for i, m in enumerate(others):
                        if mask >> i & 1:
                            lmats.append(proj[m])
                            size += 1
                        else:
                            rmats.append(proj[m])
                    left = self._chain(lmats)
                    right = self._chain(rmats)
                    x_mat += weights[size] * self._sandwich(left, a_blk, right)
                    y_mat += weights[size] * self._sandwich(left, b_blk, right)
            affine.append((x_mat, y_mat))
        ops = (pi, affine)
        self._tuple_cache[cells] = ops
        return ops

    @staticmethod
    def _sandwich(left, mid, right):
        out = mid
        if left is not None:
            out = left @ out
        if right is not None:
            out = out @ right
        return out

    def probability(self, coeff: np.ndarray, cells: tuple) -> float:
        pi, _ = self._tuple_ops(cells)
        p = np.vdot(coeff, pi @ coeff)
        if abs(p.imag) > 1e-10:
            raise NumericError(f"probability has imaginary part {p.imag:.3e}")
        return p.real

    def currents(self, coeff: np.ndarray, lam, cells: tuple) -> np.ndarray:
        _, affine = self._tuple_ops(cells)
        sym = self.symmetrization is Symmetrization.SYMMETRIC_AVERAGE
        out = np.empty(self.n_beables)
        for ell in range(self.n_beables):
            x_mat, y_mat = affine[ell]
            offset = lam[ell] - cells[ell] + 0.5
            val = offset * np.vdot(coeff, x_mat @ coeff) + np.vdot(coeff, y_mat @ coeff)
            if sym and abs(val.imag) > self._imag_tol:
                raise NumericError(
                    f"current component {ell} has imaginary part {val.imag:.3e}"
                )
            out[ell] = val.real
        return out

    def velocities(self, coeff: np.ndarray, lam, cells: tuple, time: float) -> np.ndarray:
        p = self.probability(coeff, cells)
        if p <= self.node_floor:
            raise NodeError(cells, p, time)
        return self.currents(coeff, lam, cells) / p


def velocity(field: VelocityField, state: QuantumState, lambdas) -> np.ndarray:
    """v_ell = J_ell / P at the cells of the given lambda configuration.

    Raises NodeError (with the offending cell tuple and probability) when
    the configuration sits at or below the node floor.
    """
    lam = _lambda_values(field.beable_set, lambdas)
    cells = tuple(cell_index(b, lam[ell]) for ell, b in enumerate(field.beable_set))
    coeff = field.state_coefficients(state)
    return field.velocities(coeff, lam, cells, state.time)


# Dormand-Prince 5(4) tableau; the last stage row doubles as the 5th-order
# weights and the error row is b5 - b4.
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_DP_ERR = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _dp54_step(rhs, t, y, h, k1):
    """One Dormand-Prince step from (t, y). Returns (y_new, error, f(t+h, y_new)).

    The 7th stage input is the 5th-order solution itself, so its derivative
    comes out for free and feeds both the error estimate and the next step.
    """
    k = [k1]
    yi = y
    for i in range(1, 7):
        yi = y.copy()
        for j, a in enumerate(_DP_A[i]):
            if a != 0.0:
                yi += (h * a) * k[j]
        ti = t + h if i == 6 else t + _DP_C[i] * h
        k.append(rhs(ti, yi))
    y_new = yi
    err = np.zeros_like(y)
    for j, e in enumerate(_DP_ERR):
        if e != 0.0:
            err += (h * e) * k[j]
    return y_new, err, k[6]


@dataclass
class Trajectory:
    """Recorded samples of one integrated lambda trajectory.

    xis is derived from lambdas via each beable's eigenvalue map and never
    stored independently of it.
    """

    times: np.ndarray
    lambdas: np.ndarray
    xis: np.ndarray
    status: TrajectoryStatus
    seed: int | None = None
    abort_time: float | None = None
    abort_cells: tuple | None = None

    @property
    def final_lambdas(self) -> np.ndarray:
        return self.lambdas[-1]


class _GridResult:
    __slots__ = ("lambdas", "n_recorded", "status", "abort_time", "abort_cells")

    def __init__(self, lambdas, n_recorded, status, abort_time=None, abort_cells=None):
        self.lambdas = lambdas
        self.n_recorded = n_recorded
        self.status = status
        self.abort_time = abort_time
        self.abort_cells = abort_cells


def _escapes(y, cells):
    """Components strictly beyond their frozen cell, as (ell, boundary, excess)."""
    out = []
    for ell, n in enumerate(cells):
        if y[ell] > n + 0.5:
            out.append((ell, n + 0.5, y[ell] - (n + 0.5)))
        elif y[ell] < n - 0.5:
            out.append((ell, n - 0.5, (n - 0.5) - y[ell]))
    return out


def _hermite_first_contact(y0, y1, f0, f1, h, escapes):
    """Earliest boundary contact of the step's cubic Hermite interpolant.

    Scalar bisection per escaped component; returns (theta, ell, boundary).
    """
    best = (1.0, escapes[0][0], escapes[0][1])
    for ell, boundary, _ in escapes:
        c0 = y0[ell]
        c1 = h * f0[ell]
        c2 = 3.0 * (y1[ell] - y0[ell]) - h * (2.0 * f0[ell] + f1[ell])
        c3 = 2.0 * (y0[ell] - y1[ell]) + h * (f0[ell] + f1[ell])
        sign_out = 1.0 if y1[ell] > boundary else -1.0
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            val = c0 + mid * (c1 + mid * (c2 + mid * c3))
            if sign_out * (val - boundary) > 0.0:
                hi = mid
            else:
                lo = mid
        if hi < best[0]:
            best = (hi, ell, boundary)
    return best


def _integrate_on_grid(field: VelocityField, state0: QuantumState, lambda0,
                       record_times, rtol: float, atol: float) -> _GridResult:
    """Drive d lambda/dt = v segment by segment, recording at record_times.

    record_times must be monotone away from state0.time (either direction)
    and start at or beyond it; a leading time equal to state0.time records
    the initial configuration.
    """
    beable_set = field.beable_set
    t0 = state0.time
    y = np.array(_lambda_values(beable_set, lambda0, strict=True), dtype=float)
    n_b = len(beable_set)
    coeff0 = field.state_coefficients(state0)
    energies = field._energies

    record_times = np.asarray(record_times, dtype=float)
    n_rec = record_times.size
    rec = np.empty((n_rec, n_b))
    rec_i = 0
    if n_rec and record_times[0] == t0:
        rec[0] = y
        rec_i = 1
    if rec_i >= n_rec:
        return _GridResult(rec, rec_i, TrajectoryStatus.COMPLETED)

    sgn = 1.0 if record_times[-1] >= t0 else -1.0
    cells = tuple(cell_index(b, y[ell]) for ell, b in enumerate(beable_set))

    def rhs(t, lam):
        coeff = coeff0 * np.exp(energies * (-1j * (t - t0)))
        return field.velocities(coeff, lam, cells, t)

    t = t0
    try:
        f_now = rhs(t, y)
        # first step size from the local velocity scale
        span = abs(record_times[-1] - t0)
        h0 = 0.1 * span if span > 0 else 1e-3
        vmax = float(np.max(np.abs(f_now)))
        if vmax > 0:
            h0 = min(h0, 0.1 / vmax)
        h = sgn * max(h0, 1e-12)

        steps = 0
        while rec_i < n_rec:
            steps += 1
            if steps > MAX_STEPS:
                raise NumericError(f"integration exceeded {MAX_STEPS} steps")
            target = record_times[rec_i]
            clamped = False
            h_try = h
            if (t + h_try - target) * sgn >= 0.0:
                h_try = target - t
                clamped = True
            if abs(h_try) < 1e-15 * max(1.0, abs(t)):
                # target is numerically at t; record and move on
                rec[rec_i] = y
                rec_i += 1
                continue

            y_new, err, k_last = _dp54_step(rhs, t, y, h_try, f_now)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            enorm = float(np.sqrt(np.mean((err / scale) ** 2)))
            if enorm > 1.0:
                factor = max(0.2, 0.9 * enorm ** -0.2)
                h = h_try * factor
                if abs(h) < 1e-14 * max(1.0, abs(t)):
                    raise NumericError(
                        f"step size underflow at t = {t:.12g} (h = {h:.3e})"
                    )
                continue

            esc = _escapes(y_new, cells)
            if esc:
                t_ev, y_ev, crossed = _locate_event(
                    rhs, t, y, h_try, y_new, f_now, k_last, cells, esc)
                new_cells = list(cells)
                for ell, boundary in crossed:
                    up = boundary > cells[ell]
                    n_new = cells[ell] + (1 if up else -1)
                    if not 0 <= n_new < beable_set[ell].n_cells:
                        raise NumericError(
                            f"lambda[{ell}] reached the domain boundary "
                            f"{boundary:g} at t = {t_ev:.12g}; the boundary "
                            "current vanishes, so this indicates integrator escape"
                        )
                    new_cells[ell] = n_new
                t, y, cells = t_ev, y_ev, tuple(new_cells)
                f_now = rhs(t, y)
                continue

            t = target if clamped else t + h_try
            y = y_new
            f_now = rhs(t, y)
            if clamped:
                rec[rec_i] = y
                rec_i += 1
            else:
                if enorm == 0.0:
                    h = h_try * 5.0
                else:
                    h = h_try * min(5.0, max(0.2, 0.9 * enorm ** -0.2))
    except NodeError as node:
        return _GridResult(rec, rec_i, TrajectoryStatus.NODE_ABORTED,
                           abort_time=node.time, abort_cells=node.cells)
    return _GridResult(rec, rec_i, TrajectoryStatus.COMPLETED)


def _locate_event(rhs, t, y, h, y_new, f0, f1, cells, escapes):
    """Find the first cell-boundary crossing inside an accepted step.

    Bisection on the step's cubic Hermite interpolant of lambda(t) seeds the
    crossing time, a short Newton loop on genuine sub-steps polishes the
    crossing component to within 1e-12 of its half-integer boundary, and a
    plain step-size bisection covers pathological cases. Returns
    (t_event, y_event, [(ell, boundary), ...]) with the crossing components
    snapped exactly onto their boundaries.
    """
    theta, m, boundary = _hermite_first_contact(y, y_new, f0, f1, h, escapes)
    h_est = max(theta, 1e-6) * h

    def substep(h_sub):
        out, _, _ = _dp54_step(rhs, t, y, h_sub, f0)
        return out

    y_est = substep(h_est)
    ok = False
    for _ in range(12):
        miss = y_est[m] - boundary
        if abs(miss) <= CROSSING_TOL:
            ok = True
            break
        v_here = rhs(t + h_est, y_est)[m]
        if v_here == 0.0 or not math.isfinite(v_here):
            break
        h_next = h_est - miss / v_here
        if not (0.0 < h_next / h <= 1.0 + 1e-9):
            break
        h_est = h_next
        y_est = substep(h_est)

    stray = any(e[2] > 2.0 * CROSSING_TOL for e in _escapes(y_est, cells))
    if not ok or stray:
        # robust fallback: bisect the step size on the "any escape" predicate
        lo, hi, y_hi = 0.0, h, y_new
        for _ in range(200):
            esc_hi = _escapes(y_hi, cells)
            worst = max(e[2] for e in esc_hi) if esc_hi else 0.0
            if esc_hi and worst <= CROSSING_TOL:
                break
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(h)):
                break
            mid = 0.5 * (lo + hi)
            y_mid = substep(mid)
            if _escapes(y_mid, cells):
                hi, y_hi = mid, y_mid
            else:
                lo = mid
        h_est, y_est = hi, y_hi
        esc_hi = _escapes(y_est, cells)
        if esc_hi:
            m, boundary, _ = max(esc_hi, key=lambda e: e[2])

    # snap the crossing component exactly onto its boundary; components that
    # are merely near (but not past) a boundary keep their cell and get
    # handled by a later step
    crossed = [(m, boundary)]
    y_out = y_est.copy()
    y_out[m] = boundary
    for ell, b_val, _excess in _escapes(y_out, cells):
        y_out[ell] = b_val
        crossed.append((ell, b_val))
    return t + h_est, y_out, crossed


def _output_grid(t0: float, t_final: float, output_dt: float) -> np.ndarray:
    if output_dt <= 0:
        raise InputError("output_dt must be positive")
    span = t_final - t0
    sgn = 1.0 if span >= 0 else -1.0
    n = int(math.floor(abs(span) / output_dt + 1e-9))
    times = t0 + sgn * output_dt * np.arange(n + 1)
    if abs(times[-1] - t_final) > 1e-12 * max(1.0, abs(t_final)):
        times = np.append(times, t_final)
    else:
        times[-1] = t_final
    return times


def integrate_trajectory(field: VelocityField, state0: QuantumState, lambda0,
                         t_final: float, output_dt: float,
                         rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                         seed: int | None = None) -> Trajectory:
    """Integrate one lambda trajectory, sampling every output_dt.

    The quantum state advances exactly through the cached eigendecomposition;
    only the lambda coordinates are stepped numerically. t_final may precede
    state0.time (backward integration). A trajectory that reaches a
    configuration with P <= node_floor is returned with whatever samples were
    recorded and status node_aborted rather than being regularized.
    """
    grid = _output_grid(state0.time, float(t_final), float(output_dt))
    res = _integrate_on_grid(field, state0, lambda0, grid, rtol, atol)
    times = grid[:res.n_recorded]
    lambdas = res.lambdas[:res.n_recorded]
    xis = np.empty_like(lambdas)
    for ell, b in enumerate(field.beable_set):
        xis[:, ell] = [b.eigenvalues[cell_index(b, lam)] for lam in lambdas[:, ell]]
    return Trajectory(times=times, lambdas=lambdas, xis=xis, status=res.status,
                      seed=seed, abort_time=res.abort_time, abort_cells=res.abort_cells)
