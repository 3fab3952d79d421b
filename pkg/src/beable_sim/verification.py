"""Independent oracles and statistical equivariance tests.

Single-beable dynamics is integrable: the expectation of the lower
projector L(lambda(t)) is a constant of the motion, so lambda(t) follows
from monotone root-finding instead of ODE integration. That level-set
solution, the two-state sign formula built on it, and a finite-difference
continuity residual are the oracles everything else is checked against.

Ensemble runs draw initial configurations from the exact joint cell
distribution (cell tuple from the enumerated distribution, then lambda
uniform in the cell), integrate them independently, and compare empirical
histograms against the evolved quantum distribution by total-variation
distance. Trajectory workers get independent RNG streams derived from
(seed, trajectory index), so reports are deterministic for a given seed
regardless of worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .beables import BeableOperator, BeableSet, LambdaConfig, cell_index
from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    TrajectoryStatus,
    VelocityField,
    _integrate_on_grid,
    all_cell_tuples,
    quantum_distribution,
    quantum_probability,
    symmetrized_current,
    _lambda_values,
)
from .errors import InputError
from .linalg import QuantumState, evolve

ENV_THREADS = "BEABLE_SIM_THREADS"


# ---------------------------------------------------------------------------
# initial-condition sampling

def _sample_lambda(state: QuantumState, beable_set: BeableSet,
                   rng: np.random.Generator) -> LambdaConfig:
    tuples, probs = quantum_distribution(state, beable_set)
    probs = np.clip(probs, 0.0, None)
    cum = np.cumsum(probs / probs.sum())
    idx = int(np.searchsorted(cum, rng.random(), side="right"))
    idx = min(idx, len(tuples) - 1)
    cells = np.array(tuples[idx], dtype=float)
    offsets = rng.uniform(-0.5, 0.5, size=len(beable_set))
    return LambdaConfig(cells + offsets, beable_set)


def sample_initial(state: QuantumState, beable_set: BeableSet,
                   rng_seed: int) -> LambdaConfig:
    """Draw one initial lambda configuration.

    The cell tuple comes from the exact joint distribution (enumerated over
    all tuples, so beable correlations are respected), then each lambda is
    uniform on its cell [n - 1/2, n + 1/2). Deterministic for a given seed.
    """
    return _sample_lambda(state, beable_set, np.random.default_rng(rng_seed))


# ---------------------------------------------------------------------------
# single-beable exact solutions

def level_expectation(state: QuantumState, b: BeableOperator, lam: float) -> float:
    """<t|L(lambda)|t>, the conserved level value of one-beable dynamics."""
    n = cell_index(b, lam)
    psi = state.amplitudes
    cum = float(np.vdot(psi, b._cum_below[n] @ psi).real)
    p_n = float(np.vdot(psi, b.projectors[n].entries @ psi).real)
    return cum + (lam - n + 0.5) * p_n


def single_beable_levelset(state0: QuantumState, b: BeableOperator,
                           lambda0: float, t: float, prop) -> float:
    """lambda(t) for one beable, by inverting <t|L(lambda)|t> = L0.

    The level expectation is nondecreasing and piecewise linear in lambda,
    so the inversion walks the cells of the cumulative projector weights.
    This is the integration-free oracle for every L = 1 trajectory.
    """
    level0 = level_expectation(state0, b, lambda0)
    if not -1e-10 <= level0 <= 1.0 + 1e-10:
        raise InputError(
            f"initial level value {level0:.12g} outside [0, 1]; "
            "cell projectors are defective"
        )
    level0 = min(max(level0, 0.0), 1.0)
    state_t = evolve(state0, prop, t - state0.time)
    psi = state_t.amplitudes
    weights = np.array([
        float(np.vdot(psi, p.entries @ psi).real) for p in b.projectors
    ])
    weights = np.clip(weights, 0.0, None)
    cum = np.concatenate(([0.0], np.cumsum(weights)))
    cum /= cum[-1]
    n = int(np.searchsorted(cum, level0, side="right")) - 1
    n = min(max(n, 0), b.n_cells - 1)
    width = cum[n + 1] - cum[n]
    if width <= 0.0:
        # degenerate flat cell: the level set collapses to its lower edge
        lam = n - 0.5
    else:
        lam = n - 0.5 + (level0 - cum[n]) / width
    return float(min(max(lam, -0.5), b.n_cells - 0.5))


@dataclass(frozen=True)
class TwoStateOracle:
    """Closed-form two-cell beable motion xi(t) = sign(<xi>(t) - xi0).

    xi0 = 1 - 2 L0 is uniform on [-1, 1] when L0 is uniform on [0, 1]. The
    default expectation curve is the resonant two-level one, cos(omega t).
    """

    omega: float
    xi0: float
    expectation_curve: Callable[[float], float] | None = None

    def __post_init__(self):
        if not -1.0 <= self.xi0 <= 1.0:
            raise InputError(f"xi0 = {self.xi0:g} outside [-1, 1]")

    def curve(self, t: float) -> float:
        if self.expectation_curve is not None:
            return self.expectation_curve(t)
        return math.cos(self.omega * t)

    def first_flip_time(self) -> float:
        """Earliest t > 0 with cos(omega t) = xi0 (default curve only)."""
        return math.acos(self.xi0) / self.omega


def two_state_solution(oracle: TwoStateOracle, t: float) -> float:
    """The beable value at t; measure-zero ties resolve to +1."""
    return 1.0 if oracle.curve(t) - oracle.xi0 >= 0.0 else -1.0


def average_consistency(oracle: TwoStateOracle, t: float, n_xi0: int) -> float:
    """Midpoint average of xi(t) over xi0 uniform on [-1, 1].

    Must reproduce the quantum expectation within 2/n_xi0 + 1e-9.
    """
    if n_xi0 < 100:
        raise InputError("average_consistency needs n_xi0 >= 100")
    mids = -1.0 + (np.arange(n_xi0) + 0.5) * (2.0 / n_xi0)
    value = oracle.curve(t)
    signs = np.where(value - mids >= 0.0, 1.0, -1.0)
    return float(signs.mean())


# ---------------------------------------------------------------------------
# continuity residual (the central consistency requirement)

def continuity_residual(field: VelocityField, state: QuantumState, lambdas,
                        h: float = 1e-5) -> float | None:
    """|dP/dt + sum_ell dJ_ell/dlambda_ell| by central differences.

    dP/dt uses states evolved to t +/- h; each current derivative offsets one
    lambda component by +/- h with the state fixed. Points within h of a cell
    boundary return None (skip signal) because the one-sided cells would make
    the differences meaningless.
    """
    lam = _lambda_values(field.beable_set, lambdas)
    beable_set = field.beable_set
    cells = []
    for ell, b in enumerate(beable_set):
        n = cell_index(b, lam[ell])
        if min(lam[ell] - (n - 0.5), (n + 0.5) - lam[ell]) <= h:
            return None
        cells.append(n)
    prop = field.propagator
    s_plus = evolve(state, prop, h)
    s_minus = evolve(state, prop, -h)
    dp_dt = (quantum_probability(s_plus, beable_set, cells)
             - quantum_probability(s_minus, beable_set, cells)) / (2.0 * h)
    div = 0.0
    for ell in range(len(beable_set)):
        lam_p = lam.copy()
        lam_m = lam.copy()
        lam_p[ell] += h
        lam_m[ell] -= h
        j_p = symmetrized_current(state, beable_set, ell, lam_p, prop,
                                  field.symmetrization)
        j_m = symmetrized_current(state, beable_set, ell, lam_m, prop,
                                  field.symmetrization)
        div += (j_p - j_m) / (2.0 * h)
    return abs(dp_dt + div)


# ---------------------------------------------------------------------------
# ensembles

@dataclass
class EnsembleReport:
    """Empirical-vs-quantum occupation statistics for one ensemble run."""

    n_trajectories: int
    seed: int
    times: np.ndarray
    cell_tuples: list
    empirical: np.ndarray      # int counts, shape (n_times, n_tuples)
    quantum: np.ndarray        # exact probabilities, same shape
    tv_distance: np.ndarray    # shape (n_times,)
    node_aborted_count: int
    n_completed: int

    def as_dict(self) -> dict:
        return {
            "n_trajectories": self.n_trajectories,
            "seed": self.seed,
            "times": [float(t) for t in self.times],
            "cell_tuples": [list(map(int, c)) for c in self.cell_tuples],
            "empirical_counts": self.empirical.tolist(),
            "quantum_probabilities": self.quantum.tolist(),
            "tv_distance": [float(v) for v in self.tv_distance],
            "node_aborted_count": self.node_aborted_count,
            "n_completed": self.n_completed,
        }


def _resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise InputError(f"{ENV_THREADS} must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _run_chunk(field: VelocityField, state0: QuantumState, times: np.ndarray,
               seed: int, indices: range, rtol: float, atol: float,
               tuple_index: dict):
    """Integrate one block of trajectories; returns (counts, n_aborted)."""
    n_times = times.size
    counts = np.zeros((n_times, len(tuple_index)), dtype=np.int64)
    aborted = 0
    for i in indices:
        rng = np.random.default_rng((seed, i))
        lam0 = _sample_lambda(state0, field.beable_set, rng)
        res = _integrate_on_grid(field, state0, lam0, times, rtol, atol)
        if res.status is not TrajectoryStatus.COMPLETED:
            aborted += 1
            continue
        for k in range(n_times):
            cells = tuple(
                cell_index(b, res.lambdas[k][ell])
                for ell, b in enumerate(field.beable_set)
            )
            counts[k, tuple_index[cells]] += 1
    return counts, aborted


def ensemble_equivariance(field: VelocityField, state0: QuantumState, n: int,
                          times, seed: int,
                          rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                          workers: int | None = None) -> EnsembleReport:
    """Integrate n sampled trajectories and compare cell occupancies with the
    exact quantum distribution at each probe time.

    Node-aborted trajectories are excluded from the histograms but counted in
    the report; they are never silently resampled.
    """
    if n < 100:
        raise InputError("ensemble_equivariance needs n >= 100")
    times = np.sort(np.asarray(times, dtype=float))
    if times.size == 0:
        raise InputError("at least one probe time is required")
    if times[0] < state0.time:
        raise InputError("probe times must not precede the initial state time")

    tuples = all_cell_tuples(field.beable_set)
    tuple_index = {c: i for i, c in enumerate(tuples)}
    quantum = np.empty((times.size, len(tuples)))
    for k, t in enumerate(times):
        state_t = evolve(state0, field.propagator, t - state0.time)
        _, quantum[k] = quantum_distribution(state_t, field.beable_set)

    n_workers = min(_resolve_workers(workers), n)
    counts = np.zeros((times.size, len(tuples)), dtype=np.int64)
    aborted = 0
    if n_workers <= 1:
        counts, aborted = _run_chunk(field, state0, times, seed, range(n),
                                     rtol, atol, tuple_index)
    else:
        chunk = max(1, math.ceil(n / (n_workers * 4)))
        blocks = [range(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(_run_chunk, field, state0, times, seed, blk,
                            rtol, atol, tuple_index)
                for blk in blocks
            ]
            for fut in futures:
                c, a = fut.result()
                counts += c
                aborted += a

    n_completed = n - aborted
    if n_completed > 0:
        tv = 0.5 * np.abs(counts / n_completed - quantum).sum(axis=1)
    else:
        tv = np.full(times.size, np.nan)
    return EnsembleReport(
        n_trajectories=n, seed=int(seed), times=times, cell_tuples=tuples,
        empirical=counts, quantum=quantum, tv_distance=tv,
        node_aborted_count=aborted, n_completed=n_completed,
    )
