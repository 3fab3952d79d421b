"""The verification check suite behind `beable-sim verify`.

Each check measures one invariant of the configured model and compares it
against a fixed threshold; --strict tightens the thresholds that have
numerical headroom. Checks that need a single beable (or a two-cell one)
are skipped, not failed, on models where they do not apply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import BuiltModel
from .dynamics import _integrate_on_grid, TrajectoryStatus, quantum_distribution
from .errors import NumericError
from .linalg import evolve
from .verification import (
    TwoStateOracle,
    average_consistency,
    continuity_residual,
    level_expectation,
    sample_initial,
    single_beable_levelset,
)

PASS, FAIL, SKIP = "pass", "fail", "skip"

# name -> (default threshold, strict threshold)
THRESHOLDS = {
    "probability_normalization": (1e-8, 1e-9),
    "continuity_residual": (1e-6, 1e-7),
    "reversibility": (1e-6, 1e-7),
    "levelset_agreement": (1e-5, 1e-5),
    "level_conservation": (1e-6, 1e-6),
    "average_consistency": (3e-3, 3e-3),
}


@dataclass
class CheckResult:
    name: str
    status: str
    measured: float | None
    threshold: float | None
    detail: str = ""

    def line(self) -> str:
        tag = self.status.upper()
        if self.status == SKIP:
            return f"SKIP {self.name}: {self.detail}"
        body = f"{tag} {self.name}: measured {self.measured:.3e} vs threshold {self.threshold:.3e}"
        if self.detail:
            body += f" ({self.detail})"
        return body

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "measured": self.measured,
            "threshold": self.threshold,
            "detail": self.detail,
        }


def _result(name, measured, strict, detail="") -> CheckResult:
    threshold = THRESHOLDS[name][1 if strict else 0]
    status = PASS if measured <= threshold else FAIL
    return CheckResult(name, status, float(measured), threshold, detail)


def _check_normalization(model: BuiltModel, strict: bool) -> CheckResult:
    t_final = model.config.run.t_final
    worst = 0.0
    for t in np.linspace(0.0, t_final, 9):
        state = evolve(model.state0, model.propagator, t)
        _, probs = quantum_distribution(state, model.beable_set)
        worst = max(worst, abs(float(probs.sum()) - 1.0))
    return _result("probability_normalization", worst, strict,
                   "sum over cell tuples at 9 times")


def _check_continuity(model: BuiltModel, strict: bool, n_points: int = 100) -> CheckResult:
    rng = np.random.default_rng((model.config.run.seed, 101))
    t_final = model.config.run.t_final
    counts = [b.n_cells for b in model.beable_set]
    worst = 0.0
    collected = 0
    attempts = 0
    while collected < n_points:
        attempts += 1
        if attempts > 200 * n_points:
            raise NumericError("could not find enough interior continuity points")
        t = float(rng.uniform(0.0, t_final))
        lam = np.array([rng.uniform(-0.5, k - 0.5) for k in counts])
        state = evolve(model.state0, model.propagator, t)
        resid = continuity_residual(model.field, state, lam, h=1e-5)
        if resid is None:
            continue
        collected += 1
        worst = max(worst, resid)
    return _result("continuity_residual", worst, strict,
                   f"{n_points} random interior points, h=1e-5")


def _check_reversibility(model: BuiltModel, strict: bool, n_traj: int = 5) -> CheckResult:
    cfg = model.config
    t_final = cfg.run.t_final
    worst = 0.0
    for i in range(n_traj):
        lam0 = sample_initial(model.state0, model.beable_set, (cfg.run.seed, 201, i))
        fwd = _integrate_on_grid(model.field, model.state0, lam0,
                                 np.array([t_final]), cfg.dynamics.rtol,
                                 cfg.dynamics.atol)
        if fwd.status is not TrajectoryStatus.COMPLETED:
            return CheckResult("reversibility", FAIL, float("nan"),
                               THRESHOLDS["reversibility"][1 if strict else 0],
                               f"forward trajectory {i} aborted at a node")
        state_t = evolve(model.state0, model.propagator, t_final)
        back = _integrate_on_grid(model.field, state_t, fwd.lambdas[0],
                                  np.array([model.state0.time]),
                                  cfg.dynamics.rtol, cfg.dynamics.atol)
        if back.status is not TrajectoryStatus.COMPLETED:
            return CheckResult("reversibility", FAIL, float("nan"),
                               THRESHOLDS["reversibility"][1 if strict else 0],
                               f"backward trajectory {i} aborted at a node")
        worst = max(worst, float(np.max(np.abs(back.lambdas[0] - lam0.values))))
    return _result("reversibility", worst, strict,
                   f"{n_traj} forward/backward round trips to t={t_final:g}")


def _check_levelset(model: BuiltModel, strict: bool, n_traj: int = 5) -> CheckResult:
    cfg = model.config
    b = model.beable_set[0]
    times = np.linspace(0.0, cfg.run.t_final, 41)
    worst = 0.0
    for i in range(n_traj):
        lam0 = sample_initial(model.state0, model.beable_set, (cfg.run.seed, 301, i))
        res = _integrate_on_grid(model.field, model.state0, lam0, times,
                                 cfg.dynamics.rtol, cfg.dynamics.atol)
        if res.status is not TrajectoryStatus.COMPLETED:
            return CheckResult("levelset_agreement", FAIL, float("nan"),
                               THRESHOLDS["levelset_agreement"][1 if strict else 0],
                               f"trajectory {i} aborted at a node")
        for k, t in enumerate(times):
            oracle = single_beable_levelset(model.state0, b, float(lam0.values[0]),
                                            float(t), model.propagator)
            worst = max(worst, abs(res.lambdas[k, 0] - oracle))
    return _result("levelset_agreement", worst, strict,
                   f"{n_traj} trajectories vs the level-set solution at 41 times")


def _check_conservation(model: BuiltModel, strict: bool, n_traj: int = 5) -> CheckResult:
    cfg = model.config
    b = model.beable_set[0]
    times = np.linspace(0.0, cfg.run.t_final, 41)
    worst = 0.0
    for i in range(n_traj):
        lam0 = sample_initial(model.state0, model.beable_set, (cfg.run.seed, 301, i))
        res = _integrate_on_grid(model.field, model.state0, lam0, times,
                                 cfg.dynamics.rtol, cfg.dynamics.atol)
        if res.status is not TrajectoryStatus.COMPLETED:
            return CheckResult("level_conservation", FAIL, float("nan"),
                               THRESHOLDS["level_conservation"][1 if strict else 0],
                               f"trajectory {i} aborted at a node")
        level0 = level_expectation(model.state0, b, float(lam0.values[0]))
        for k, t in enumerate(times):
            state = evolve(model.state0, model.propagator, float(t))
            level = level_expectation(state, b, float(res.lambdas[k, 0]))
            worst = max(worst, abs(level - level0))
    return _result("level_conservation", worst, strict,
                   "drift of the conserved level value along trajectories")


def _check_average_consistency(model: BuiltModel, strict: bool,
                               n_xi0: int = 1000) -> CheckResult:
    b = model.beable_set[0]
    lo, hi = float(b.eigenvalues.min()), float(b.eigenvalues.max())
    half_span = (hi - lo) / 2.0
    mid = (hi + lo) / 2.0

    def curve(t: float) -> float:
        state = evolve(model.state0, model.propagator, t)
        psi = state.amplitudes
        raw = float(np.vdot(psi, b.matrix.entries @ psi).real)
        return (raw - mid) / half_span

    t_final = model.config.run.t_final
    worst = 0.0
    for t in np.linspace(0.1 * t_final, t_final, 10):
        oracle = TwoStateOracle(omega=1.0, xi0=0.0, expectation_curve=curve)
        avg = average_consistency(oracle, float(t), n_xi0)
        worst = max(worst, abs(avg - curve(float(t))))
    return _result("average_consistency", worst, strict,
                   f"midpoint average over {n_xi0} level constants at 10 times")


def run_checks(model: BuiltModel, strict: bool = False) -> list:
    """Run every applicable check; returns CheckResult objects in order."""
    results = [
        _check_normalization(model, strict),
        _check_continuity(model, strict),
        _check_reversibility(model, strict),
    ]
    if len(model.beable_set) == 1:
        results.append(_check_levelset(model, strict))
        results.append(_check_conservation(model, strict))
        if model.beable_set[0].n_cells == 2:
            results.append(_check_average_consistency(model, strict))
        else:
            results.append(CheckResult("average_consistency", SKIP, None, None,
                                       "needs a two-cell beable"))
    else:
        for name in ("levelset_agreement", "level_conservation", "average_consistency"):
            results.append(CheckResult(name, SKIP, None, None,
                                       "needs a single-beable model"))
    return results
