"""Exact age-optimal schedule for one energy-harvesting transmitter.

Works in gap space: ``x[i]`` is the spacing between consecutive deliveries
(see :class:`agesched.model.InterUpdateVector`), so total age becomes
``sum(x**2)`` up to a constant.  Gaps are bounded below by the service time
(``x_i >= 2d`` for interior gaps, ``x_{N+1} >= d``) and prefix sums are bounded
below by energy arrivals.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import (
    InfeasibleInstanceError,
    InterUpdateVector,
    SingleHopInstance,
    TOL,
    binds,
    slack_tol,
    validate_single_hop,
)


class Branch(str, enum.Enum):
    SHORT_HORIZON = "short_horizon"
    BALANCED = "balanced"
    AMENDED = "amended"
    BACK_TO_BACK = "back_to_back_fallback"


@dataclass(frozen=True)
class SolveReport:
    x_star: InterUpdateVector
    branch: Branch
    n0: int | None = None
    # (last 1-based index of the block, gap level) from inter-update balancing
    iub_segments: list[tuple[int, float]] = field(default_factory=list)
    x_balanced: InterUpdateVector | None = None


def _require_feasible(inst: SingleHopInstance):
    report = validate_single_hop(inst)
    if not report:
        raise InfeasibleInstanceError(report)


def _back_to_back(inst: SingleHopInstance) -> np.ndarray:
    """Best schedule among those sending updates 2..N back to back.

    Interior gaps are pinned at ``2d``; the first gap is the projection of the
    balanced split ``(T - (N-2)d) / 2`` onto its feasible interval.  Its upper
    end ``T - (N-1)d`` never binds: ``s_k - (k-2)d <= T - (N-1)d`` is exactly
    the deadline condition ``T >= s_k + (N-k+1)d``, and the balanced split is
    below it whenever ``T >= Nd``.
    """
    n, d, T = inst.n, inst.delay, inst.horizon
    k = np.arange(1, n + 1)
    room = T - (n - 2) * d
    x = np.full(n + 1, 2 * d)
    x[0] = max(room / 2, float(np.max(inst.arrivals - (k - 2) * d)))
    x[-1] = room - x[0]
    return x


def solve_short_horizon(inst: SingleHopInstance) -> InterUpdateVector:
    """Optimal gaps when ``Nd <= T < (N+1)d``.

    So little time is left that the first gap must stay below ``2d``, which
    forces every other update back to back.
    """
    n, d, T = inst.n, inst.delay, inst.horizon
    if not (n * d <= T < (n + 1) * d):
        raise ValueError(f"short-horizon formula needs N*d <= T < (N+1)*d, got T={T:g}, "
                         f"N*d={n * d:g}")
    _require_feasible(inst)
    return InterUpdateVector(_back_to_back(inst), d, T)


def inter_update_balancing(inst: SingleHopInstance) -> tuple[InterUpdateVector, list[tuple[int, float]]]:
    """Equalize gaps as far as energy arrivals allow, ignoring service times.

    Writing ``y = x - d`` the energy rows become ``sum(y[:k]) >= s_k`` and the
    total is ``T - d``. From the last anchor ``j`` (initially the origin) pick
    the index ``k > j`` maximizing the average slope
    ``(s_k - s_j) / (k - j)`` -- with ``s_{N+1} := T - d`` -- and fill the block
    ``j+1..k`` at that slope.  Ties go to the largest ``k``.
    """
    n, d = inst.n, inst.delay
    heights = np.append(inst.arrivals, inst.horizon - d)
    x = np.empty(n + 1)
    segments = []
    j, base = 0, 0.0
    while j < n + 1:
        rise = heights[j:] - base
        slopes = rise / np.arange(1, n + 2 - j)
        best = slopes.max()
        near = np.flatnonzero(slopes >= best - 1e-12 * max(1.0, abs(best)))
        k = j + int(near[-1]) + 1
        x[j:k] = best + d
        segments.append((k, float(best + d)))
        j, base = k, heights[k - 1]
    return InterUpdateVector(x, d, inst.horizon), segments


def first_service_violation(x: np.ndarray, d: float) -> int | None:
    """1-based index of the first gap breaking ``x_i >= 2d`` / ``x_{N+1} >= d``."""
    inner = np.flatnonzero(x[1:-1] < 2 * d - TOL)
    if inner.size:
        return int(inner[0]) + 2
    if x[-1] < d - TOL:
        return x.size
    return None


def amend_long_horizon(x_e: InterUpdateVector, inst: SingleHopInstance,
                       segments: list[tuple[int, float]] | None = None) -> SolveReport:
    """Repair the balanced gaps so service times are respected (``T >= (N+1)d``).

    If the balanced gaps already respect service times they are optimal.
    Otherwise let ``n0`` be the first offending gap.  Gaps before ``n0`` are
    kept, later interior gaps are set to ``2d`` and the final gap absorbs the
    rest.  When ``n0 == 2`` and the first gap was not pinned by the first
    energy arrival, the first gap is released instead and the back-to-back
    solution is optimal.
    """
    n, d, T = inst.n, inst.delay, inst.horizon
    if T < (n + 1) * d:
        raise ValueError("amendment applies only when T >= (N+1)d")
    segments = segments or []
    xe = x_e.x
    n0 = first_service_violation(xe, d)
    if n0 is None:
        return SolveReport(x_e, Branch.BALANCED, None, segments, x_e)
    if n0 > n:
        raise RuntimeError(
            f"final balanced gap {xe[-1]:.12g} < d although all earlier gaps are "
            "feasible; the instance should have failed validation")

    first_pinned = bool(binds(xe[0], inst.arrivals[0] + d))
    if n0 == 2 and not first_pinned:
        x = _back_to_back(inst)
        branch = Branch.BACK_TO_BACK
    else:
        x = np.array(xe)
        x[n0 - 1:n] = 2 * d
        x[n] = T + n * d - np.sum(x[:n])
        branch = Branch.AMENDED
    return SolveReport(InterUpdateVector(x, d, T), branch, n0, segments, x_e)


def solve(inst: SingleHopInstance) -> SolveReport:
    """Optimal inter-update gaps for a single-hop instance.

    Raises :class:`InfeasibleInstanceError` when no update schedule can
    deliver every update by the horizon.
    """
    _require_feasible(inst)
    n, d, T = inst.n, inst.delay, inst.horizon
    if T < (n + 1) * d:
        return SolveReport(solve_short_horizon(inst), Branch.SHORT_HORIZON)
    x_e, segments = inter_update_balancing(inst)
    return amend_long_horizon(x_e, inst, segments)


@dataclass(frozen=True)
class ConditionReport:
    violations: list[tuple[str, str]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def check_necessary_conditions(x: InterUpdateVector, inst: SingleHopInstance) -> ConditionReport:
    """Test the structural properties every optimal gap vector has.

    Clauses, with ``>``/``<``/``=`` taken up to the binding tolerance:

    a. ``x_2 >= x_3 >= ... >= x_{N+1}``
    b. for ``2 <= i <= N-1``, ``x_i > x_{i+1}`` only if energy row ``i`` binds
    c. ``x_1 > x_2`` only if ``x_1 = s_1 + d``
    d. ``x_1 < x_2`` only if ``x_i = 2d`` for all ``2 <= i <= N``
    e. ``x_N > x_{N+1}`` only if energy row ``N`` binds or ``x_N = 2d``

    Empty index ranges pass.
    """
    xv, n, d, s = x.x, inst.n, inst.delay, inst.arrivals
    cum = np.cumsum(xv[:-1])
    need = s + np.arange(1, n + 1) * d
    row_binds = binds(cum, need)
    out = []

    def gt(a, b):
        return np.asarray(a) - b > slack_tol(b)

    # a: indices 2..N against their successor
    for i in np.flatnonzero(gt(xv[2:], xv[1:-1])) + 2:
        out.append(("a", f"x[{i}]={xv[i - 1]:.12g} < x[{i + 1}]={xv[i]:.12g}"))
    if n >= 3:
        idx = np.arange(2, n)  # 1-based i in 2..N-1
        drop = gt(xv[idx - 1], xv[idx])
        for i in idx[drop & ~row_binds[idx - 1]]:
            out.append(("b", f"x[{i}] > x[{i + 1}] but energy row {i} is slack"))
    if gt(xv[0], xv[1]) and not binds(xv[0], s[0] + d):
        out.append(("c", f"x[1]={xv[0]:.12g} > x[2] but x[1] != s_1 + d={s[0] + d:.12g}"))
    if n >= 2 and gt(xv[1], xv[0]):
        off = np.flatnonzero(~binds(xv[1:n], 2 * d)) + 2
        if off.size:
            out.append(("d", f"x[1] < x[2] but x[{off[0]}]={xv[off[0] - 1]:.12g} != 2d"))
    if gt(xv[n - 1], xv[n]) and not (row_binds[n - 1] or binds(xv[n - 1], 2 * d)):
        out.append(("e", f"x[N]={xv[n - 1]:.12g} > x[N+1]={xv[n]:.12g} with neither "
                         "energy row N binding nor x[N] = 2d"))
    return ConditionReport(out)


__all__ = [
    "Branch", "SolveReport", "ConditionReport", "solve", "solve_short_horizon",
    "inter_update_balancing", "amend_long_horizon", "check_necessary_conditions",
    "first_service_violation",
]
