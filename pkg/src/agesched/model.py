"""Domain types, feasibility checks, variable transforms and age-curve tools.

Times are unitless reals. Arrays held by the frozen dataclasses below are
read-only numpy arrays, so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Absolute tolerance on constraint checks for magnitudes up to 1.
TOL = 1e-9


class InfeasibleInstanceError(ValueError):
    """Raised when an instance admits no feasible schedule."""

    def __init__(self, report: "FeasibilityReport"):
        super().__init__(report.message)
        self.report = report


class InconsistentVectorError(ValueError):
    """Raised when inter-update gaps do not add up to the horizon."""


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def slack_tol(rhs) -> np.ndarray | float:
    """Tolerance used for `lhs >= rhs` and binding tests: 1e-9 * max(1, |rhs|)."""
    return TOL * np.maximum(1.0, np.abs(rhs))


def binds(lhs, rhs):
    return np.abs(np.asarray(lhs) - rhs) <= slack_tol(rhs)


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SingleHopInstance:
    """One transmitter talking directly to the destination.

    ``arrivals[i]`` is the time the energy for update ``i`` is harvested,
    ``delay`` is the fixed transmission time and ``horizon`` the session end.
    """

    arrivals: np.ndarray
    delay: float
    horizon: float

    def __post_init__(self):
        arr = _frozen(self.arrivals, "arrivals")
        object.__setattr__(self, "arrivals", arr)
        object.__setattr__(self, "delay", float(self.delay))
        object.__setattr__(self, "horizon", float(self.horizon))
        if arr.size < 1:
            raise ValueError("at least one energy arrival is required")
        if np.any(arr < 0):
            raise ValueError("arrival times must be non-negative")
        if np.any(np.diff(arr) < 0):
            raise ValueError("arrival times must be non-decreasing")
        if not self.delay >= 0:
            raise ValueError("delay must be non-negative")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def n(self) -> int:
        return int(self.arrivals.size)

    def __repr__(self):
        return (f"SingleHopInstance(arrivals={self.arrivals.tolist()}, "
                f"delay={self.delay}, horizon={self.horizon})")


@dataclass(frozen=True, eq=False)
class TwoHopInstance:
    """Source -> half-duplex relay -> destination, both ends harvesting energy."""

    source_arrivals: np.ndarray
    relay_arrivals: np.ndarray
    source_delay: float
    relay_delay: float
    horizon: float

    def __post_init__(self):
        src = _frozen(self.source_arrivals, "source_arrivals")
        rel = _frozen(self.relay_arrivals, "relay_arrivals")
        if src.size != rel.size:
            raise TypeError(
                f"source and relay arrival lists differ in length "
                f"({src.size} vs {rel.size}); truncate to a common length first")
        if src.size < 1:
            raise ValueError("at least one energy arrival is required")
        for name, arr in (("source_arrivals", src), ("relay_arrivals", rel)):
            if np.any(arr < 0):
                raise ValueError(f"{name} must be non-negative")
            if np.any(np.diff(arr) < 0):
                raise ValueError(f"{name} must be non-decreasing")
        object.__setattr__(self, "source_arrivals", src)
        object.__setattr__(self, "relay_arrivals", rel)
        object.__setattr__(self, "source_delay", float(self.source_delay))
        object.__setattr__(self, "relay_delay", float(self.relay_delay))
        object.__setattr__(self, "horizon", float(self.horizon))
        if not (self.source_delay >= 0 and self.relay_delay >= 0):
            raise ValueError("delays must be non-negative")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def n(self) -> int:
        return int(self.source_arrivals.size)

    def __repr__(self):
        return (f"TwoHopInstance(source_arrivals={self.source_arrivals.tolist()}, "
                f"relay_arrivals={self.relay_arrivals.tolist()}, "
                f"source_delay={self.source_delay}, relay_delay={self.relay_delay}, "
                f"horizon={self.horizon})")


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InterUpdateVector:
    """Gaps ``x`` (length N+1) between consecutive deliveries, plus context.

    ``x[0] = t_1 + d``, ``x[i] = t_{i+1} - t_i + d`` and ``x[N] = T - t_N``, so
    ``sum(x) == T + N*d``.
    """

    x: np.ndarray
    delay: float
    horizon: float

    def __post_init__(self):
        x = _frozen(self.x, "x")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "delay", float(self.delay))
        object.__setattr__(self, "horizon", float(self.horizon))
        if x.size < 2:
            raise ValueError("an inter-update vector has at least two entries")

    @property
    def n(self) -> int:
        return int(self.x.size - 1)

    @property
    def total(self) -> float:
        return self.horizon + self.n * self.delay

    def sum_residual(self) -> float:
        return float(np.sum(self.x) - self.total)

    def is_consistent(self) -> bool:
        return bool(binds(np.sum(self.x), self.total)) and bool(
            np.all(self.x >= -slack_tol(self.x)))

    def __repr__(self):
        return f"InterUpdateVector(x={self.x.tolist()}, delay={self.delay}, horizon={self.horizon})"


@dataclass(frozen=True, eq=False)
class Schedule:
    """Absolute transmission start times of a single transmitter."""

    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t, "t"))

    @property
    def n(self) -> int:
        return int(self.t.size)


@dataclass(frozen=True, eq=False)
class TwoHopSchedule:
    """Source start times ``t`` and relay forwarding times ``t_bar``."""

    t: np.ndarray
    t_bar: np.ndarray

    def __post_init__(self):
        t = _frozen(self.t, "t")
        tb = _frozen(self.t_bar, "t_bar")
        if t.size != tb.size:
            raise ValueError("t and t_bar must have the same length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "t_bar", tb)

    @property
    def n(self) -> int:
        return int(self.t.size)


@dataclass(frozen=True, eq=False)
class AgeTrace:
    """Piecewise-linear age curve stored as reset breakpoints.

    Row ``k`` of ``breakpoints`` is ``(time, age_before, age_after)``. The first
    row is always ``(0, 0, 0)``; between rows the age grows with slope 1 and
    after the last row it keeps growing until ``horizon``.
    """

    breakpoints: np.ndarray
    horizon: float

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).reshape(-1, 3)
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def resets(self) -> np.ndarray:
        return self.breakpoints[1:]

    def age_at_horizon(self) -> float:
        time, _, after = self.breakpoints[-1]
        return float(after + self.horizon - time)

    def rows(self) -> list[tuple[float, float]]:
        """(time, age) pairs suitable for plotting, two per reset."""
        out = [(0.0, 0.0)]
        for time, before, after in self.resets:
            out.append((float(time), float(before)))
            out.append((float(time), float(after)))
        if out[-1][0] < self.horizon:
            out.append((self.horizon, self.age_at_horizon()))
        return out


# ---------------------------------------------------------------------------
# Feasibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    index: int | None = None  # 1-based update index of the first violation
    condition: str | None = None
    required_horizon: float | None = None
    message: str = "feasible"

    def __bool__(self):
        return self.ok


def _first_deadline_violation(arrivals, busy_after, horizon):
    """Earliest-finish bound ``arrivals[i] + busy_after[i]`` against the horizon."""
    need = arrivals + busy_after
    bad = np.flatnonzero(need > horizon + slack_tol(horizon))
    if bad.size == 0:
        return None
    i = int(bad[0])
    return i, float(need[i])


def validate_single_hop(inst: SingleHopInstance) -> FeasibilityReport:
    """Check that every update can still be delivered by the horizon.

    Feasible iff ``T >= s_i + (N - i + 1) d`` for every ``i``: sending each
    update as early as its energy and the previous transmission allow is
    then a valid schedule.
    """
    n = inst.n
    remaining = np.arange(n, 0, -1) * inst.delay
    hit = _first_deadline_violation(inst.arrivals, remaining, inst.horizon)
    if hit is None:
        return FeasibilityReport(True)
    i, need = hit
    return FeasibilityReport(
        False, i + 1, "energy_deadline", need,
        f"infeasible: energy arriving at {inst.arrivals[i]:g} for update {i + 1} "
        f"leaves too little time (need horizon >= {need:g}, have {inst.horizon:g})")


def validate_two_hop(inst: TwoHopInstance) -> FeasibilityReport:
    """Exact feasibility test for the two-hop problem.

    Checked in order, first failure reported:

    * ``relay_energy``: ``T >= sbar_i + (N - i + 1) dbar``
    * ``source_energy``: ``T >= s_i + (N - i + 1)(d + dbar)``
    * ``relay_half_duplex``: ``T >= sbar_i + (N - i + 1) dbar + (N - i) d``.
      The relay must finish forwarding update ``i`` before the source may
      send update ``i + 1``, so every later update also pays the source hop.
    """
    n = inst.n
    d, db, T = inst.source_delay, inst.relay_delay, inst.horizon
    k = np.arange(n, 0, -1)
    checks = (
        ("relay_energy", inst.relay_arrivals, k * db),
        ("source_energy", inst.source_arrivals, k * (d + db)),
        ("relay_half_duplex", inst.relay_arrivals, k * db + (k - 1) * d),
    )
    for name, arrivals, busy in checks:
        hit = _first_deadline_violation(arrivals, busy, T)
        if hit is not None:
            i, need = hit
            who = "source" if name == "source_energy" else "relay"
            return FeasibilityReport(
                False, i + 1, name, need,
                f"infeasible ({name}): {who} energy for update {i + 1} arrives at "
                f"{arrivals[i]:g}; need horizon >= {need:g}, have {T:g}")
    return FeasibilityReport(True)


def check_schedule(t, inst: SingleHopInstance, atol: float | None = None) -> list[str]:
    """List every constraint of the single-hop problem that ``t`` violates."""
    t = np.asarray(t.t if isinstance(t, Schedule) else t, dtype=float)
    out = []
    if t.size != inst.n:
        return [f"length {t.size} != N={inst.n}"]
    tol = (lambda r: slack_tol(r)) if atol is None else (lambda r: atol)
    d, T, s = inst.delay, inst.horizon, inst.arrivals
    for i in np.flatnonzero(t < s - tol(s)):
        out.append(f"energy causality: t[{i + 1}]={t[i]:.12g} < s={s[i]:.12g}")
    ends = t[:-1] + d
    for i in np.flatnonzero(t[1:] < ends - tol(ends)):
        out.append(f"service time: t[{i + 2}]={t[i + 1]:.12g} < t[{i + 1}]+d={ends[i]:.12g}")
    if t[-1] + d > T + tol(T):
        out.append(f"deadline: t[N]+d={t[-1] + d:.12g} > T={T:.12g}")
    return out


def check_two_hop_schedule(sched: TwoHopSchedule, inst: TwoHopInstance,
                           atol: float | None = None) -> list[str]:
    """List violated two-hop constraints, including half-duplex disjointness.

    Transmissions occupy half-open intervals ``[start, start + delay)``, so a
    relay starting exactly when the source finishes is legal.
    """
    if sched.n != inst.n:
        return [f"length {sched.n} != N={inst.n}"]
    tol = (lambda r: slack_tol(r)) if atol is None else (lambda r: atol)
    t, tb = sched.t, sched.t_bar
    s, sb = inst.source_arrivals, inst.relay_arrivals
    d, db, T = inst.source_delay, inst.relay_delay, inst.horizon
    out = []
    for i in np.flatnonzero(t < s - tol(s)):
        out.append(f"source energy causality at update {i + 1}")
    for i in np.flatnonzero(tb < sb - tol(sb)):
        out.append(f"relay energy causality at update {i + 1}")
    for i in np.flatnonzero(t + d > tb + tol(tb)):
        out.append(f"data causality at update {i + 1}")
    fwd_end = tb[:-1] + db
    for i in np.flatnonzero(t[1:] < fwd_end - tol(fwd_end)):
        out.append(f"relay busy when source sends update {i + 2}")
    if tb[-1] + db > T + tol(T):
        out.append("last delivery after the horizon")
    # pairwise disjointness of receive and transmit intervals at the relay
    if d > 0 and db > 0:
        rx0, rx1 = t[:, None], t[:, None] + d
        tx0, tx1 = tb[None, :], tb[None, :] + db
        overlap = np.minimum(rx1, tx1) - np.maximum(rx0, tx0)
        for i, j in zip(*np.nonzero(overlap > tol(np.maximum(rx1, tx1)))):
            out.append(f"half-duplex: receiving update {i + 1} overlaps forwarding {j + 1}")
    return out


# ---------------------------------------------------------------------------
# Change of variables
# ---------------------------------------------------------------------------


def x_from_t(t, delay: float, horizon: float) -> InterUpdateVector:
    t = np.asarray(t.t if isinstance(t, Schedule) else t, dtype=float)
    if t.size < 1:
        raise ValueError("schedule must contain at least one update")
    x = np.empty(t.size + 1)
    x[0] = t[0] + delay
    x[1:-1] = np.diff(t) + delay
    x[-1] = horizon - t[-1]
    return InterUpdateVector(x, delay, horizon)


def t_from_x(x: InterUpdateVector) -> Schedule:
    """Invert :func:`x_from_t`; raises if ``x`` does not sum to ``T + N d``."""
    if not x.is_consistent():
        raise InconsistentVectorError(
            f"inter-update gaps sum to {np.sum(x.x):.12g}, expected {x.total:.12g}"
            if abs(x.sum_residual()) > 0 else "inter-update gaps must be non-negative")
    t = np.cumsum(x.x[:-1]) - np.arange(1, x.n + 1) * x.delay
    return Schedule(t)


# ---------------------------------------------------------------------------
# Age of information
# ---------------------------------------------------------------------------


def _trace(deliveries, stamps, horizon) -> AgeTrace:
    keep = deliveries <= horizon + slack_tol(horizon)
    deliveries, stamps = deliveries[keep], stamps[keep]
    rows = [(0.0, 0.0, 0.0)]
    freshest = 0.0
    for when, stamp in zip(deliveries, stamps):
        before = when - freshest
        freshest = max(freshest, stamp)
        rows.append((when, before, when - freshest))
    return AgeTrace(rows, horizon)


def age_trace_single_hop(t, delay: float, horizon: float) -> AgeTrace:
    """Age curve when update ``i`` is generated at ``t_i`` and lands at ``t_i + d``."""
    t = np.asarray(t.t if isinstance(t, Schedule) else t, dtype=float)
    return _trace(t + delay, t, horizon)


def age_trace_two_hop(sched: TwoHopSchedule, inst: TwoHopInstance) -> AgeTrace:
    """Update ``i`` is stamped ``t_i`` and reaches the destination at ``t_bar_i + dbar``."""
    return _trace(sched.t_bar + inst.relay_delay, sched.t, inst.horizon)


def integrate_age(trace: AgeTrace) -> float:
    """Exact area under the age curve on ``[0, horizon]``."""
    bp = trace.breakpoints
    start, start_age = bp[:, 0], bp[:, 2]
    end = np.append(bp[1:, 0], trace.horizon)
    width = end - start
    return float(np.sum(width * (start_age + 0.5 * width)))


def objective_single_hop(t, delay: float, horizon: float) -> float:
    """``sum_i (t_i + d - t_{i-1})^2 + (T - t_N)^2`` with ``t_0 = 0``."""
    t = np.asarray(t.t if isinstance(t, Schedule) else t, dtype=float)
    prev = np.concatenate(([0.0], t[:-1]))
    return float(np.sum((t + delay - prev) ** 2) + (horizon - t[-1]) ** 2)


def objective_two_hop(sched: TwoHopSchedule, inst: TwoHopInstance) -> float:
    """Twice the total age of a two-hop schedule, written in closed form."""
    t, tb = sched.t, sched.t_bar
    land = tb + inst.relay_delay
    prev = np.concatenate(([0.0], t[:-1]))
    return float(np.sum((land - prev) ** 2 - (land - t) ** 2) + (inst.horizon - t[-1]) ** 2)


def check_inter_update_feasibility(x: InterUpdateVector, inst: SingleHopInstance,
                                   service: bool = True) -> list[str]:
    """Constraints of the gap formulation violated by ``x``.

    With ``service=False`` only the energy-causality rows and the sum identity
    are checked (the relaxation solved by inter-update balancing).
    """
    xv, n, d = x.x, inst.n, inst.delay
    out = []
    if x.n != n:
        return [f"length {xv.size} != N+1={n + 1}"]
    total = inst.horizon + n * d
    if not binds(np.sum(xv), total):
        out.append(f"sum {np.sum(xv):.12g} != T+Nd={total:.12g}")
    need = inst.arrivals + np.arange(1, n + 1) * d
    cum = np.cumsum(xv[:-1])
    for k in np.flatnonzero(cum < need - slack_tol(need)):
        out.append(f"energy causality at k={k + 1}: {cum[k]:.12g} < {need[k]:.12g}")
    if service:
        for i in np.flatnonzero(xv[1:-1] < 2 * d - slack_tol(2 * d)):
            out.append(f"service gap x[{i + 2}]={xv[i + 1]:.12g} < 2d")
        if xv[-1] < d - slack_tol(d):
            out.append(f"final gap x[N+1]={xv[-1]:.12g} < d")
    return out


__all__ = [
    "TOL", "InfeasibleInstanceError", "InconsistentVectorError", "SingleHopInstance",
    "TwoHopInstance", "InterUpdateVector", "Schedule", "TwoHopSchedule", "AgeTrace",
    "FeasibilityReport", "validate_single_hop", "validate_two_hop", "check_schedule",
    "check_two_hop_schedule", "check_inter_update_feasibility", "x_from_t", "t_from_x",
    "age_trace_single_hop", "age_trace_two_hop", "integrate_age", "objective_single_hop",
    "objective_two_hop", "binds", "slack_tol",
]
