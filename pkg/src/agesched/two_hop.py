"""Two-hop scheduling via a combined source+relay node.

At the optimum the source finishes each update exactly when the relay starts
forwarding it (``t_i + d = t_bar_i``), and the relay never queues more than
one update.  The pair then behaves like a single transmitter with delay
``d + dbar`` whose energy for update ``i`` is available once both nodes have
harvested.

Two clocks describe that combined node:

* relay clock (``ReductionMap.reduced``): times are relay start times, so
  arrivals are ``max(sbar_i, s_i + d)`` and the horizon is ``T + d``;
* source clock (``ReductionMap.shifted``): the same instance moved back by
  ``d``, i.e. arrivals ``max(s_i, sbar_i - d)`` and horizon ``T``.

Only the source clock keeps the age origin where the two-hop problem has it
(``a(0) = 0`` at source time 0).  Solving on the relay clock charges the first
update for an extra ``d`` of age and is not optimal in general when ``d > 0``,
so :func:`solve_two_hop` uses the source clock by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import single_hop
from .model import (
    InfeasibleInstanceError,
    InterUpdateVector,
    SingleHopInstance,
    TwoHopInstance,
    TwoHopSchedule,
    check_two_hop_schedule,
    t_from_x,
    validate_two_hop,
)

CLOCKS = ("source", "relay")


@dataclass(frozen=True)
class ReductionMap:
    reduced: SingleHopInstance
    original: TwoHopInstance

    @property
    def shifted(self) -> SingleHopInstance:
        """The reduced instance on the source's clock (arrivals and horizon minus ``d``)."""
        d = self.original.source_delay
        return SingleHopInstance(self.reduced.arrivals - d, self.reduced.delay,
                                 self.reduced.horizon - d)

    def instance(self, clock: str = "source") -> SingleHopInstance:
        if clock not in CLOCKS:
            raise ValueError(f"clock must be one of {CLOCKS}, got {clock!r}")
        return self.shifted if clock == "source" else self.reduced


def reduce(inst: TwoHopInstance) -> ReductionMap:
    report = validate_two_hop(inst)
    if not report:
        raise InfeasibleInstanceError(report)
    d, db = inst.source_delay, inst.relay_delay
    combined = np.maximum(inst.relay_arrivals, inst.source_arrivals + d)
    return ReductionMap(SingleHopInstance(combined, d + db, inst.horizon + d), inst)


def recover_schedule(x: InterUpdateVector, rmap: ReductionMap,
                     clock: str = "source") -> TwoHopSchedule:
    """Turn combined-node gaps back into source and relay transmission times.

    ``clock`` names the instance ``x`` was computed for. Raises
    ``AssertionError`` if the recovered schedule is infeasible for the original
    instance, which means ``x`` was not feasible for the reduced one.
    """
    target = rmap.instance(clock)
    if x.n != target.n or not np.isclose(x.horizon, target.horizon) \
            or not np.isclose(x.delay, target.delay):
        raise ValueError(f"gap vector does not belong to the {clock}-clock instance")
    d = rmap.original.source_delay
    times = t_from_x(x).t
    if clock == "source":
        sched = TwoHopSchedule(times, times + d)
    else:
        sched = TwoHopSchedule(times - d, times)
    problems = check_two_hop_schedule(sched, rmap.original)
    assert not problems, f"recovered schedule is infeasible: {problems}"
    return sched


def solve_two_hop(inst: TwoHopInstance, clock: str = "source"
                  ) -> tuple[TwoHopSchedule, single_hop.SolveReport]:
    """Age-optimal two-hop schedule.

    The returned report describes the single-hop solve on the chosen clock.
    ``clock="relay"`` reproduces the relay-clock reduction literally; it is
    kept for comparison and can be suboptimal.
    """
    rmap = reduce(inst)
    report = single_hop.solve(rmap.instance(clock))
    return recover_schedule(report.x_star, rmap, clock), report


__all__ = ["ReductionMap", "reduce", "recover_schedule", "solve_two_hop", "CLOCKS"]
