"""Acceptance criteria, one test each, reported as PASS/FAIL lines in the summary."""

import time

import numpy as np
import pytest

from agesched import (
    Branch,
    SingleHopInstance,
    TwoHopInstance,
    TwoHopSchedule,
    age_trace_single_hop,
    age_trace_two_hop,
    check_inter_update_feasibility,
    check_necessary_conditions,
    check_schedule,
    integrate_age,
    inter_update_balancing,
    objective_single_hop,
    objective_two_hop,
    reduce,
    solve,
    solve_two_hop,
    t_from_x,
)
from agesched.model import binds, check_two_hop_schedule
from agesched.oracle import qp_solve, qp_solve_pe, qp_solve_two_hop, random_instance
from cases import (RELAY_A, random_schedule, random_two_hop_schedule, relay_b,
                   single_hop_suite, two_hop_suite)

XTOL = 1e-6
REL = 1e-7


def close(a, b, tol=XTOL):
    return np.asarray(a).shape == np.asarray(b).shape and np.max(np.abs(np.subtract(a, b))) <= tol


def rel_gap(a, b):
    return abs(a - b) / max(1.0, abs(b))


def _relay_reference_runs():
    """Single-hop solves on the relay-clock reductions of the two-hop reference instances."""
    runs = []
    for inst in (RELAY_A, relay_b(16), relay_b(18)):
        reduced = reduce(inst).reduced
        runs.append((reduced, solve(reduced)))
    return runs


@pytest.mark.criterion("AC1 two-hop reference reduction with amended balancing")
def test_ac1_reference_amended(criterion):
    rmap = reduce(RELAY_A)
    red = rmap.reduced
    criterion.expect(close(red.arrivals, [3, 7, 9, 12, 15]) and red.delay == 3
                     and red.horizon == 20, f"reduced instance {red}")
    report = solve(red)
    x_e = report.x_balanced.x
    criterion.expect(close(x_e, [6.5, 6.5, 17 / 3, 17 / 3, 17 / 3, 5]), f"balanced gaps {x_e}")
    criterion.expect(report.n0 == 3, f"n0={report.n0}")
    criterion.expect(report.branch is Branch.AMENDED, f"branch {report.branch}")
    criterion.expect(close(report.x_star.x, [6.5, 6.5, 6, 6, 6, 4]), f"x* {report.x_star.x}")

    best = np.inf
    for _ in range(5):
        start = time.perf_counter()
        solve(reduce(RELAY_A).reduced)
        best = min(best, time.perf_counter() - start)
    criterion.expect(best < 0.010, f"runtime {best * 1e3:.2f} ms")
    criterion.note(f"x*={report.x_star.x.tolist()} n0={report.n0} in {best * 1e3:.2f} ms")
    assert not criterion.failures


@pytest.mark.criterion("AC2 two-hop reference reduction at both horizons")
def test_ac2_reference_both_horizons(criterion):
    short = reduce(relay_b(16)).reduced
    criterion.expect(close(short.arrivals, [1, 5, 6, 10, 14]) and short.horizon == 17,
                     f"reduced instance {short}")
    rep = solve(short)
    criterion.expect(rep.branch is Branch.SHORT_HORIZON, f"T=16 branch {rep.branch}")
    criterion.expect(close(rep.x_star.x, [5, 6, 6, 6, 6, 3]), f"T=16 x* {rep.x_star.x}")

    long = reduce(relay_b(18)).reduced
    rep = solve(long)
    x_e = rep.x_balanced.x
    criterion.expect(close(x_e, [5.8] * 5 + [5]), f"T=18 balanced gaps {x_e}")
    criterion.expect(rep.n0 == 2, f"T=18 n0={rep.n0}")
    criterion.expect(x_e[0] > long.arrivals[0] + long.delay, "first gap pinned")
    criterion.expect(rep.branch is Branch.BACK_TO_BACK, f"T=18 branch {rep.branch}")
    criterion.expect(close(rep.x_star.x, [5, 6, 6, 6, 6, 5]), f"T=18 x* {rep.x_star.x}")
    criterion.note("short horizon [5,6,6,6,6,3]; back-to-back fallback [5,6,6,6,6,5]")
    assert not criterion.failures


@pytest.mark.criterion("AC3 single-hop solver equals enumeration oracle on 1000 instances")
def test_ac3_single_hop_oracle(criterion):
    start = time.perf_counter()
    branches = set()
    worst_obj = worst_x = 0.0
    for inst in single_hop_suite(1000):
        rep = solve(inst)
        branches.add(rep.branch)
        x_ref, obj_ref, _ = qp_solve(inst)
        obj = float(np.sum(rep.x_star.x ** 2))
        worst_obj = max(worst_obj, rel_gap(obj, obj_ref))
        worst_x = max(worst_x, float(np.max(np.abs(rep.x_star.x - x_ref))))
    elapsed = time.perf_counter() - start
    criterion.expect(worst_obj <= REL, f"objective rel gap {worst_obj:.3g}")
    criterion.expect(worst_x <= XTOL, f"x gap {worst_x:.3g}")
    criterion.expect(Branch.SHORT_HORIZON in branches and len(branches) == 4,
                     f"branches covered {sorted(b.value for b in branches)}")
    criterion.expect(elapsed < 60, f"runtime {elapsed:.1f} s")
    criterion.note(f"max rel gap {worst_obj:.2g}, max x gap {worst_x:.2g}, {elapsed:.1f} s")
    assert not criterion.failures


@pytest.mark.criterion("AC4 two-hop reduction equals direct oracle on 200 instances")
def test_ac4_two_hop_oracle(criterion):
    start = time.perf_counter()
    worst = 0.0
    for inst in two_hop_suite(200):
        sched, _ = solve_two_hop(inst)
        *_, obj_ref, _ = qp_solve_two_hop(inst)
        worst = max(worst, rel_gap(objective_two_hop(sched, inst), obj_ref))
        problems = check_two_hop_schedule(sched, inst, atol=1e-9)
        criterion.expect(not problems, f"{inst}: {problems}")
    elapsed = time.perf_counter() - start
    criterion.expect(worst <= REL, f"objective rel gap {worst:.3g}")
    criterion.expect(elapsed < 120, f"runtime {elapsed:.1f} s")
    criterion.note(f"max rel gap {worst:.2g}, constraints within 1e-9, {elapsed:.1f} s")
    assert not criterion.failures


@pytest.mark.criterion("AC5 necessary optimality conditions on every solver output")
def test_ac5_necessary_conditions(criterion):
    runs = _relay_reference_runs()
    runs += [(inst, solve(inst)) for inst in single_hop_suite(1000)]
    for inst in two_hop_suite(200):
        _, rep = solve_two_hop(inst)
        runs.append((reduce(inst).shifted, rep))
    for inst, rep in runs:
        cond = check_necessary_conditions(rep.x_star, inst)
        criterion.expect(cond.ok, f"{inst}: {cond.violations}")
    criterion.note(f"{len(runs)} outputs, zero violations")
    assert not criterion.failures


SINGLE_SHAPES = [(1, 1.0, 5.0), (3, 1.5, 12.0), (5, 0.7, 9.3), (8, 2.0, 30.0), (4, 0.0, 10.0)]
TWO_HOP_SHAPES = [(1, 1.0, 1.0, 4.0), (3, 1.0, 2.0, 15.0), (5, 0.5, 1.5, 14.0), (2, 0.0, 1.0, 5.0)]


@pytest.mark.criterion("AC6 objective minus twice the age area is schedule independent")
def test_ac6_identities(criterion):
    rng = np.random.default_rng(6)
    for n, d, T in SINGLE_SHAPES:
        vals = []
        for _ in range(100):
            t = random_schedule(rng, n, d, T)
            vals.append(objective_single_hop(t, d, T) - 2 * integrate_age(age_trace_single_hop(t, d, T)))
        spread = max(vals) - min(vals)
        criterion.expect(spread < 1e-9, f"single-hop {(n, d, T)} spread {spread:.3g}")
        criterion.expect(abs(vals[0] - n * d * d) < 1e-9, f"single-hop constant {vals[0]} != N d^2")
    for n, d, db, T in TWO_HOP_SHAPES:
        inst = TwoHopInstance(np.zeros(n), np.zeros(n), d, db, T)
        vals = []
        for _ in range(100):
            sched = TwoHopSchedule(*random_two_hop_schedule(rng, n, d, db, T))
            vals.append(objective_two_hop(sched, inst) - 2 * integrate_age(age_trace_two_hop(sched, inst)))
        spread = max(vals) - min(vals)
        criterion.expect(spread < 1e-9, f"two-hop {(n, d, db, T)} spread {spread:.3g}")
        criterion.expect(abs(vals[0]) < 1e-9, f"two-hop constant {vals[0]} != 0")
    # hand-checked: t=[1], t_bar=[2], d=dbar=1, T=4 -> objective 14, area 7
    inst = TwoHopInstance([0], [0], 1, 1, 4)
    sched = TwoHopSchedule([1], [2])
    criterion.expect(objective_two_hop(sched, inst) == 14
                     and integrate_age(age_trace_two_hop(sched, inst)) == 7, "hand-checked N=1 case")
    criterion.note("single-hop constant N*d^2, two-hop constant 0, spread < 1e-9")
    assert not criterion.failures


@pytest.mark.criterion("AC7 balancing equals the energy-only relaxation optimum on 500 instances")
def test_ac7_balancing_relaxation(criterion):
    worst = 0.0
    for inst in single_hop_suite(500, seed0=5000):
        x_e, _ = inter_update_balancing(inst)
        x_ref, _, _ = qp_solve_pe(inst)
        x = x_e.x
        worst = max(worst, float(np.max(np.abs(x - x_ref))))
        step = x[:-1] - x[1:]
        criterion.expect(np.all(step >= -1e-9 * np.maximum(1, np.abs(x[1:]))),
                         f"{inst}: not non-increasing {x}")
        rows = np.cumsum(x[:-1])
        need = inst.arrivals + np.arange(1, inst.n + 1) * inst.delay
        strict = step > 1e-9 * np.maximum(1, np.abs(x[1:]))
        criterion.expect(np.all(binds(rows[strict], need[strict])),
                         f"{inst}: strict decrease at a slack energy row")
    criterion.expect(worst <= XTOL, f"x gap {worst:.3g}")
    criterion.note(f"max x gap {worst:.2g}; monotone with drops only at binding rows")
    assert not criterion.failures


@pytest.mark.criterion("AC8 single-hop solve at N=10^4 under one second")
def test_ac8_scale(criterion):
    n = 10_000
    k = np.arange(1, n + 1)
    concave = 30 * np.sqrt(k)  # every index becomes its own balancing block
    cases = {"random": random_instance(8, n),
             "concave arrivals": SingleHopInstance(concave, 0.01, concave[-1] + 50)}
    for name, inst in cases.items():
        start = time.perf_counter()
        rep = solve(inst)
        elapsed = time.perf_counter() - start
        criterion.expect(elapsed < 1.0, f"{name}: {elapsed:.3f} s")
        criterion.expect(not check_inter_update_feasibility(rep.x_star, inst), f"{name}: infeasible gaps")
        criterion.expect(not check_schedule(t_from_x(rep.x_star), inst), f"{name}: infeasible schedule")
        criterion.expect(check_necessary_conditions(rep.x_star, inst).ok, f"{name}: conditions")
        criterion.note(f"{name} {elapsed * 1e3:.1f} ms")
    assert not criterion.failures
