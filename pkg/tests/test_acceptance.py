"""Acceptance criteria, one test each, at the stated sizes and tolerances.

Every test records a one-line verdict that is printed at the end of the run.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from coordmech.analysis import assignment_count, enumerate_equilibria, poa_pos_report
from coordmech.cli import main as cli_main
from coordmech.dynamics import is_equilibrium, potential, run_dynamics
from coordmech.instance import Assignment, Instance, generate_instance, machine_load
from coordmech.mechanism import (
    CoefficientFunction,
    bruteforce_all,
    completion_time,
    deviation_key,
    lambda_player,
    lambda_player_ccoord,
    lambda_player_dcoord,
    lambda_set,
    lambda_set_dcoord,
)
from coordmech.verify import distinct_starts, sample_custom

GENERATORS = ("uniform-integer", "two-values", "restricted-related")


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def mechanisms(d: int):
    return [CoefficientFunction.dcoord(d), CoefficientFunction.ccoord(d), sample_custom(d)]


def random_instance(rng, n_max=6, m_max=4, n_min=1, m_min=2) -> Instance:
    n = int(rng.integers(n_min, n_max + 1))
    m = int(rng.integers(m_min, m_max + 1))
    kind = GENERATORS[int(rng.integers(len(GENERATORS)))]
    return generate_instance(kind, n, m, int(rng.integers(2 ** 31)))


def random_assignment(rng, inst: Instance) -> Assignment:
    return Assignment(tuple(int(rng.choice(o)) for o in inst.options))


def column(ws) -> Instance:
    return Instance.from_rows([[w] for w in ws])


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(101)
    failures, checked = [], 0
    t0 = time.perf_counter()
    for d in (2, 3, 4, 5):
        dc, cc = CoefficientFunction.dcoord(d), CoefficientFunction.ccoord(d)
        for ell in range(0, 7):
            for _ in range(200):
                ws = [int(x) for x in rng.integers(1, 11, size=ell)]
                inst, U = column(ws) if ws else column([1]), list(range(ell))
                checked += 1
                # one oracle pass yields the set value and every player's value
                dc_set, dc_players = bruteforce_all(dc, ws)
                _, cc_players = bruteforce_all(cc, ws)
                if lambda_set_dcoord(inst, 0, U, d) != dc_set:
                    failures.append(("set", d, ws))
                for u in U:
                    if lambda_player_dcoord(inst, 0, U, u, d) != dc_players[u]:
                        failures.append(("dcoord", d, ws, u))
                    if lambda_player_ccoord(inst, 0, U, u, d) != cc_players[u]:
                        failures.append(("ccoord", d, ws, u))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 30
    record(1, "closed forms equal the composition oracle", ok,
           f"{checked} draws, {len(failures)} mismatches, {elapsed:.1f}s < 30s")
    assert not failures, failures[:5]
    assert elapsed < 30


def test_criterion_2_decomposition():
    rng = np.random.default_rng(202)
    failures, checked = [], 0
    for i in range(500):
        d = (2, 3, 4)[i % 3]
        ell = int(rng.integers(1, 7))
        ws = [Fraction(int(a), int(b)) for a, b in zip(rng.integers(1, 11, ell), rng.integers(1, 4, ell))]
        inst, U = column(ws), list(range(ell))
        u = int(rng.integers(ell))
        rest = [v for v in U if v != u]
        for cf in mechanisms(d):
            checked += 1
            lhs = lambda_set(cf, inst, 0, U)
            rhs = lambda_player(cf, inst, 0, U, u) + lambda_set(cf, inst, 0, rest)
            if lhs != rhs:
                failures.append((cf.label, ws, u))
    record(2, "set value splits into player value plus remainder", not failures,
           f"500 cases x 3 mechanisms = {checked} checks, {len(failures)} mismatches")
    assert not failures, failures[:5]


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def test_criterion_3_potential_property():
    rng = np.random.default_rng(303)
    failures, checked = [], 0
    for d in (2, 3):
        for cf in mechanisms(d):
            done = 0
            while done < 250:
                inst = random_instance(rng)
                u = int(rng.integers(inst.n))
                if len(inst.options[u]) < 2:
                    continue
                asg = random_assignment(rng, inst)
                j1 = asg.machine_of[u]
                j2 = int(rng.choice([j for j in inst.options[u] if j != j1]))
                new = asg.moved(u, j2)
                done += 1
                checked += 1
                dphi = potential(cf, inst, asg) - potential(cf, inst, new)
                k1 = lambda_player(cf, inst, j1, asg.partition(inst.m)[j1], u)
                k2 = lambda_player(cf, inst, j2, new.partition(inst.m)[j2], u)
                ct_old = completion_time(cf, inst, asg, u)
                ct_new = completion_time(cf, inst, new, u)
                if dphi != k1 - k2 or _sign(dphi) != _sign(ct_old.lambda_over_wu - ct_new.lambda_over_wu):
                    failures.append((cf.label, inst.weights, asg.machine_of, u, j2))
    # 500 pairs per mechanism family, split across d = 2 and d = 3
    record(3, "potential change equals the mover's key change, signs agree", not failures,
           f"{checked} deviations over dcoord/ccoord/custom, {len(failures)} mismatches")
    assert checked == 3 * 500
    assert not failures, failures[:5]


def _feasibility_batch():
    rng = np.random.default_rng(404)
    batch = []
    for i in range(500):
        d = (2, 3, 4, 5)[i % 4]
        inst = random_instance(rng)
        batch.append((d, inst, random_assignment(rng, inst)))
    return batch


BATCH = _feasibility_batch()


def test_criterion_4_feasibility():
    failures, checked = [], 0
    for d, inst, asg in BATCH:
        cf = CoefficientFunction.dcoord(d)
        parts = asg.partition(inst.m)
        for u in range(inst.n):
            j = asg.machine_of[u]
            load = machine_load(inst, asg, j)
            lam = lambda_player(cf, inst, j, parts[j], u)
            checked += 1
            if lam < inst.min_weight[u] * load ** d:
                failures.append((d, inst.weights, asg.machine_of, u))
            # same statement in completion-time form
            if completion_time(cf, inst, asg, u).lambda_over_wu < load ** d:
                failures.append(("ct", d, inst.weights, asg.machine_of, u))
    record(4, "dcoord completion time never below machine load", not failures,
           f"500 assignments, {checked} players, {len(failures)} violations")
    assert not failures, failures[:5]


def test_criterion_5_sandwich_bounds():
    failures, checked = [], 0
    for d, inst, asg in BATCH:
        cf = CoefficientFunction.dcoord(d)
        for j, jobs in enumerate(asg.partition(inst.m)):
            if not jobs:
                continue
            load = machine_load(inst, asg, j)
            lam = lambda_set(cf, inst, j, jobs)
            checked += 1
            if not Fraction(d, d + 1) * load ** (d + 1) <= lam <= load ** (d + 1):
                failures.append(("set", d, inst.weights, asg.machine_of, j))
            for u in jobs:
                w = inst.w(u, j)
                lu = lambda_player(cf, inst, j, jobs, u)
                checked += 1
                if not w * load ** d <= lu <= d * w * load ** d:
                    failures.append(("player", d, inst.weights, asg.machine_of, u))
    record(5, "player and set sandwich bounds", not failures,
           f"{checked} exact comparisons, {len(failures)} violations")
    assert not failures, failures[:5]


def _small_instances():
    rng = np.random.default_rng(606)
    out = []
    while len(out) < 100:
        inst = random_instance(rng, n_max=5, m_max=3, n_min=2, m_min=2)
        if assignment_count(inst) >= 3:  # room for three distinct starts
            out.append(inst)
    return out


@pytest.fixture(scope="module")
def small_instances():
    return _small_instances()


def test_criterion_6_existence_and_dynamics(small_instances):
    rng = np.random.default_rng(607)
    failures, runs = [], 0
    t0 = time.perf_counter()
    for inst in small_instances:
        for d in (2, 3):
            for cf in mechanisms(d):
                eqs = enumerate_equilibria(cf, inst)
                if not eqs:
                    failures.append(("empty", cf.label, inst.weights))
                    continue
                listed = set(eqs)
                for start in distinct_starts(rng, inst, 3):
                    runs += 1
                    tr = run_dynamics(cf, inst, start, max_iter=inst.m ** inst.n * inst.n)
                    if not tr.converged or tr.final not in listed or not is_equilibrium(cf, inst, tr.final):
                        failures.append(("dynamics", cf.label, inst.weights, start.machine_of))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120
    record(6, "equilibria exist and dynamics converge into the enumerated list", ok,
           f"100 instances x d in (2,3) x 3 mechanisms, {runs} runs, {len(failures)} failures, "
           f"{elapsed:.1f}s < 120s")
    assert not failures, failures[:5]
    assert elapsed < 120


def test_criterion_7_load_and_ratio_bounds(small_instances):
    failures, checks = [], 0
    for inst in small_instances:
        for d in (2, 3):
            rep = poa_pos_report(CoefficientFunction.dcoord(d), inst)
            names = [c.name for c in rep.bound_checks]
            assert names == ["load-any-equilibrium", "load-potential-minimizer",
                             "completion-any-equilibrium", "completion-potential-minimizer"]
            for c in rep.bound_checks:
                checks += 1
                if not c.passed:
                    failures.append((d, inst.weights, c))
            if not rep.poa_ratio_power >= rep.pos_ratio_power >= 1:
                failures.append((d, inst.weights, "ratio order"))
    record(7, "load, potential-minimizer and ratio bounds, certified rounding", not failures,
           f"{checks} checks on 100 instances x d in (2,3), {len(failures)} violations")
    assert not failures, failures[:5]


def test_criterion_8_scale_invariance():
    rng = np.random.default_rng(808)
    failures, instances = [], 0
    for i in range(60):
        d = (2, 3)[i % 2]
        inst = random_instance(rng, n_max=5, m_max=3, n_min=2)
        instances += 1
        for cf in mechanisms(d):
            eqs = enumerate_equilibria(cf, inst)
            assignments = [random_assignment(rng, inst) for _ in range(3)]
            for c in (Fraction(2), Fraction(3), Fraction(1, 2)):
                scaled = inst.scaled(c)
                factor = c ** (d + 1)
                if enumerate_equilibria(cf, scaled) != eqs:
                    failures.append(("equilibria", cf.label, c, inst.weights))
                for asg in assignments:
                    parts = asg.partition(inst.m)
                    for j, jobs in enumerate(parts):
                        for u in jobs:
                            if lambda_player(cf, scaled, j, jobs, u) != factor * lambda_player(cf, inst, j, jobs, u):
                                failures.append(("lambda", cf.label, c, inst.weights, u, j))
                    for u in range(inst.n):
                        keys = {j: deviation_key(cf, inst, asg, u, j) for j in inst.options[u]}
                        skeys = {j: deviation_key(cf, scaled, asg, u, j) for j in inst.options[u]}
                        if any(skeys[j] != factor * keys[j] for j in keys):
                            failures.append(("key", cf.label, c, inst.weights, u))
                        if {j for j in keys if keys[j] == min(keys.values())} != \
                                {j for j in skeys if skeys[j] == min(skeys.values())}:
                            failures.append(("argmin", cf.label, c, inst.weights, u))
    record(8, "scaling by 2, 3, 1/2 keeps argmins and equilibria, values scale by c^(d+1)",
           not failures, f"{instances} instances x 3 mechanisms x 3 factors, {len(failures)} failures")
    assert not failures, failures[:5]


def test_criterion_9_reproducibility(tmp_path):
    def invoke(tag):
        out = tmp_path / tag
        codes = [
            cli_main(["gen", "--kind", "restricted-related", "--n", "5", "--m", "3", "--seed", "17",
                      "--out", str(out / "inst.json")]),
            cli_main(["run", "--instance", str(out / "inst.json"), "--order", "random", "--seed", "17",
                      "--out-dir", str(out / "run")]),
            cli_main(["analyze", "--instance", str(out / "inst.json"), "--compare", "ccoord",
                      "--seed", "17", "--out-dir", str(out / "analyze")]),
            cli_main(["analyze", "--sweep", "2,3", "--sweep-n", "3", "--sweep-count", "2", "--seed", "17",
                      "--out-dir", str(out / "sweep")]),
        ]
        files = sorted(p for p in out.rglob("*") if p.is_file())
        return codes, {str(p.relative_to(out)): p.read_bytes() for p in files}

    codes_a, files_a = invoke("a")
    codes_b, files_b = invoke("b")
    expected = {"inst.json", "run/trace.jsonl", "run/final.json", "run/summary.json",
                "analyze/report-inst.json", "analyze/equilibria.csv", "analyze/summary.csv",
                "sweep/sweep.csv"}
    ok = codes_a == codes_b == [0, 0, 0, 0] and set(files_a) == expected and files_a == files_b
    differing = sorted(k for k in files_a if files_a.get(k) != files_b.get(k))
    record(9, "identical CLI invocations give byte-identical outputs", ok,
           f"{len(files_a)} files compared, {len(differing)} differ")
    assert codes_a == codes_b == [0, 0, 0, 0]
    assert set(files_a) == expected
    assert files_a == files_b, differing
