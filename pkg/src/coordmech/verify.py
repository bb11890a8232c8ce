"""Randomized property suites, run by ``coordmech verify`` and the test-suite."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .analysis import enumerate_equilibria, poa_pos_report
from .dynamics import is_equilibrium, potential, run_dynamics
from .instance import (
    Assignment,
    Instance,
    convexity_sum_holds,
    generate_instance,
    min_weight_assignment,
    minkowski_holds,
    norm_bounds_hold,
)
from .mechanism import (
    CoefficientFunction,
    _player_bruteforce,
    _set_bruteforce,
    canonical,
    completion_time,
    deviation_key,
    lambda_player_weights,
    lambda_set_weights,
    partitions,
)


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, msg: str) -> None:
        if len(self.failures) < 20:
            self.failures.append(msg)
        else:
            self.failures[-1] = "... (more failures truncated)"

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "" if self.passed else f"  first failure: {self.failures[0]}"
        return f"{status}  {self.name:<16} {self.cases} cases{extra}"


def sample_custom(d: int) -> CoefficientFunction:
    """A non-trivial custom gamma: (1 + number of parts) / largest part."""
    return CoefficientFunction.custom(
        d, [(p, Fraction(1 + len(p), p[0])) for p in partitions(d + 1)]
    )


def mechanisms_for(d: int) -> list[CoefficientFunction]:
    return [CoefficientFunction.dcoord(d), CoefficientFunction.ccoord(d), sample_custom(d)]


def _weights(rng, size: int, hi: int = 10) -> list[Fraction]:
    return [Fraction(int(x)) for x in rng.integers(1, hi + 1, size=size)]


def _random_instance(rng, n_max: int, m_max: int, n_min: int = 1, m_min: int = 1) -> Instance:
    n = int(rng.integers(n_min, n_max + 1))
    m = int(rng.integers(m_min, m_max + 1))
    kind = ("uniform-integer", "two-values", "restricted-related")[int(rng.integers(3))]
    return generate_instance(kind, n, m, int(rng.integers(2 ** 31)))


def _random_assignment(rng, inst: Instance) -> Assignment:
    return Assignment(tuple(int(rng.choice(o)) for o in inst.options))


# ---------------------------------------------------------------------------
# suites; each takes (rng, cases, ds, mechs) where mechs overrides the mechanisms tried


def suite_oracle(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("oracle")
    for d in ds:
        dc, cc = CoefficientFunction.dcoord(d), CoefficientFunction.ccoord(d)
        for size in range(0, 7):
            for _ in range(cases):
                ws = _weights(rng, size)
                res.cases += 1
                if lambda_set_weights(dc, ws) != _set_bruteforce(dc, ws):
                    res.fail(f"dcoord set d={d} ws={ws}")
                if lambda_set_weights(cc, ws) != _set_bruteforce(cc, ws):
                    res.fail(f"ccoord set d={d} ws={ws}")
                for i in range(size):
                    if lambda_player_weights(dc, ws, i) != _player_bruteforce(dc, ws, i):
                        res.fail(f"dcoord player d={d} ws={ws} i={i}")
                    if lambda_player_weights(cc, ws, i) != _player_bruteforce(cc, ws, i):
                        res.fail(f"ccoord player d={d} ws={ws} i={i}")
    return res


def suite_decomposition(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("decomposition")
    for d in ds:
        for cf in mechs or mechanisms_for(d):
            for _ in range(cases):
                ws = _weights(rng, int(rng.integers(1, 6)))
                res.cases += 1
                whole = lambda_set_weights(cf, ws)
                for i in range(len(ws)):
                    rest = ws[:i] + ws[i + 1:]
                    if whole != lambda_player_weights(cf, ws, i) + lambda_set_weights(cf, rest):
                        res.fail(f"{cf.label} ws={ws} i={i}")
    return res


def suite_potential(rng, cases, ds, mechs=None) -> SuiteResult:
    """Exact potential identity for single-player deviations."""
    res = SuiteResult("potential")
    for d in ds:
        for cf in mechs or mechanisms_for(d):
            done = 0
            while done < cases:
                inst = _random_instance(rng, 6, 4, n_min=1, m_min=2)
                u = int(rng.integers(inst.n))
                if len(inst.options[u]) < 2:
                    continue
                done += 1
                res.cases += 1
                asg = _random_assignment(rng, inst)
                j1 = asg.machine_of[u]
                j2 = int(rng.choice([j for j in inst.options[u] if j != j1]))
                new = asg.moved(u, j2)
                dphi = potential(cf, inst, asg) - potential(cf, inst, new)
                k1 = deviation_key(cf, inst, asg, u, j1)
                k2 = deviation_key(cf, inst, new, u, j2)
                if dphi != k1 - k2:
                    res.fail(f"{cf.label} {inst.weights} {asg.machine_of} u={u} -> {j2}: dPhi={dphi} keys={k1 - k2}")
                    continue
                ct1 = completion_time(cf, inst, asg, u).lambda_over_wu
                ct2 = completion_time(cf, inst, new, u).lambda_over_wu
                if _sign(dphi) != _sign(ct1 - ct2):
                    res.fail(f"{cf.label} sign mismatch u={u}")
    return res


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def suite_feasibility(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("feasibility")
    for d in ds:
        cf = CoefficientFunction.dcoord(d)
        for _ in range(cases):
            inst = _random_instance(rng, 6, 4)
            asg = _random_assignment(rng, inst)
            for j, jobs in enumerate(asg.partition(inst.m)):
                ws = [inst.w(u, j) for u in jobs]
                load = sum(ws, Fraction(0))
                for i, u in enumerate(jobs):
                    res.cases += 1
                    if lambda_player_weights(cf, ws, i) < inst.min_weight[u] * load ** d:
                        res.fail(f"d={d} {inst.weights} {asg.machine_of} u={u}")
    return res


def suite_sandwich(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("sandwich")
    for d in ds:
        cf = CoefficientFunction.dcoord(d)
        for _ in range(cases):
            ws = _weights(rng, int(rng.integers(1, 7)))
            load = sum(ws, Fraction(0))
            lam = lambda_set_weights(cf, ws)
            res.cases += 1
            if not Fraction(d, d + 1) * load ** (d + 1) <= lam <= load ** (d + 1):
                res.fail(f"set bound d={d} ws={ws}")
            for i, w in enumerate(ws):
                lp = lambda_player_weights(cf, ws, i)
                if not w * load ** d <= lp <= d * w * load ** d:
                    res.fail(f"player bound d={d} ws={ws} i={i}")
    return res


def suite_norms(rng, cases, ds=None, mechs=None) -> SuiteResult:
    res = SuiteResult("norms")
    for _ in range(cases):
        m = int(rng.integers(1, 7))
        a = [Fraction(int(x), int(y)) for x, y in zip(rng.integers(0, 20, m), rng.integers(1, 5, m))]
        b = [Fraction(int(x), int(y)) for x, y in zip(rng.integers(0, 20, m), rng.integers(1, 5, m))]
        for p in range(1, 9):
            res.cases += 1
            if not norm_bounds_hold(a, p):
                res.fail(f"norm-vs-max p={p} a={a}")
            if not minkowski_holds(a, b, p):
                res.fail(f"minkowski p={p} a={a} b={b}")
        t = Fraction(int(rng.integers(0, 10)), int(rng.integers(1, 4)))
        for r in range(1, 7):
            res.cases += 1
            if not convexity_sum_holds(t, a, r):
                res.fail(f"convexity r={r} t={t} a={a}")
    return res


def suite_anonymity(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("anonymity")
    for d in ds:
        for cf in mechs or mechanisms_for(d):
            for _ in range(cases):
                inst = _random_instance(rng, 5, 3, n_min=2)
                rows = [list(r) for r in inst.weights]
                rows[1] = list(rows[0])  # jobs 0 and 1 become identical
                inst = Instance.from_rows(rows)
                asg = _random_assignment(rng, inst)
                mo = list(asg.machine_of)
                mo[0], mo[1] = mo[1], mo[0]
                swapped = Assignment(tuple(mo))
                res.cases += 1
                for u in range(inst.n):
                    v = {0: 1, 1: 0}.get(u, u)
                    if completion_time(cf, inst, asg, u) != completion_time(cf, inst, swapped, v):
                        res.fail(f"{cf.label} {inst.weights} {asg.machine_of} u={u}")
    return res


def suite_scale(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("scale")
    for d in ds:
        for cf in mechs or mechanisms_for(d):
            for _ in range(cases):
                inst = _random_instance(rng, 5, 3)
                asg = _random_assignment(rng, inst)
                for c in (Fraction(2), Fraction(3), Fraction(1, 2)):
                    big = inst.scaled(c)
                    res.cases += 1
                    for u in range(inst.n):
                        keys = [deviation_key(cf, inst, asg, u, j) for j in inst.options[u]]
                        bkeys = [deviation_key(cf, big, asg, u, j) for j in inst.options[u]]
                        if any(b != k * c ** (d + 1) for k, b in zip(keys, bkeys)):
                            res.fail(f"{cf.label} key scaling c={c}")
                        if _argmins(keys) != _argmins(bkeys):
                            res.fail(f"{cf.label} argmin changed c={c}")
    return res


def _argmins(keys) -> list[int]:
    lo = min(keys)
    return [i for i, k in enumerate(keys) if k == lo]


def suite_zero_invariance(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("zero-invariance")
    for d in ds:
        for cf in mechs or mechanisms_for(d):
            parts = list(partitions(d + 1))
            for _ in range(cases):
                p = list(parts[int(rng.integers(len(parts)))])
                padded = p + [0] * int(rng.integers(1, 4))
                rng.shuffle(padded)
                res.cases += 1
                if cf.gamma(p) != cf.gamma(padded) or canonical(padded) != tuple(p):
                    res.fail(f"{cf.label} gamma({p}) != gamma({padded})")
    return res


def distinct_starts(rng, inst: Instance, count: int = 3) -> list[Assignment]:
    """Up to ``count`` distinct valid starts: min-weight, then random draws."""
    starts = [min_weight_assignment(inst)]
    total = 1
    for o in inst.options:
        total *= len(o)
    while len(starts) < min(count, total):
        cand = _random_assignment(rng, inst)
        if cand not in starts:
            starts.append(cand)
    return starts


def suite_equilibria(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("equilibria")
    for d in ds:
        for cf in mechs or [CoefficientFunction.dcoord(d), CoefficientFunction.ccoord(d)]:
            for _ in range(cases):
                inst = _random_instance(rng, 5, 3, n_min=2, m_min=2)
                eqs = set(enumerate_equilibria(cf, inst))
                res.cases += 1
                if not eqs:
                    res.fail(f"{cf.label} no equilibrium for {inst.weights}")
                    continue
                for start in distinct_starts(rng, inst):
                    tr = run_dynamics(cf, inst, start, max_iter=inst.m ** inst.n * inst.n)
                    if not tr.converged:
                        res.fail(f"{cf.label} dynamics did not converge on {inst.weights}")
                    elif tr.final not in eqs or not is_equilibrium(cf, inst, tr.final):
                        res.fail(f"{cf.label} final {tr.final.machine_of} not an enumerated equilibrium")
                    if any(not mv.phi_after < mv.phi_before for mv in tr.moves):
                        res.fail(f"{cf.label} potential did not decrease")
    return res


def suite_bounds(rng, cases, ds, mechs=None) -> SuiteResult:
    res = SuiteResult("bounds")
    for d in ds:
        cf = CoefficientFunction.dcoord(d)
        for _ in range(cases):
            inst = _random_instance(rng, 5, 3, n_min=2, m_min=2)
            rep = poa_pos_report(cf, inst)
            res.cases += 1
            for chk in rep.bound_checks:
                if not chk.passed:
                    res.fail(f"{chk.name} d={d} {inst.weights}: {chk.observed} > {chk.theoretical}")
            if not rep.pos_ratio_power <= rep.poa_ratio_power or rep.pos_ratio_power < 1:
                res.fail(f"ratio ordering d={d} {inst.weights}")
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "oracle": suite_oracle,
    "decomposition": suite_decomposition,
    "potential": suite_potential,
    "feasibility": suite_feasibility,
    "sandwich": suite_sandwich,
    "norms": suite_norms,
    "anonymity": suite_anonymity,
    "scale": suite_scale,
    "zero-invariance": suite_zero_invariance,
    "equilibria": suite_equilibria,
    "bounds": suite_bounds,
}

DEFAULT_CASES = {
    "oracle": 5,
    "decomposition": 30,
    "potential": 40,
    "feasibility": 40,
    "sandwich": 60,
    "norms": 40,
    "anonymity": 10,
    "scale": 10,
    "zero-invariance": 30,
    "equilibria": 10,
    "bounds": 10,
}


def run_suites(names=None, seed: int = 0, ds=(2, 3), cases: int | None = None,
               mechs=None) -> list[SuiteResult]:
    out = []
    for name in names or SUITES:
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        n_cases = cases if cases is not None else DEFAULT_CASES[name]
        out.append(SUITES[name](rng, n_cases, list(ds), mechs))
    return out
