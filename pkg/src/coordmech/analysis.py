"""Equilibrium enumeration, optimal makespan and price-of-anarchy/stability checks."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np
from mpmath import iv

from . import kernels
from .dynamics import is_equilibrium, potential
from .exact import DEFAULT_DIGITS, certified_le, format_decimal, format_fraction, ivq, root_decimal, upper_decimal
from .instance import Assignment, Instance, generate_instance, load_vector, makespan
from .mechanism import MAKESPAN, CoefficientFunction, CompletionTime, Mechanism, completion_time, default_d

DEFAULT_CAP = 10 ** 7


class CapExceeded(RuntimeError):
    """The assignment space is larger than the configured cap."""

    def __init__(self, required: int, cap: int):
        super().__init__(f"{required} candidate assignments exceed the cap of {cap}; rerun with --cap {required}")
        self.required = required
        self.cap = cap


def assignment_count(inst: Instance) -> int:
    out = 1
    for o in inst.options:
        out *= len(o)
    return out


def _check_cap(inst: Instance, cap: int) -> None:
    size = assignment_count(inst)
    if size > cap:
        raise CapExceeded(size, cap)


def _kernel_inputs(inst: Instance):
    opts, counts = kernels.option_table(inst.options)
    return inst.int_weights, opts, counts


def enumerate_equilibria_exact(cf: Mechanism, inst: Instance, cap: int = DEFAULT_CAP) -> list[Assignment]:
    """All equilibria by checking every assignment with exact Fractions."""
    _check_cap(inst, cap)
    return [
        asg
        for asg in (Assignment(mo) for mo in product(*inst.options))
        if is_equilibrium(cf, inst, asg)
    ]


def enumerate_equilibria(cf: Mechanism, inst: Instance, cap: int = DEFAULT_CAP,
                         backend: str | None = None) -> list[Assignment]:
    """All pure equilibria in lexicographic order of ``machine_of``.

    dcoord, ccoord and the makespan baseline go through the int64 kernels when
    the scaled weights are small enough; everything else is checked exactly.
    """
    _check_cap(inst, cap)
    W, opts, counts = _kernel_inputs(inst)
    if cf.kind in kernels.KIND_CODES and kernels.fits_int64(W, cf.d):
        idx = kernels.equilibrium_indices(W.astype(np.int64), opts, counts, cf.d, cf.kind, backend)
        return [Assignment(kernels.decode(int(i), opts, counts)) for i in idx]
    return enumerate_equilibria_exact(cf, inst, cap)


def optimal_makespan(inst: Instance, cap: int = DEFAULT_CAP, branch_and_bound: bool = False,
                     backend: str | None = None) -> tuple[Fraction, Assignment]:
    """Minimum makespan and the lexicographically first assignment attaining it.

    Exhaustive within ``cap``; beyond it, branch-and-bound when enabled.
    """
    if assignment_count(inst) > cap:
        if not branch_and_bound:
            raise CapExceeded(assignment_count(inst), cap)
        return branch_and_bound_makespan(inst)
    W, opts, counts = _kernel_inputs(inst)
    if kernels.fits_int64(W, 0):
        val, idx = kernels.min_makespan(W.astype(np.int64), opts, counts, backend)
        return Fraction(val, inst.scale), Assignment(kernels.decode(idx, opts, counts))
    best = None
    for mo in product(*inst.options):
        asg = Assignment(mo)
        mk = makespan(load_vector(inst, asg))
        if best is None or mk < best[0]:
            best = (mk, asg)
    return best


def branch_and_bound_makespan(inst: Instance) -> tuple[Fraction, Assignment]:
    """Exact depth-first branch-and-bound on integer-scaled weights.

    Jobs are branched largest-minimum-weight first. A node is pruned when the
    current makespan, the largest remaining minimum weight, or the average
    bound (assigned load + remaining minimum weights) / m rules out beating
    the incumbent. The witness is an optimal assignment, not necessarily the
    lexicographically first one.
    """
    W = inst.int_weights
    n, m = inst.n, inst.m
    mins = [min(int(W[u, j]) for j in inst.options[u]) for u in range(n)]
    order = sorted(range(n), key=lambda u: (-mins[u], u))
    suffix = [0] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + mins[order[k]]

    # greedy incumbent
    loads = [0] * m
    choice = [0] * n
    for u in order:
        j = min(inst.options[u], key=lambda j: (loads[j] + int(W[u, j]), j))
        loads[j] += int(W[u, j])
        choice[u] = j
    best_val, best_choice = max(loads), list(choice)

    loads = [0] * m
    current = [0] * n

    def search(k: int, assigned: int, mk: int):
        nonlocal best_val, best_choice
        if k == n:
            if mk < best_val:
                best_val, best_choice = mk, list(current)
            return
        # integer loads: an improvement has makespan <= best_val - 1, so total load <= m * (best_val - 1)
        if max(mk, mins[order[k]]) >= best_val or assigned + suffix[k] > m * (best_val - 1):
            return
        u = order[k]
        cands = sorted(inst.options[u], key=lambda j: (loads[j] + int(W[u, j]), j))
        for j in cands:
            w = int(W[u, j])
            new_mk = max(mk, loads[j] + w)
            if new_mk >= best_val:
                continue
            loads[j] += w
            current[u] = j
            search(k + 1, assigned + w, new_mk)
            loads[j] -= w

    search(0, 0, 0)
    return Fraction(best_val, inst.scale), Assignment(tuple(best_choice))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class BoundCheck:
    name: str
    theoretical: str  # factor on the optimal makespan, rounded up
    observed: str     # worst observed ratio
    passed: bool

    def to_json_obj(self) -> dict:
        return {"name": self.name, "theoretical": self.theoretical,
                "observed": self.observed, "passed": self.passed}


@dataclass(frozen=True)
class EquilibriumEntry:
    assignment: Assignment
    phi: Fraction | None
    loads: tuple[Fraction, ...]
    max_ct: CompletionTime
    ratio_power: Fraction  # (max completion time / opt) ** d

    @property
    def makespan(self) -> Fraction:
        return makespan(self.loads)


@dataclass
class EquilibriumReport:
    mechanism: dict
    d: int
    instance_digest: str
    n: int
    m: int
    opt_makespan: Fraction
    opt_witness: Assignment
    equilibria: list[EquilibriumEntry]
    phi_min_index: int | None
    bound_checks: list[BoundCheck] = field(default_factory=list)

    @property
    def poa_ratio_power(self) -> Fraction:
        return max(e.ratio_power for e in self.equilibria)

    @property
    def pos_ratio_power(self) -> Fraction:
        return min(e.ratio_power for e in self.equilibria)

    def poa_ratio(self, digits: int = DEFAULT_DIGITS):
        return root_decimal(self.poa_ratio_power, self.d, digits)

    def pos_ratio(self, digits: int = DEFAULT_DIGITS):
        return root_decimal(self.pos_ratio_power, self.d, digits)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.bound_checks)

    def to_json_obj(self, digits: int = DEFAULT_DIGITS) -> dict:
        return {
            "mechanism": self.mechanism,
            "d": self.d,
            "instance_digest": self.instance_digest,
            "n": self.n,
            "m": self.m,
            "opt_makespan": format_fraction(self.opt_makespan),
            "opt_witness": list(self.opt_witness.machine_of),
            "poa_ratio": str(self.poa_ratio(digits)),
            "pos_ratio": str(self.pos_ratio(digits)),
            "poa_ratio_power": format_fraction(self.poa_ratio_power),
            "pos_ratio_power": format_fraction(self.pos_ratio_power),
            "phi_min_index": self.phi_min_index,
            "equilibria": [
                {
                    "machine_of": list(e.assignment.machine_of),
                    "phi": None if e.phi is None else format_fraction(e.phi),
                    "loads": [format_fraction(x) for x in e.loads],
                    "makespan": format_fraction(e.makespan),
                    "max_ct_power": format_fraction(e.max_ct.lambda_over_wu),
                    "max_ct": str(e.max_ct.approx_digits(digits)),
                    "ratio": str(root_decimal(e.ratio_power, self.d, digits)),
                }
                for e in self.equilibria
            ],
            "bound_checks": [c.to_json_obj() for c in self.bound_checks],
        }

    def csv_rows(self, instance_id: str, digits: int = DEFAULT_DIGITS) -> list[list[str]]:
        rows = []
        for e in self.equilibria:
            rows.append([
                instance_id,
                self.mechanism["kind"],
                str(self.d) if self.mechanism["kind"] != "makespan" else "",
                str(self.n),
                str(self.m),
                "" if e.phi is None else format_decimal(e.phi, digits),
                str(e.max_ct.approx_digits(digits)),
                format_decimal(e.makespan, digits),
                format_decimal(self.opt_makespan, digits),
                str(root_decimal(e.ratio_power, self.d, digits)),
            ])
        return rows


CSV_COLUMNS = ["instance_id", "mech", "d", "n", "m", "phi", "max_ct", "makespan", "opt", "ratio"]


def csv_text(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


def _max_completion(cf: Mechanism, inst: Instance, asg: Assignment) -> CompletionTime:
    return max(completion_time(cf, inst, asg, u) for u in range(inst.n))


def poa_pos_report(cf: Mechanism, inst: Instance, cap: int = DEFAULT_CAP,
                   backend: str | None = None, check_bounds: bool = True) -> EquilibriumReport:
    """Enumerate equilibria and measure them against the optimal makespan."""
    eqs = enumerate_equilibria(cf, inst, cap, backend)
    opt, witness = optimal_makespan(inst, cap, backend=backend)
    entries = []
    for asg in eqs:
        ct = _max_completion(cf, inst, asg)
        entries.append(EquilibriumEntry(
            assignment=asg,
            phi=None if cf.kind == "makespan" else potential(cf, inst, asg),
            loads=load_vector(inst, asg),
            max_ct=ct,
            ratio_power=ct.lambda_over_wu / opt ** ct.d,
        ))
    phi_min = None
    if entries and cf.kind != "makespan":
        phi_min = min(range(len(entries)), key=lambda i: (entries[i].phi, i))
    report = EquilibriumReport(
        mechanism=cf.descriptor(),
        d=cf.d,
        instance_digest=inst.digest(),
        n=inst.n,
        m=inst.m,
        opt_makespan=opt,
        opt_witness=witness,
        equilibria=entries,
        phi_min_index=phi_min,
    )
    if check_bounds and cf.kind == "dcoord" and entries:
        report.bound_checks = verify_load_bounds(cf, inst, report)
    return report


# ---------------------------------------------------------------------------
# theoretical factors as interval expressions


def load_factor_any(d: int, m: int):
    """m^(1/(d+1)) (d+1)/ln 2: machine load over optimum at any equilibrium."""
    return lambda: ivq(m) ** (iv.mpf(1) / (d + 1)) * (d + 1) / iv.log(2)


def load_factor_phi_min(d: int, m: int):
    """((d+1)/d m)^(1/(d+1)): machine load over optimum at the potential minimizer."""
    return lambda: ivq(Fraction((d + 1) * m, d)) ** (iv.mpf(1) / (d + 1))


def poa_factor(d: int, m: int):
    """d^(1/d) (m^(1/(d+1)) (d+1)/ln 2 + 1)."""
    inner = load_factor_any(d, m)
    return lambda: ivq(d) ** (iv.mpf(1) / d) * (inner() + 1)


def pos_factor(d: int, m: int):
    """d^(1/d) (((d+1)/d m)^(1/(d+1)) + 1)."""
    inner = load_factor_phi_min(d, m)
    return lambda: ivq(d) ** (iv.mpf(1) / d) * (inner() + 1)


def _power_of(factor, d: int):
    # compare d-th powers: ratio^d <= factor^d = d * (inner + 1)^d
    return lambda: factor() ** d


def verify_load_bounds(cf: Mechanism, inst: Instance, report: EquilibriumReport) -> list[BoundCheck]:
    """Certified checks of the load and completion-time guarantees of dcoord."""
    if cf.kind != "dcoord":
        raise ValueError("the load bounds are proved for dcoord only")
    d, m, opt = cf.d, inst.m, report.opt_makespan
    entries = report.equilibria
    if not entries:
        return []
    checks = []

    worst_load = max(e.makespan for e in entries) / opt
    checks.append(BoundCheck(
        "load-any-equilibrium",
        upper_decimal(load_factor_any(d, m)),
        format_decimal(worst_load),
        certified_le(worst_load, load_factor_any(d, m)),
    ))

    best = entries[report.phi_min_index]
    phi_min_load = best.makespan / opt
    checks.append(BoundCheck(
        "load-potential-minimizer",
        upper_decimal(load_factor_phi_min(d, m)),
        format_decimal(phi_min_load),
        # exact: L^(d+1) <= (d+1)/d * m * opt^(d+1)
        phi_min_load ** (d + 1) <= Fraction((d + 1) * m, d),
    ))

    worst_ratio = report.poa_ratio_power
    checks.append(BoundCheck(
        "completion-any-equilibrium",
        upper_decimal(poa_factor(d, m)),
        str(root_decimal(worst_ratio, d)),
        certified_le(worst_ratio, _power_of(poa_factor(d, m), d)),
    ))

    checks.append(BoundCheck(
        "completion-potential-minimizer",
        upper_decimal(pos_factor(d, m)),
        str(root_decimal(best.ratio_power, d)),
        certified_le(best.ratio_power, _power_of(pos_factor(d, m), d)),
    ))
    return checks


# ---------------------------------------------------------------------------
# sweep


SWEEP_COLUMNS = ["m", "d", "instances", "worst_poa", "worst_pos", "worst_phi_min_ratio",
                 "poa_factor", "pos_factor"]


def sweep(kind: str, ms, n: int, count: int, seed: int, generator: str = "uniform-integer",
          params: dict | None = None, cap: int = DEFAULT_CAP, d: int | str = "auto",
          backend: str | None = None) -> list[list[str]]:
    """Worst observed ratios against m, for qualitative inspection only."""
    rows = []
    for m in ms:
        dd = default_d(m) if d == "auto" else int(d)
        cf = MAKESPAN if kind == "makespan" else CoefficientFunction(kind, dd)
        poa = pos = phimin = None
        for k in range(count):
            inst = generate_instance(generator, n, m, seed + 1000 * m + k, params)
            rep = poa_pos_report(cf, inst, cap, backend, check_bounds=False)
            pw = rep.poa_ratio_power
            sw = rep.pos_ratio_power
            poa = pw if poa is None else max(poa, pw)
            pos = sw if pos is None else max(pos, sw)
            if rep.phi_min_index is not None:
                fw = rep.equilibria[rep.phi_min_index].ratio_power
                phimin = fw if phimin is None else max(phimin, fw)
        rows.append([
            str(m), str(cf.d), str(count),
            str(root_decimal(poa, cf.d)), str(root_decimal(pos, cf.d)),
            "" if phimin is None else str(root_decimal(phimin, cf.d)),
            upper_decimal(poa_factor(dd, m)), upper_decimal(pos_factor(dd, m)),
        ])
    return rows
