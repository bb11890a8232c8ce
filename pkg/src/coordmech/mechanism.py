"""Coefficient functions and exact Lambda-function evaluation.

A mechanism of degree ``d`` is identified by a coefficient function gamma on
multisets of non-negative integers summing to ``d + 1``. For a machine holding
jobs with local weights ``w_1..w_l``::

    Lambda(U)      = sum over t_1+..+t_l = d+1        gamma({t}) * prod w_k^t_k
    Lambda_i(U)    = same sum restricted to t_i >= 1
    completion_i   = (Lambda_i(U) / w_min_i) ** (1/d)

Everything here is exact (``Fraction``); only ``CompletionTime.approx`` leaves
the rationals, for display.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import factorial, lcm, prod
from typing import Iterable, Iterator, Sequence

from .exact import DEFAULT_DIGITS, format_fraction, root_decimal, to_fraction
from .instance import Assignment, Instance, InstanceError

KINDS = ("dcoord", "ccoord", "custom")


class MechanismError(ValueError):
    pass


def partitions(total: int, max_part: int | None = None) -> Iterator[tuple[int, ...]]:
    """Partitions of ``total`` into positive parts, each as a non-increasing tuple."""
    if max_part is None:
        max_part = total
    if total == 0:
        yield ()
        return
    for first in range(min(total, max_part), 0, -1):
        for rest in partitions(total - first, first):
            yield (first,) + rest


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Ordered tuples of ``parts`` non-negative ints summing to ``total`` (stars and bars)."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for bars in combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def canonical(parts: Iterable[int]) -> tuple[int, ...]:
    """Drop zeros and sort descending; gamma only sees this form."""
    return tuple(sorted((int(t) for t in parts if t), reverse=True))


def default_d(m: int) -> int:
    """max(2, ceil(log2 m))."""
    return max(2, (m - 1).bit_length())


@dataclass(frozen=True)
class CoefficientFunction:
    """gamma for a mechanism of degree ``d``.

    ``table`` is only used by the ``custom`` kind: pairs of (partition of d+1,
    value), one for every partition.
    """

    kind: str
    d: int
    table: tuple[tuple[tuple[int, ...], Fraction], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MechanismError(f"unknown mechanism kind {self.kind!r}")
        if not isinstance(self.d, int) or self.d < 2:
            raise MechanismError(f"degree d must be an integer >= 2, got {self.d!r}")
        if self.kind != "custom":
            if self.table:
                raise MechanismError(f"{self.kind} takes no coefficient table")
            return
        entries = {}
        for part, val in self.table:
            key = canonical(part)
            if sum(key) != self.d + 1 or any(t < 0 for t in part):
                raise MechanismError(f"{list(part)} is not a partition of {self.d + 1}")
            val = to_fraction(val)
            if val < 0:
                raise MechanismError(f"negative gamma for {list(part)}")
            if key in entries and entries[key] != val:
                raise MechanismError(f"conflicting gamma values for {list(key)}")
            entries[key] = val
        missing = [p for p in partitions(self.d + 1) if p not in entries]
        if missing:
            raise MechanismError(f"custom table is missing partitions {[list(p) for p in missing]}")
        object.__setattr__(self, "table", tuple(sorted(entries.items(), reverse=True)))

    @classmethod
    def dcoord(cls, d: int) -> "CoefficientFunction":
        return cls("dcoord", d)

    @classmethod
    def ccoord(cls, d: int) -> "CoefficientFunction":
        return cls("ccoord", d)

    @classmethod
    def custom(cls, d: int, table) -> "CoefficientFunction":
        items = table.items() if isinstance(table, dict) else table
        return cls("custom", d, tuple((tuple(p), to_fraction(v)) for p, v in items))

    @cached_property
    def _lookup(self) -> dict:
        return dict(self.table)

    def gamma(self, parts: Iterable[int]) -> Fraction:
        key = canonical(parts)
        if sum(key) != self.d + 1:
            raise MechanismError(f"gamma is defined on multisets summing to {self.d + 1}")
        if self.kind == "ccoord":
            return Fraction(factorial(self.d))
        if self.kind == "dcoord":
            if key[0] == self.d + 1:
                return Fraction(1)
            return Fraction(factorial(self.d) * self.d, prod(factorial(t) for t in key))
        return self._lookup[key]

    @property
    def label(self) -> str:
        return f"{self.kind}(d={self.d})"

    def descriptor(self) -> dict:
        out = {"kind": self.kind, "d": self.d}
        if self.kind == "custom":
            out["table"] = [
                {"partition": list(p), "gamma": format_fraction(v)} for p, v in self.table
            ]
        return out


@dataclass(frozen=True)
class MakespanBaseline:
    """Comparison baseline outside the Lambda class: every job finishes at the machine load."""

    kind: str = "makespan"
    d: int = 1

    @property
    def label(self) -> str:
        return "makespan"

    def descriptor(self) -> dict:
        return {"kind": "makespan"}


MAKESPAN = MakespanBaseline()

Mechanism = CoefficientFunction | MakespanBaseline


def mechanism_from_descriptor(obj: dict, m: int | None = None) -> Mechanism:
    """Build a mechanism from its JSON descriptor. ``"d": "auto"`` needs ``m``."""
    kind = obj.get("kind")
    if kind == "makespan":
        return MAKESPAN
    d = obj.get("d", "auto")
    if d == "auto":
        if m is None:
            raise MechanismError("d='auto' needs the machine count")
        d = default_d(m)
    if kind == "custom":
        if "table" not in obj:
            raise MechanismError("custom mechanism needs a table")
        return CoefficientFunction.custom(
            int(d), [(e["partition"], e["gamma"]) for e in obj["table"]]
        )
    if kind not in KINDS:
        raise MechanismError(f"unknown mechanism kind {kind!r}")
    return CoefficientFunction(kind, int(d))


def load_mechanism(path, m: int | None = None) -> Mechanism:
    with open(path, encoding="utf-8") as f:
        return mechanism_from_descriptor(json.load(f), m)


# ---------------------------------------------------------------------------
# Lambda over plain weight lists


def bruteforce_all(cf: CoefficientFunction, ws: Sequence[Fraction]) -> tuple[Fraction, list[Fraction]]:
    """Lambda_j(U) and every Lambda_{u_i,j}(U) from one pass over the compositions.

    A composition's term counts toward player i exactly when its i-th exponent
    is positive. Monomials are summed as integers (weights times their common
    denominator) per exponent multiset; gamma is applied once per multiset.
    """
    ell, top = len(ws), cf.d + 1
    ws = [Fraction(w) for w in ws]
    scale = lcm(*(w.denominator for w in ws)) if ws else 1
    powers = [[int(w * scale) ** e for e in range(top + 1)] for w in ws]
    group_total: dict[tuple[int, ...], int] = {}
    group_player: dict[tuple[int, ...], list[int]] = {}
    for t in compositions(top, ell):
        key = tuple(sorted(t))
        term = 1
        for i, e in enumerate(t):
            if e:
                term *= powers[i][e]
        if key not in group_total:
            group_total[key] = 0
            group_player[key] = [0] * ell
        group_total[key] += term
        acc = group_player[key]
        for i, e in enumerate(t):
            if e:
                acc[i] += term
    denom = scale ** top
    total = Fraction(0)
    per_player = [Fraction(0)] * ell
    for key, sub in group_total.items():
        g = cf.gamma(key)
        total += g * sub
        for i, x in enumerate(group_player[key]):
            per_player[i] += g * x
    return total / denom, [x / denom for x in per_player]


def _set_bruteforce(cf: CoefficientFunction, ws: Sequence[Fraction]) -> Fraction:
    return bruteforce_all(cf, ws)[0]


def _player_bruteforce(cf: CoefficientFunction, ws: Sequence[Fraction], i: int) -> Fraction:
    return bruteforce_all(cf, ws)[1][i]


def _dcoord_set(d: int, ws: Sequence[Fraction]) -> Fraction:
    if not ws:
        return Fraction(0)
    load = sum(ws, Fraction(0))
    return (d * load ** (d + 1) + sum(w ** (d + 1) for w in ws)) / (d + 1)


def _dcoord_player(d: int, ws: Sequence[Fraction], i: int) -> Fraction:
    load = sum(ws, Fraction(0))
    w = ws[i]
    return (d * (load ** (d + 1) - (load - w) ** (d + 1)) + w ** (d + 1)) / (d + 1)


def complete_homogeneous(ws: Sequence[Fraction], degree: int) -> list[Fraction]:
    """[h_0, ..., h_degree] of the given variables, by the one-variable-at-a-time DP."""
    h = [Fraction(1)] + [Fraction(0)] * degree
    for x in ws:
        # h_k(.., x) = h_k(..) + x * h_{k-1}(.., x), ascending k reuses the new value
        for k in range(1, degree + 1):
            h[k] = h[k] + x * h[k - 1]
    return h


def _ccoord_psi(d: int, ws: Sequence[Fraction]) -> Fraction:
    if not ws:
        return Fraction(0)
    return factorial(d) * complete_homogeneous(ws, d)[d]


def _ccoord_set(d: int, ws: Sequence[Fraction]) -> Fraction:
    if not ws:
        return Fraction(0)
    return factorial(d) * complete_homogeneous(ws, d + 1)[d + 1]


def lambda_set_weights(cf: CoefficientFunction, ws: Sequence[Fraction]) -> Fraction:
    """Lambda_j(U) for local weights ``ws``; closed forms for dcoord/ccoord."""
    if cf.kind == "dcoord":
        return _dcoord_set(cf.d, ws)
    if cf.kind == "ccoord":
        return _ccoord_set(cf.d, ws)
    return _set_bruteforce(cf, ws)


def lambda_player_weights(cf: CoefficientFunction, ws: Sequence[Fraction], i: int) -> Fraction:
    """Lambda_{u_i,j}(U) for local weights ``ws``; ``i`` indexes the player in ``ws``."""
    if cf.kind == "dcoord":
        return _dcoord_player(cf.d, ws, i)
    if cf.kind == "ccoord":
        return ws[i] * _ccoord_psi(cf.d, ws)
    return _player_bruteforce(cf, ws, i)


# ---------------------------------------------------------------------------
# instance-level operations


def _local_weights(inst: Instance, j: int, U: Iterable[int]) -> list[Fraction]:
    try:
        return [inst.w(u, j) for u in U]
    except InstanceError as exc:
        raise MechanismError(str(exc)) from None


def _index_in(U: Sequence[int], u: int) -> int:
    try:
        return list(U).index(u)
    except ValueError:
        raise MechanismError(f"job {u} is not in the job set {list(U)}") from None


def lambda_set_bruteforce(cf: CoefficientFunction, inst: Instance, j: int, U: Iterable[int]) -> Fraction:
    """Reference Lambda_j(U): one term per composition of d+1 into |U| ordered parts."""
    return _set_bruteforce(cf, _local_weights(inst, j, U))


def lambda_player_bruteforce(cf: CoefficientFunction, inst: Instance, j: int, U: Sequence[int], u: int) -> Fraction:
    """Reference Lambda_{u,j}(U): compositions with a positive exponent on u."""
    U = list(U)
    return _player_bruteforce(cf, _local_weights(inst, j, U), _index_in(U, u))


def lambda_set_dcoord(inst: Instance, j: int, U: Iterable[int], d: int) -> Fraction:
    return _dcoord_set(d, _local_weights(inst, j, U))


def lambda_player_dcoord(inst: Instance, j: int, U: Sequence[int], u: int, d: int) -> Fraction:
    U = list(U)
    return _dcoord_player(d, _local_weights(inst, j, U), _index_in(U, u))


def psi_ccoord(inst: Instance, j: int, U: Iterable[int], d: int) -> Fraction:
    """d! times the degree-d complete homogeneous polynomial of the local weights."""
    return _ccoord_psi(d, _local_weights(inst, j, U))


def lambda_player_ccoord(inst: Instance, j: int, U: Sequence[int], u: int, d: int) -> Fraction:
    U = list(U)
    _index_in(U, u)
    return inst.w(u, j) * psi_ccoord(inst, j, U, d)


def lambda_set(cf: CoefficientFunction, inst: Instance, j: int, U: Iterable[int]) -> Fraction:
    return lambda_set_weights(cf, _local_weights(inst, j, U))


def lambda_player(cf: CoefficientFunction, inst: Instance, j: int, U: Sequence[int], u: int) -> Fraction:
    U = list(U)
    return lambda_player_weights(cf, _local_weights(inst, j, U), _index_in(U, u))


@dataclass(frozen=True, order=True)
class CompletionTime:
    """A completion time kept as its exact d-th power.

    ``lambda_over_wu`` is ``Lambda_{u,j}(N_j) / w_u`` (for the makespan baseline,
    the machine load with ``d == 1``). For one player, ordering these values is
    ordering the completion times themselves.
    """

    lambda_over_wu: Fraction
    d: int

    @cached_property
    def approx(self):
        return root_decimal(self.lambda_over_wu, self.d, DEFAULT_DIGITS)

    def approx_digits(self, digits: int):
        return root_decimal(self.lambda_over_wu, self.d, digits)


def _others_on(asg: Assignment, j: int, u: int) -> list[int]:
    return [v for v, k in enumerate(asg.machine_of) if k == j and v != u]


def completion_time(cf: Mechanism, inst: Instance, asg: Assignment, u: int) -> CompletionTime:
    j = asg.machine_of[u]
    jobs = [v for v, k in enumerate(asg.machine_of) if k == j]
    ws = _local_weights(inst, j, jobs)
    if cf.kind == "makespan":
        return CompletionTime(sum(ws, Fraction(0)), 1)
    lam = lambda_player_weights(cf, ws, jobs.index(u))
    return CompletionTime(lam / inst.min_weight[u], cf.d)


def deviation_key(cf: Mechanism, inst: Instance, asg: Assignment, u: int, j_target: int) -> Fraction:
    """Lambda_{u,j}(N_j + u) for j = ``j_target``; the per-player comparison currency.

    For the makespan baseline it is the load ``u`` would see on ``j_target``.
    """
    if not inst.available(u, j_target):
        raise MechanismError(f"job {u} is unavailable on machine {j_target}")
    jobs = _others_on(asg, j_target, u) + [u]
    ws = _local_weights(inst, j_target, jobs)
    if cf.kind == "makespan":
        return sum(ws, Fraction(0))
    return lambda_player_weights(cf, ws, len(ws) - 1)
