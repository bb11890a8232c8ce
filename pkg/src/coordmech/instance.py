"""Scheduling instances, assignments, load vectors, generators and I/O."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import lcm
from typing import Iterable, Sequence

import numpy as np
from mpmath import iv

from .exact import certified_le, format_fraction, ivq, root_decimal, to_fraction

FORMAT = "cml-1"


class _Unavailable:
    """Sentinel for an infinite processing time (job cannot run on the machine)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNAVAILABLE"

    def __reduce__(self):
        return (_Unavailable, ())


UNAVAILABLE = _Unavailable()


class InstanceError(ValueError):
    """Malformed instance or assignment data."""


def _parse_weight(entry) -> Fraction | _Unavailable:
    if entry is None or entry is UNAVAILABLE:
        return UNAVAILABLE
    try:
        w = to_fraction(entry)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"bad weight entry {entry!r}: {exc}") from None
    if w <= 0:
        raise InstanceError(f"weights must be positive, got {entry!r}")
    return w


@dataclass(frozen=True)
class Instance:
    """n jobs on m unrelated machines; ``weights[u][j]`` is a Fraction or UNAVAILABLE."""

    weights: tuple[tuple[Fraction | _Unavailable, ...], ...]
    min_weight: tuple[Fraction, ...] = field(init=False)

    def __post_init__(self):
        rows = tuple(tuple(_parse_weight(w) for w in row) for row in self.weights)
        if not rows:
            raise InstanceError("need at least one job")
        m = len(rows[0])
        if m == 0:
            raise InstanceError("need at least one machine")
        mins = []
        for u, row in enumerate(rows):
            if len(row) != m:
                raise InstanceError(f"row {u} has {len(row)} entries, expected {m}")
            finite = [w for w in row if w is not UNAVAILABLE]
            if not finite:
                raise InstanceError(f"job {u} is unavailable on every machine")
            mins.append(min(finite))
        object.__setattr__(self, "weights", rows)
        object.__setattr__(self, "min_weight", tuple(mins))

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "Instance":
        return cls(tuple(tuple(r) for r in rows))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def m(self) -> int:
        return len(self.weights[0])

    def w(self, u: int, j: int) -> Fraction:
        x = self.weights[u][j]
        if x is UNAVAILABLE:
            raise InstanceError(f"job {u} is unavailable on machine {j}")
        return x

    def available(self, u: int, j: int) -> bool:
        return self.weights[u][j] is not UNAVAILABLE

    @cached_property
    def options(self) -> tuple[tuple[int, ...], ...]:
        """Machines available to each job, ascending."""
        return tuple(
            tuple(j for j, w in enumerate(row) if w is not UNAVAILABLE) for row in self.weights
        )

    @cached_property
    def scale(self) -> int:
        """Common denominator of all finite weights."""
        return lcm(*(w.denominator for row in self.weights for w in row if w is not UNAVAILABLE))

    @cached_property
    def int_weights(self) -> np.ndarray:
        """Weights times ``scale`` as an object array of Python ints (0 = unavailable)."""
        s = self.scale
        out = np.zeros((self.n, self.m), dtype=object)
        for u, row in enumerate(self.weights):
            for j, w in enumerate(row):
                out[u, j] = 0 if w is UNAVAILABLE else int(w * s)
        return out

    def scaled(self, c) -> "Instance":
        c = to_fraction(c)
        if c <= 0:
            raise InstanceError("scale factor must be positive")
        return Instance.from_rows(
            [[UNAVAILABLE if w is UNAVAILABLE else w * c for w in row] for row in self.weights]
        )

    def to_json_obj(self) -> dict:
        return {
            "format": FORMAT,
            "n": self.n,
            "m": self.m,
            "weights": [[_weight_json(w) for w in row] for row in self.weights],
            "min_weight": [_weight_json(w) for w in self.min_weight],
        }

    def digest(self) -> str:
        core = {"n": self.n, "m": self.m, "weights": self.to_json_obj()["weights"]}
        blob = json.dumps(core, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _weight_json(w):
    if w is UNAVAILABLE:
        return None
    if w.denominator == 1:
        return w.numerator
    return format_fraction(w)


@dataclass(frozen=True)
class Assignment:
    """``machine_of[u]`` is the machine job u runs on."""

    machine_of: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "machine_of", tuple(int(j) for j in self.machine_of))

    def __len__(self) -> int:
        return len(self.machine_of)

    def __getitem__(self, u: int) -> int:
        return self.machine_of[u]

    def validate(self, inst: Instance) -> "Assignment":
        if len(self.machine_of) != inst.n:
            raise InstanceError(f"assignment covers {len(self.machine_of)} jobs, instance has {inst.n}")
        for u, j in enumerate(self.machine_of):
            if not 0 <= j < inst.m:
                raise InstanceError(f"job {u} assigned to machine {j}, outside [0, {inst.m})")
            if not inst.available(u, j):
                raise InstanceError(f"job {u} assigned to machine {j} where it is unavailable")
        return self

    def partition(self, m: int) -> tuple[tuple[int, ...], ...]:
        groups: list[list[int]] = [[] for _ in range(m)]
        for u, j in enumerate(self.machine_of):
            groups[j].append(u)
        return tuple(tuple(g) for g in groups)

    def moved(self, u: int, j: int) -> "Assignment":
        mo = list(self.machine_of)
        mo[u] = j
        return Assignment(tuple(mo))

    def to_json_obj(self) -> dict:
        return {"format": FORMAT, "machine_of": list(self.machine_of)}


def min_weight_assignment(inst: Instance) -> Assignment:
    """Every job on its lowest-index minimum-weight machine."""
    return Assignment(
        tuple(
            min(inst.options[u], key=lambda j: (inst.weights[u][j], j)) for u in range(inst.n)
        )
    )


# ---------------------------------------------------------------------------
# loads and norms

LoadVector = tuple  # tuple[Fraction, ...]


def machine_load(inst: Instance, asg: Assignment, j: int) -> Fraction:
    if not 0 <= j < inst.m:
        raise InstanceError(f"machine {j} outside [0, {inst.m})")
    return sum((inst.w(u, j) for u, k in enumerate(asg.machine_of) if k == j), Fraction(0))


def load_vector(inst: Instance, asg: Assignment) -> LoadVector:
    loads = [Fraction(0)] * inst.m
    for u, j in enumerate(asg.machine_of):
        loads[j] += inst.w(u, j)
    return tuple(loads)


def makespan(loads: Sequence[Fraction]) -> Fraction:
    return max((Fraction(x) for x in loads), default=Fraction(0))


def p_norm_power(loads: Sequence[Fraction], p: int) -> Fraction:
    """Exact ``sum_j loads[j]**p``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return sum((Fraction(x) ** p for x in loads), Fraction(0))


def p_norm(loads: Sequence[Fraction], p: int, digits: int = 12):
    """p-norm of a load vector as a Decimal with ``digits`` significant digits."""
    return root_decimal(p_norm_power(loads, p), p, digits)


def norm_bounds_hold(loads: Sequence[Fraction], p: int) -> bool:
    """makespan <= ||loads||_p <= m^(1/p) * makespan, compared via p-th powers."""
    mk = makespan(loads) ** p
    s = p_norm_power(loads, p)
    return mk <= s <= len(loads) * mk


def minkowski_holds(a: Sequence[Fraction], b: Sequence[Fraction], p: int) -> bool:
    """||a+b||_p <= ||a||_p + ||b||_p for non-negative vectors, decided exactly."""
    a = [Fraction(x) for x in a]
    b = [Fraction(x) for x in b]
    lhs = p_norm_power([x + y for x, y in zip(a, b)], p)
    sa, sb = p_norm_power(a, p), p_norm_power(b, p)
    if p == 1:
        return lhs <= sa + sb
    # equality cases cannot be separated by intervals; check the identity instead
    if sa == 0:
        return lhs == sb
    if sb == 0:
        return lhs == sa
    c = _ratio(a, b)
    if c is not None:
        return lhs == (1 + c) ** p * sa
    if p == 2:
        # s_a + s_b + 2 sqrt(s_a s_b) >= lhs  <=>  4 s_a s_b >= (lhs - s_a - s_b)^2 when the gap is positive
        gap = lhs - sa - sb
        return gap <= 0 or 4 * sa * sb >= gap * gap
    return certified_le(
        lhs,
        lambda: (ivq(sa) ** (iv.mpf(1) / p) + ivq(sb) ** (iv.mpf(1) / p)) ** p,
    )


def _ratio(a: list[Fraction], b: list[Fraction]) -> Fraction | None:
    """c with b == c * a, or None when the vectors are not proportional."""
    ratio = None
    for x, y in zip(a, b):
        if x == 0 and y == 0:
            continue
        if x == 0 or y == 0:
            return None
        r = y / x
        if ratio is None:
            ratio = r
        elif r != ratio:
            return None
    return ratio


def convexity_sum_holds(t: Fraction, a: Sequence[Fraction], r: int) -> bool:
    """sum_i ((t+a_i)^r - t^r) <= (t + sum a_i)^r - t^r, exact."""
    t = Fraction(t)
    lhs = sum(((t + Fraction(x)) ** r - t ** r for x in a), Fraction(0))
    rhs = (t + sum((Fraction(x) for x in a), Fraction(0))) ** r - t ** r
    return lhs <= rhs


# ---------------------------------------------------------------------------
# generators

GENERATORS = ("uniform-integer", "restricted-related", "two-values")


def generate_instance(kind: str, n: int, m: int, seed: int, params: dict | None = None) -> Instance:
    """Random integer instance; deterministic in (kind, n, m, seed, params).

    uniform-integer: entries uniform on [lo, hi] (default [1, 10]).
    two-values: entries lo or hi with equal probability (default 1, 4).
    restricted-related: ``size[u] * slowness[j]`` with size on [lo, hi] and
    slowness on [1, max_slowness]; each machine is kept for a job with
    probability ``p_available``. A job left with no machine has its row
    redrawn, or raises when ``on_empty="fail"``.
    """
    params = dict(params or {})
    if kind not in GENERATORS:
        raise InstanceError(f"unknown generator {kind!r}; choose from {', '.join(GENERATORS)}")
    if n < 1 or m < 1:
        raise InstanceError("n and m must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "uniform-integer":
        lo, hi = int(params.get("lo", 1)), int(params.get("hi", 10))
        _check_range(lo, hi)
        rows = rng.integers(lo, hi + 1, size=(n, m)).tolist()
    elif kind == "two-values":
        lo, hi = int(params.get("lo", 1)), int(params.get("hi", 4))
        _check_range(lo, hi)
        rows = np.where(rng.random((n, m)) < 0.5, lo, hi).tolist()
    else:
        lo, hi = int(params.get("lo", 1)), int(params.get("hi", 10))
        _check_range(lo, hi)
        max_slow = int(params.get("max_slowness", 3))
        _check_range(1, max_slow)
        p_av = float(params.get("p_available", 0.6))
        on_empty = params.get("on_empty", "regenerate")
        sizes = rng.integers(lo, hi + 1, size=n)
        slowness = rng.integers(1, max_slow + 1, size=m)
        rows = []
        for u in range(n):
            for _ in range(1000):
                mask = rng.random(m) < p_av
                if mask.any():
                    break
                if on_empty == "fail":
                    raise InstanceError(f"job {u} drew an empty availability row")
            else:
                raise InstanceError(f"job {u}: could not draw a non-empty availability row")
            rows.append(
                [int(sizes[u] * slowness[j]) if mask[j] else None for j in range(m)]
            )
    return Instance.from_rows(rows)


def _check_range(lo: int, hi: int) -> None:
    if lo < 1 or hi < lo:
        raise InstanceError(f"need 1 <= lo <= hi, got lo={lo}, hi={hi}")


# ---------------------------------------------------------------------------
# serialization


def instance_from_json_obj(obj: dict) -> Instance:
    if obj.get("format") != FORMAT:
        raise InstanceError(f"expected format {FORMAT!r}, got {obj.get('format')!r}")
    try:
        n, m, rows = int(obj["n"]), int(obj["m"]), obj["weights"]
    except KeyError as exc:
        raise InstanceError(f"missing field {exc}") from None
    if len(rows) != n or any(len(r) != m for r in rows):
        raise InstanceError(f"weights matrix does not match n={n}, m={m}")
    inst = Instance.from_rows(rows)
    if "min_weight" in obj:
        given = [_parse_weight(x) for x in obj["min_weight"]]
        if tuple(given) != inst.min_weight:
            raise InstanceError("min_weight does not match the weights matrix")
    return inst


def dumps_instance(inst: Instance, meta: dict | None = None) -> str:
    obj = inst.to_json_obj()
    if meta:
        obj["meta"] = meta
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def loads_instance(text: str) -> Instance:
    return instance_from_json_obj(json.loads(text))


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as f:
        return loads_instance(f.read())


def save_instance(inst: Instance, path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_instance(inst, meta))


def assignment_from_json_obj(obj: dict) -> Assignment:
    if obj.get("format") != FORMAT:
        raise InstanceError(f"expected format {FORMAT!r}, got {obj.get('format')!r}")
    return Assignment(tuple(obj["machine_of"]))


def load_assignment(path) -> Assignment:
    with open(path, encoding="utf-8") as f:
        return assignment_from_json_obj(json.load(f))
