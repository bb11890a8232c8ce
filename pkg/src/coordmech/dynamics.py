"""Potential function and exact best-response dynamics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .exact import format_fraction
from .instance import Assignment, Instance, min_weight_assignment
from .mechanism import Mechanism, deviation_key, lambda_set

log = logging.getLogger(__name__)

ORDERS = ("round-robin", "random", "max-improvement")


def potential(cf: Mechanism, inst: Instance, asg: Assignment) -> Fraction:
    """Phi(N) = sum over machines of Lambda_j(N_j)."""
    if cf.kind == "makespan":
        raise TypeError("the makespan baseline has no Lambda potential")
    return sum(
        (lambda_set(cf, inst, j, jobs) for j, jobs in enumerate(asg.partition(inst.m)) if jobs),
        Fraction(0),
    )


def _keys(cf, inst, asg, u):
    return [(deviation_key(cf, inst, asg, u, j), j) for j in inst.options[u]]


def best_response(cf: Mechanism, inst: Instance, asg: Assignment, u: int) -> int | None:
    """A strictly better machine for ``u`` (minimum key, then lowest index), else None.

    Ties with the current machine never trigger a move.
    """
    current = deviation_key(cf, inst, asg, u, asg.machine_of[u])
    key, j = min(_keys(cf, inst, asg, u))
    if key < current:
        return j
    return None


class EquilibriumCheck(NamedTuple):
    ok: bool
    witness: tuple[int, int] | None  # (player, better machine)

    def __bool__(self) -> bool:
        return self.ok


def is_equilibrium(cf: Mechanism, inst: Instance, asg: Assignment) -> EquilibriumCheck:
    for u in range(inst.n):
        j = best_response(cf, inst, asg, u)
        if j is not None:
            return EquilibriumCheck(False, (u, j))
    return EquilibriumCheck(True, None)


@dataclass(frozen=True)
class Move:
    player: int
    source: int
    target: int
    phi_before: Fraction | None
    phi_after: Fraction | None

    def to_json_obj(self) -> dict:
        return {
            "player": self.player,
            "from": self.source,
            "to": self.target,
            "phi_before": None if self.phi_before is None else format_fraction(self.phi_before),
            "phi_after": None if self.phi_after is None else format_fraction(self.phi_after),
        }


@dataclass
class DynamicsTrace:
    moves: list[Move] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    final: Assignment | None = None

    def jsonl(self) -> str:
        return "".join(json.dumps(m.to_json_obj(), sort_keys=True) + "\n" for m in self.moves)


def default_max_iter(inst: Instance) -> int:
    return 10 * inst.n * inst.m ** 2


def run_dynamics(
    cf: Mechanism,
    inst: Instance,
    start: Assignment | None = None,
    order: str = "round-robin",
    max_iter: int | None = None,
    seed: int = 0,
) -> DynamicsTrace:
    """Best-response play until a full pass produces no move or ``max_iter`` moves.

    order: ``round-robin`` (players 0..n-1 repeatedly), ``random`` (a fresh
    permutation per pass, seeded) or ``max-improvement`` (the player whose
    best response lowers its key the most, lowest index on ties).
    """
    if order not in ORDERS:
        raise ValueError(f"unknown move order {order!r}; choose from {', '.join(ORDERS)}")
    asg = (start or min_weight_assignment(inst)).validate(inst)
    if max_iter is None:
        max_iter = default_max_iter(inst)
    has_phi = cf.kind != "makespan"
    phi = potential(cf, inst, asg) if has_phi else None
    rng = np.random.default_rng(seed)
    trace = DynamicsTrace()

    def apply(u: int, j: int):
        nonlocal asg, phi
        new = asg.moved(u, j)
        new_phi = potential(cf, inst, new) if has_phi else None
        if has_phi and not new_phi < phi:
            raise AssertionError(f"potential did not decrease: {phi} -> {new_phi}")
        trace.moves.append(Move(u, asg.machine_of[u], j, phi, new_phi))
        asg, phi = new, new_phi

    while len(trace.moves) < max_iter:
        trace.iterations += 1
        if order == "max-improvement":
            best = None
            for u in range(inst.n):
                current = deviation_key(cf, inst, asg, u, asg.machine_of[u])
                key, j = min(_keys(cf, inst, asg, u))
                if key < current and (best is None or current - key > best[0]):
                    best = (current - key, u, j)
            if best is None:
                trace.converged = True
                break
            apply(best[1], best[2])
            continue
        players = rng.permutation(inst.n) if order == "random" else range(inst.n)
        moved = False
        for u in players:
            if len(trace.moves) >= max_iter:
                break
            j = best_response(cf, inst, asg, int(u))
            if j is not None:
                apply(int(u), j)
                moved = True
        if not moved:
            trace.converged = True
            break
    else:
        # out of budget: one last check, the final move may have landed on an equilibrium
        trace.converged = bool(is_equilibrium(cf, inst, asg))

    if not trace.converged:
        log.warning("best-response dynamics stopped after %d moves without converging", max_iter)
    trace.final = asg
    return trace
