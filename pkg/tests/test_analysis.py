from fractions import Fraction
from itertools import product

import pytest

from coordmech.analysis import (
    CapExceeded,
    SWEEP_COLUMNS,
    assignment_count,
    branch_and_bound_makespan,
    csv_text,
    enumerate_equilibria,
    enumerate_equilibria_exact,
    optimal_makespan,
    poa_pos_report,
    sweep,
    verify_load_bounds,
)
from coordmech.dynamics import is_equilibrium, potential, run_dynamics
from coordmech.instance import Assignment, Instance, generate_instance, load_vector, makespan
from coordmech.mechanism import MAKESPAN, CoefficientFunction, deviation_key
from coordmech.verify import distinct_starts, sample_custom

D2 = CoefficientFunction.dcoord(2)
CROSS = Instance.from_rows([[1, 4], [4, 1]])


def test_single_player_equilibria_are_its_argmin_machines():
    inst = Instance.from_rows([[3, 2, None, 2, 5]])
    for cf in (D2, CoefficientFunction.ccoord(3), MAKESPAN):
        keys = {j: deviation_key(cf, inst, Assignment((j,)), 0, j) for j in inst.options[0]}
        best = min(keys.values())
        assert enumerate_equilibria(cf, inst) == [Assignment((j,)) for j in sorted(keys) if keys[j] == best]


def test_cross_instance():
    assert Assignment((0, 1)) in enumerate_equilibria(D2, CROSS)
    assert optimal_makespan(CROSS) == (1, Assignment((0, 1)))
    rep = poa_pos_report(D2, CROSS)
    assert [e.assignment for e in rep.equilibria] == [Assignment((0, 1))]
    assert rep.poa_ratio_power == rep.pos_ratio_power == 1
    assert str(rep.poa_ratio()) == "1.00000000000"
    assert len(rep.bound_checks) == 4 and rep.all_passed


def test_optimal_makespan_examples():
    assert optimal_makespan(Instance.from_rows([[5, "7/2", 4]])) == (Fraction(7, 2), Assignment((1,)))
    assert optimal_makespan(Instance.from_rows([[1] * 4] * 4))[0] == 1


def test_enumeration_is_lexicographic_and_sound():
    inst = generate_instance("two-values", 5, 3, seed=3)
    for cf in (D2, CoefficientFunction.ccoord(2), sample_custom(2)):
        eqs = enumerate_equilibria(cf, inst)
        assert eqs and eqs == sorted(eqs, key=lambda a: a.machine_of)
        assert all(is_equilibrium(cf, inst, a) for a in eqs)
        assert eqs == enumerate_equilibria_exact(cf, inst)


def test_cap_is_enforced():
    inst = generate_instance("uniform-integer", 8, 3, seed=0)
    assert assignment_count(inst) == 3 ** 8
    with pytest.raises(CapExceeded) as err:
        enumerate_equilibria(D2, inst, cap=1000)
    assert err.value.required == 6561
    assert "6561" in str(err.value)
    with pytest.raises(CapExceeded):
        optimal_makespan(inst, cap=1000)


@pytest.mark.parametrize("seed", range(12))
def test_branch_and_bound_agrees_with_exhaustive(seed):
    gen = ("uniform-integer", "restricted-related", "two-values")[seed % 3]
    inst = generate_instance(gen, 7, 3, seed=seed)
    value, witness = branch_and_bound_makespan(inst)
    assert value == optimal_makespan(inst)[0]
    witness.validate(inst)
    assert makespan(load_vector(inst, witness)) == value
    assert optimal_makespan(inst, cap=10, branch_and_bound=True)[0] == value


def test_branch_and_bound_beyond_cap():
    inst = generate_instance("uniform-integer", 14, 4, seed=1)
    value, witness = optimal_makespan(inst, cap=1000, branch_and_bound=True)
    assert makespan(load_vector(inst, witness)) == value
    lower = max(max(inst.min_weight), sum(inst.min_weight) / inst.m)
    assert value >= lower


@pytest.mark.parametrize("seed", range(8))
def test_report_invariants(seed):
    inst = generate_instance("restricted-related", 5, 3, seed=seed)
    for cf in (D2, CoefficientFunction.dcoord(3), CoefficientFunction.ccoord(2), MAKESPAN):
        rep = poa_pos_report(cf, inst)
        assert rep.equilibria
        assert rep.poa_ratio_power >= rep.pos_ratio_power >= 1
        assert rep.poa_ratio() >= rep.pos_ratio()
        for e in rep.equilibria:
            assert e.makespan >= rep.opt_makespan
        if cf.kind == "dcoord":
            assert rep.all_passed and len(rep.bound_checks) == 4
            phis = [e.phi for e in rep.equilibria]
            assert rep.equilibria[rep.phi_min_index].phi == min(phis)
        if cf.kind == "makespan":
            assert rep.phi_min_index is None and rep.bound_checks == []


def test_converged_dynamics_land_in_enumeration():
    import numpy as np
    rng = np.random.default_rng(5)
    for seed in range(6):
        inst = generate_instance("uniform-integer", 5, 3, seed=seed)
        for cf in (D2, CoefficientFunction.ccoord(3)):
            eqs = set(enumerate_equilibria(cf, inst))
            for start in distinct_starts(rng, inst):
                trace = run_dynamics(cf, inst, start=start)
                assert trace.converged and trace.final in eqs


def test_verify_load_bounds_flags_a_fabricated_violation():
    rep = poa_pos_report(D2, CROSS)
    rep.opt_makespan = Fraction(1, 100)  # pretend the optimum were far smaller
    checks = verify_load_bounds(D2, CROSS, rep)
    assert not checks[0].passed and not checks[1].passed
    with pytest.raises(ValueError):
        verify_load_bounds(MAKESPAN, CROSS, rep)


def test_single_job_bounds_pass_trivially():
    inst = Instance.from_rows([[4, 6, 9]])
    rep = poa_pos_report(CoefficientFunction.dcoord(2), inst)
    assert rep.all_passed
    assert rep.equilibria[0].loads == (4, 0, 0)


def test_json_and_csv_shapes():
    rep = poa_pos_report(D2, CROSS)
    obj = rep.to_json_obj()
    assert obj["opt_makespan"] == "1" and obj["equilibria"][0]["phi"] == "2"
    assert obj["mechanism"] == {"kind": "dcoord", "d": 2}
    text = csv_text(rep.csv_rows("cross"))
    header, row = text.strip().splitlines()
    assert header == "instance_id,mech,d,n,m,phi,max_ct,makespan,opt,ratio"
    assert row.startswith("cross,dcoord,2,2,2,2.00000000000,1.00000000000,")


def test_sweep_rows():
    rows = sweep("dcoord", [2, 3], n=3, count=2, seed=0)
    assert len(rows) == 2 and all(len(r) == len(SWEEP_COLUMNS) for r in rows)
    for r in rows:
        assert float(r[3]) <= float(r[6])
        assert float(r[5]) <= float(r[7])


def test_potential_minimizer_is_an_equilibrium_by_construction():
    inst = generate_instance("two-values", 5, 3, seed=8)
    best = min((Assignment(mo) for mo in product(*inst.options)), key=lambda a: potential(D2, inst, a))
    assert is_equilibrium(D2, inst, best)
