"""Budgeted protocols: gate-before-evaluate accounting, the adversarial
counter-family sweep, and noisy classification.

The sweep expectations follow from the family's halting step growing one
per index: the beacon first becomes samplable at K + delta, so any member
with K past tau_max must be reported unreachable, and the minimal such
index sits right above the time budget.
"""

import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulsehit.dynamics import PulseSchedule
from pulsehit.errors import (
    NoiseMarginError,
    ParameterRangeError,
    SearchRangeExhaustedError,
)
from pulsehit.hitting import Exhausted, Hit, InstanceDescriptor, grid_for, uhit_semidecide
from pulsehit.machine import Halted, classical_run, parse_machine
from pulsehit.protocol import (
    BudgetForcedGuess,
    NoiseModel,
    ProtocolBudget,
    ProtocolOutcome,
    ReachableAt,
    ReportedUnreachable,
    Resources,
    adversarial_sweep,
    classify_with_noise,
    run_bounded_protocol,
    sweep_report_json,
    work_to_reach,
)
from pulsehit.reduction import counter_family
from pulsehit.reversible import BeaconStep, BeaconSubspace, Cyclic, ExactLabel, Unbounded

MOVE_RIGHT_3 = parse_machine(
    """\
states: q0 q1 q2 qH
alphabet: _
start: q0
halt: qH
rule: q0 _ -> q1 _ R
rule: q1 _ -> q2 _ R
rule: q2 _ -> qH _ R
"""
)

HALT_NOW = parse_machine("states: q0\nalphabet: _\nstart: q0\nhalt: q0\n")

LOOP_STAY = parse_machine(
    "states: q0 qH\nalphabet: _\nstart: q0\nhalt: qH\nrule: q0 _ -> q0 _ S\n"
)

QUARTER = Fraction(1, 4)
HALF = Fraction(1, 2)


def beacon_instance(spec, clock, horizon, *, epsilon=QUARTER, delta=HALF, grid=None):
    sched = PulseSchedule(delta, clock)
    if grid is None:
        grid = grid_for(epsilon, delta)
    return InstanceDescriptor(spec, epsilon, sched, BeaconSubspace(), horizon, grid)


# -- budgets and accounting -------------------------------------------------------


def test_budget_validation():
    b = ProtocolBudget(10, 10)
    assert b.tau_max == Fraction(10) and b.failure_prob == 0
    with pytest.raises(ParameterRangeError):
        ProtocolBudget(0, 10)
    with pytest.raises(ParameterRangeError):
        ProtocolBudget(-1, 10)
    with pytest.raises(ParameterRangeError):
        ProtocolBudget(10, 0)
    with pytest.raises(ParameterRangeError):
        ProtocolBudget(10, 10.0)
    with pytest.raises(ParameterRangeError):
        ProtocolBudget(10, 10, Fraction(1, 2))
    with pytest.raises(ParameterRangeError):
        ProtocolBudget(10, 10, Fraction(-1, 10))
    assert ProtocolBudget(10, 10, Fraction(49, 100)).failure_prob == Fraction(49, 100)


def test_work_to_reach_counts_begun_pulses():
    assert work_to_reach(Fraction(0)) == 0
    assert work_to_reach(Fraction(1, 2)) == 1
    assert work_to_reach(Fraction(1)) == 1
    assert work_to_reach(Fraction(3, 2)) == 2
    assert work_to_reach(Fraction(7, 2)) == 4
    assert work_to_reach(Fraction(10)) == 10
    assert work_to_reach(Fraction(41, 4)) == 11
    with pytest.raises(ParameterRangeError):
        work_to_reach(Fraction(-1, 2))


@given(st.fractions(min_value=0, max_value=1000))
def test_work_to_reach_is_ceiling_off_integers(t):
    whole = t.numerator // t.denominator
    want = whole if t == whole else whole + 1
    assert work_to_reach(t) == want


# -- the bounded scan -------------------------------------------------------------


def test_generous_budget_finds_the_hit():
    inst = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10)
    out = run_bounded_protocol(inst, ProtocolBudget(100, 100))
    assert out == ProtocolOutcome(
        ReachableAt(Fraction(7, 2)), Resources(Fraction(7, 2), 4)
    )
    assert out.correct is None


def test_time_gate_stops_before_the_hit():
    inst = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10)
    out = run_bounded_protocol(inst, ProtocolBudget(3, 100))
    assert out.verdict == ReportedUnreachable()
    assert out.resources == Resources(Fraction(3), 3)


def test_work_gate_stops_before_the_hit():
    inst = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10)
    out = run_bounded_protocol(inst, ProtocolBudget(100, 2))
    assert out.verdict == ReportedUnreachable()
    assert out.resources == Resources(Fraction(2), 2)


def test_observing_the_initial_state_is_free():
    step = BeaconStep(MOVE_RIGHT_3, Unbounded())
    sched = PulseSchedule(HALF, Unbounded())
    inst = InstanceDescriptor(
        MOVE_RIGHT_3, QUARTER, sched, ExactLabel(step.initial_label()), 10, 6
    )
    out = run_bounded_protocol(inst, ProtocolBudget(Fraction(1, 100), 1))
    assert out == ProtocolOutcome(ReachableAt(Fraction(0)), Resources(Fraction(0), 0))


def test_looper_exhausts_the_grid_not_the_budget():
    inst = beacon_instance(LOOP_STAY, Unbounded(), 20)
    out = run_bounded_protocol(inst, ProtocolBudget(1000, 1000))
    assert out.verdict == ReportedUnreachable()
    assert out.resources == Resources(Fraction(20), 20)


@pytest.mark.parametrize("tau_num", range(1, 13))
@pytest.mark.parametrize("e_max", [1, 2, 3, 4, 5, 8])
def test_budget_compliance_and_exact_verdict_boundary(tau_num, e_max):
    # the hit needs the point t = 7/2, which costs 7/2 time and 4 pulses
    tau = Fraction(tau_num, 2)
    inst = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10)
    out = run_bounded_protocol(inst, ProtocolBudget(tau, e_max))
    assert out.resources.time_used <= tau
    assert out.resources.work_used <= e_max
    if tau >= Fraction(7, 2) and e_max >= 4:
        assert out.verdict == ReachableAt(Fraction(7, 2))
    else:
        assert out.verdict == ReportedUnreachable()


# -- the adversarial sweep --------------------------------------------------------


def test_sweep_finds_minimal_witness_past_each_budget():
    budgets = [ProtocolBudget(10, 10), ProtocolBudget(100, 100)]
    witnesses = adversarial_sweep(budgets)
    assert [w.n for w in witnesses] == [10, 100]
    for w, budget in zip(witnesses, budgets):
        assert w.name == f"counter-{w.n}"
        assert w.halting_step == w.n + 1
        assert w.halting_step > budget.tau_max
        assert w.outcome.verdict == ReportedUnreachable()
        assert w.outcome.correct is False
        assert w.outcome.resources.time_used <= budget.tau_max
        assert w.outcome.resources.work_used <= budget.e_max
        # the witness really does halt, just past the time budget
        run = classical_run(counter_family(w.n), w.n + 2)
        assert isinstance(run, Halted) and run.steps == w.halting_step
        # minimality: the previous member's halting step fits the budget
        prev = classical_run(counter_family(w.n - 1), w.n + 1)
        assert prev.steps <= budget.tau_max


def test_sweep_witness_moves_when_the_budget_doubles():
    ns = [
        adversarial_sweep([ProtocolBudget(tau, tau)])[0].n
        for tau in (5, 10, 20, 40)
    ]
    assert ns == [5, 10, 20, 40]
    assert all(a < b for a, b in zip(ns, ns[1:]))


def test_sweep_handles_fractional_time_budgets():
    (w,) = adversarial_sweep([ProtocolBudget(Fraction(21, 2), 50)])
    assert w.n == 10 and w.halting_step == 11


def test_sweep_raises_when_the_family_cap_is_too_small():
    with pytest.raises(SearchRangeExhaustedError):
        adversarial_sweep([ProtocolBudget(50, 50)], family_cap=10)


def test_sweep_report_json_is_frozen_and_deterministic():
    witnesses = adversarial_sweep([ProtocolBudget(10, 10)])
    text = sweep_report_json(witnesses)
    assert text == (
        '{"budget": {"e_max": 10, "tau_max": "10"}, '
        '"outcome": "reported-unreachable", '
        '"resources": {"time_used": "10", "work_used": 10}, '
        '"witness": {"K": 11, "n": 10, "name": "counter-10"}}\n'
    )
    assert sweep_report_json(adversarial_sweep([ProtocolBudget(10, 10)])) == text
    for line in text.splitlines():
        json.loads(line)


# -- noise ------------------------------------------------------------------------


def test_noise_model_validation():
    assert NoiseModel(Fraction(1, 8), 3).gamma == Fraction(1, 8)
    with pytest.raises(ParameterRangeError):
        NoiseModel(Fraction(-1, 8))
    with pytest.raises(ParameterRangeError):
        NoiseModel(Fraction(1, 8), "seed")


def test_noise_margin_is_enforced():
    inst = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10)
    with pytest.raises(NoiseMarginError):
        classify_with_noise(inst, NoiseModel(Fraction(1, 2)))
    tight = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10, epsilon=Fraction(49, 100))
    with pytest.raises(NoiseMarginError):
        classify_with_noise(tight, NoiseModel(Fraction(1, 8)))


def test_zero_noise_is_bitwise_the_noiseless_scan():
    # the cyclic instance hits on an exact rational mid-pulse value, so any
    # float round-trip would show up as an equality failure here
    inst = beacon_instance(MOVE_RIGHT_3, Cyclic(2), 10)
    want = uhit_semidecide(inst)
    got = classify_with_noise(inst, NoiseModel(Fraction(0), seed=7))
    assert got == want
    assert isinstance(got.fidelity_at_hit, Fraction)
    assert got.fidelity_at_hit == Fraction(3, 4)


@pytest.mark.parametrize("seed", range(10))
def test_noise_within_margin_keeps_every_verdict(seed):
    noise = NoiseModel(Fraction(1, 8), seed)
    # dark points read at most 1/8 < 5/8, lit points at least 7/8, so the
    # noisy scan must hit exactly where the noiseless one does
    hit_inst = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10)
    noisy = classify_with_noise(hit_inst, noise)
    assert isinstance(noisy, Hit)
    assert noisy.t_hit == Fraction(7, 2)
    assert 1 - Fraction(1, 8) <= Fraction(noisy.fidelity_at_hit) <= 1

    now = classify_with_noise(beacon_instance(HALT_NOW, Unbounded(), 10), noise)
    assert isinstance(now, Hit) and now.t_hit == HALF

    loop = classify_with_noise(beacon_instance(LOOP_STAY, Unbounded(), 50), noise)
    assert isinstance(loop, Exhausted)
    assert 0 <= loop.max_fidelity_seen <= 0.125


def test_noise_is_reproducible_per_seed():
    inst = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10)
    noise = NoiseModel(Fraction(1, 8), 42)
    assert classify_with_noise(inst, noise) == classify_with_noise(inst, noise)


def test_budget_forced_guess_exists_but_is_never_produced():
    # the vocabulary includes it; the deterministic scanner reports
    # unreachable instead of guessing
    assert BudgetForcedGuess() == BudgetForcedGuess()
    inst = beacon_instance(MOVE_RIGHT_3, Unbounded(), 10)
    for tau, e in [(1, 1), (3, 100), (100, 2), (100, 100)]:
        out = run_bounded_protocol(inst, ProtocolBudget(tau, e))
        assert not isinstance(out.verdict, BudgetForcedGuess)
