"""Budgeted observation protocols and the operational consequence.

A protocol owns a time budget and a work budget: evolving to a grid point
t costs t units of time, and one unit of work per pulse begun (floor(t)
completed pulses, plus one if t lands inside or at the end of a pulse).
The scan is gated before each point, so a reported verdict never spends
past its budget; observing the initial state at t = 0 is free.

Within any fixed budget there are halting machines whose beacon lights
only after the budget is spent: the unary counter family pushes its
halting step past any tau_max, and the protocol must then report the
beacon unreachable even though it is hit slightly later.  The sweep
locates the minimal such witness per budget.  The reported-unreachable
verdict is the honest one: these protocols never guess, so the
budget-forced-guess verdict exists in the vocabulary but is never
produced here.

Noise is modelled as a seeded uniform perturbation of each sampled
fidelity by at most gamma, compared against the relaxed threshold
1 - epsilon - gamma; the margin requirement gamma < 1 - 2*epsilon keeps
the lit and dark plateaus separated.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import (
    NoiseMarginError,
    ParameterRangeError,
    SearchRangeExhaustedError,
)
from .hitting import Exhausted, Hit, HitReport, InstanceDescriptor, _scan, uhit_semidecide
from .machine import Halted, classical_run
from .reduction import counter_family, encode
from .reversible import BeaconSubspace, Unbounded


@dataclass(frozen=True)
class ProtocolBudget:
    """Hard caps on observation time and applied pulses, plus the failure
    probability a randomized protocol would be allowed (the protocols here
    are deterministic, so it only parameterizes the contract)."""

    tau_max: Fraction
    e_max: int
    failure_prob: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "tau_max", Fraction(self.tau_max))
        object.__setattr__(self, "failure_prob", Fraction(self.failure_prob))
        if self.tau_max <= 0:
            raise ParameterRangeError(f"tau_max must be positive, got {self.tau_max}")
        if not isinstance(self.e_max, int) or self.e_max < 1:
            raise ParameterRangeError(f"e_max must be a positive integer, got {self.e_max!r}")
        if not 0 <= self.failure_prob < Fraction(1, 2):
            raise ParameterRangeError(
                f"failure_prob must lie in [0, 1/2), got {self.failure_prob}"
            )


@dataclass(frozen=True)
class Resources:
    time_used: Fraction
    work_used: int


@dataclass(frozen=True)
class ReachableAt:
    t: Fraction


@dataclass(frozen=True)
class ReportedUnreachable:
    pass


@dataclass(frozen=True)
class BudgetForcedGuess:
    pass


Verdict = Union[ReachableAt, ReportedUnreachable, BudgetForcedGuess]


@dataclass(frozen=True)
class ProtocolOutcome:
    verdict: Verdict
    resources: Resources
    correct: Optional[bool] = None  # filled by a harness with ground truth


def work_to_reach(t: Fraction) -> int:
    """Pulses begun by time t: one per completed unit interval, plus one
    when t lands inside or at the end of a pulse window."""
    t = Fraction(t)
    if t < 0:
        raise ParameterRangeError(f"time must be nonnegative, got {t}")
    whole = t.numerator // t.denominator
    return whole + (1 if t != whole else 0)


def run_bounded_protocol(inst: InstanceDescriptor, budget: ProtocolBudget) -> ProtocolOutcome:
    """Scan the instance's grid until a hit, the horizon, or the budget.

    Each grid point is gated before it is examined: if reaching it would
    exceed tau_max or e_max, the scan stops and reports unreachable with
    the resources actually spent.  A verdict therefore never overdraws,
    which the returned resources make checkable."""
    spent = Resources(Fraction(0), 0)
    threshold = 1 - inst.epsilon
    for t, fid, _window in _scan(inst):
        work = work_to_reach(t)
        if t > budget.tau_max or work > budget.e_max:
            break
        spent = Resources(t, work)
        if fid >= threshold:
            outcome = ProtocolOutcome(ReachableAt(t), spent)
            _assert_compliant(outcome, budget)
            return outcome
    outcome = ProtocolOutcome(ReportedUnreachable(), spent)
    _assert_compliant(outcome, budget)
    return outcome


def _assert_compliant(outcome: ProtocolOutcome, budget: ProtocolBudget) -> None:
    if outcome.resources.time_used > budget.tau_max:
        raise AssertionError("protocol overdrew its time budget")
    if outcome.resources.work_used > budget.e_max:
        raise AssertionError("protocol overdrew its work budget")


# ---------------------------------------------------------------------------
# the adversarial sweep


@dataclass(frozen=True)
class SweepWitness:
    budget: ProtocolBudget
    name: str
    n: int
    halting_step: int
    outcome: ProtocolOutcome


def adversarial_sweep(
    budgets: Sequence[ProtocolBudget],
    *,
    epsilon: Fraction = Fraction(1, 4),
    delta: Fraction = Fraction(1, 2),
    family_cap: int = 10_000,
) -> list[SweepWitness]:
    """For each budget, the minimal counter-family index whose halting
    step exceeds tau_max and whose budgeted run misclassifies it.

    The family's halting step grows one per index, so the search walks
    upward, confirms each candidate's step count classically, runs the
    protocol, and keeps the first incorrect outcome.  A cap on the family
    index turns a fruitless search into a typed error rather than a hang."""
    witnesses = []
    for budget in budgets:
        found = None
        for n in range(family_cap + 1):
            machine = counter_family(n)
            run = classical_run(machine, n + 2)
            if not isinstance(run, Halted):
                raise AssertionError("counter family member failed to halt")
            if run.steps <= budget.tau_max:
                continue
            horizon = max(math.ceil(budget.tau_max) + 2, run.steps + 2)
            inst = encode(machine, epsilon, delta, Unbounded(), BeaconSubspace(), horizon)
            outcome = run_bounded_protocol(inst, budget)
            # ground truth: the machine halts, so the beacon is reachable
            correct = isinstance(outcome.verdict, ReachableAt)
            if not correct:
                found = SweepWitness(
                    budget=budget,
                    name=f"counter-{n}",
                    n=n,
                    halting_step=run.steps,
                    outcome=replace(outcome, correct=False),
                )
                break
        if found is None:
            raise SearchRangeExhaustedError(
                f"no witness with halting step past {budget.tau_max} and an "
                f"incorrect verdict within family indices 0..{family_cap}"
            )
        witnesses.append(found)
    return witnesses


def _verdict_payload(verdict: Verdict) -> str:
    if isinstance(verdict, ReachableAt):
        return "reachable-at"
    if isinstance(verdict, ReportedUnreachable):
        return "reported-unreachable"
    return "budget-forced-guess"


def sweep_report_json(witnesses: Sequence[SweepWitness]) -> str:
    """One JSON object per budget, one line each."""
    lines = []
    for w in witnesses:
        lines.append(
            json.dumps(
                {
                    "budget": {
                        "tau_max": str(w.budget.tau_max),
                        "e_max": w.budget.e_max,
                    },
                    "witness": {"name": w.name, "n": w.n, "K": w.halting_step},
                    "outcome": _verdict_payload(w.outcome.verdict),
                    "resources": {
                        "time_used": str(w.outcome.resources.time_used),
                        "work_used": w.outcome.resources.work_used,
                    },
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseModel:
    """Per-sample fidelity perturbation, uniform in [-gamma, gamma], drawn
    from a seeded generator so runs are reproducible."""

    gamma: Fraction
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gamma", Fraction(self.gamma))
        if self.gamma < 0:
            raise ParameterRangeError(f"gamma must be nonnegative, got {self.gamma}")
        if not isinstance(self.seed, int):
            raise ParameterRangeError(f"seed must be an integer, got {self.seed!r}")


def classify_with_noise(inst: InstanceDescriptor, noise: NoiseModel) -> HitReport:
    """The scan under perturbed readout with the threshold relaxed by
    gamma.  Requires gamma < 1 - 2*epsilon so a lit plateau cannot read
    below a dark one; at gamma = 0 this is exactly the noiseless scan,
    bit for bit."""
    margin = 1 - 2 * inst.epsilon
    if noise.gamma >= margin:
        raise NoiseMarginError(
            f"gamma {noise.gamma} leaves no margin below 1 - 2*epsilon = {margin}"
        )
    if noise.gamma == 0:
        return uhit_semidecide(inst)
    rng = random.Random(noise.seed)
    gamma = float(noise.gamma)
    threshold = 1 - inst.epsilon - noise.gamma
    best = 0.0
    for t, fid, window in _scan(inst):
        wobble = rng.uniform(-gamma, gamma)
        noisy = min(1.0, max(0.0, float(fid) + wobble))
        if noisy >= threshold:
            return Hit(t, noisy, window)
        if noisy > best:
            best = noisy
    return Exhausted(inst.horizon, best)
