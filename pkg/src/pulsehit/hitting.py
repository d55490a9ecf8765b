"""Semi-decision of fidelity threshold hitting times on a rational grid.

An instance fixes a machine, a threshold margin epsilon, a pulse schedule,
a target (the lit-beacon subspace or one exact label), a horizon and a
grid refinement G.  The scanner walks the grid points {n + j*delta/G},
ascending, and reports the first point whose fidelity reaches 1 - epsilon,
or exhaustion of the horizon.  Exhaustion is a statement about the scanned
range only, never a claim that no hit exists later.

Grid points that land strictly inside a pulse are only evaluable where the
support orbit closes (a halted label on a cyclic clock); everywhere else
they are skipped rather than guessed, so a reported hit is always a
certified fidelity value.  Integer and pulse-end points are exact 0/1
projections and are available in every mode.

Mid-pulse beacon fidelities on a closed cycle have a closed form: the
beacon alternates around any post-halt cycle, and pairing each cycle
eigenvalue with its antipode shows the odd-offset weight of the fractional
power is exactly sin^2(pi j / 2G).  Where that value is itself rational
(only at 0, 1/4, 1/2, 3/4, 1, by Niven's theorem) the scanner compares it
to the threshold exactly, so grid hits that tie the threshold do not
depend on floating rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from .dynamics import PulseSchedule, fractional_coeffs
from .errors import ParameterRangeError
from .machine import MachineSpec
from .reversible import (
    BeaconStep,
    BeaconSubspace,
    Cyclic,
    ExactLabel,
    ExtendedBasisState,
    Unbounded,
)

Number = Union[int, float, Fraction]


def grid_for(epsilon: Fraction, delta: Fraction) -> int:
    """Grid refinement fine enough that a fidelity ramp from 0 to 1 over
    one pulse cannot step over the 1 - epsilon threshold between samples:
    G = max(2, ceil(2*delta / (delta - (2*delta/pi) asin sqrt(1-eps))));
    the pulse width cancels.  The ceiling is nudged so a value that is
    mathematically an integer is not pushed up by float rounding."""
    epsilon = Fraction(epsilon)
    if not 0 < epsilon < Fraction(1, 2):
        raise ParameterRangeError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    ramp = 1.0 - (2.0 / math.pi) * math.asin(math.sqrt(1.0 - float(epsilon)))
    return max(2, math.ceil(2.0 / ramp - 1e-9))


@dataclass(frozen=True)
class InstanceDescriptor:
    """One hitting problem: machine, threshold margin, schedule, target,
    scan horizon and grid refinement."""

    machine: MachineSpec
    epsilon: Fraction
    schedule: PulseSchedule
    target: Union[BeaconSubspace, ExactLabel]
    horizon: int
    grid: int

    def __post_init__(self):
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if not 0 < self.epsilon < Fraction(1, 2):
            raise ParameterRangeError(
                f"epsilon must lie in (0, 1/2), got {self.epsilon}"
            )
        if not isinstance(self.machine, MachineSpec):
            raise ParameterRangeError(f"not a machine: {self.machine!r}")
        if not isinstance(self.schedule, PulseSchedule):
            raise ParameterRangeError(f"not a schedule: {self.schedule!r}")
        if not isinstance(self.target, (BeaconSubspace, ExactLabel)):
            raise ParameterRangeError(f"unknown target {self.target!r}")
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ParameterRangeError(
                f"horizon must be a positive integer, got {self.horizon!r}"
            )
        if not isinstance(self.grid, int) or self.grid < 1:
            raise ParameterRangeError(
                f"grid must be a positive integer, got {self.grid!r}"
            )


@dataclass(frozen=True)
class Hit:
    """First grid point at or past the threshold, with the certified
    fidelity there and the enclosing pulse window."""

    t_hit: Fraction
    fidelity_at_hit: Number
    window: tuple[Fraction, Fraction]


@dataclass(frozen=True)
class Exhausted:
    """Every evaluable grid point up to the horizon stayed below the
    threshold.  Says nothing about later times."""

    horizon: int
    max_fidelity_seen: Number


HitReport = Union[Hit, Exhausted]


@dataclass(frozen=True)
class UnreachableWithinHorizon:
    """Sentinel for delta_t_select: no hitting time found in the scanned
    range (deliberately not a claim that the hitting time is infinite)."""

    horizon: int


# sin^2(pi x) at the rational x in [0, 1/2] where it is itself rational
_NIVEN_SIN2 = {
    Fraction(0): Fraction(0),
    Fraction(1, 6): Fraction(1, 4),
    Fraction(1, 4): Fraction(1, 2),
    Fraction(1, 3): Fraction(3, 4),
    Fraction(1, 2): Fraction(1),
}


def _sin2_pi(x: Fraction) -> Number:
    exact = _NIVEN_SIN2.get(x)
    if exact is not None:
        return exact
    return math.sin(math.pi * float(x)) ** 2


class _MidPulse:
    """Per-orbit cache for mid-pulse fidelities on closed cycles."""

    def __init__(self, step: BeaconStep, pred, grid: int):
        self.step = step
        self.pred = pred
        self.grid = grid
        # a post-halt cycle visits each clock residue at both beacon
        # parities, so its length is exactly lcm(period, 2)
        self.cap = 2 * step.clock.period + 2
        self._where: dict[bytes, tuple[int, int]] = {}
        self._cycles: list[tuple[int, tuple[bool, ...], bool]] = []
        self._weights: dict[tuple[int, int], list[float]] = {}

    def _locate(self, label: ExtendedBasisState) -> tuple[int, int]:
        hit = self._where.get(label.serial)
        if hit is not None:
            return hit
        cyc = [label]
        cur = self.step.forward(label)
        while cur != label:
            cyc.append(cur)
            if len(cyc) > self.cap:
                raise AssertionError("post-halt orbit failed to close")
            cur = self.step.forward(cur)
        truth = tuple(bool(self.pred(lab)) for lab in cyc)
        k = len(cyc)
        alternating = k % 2 == 0 and all(
            truth[r] != truth[r - 1] for r in range(k)
        )
        ci = len(self._cycles)
        self._cycles.append((k, truth, alternating))
        for pos, lab in enumerate(cyc):
            self._where[lab.serial] = (ci, pos)
        return ci, 0

    def fid(self, label: ExtendedBasisState, j: int) -> Number:
        ci, pos = self._locate(label)
        k, truth, alternating = self._cycles[ci]
        if alternating:
            s2 = _sin2_pi(Fraction(j, 2 * self.grid))
            return 1 - s2 if truth[pos] else s2
        key = (k, j)
        weights = self._weights.get(key)
        if weights is None:
            g, _ = fractional_coeffs(k, j / self.grid)
            weights = [abs(z) ** 2 for z in g]
            self._weights[key] = weights
        return math.fsum(
            weights[r] for r in range(k) if truth[(pos + r) % k]
        )


def _scan(inst: InstanceDescriptor) -> Iterator[tuple[Fraction, Number, tuple[Fraction, Fraction]]]:
    """Yield (t, fidelity, enclosing pulse window) for every evaluable
    grid point in ascending order."""
    step = BeaconStep(inst.machine, inst.schedule.clock)
    pred = step.target_predicate(inst.target)
    delta = inst.schedule.delta
    grid = inst.grid
    cyclic = isinstance(step.clock, Cyclic)
    mid = _MidPulse(step, pred, grid) if cyclic and grid > 1 else None

    cur = step.initial_label()
    for n in range(inst.horizon + 1):
        t = Fraction(n)
        if n:
            window = (Fraction(n - 1), n - 1 + delta)
        else:
            window = (t, t)  # nothing was pulsed before t = 0
        yield t, (1 if pred(cur) else 0), window
        if n == inst.horizon:
            return
        pulse_window = (Fraction(n), n + delta)
        if mid is not None and cur.h == 1:
            for j in range(1, grid):
                yield n + Fraction(j, grid) * delta, mid.fid(cur, j), pulse_window
        nxt = step.forward(cur)
        yield n + delta, (1 if pred(nxt) else 0), pulse_window
        cur = nxt


def uhit_semidecide(inst: InstanceDescriptor) -> HitReport:
    """First grid point with fidelity >= 1 - epsilon, or exhaustion.

    Threshold comparisons are exact: integer and pulse-end fidelities are
    0/1 projections, Niven-point mid-pulse values are rational, and float
    values compare against the rational threshold without rounding it."""
    threshold = 1 - inst.epsilon
    best: Number = 0
    for t, fid, window in _scan(inst):
        if fid >= threshold:
            return Hit(t, fid, window)
        if fid > best:
            best = fid
    return Exhausted(inst.horizon, best)


def delta_t_select(inst: InstanceDescriptor) -> Union[Fraction, UnreachableWithinHorizon]:
    """The hitting time when the scan finds one; otherwise the
    within-horizon sentinel, never a claim of unreachability at all times."""
    report = uhit_semidecide(inst)
    if isinstance(report, Hit):
        return report.t_hit
    return UnreachableWithinHorizon(inst.horizon)


def fidelity_trace(inst: InstanceDescriptor) -> list[tuple[Fraction, float]]:
    """All evaluated grid points with their fidelities, as floats."""
    return [(t, float(fid)) for t, fid, _ in _scan(inst)]


# ---------------------------------------------------------------------------
# serialization


def _frac_str(x: Fraction) -> str:
    return str(Fraction(x))


def hit_report_json(report: HitReport) -> str:
    if isinstance(report, Hit):
        payload = {
            "outcome": "hit",
            "t": _frac_str(report.t_hit),
            "fidelity": float(report.fidelity_at_hit),
            "window": [_frac_str(report.window[0]), _frac_str(report.window[1])],
        }
    elif isinstance(report, Exhausted):
        payload = {
            "outcome": "exhausted",
            "horizon": report.horizon,
            "max_fidelity": float(report.max_fidelity_seen),
        }
    else:
        raise ParameterRangeError(f"not a hit report: {report!r}")
    return json.dumps(payload, sort_keys=True)


def _decimal_or_ratio(t: Fraction) -> str:
    """Exact decimal when the denominator divides a power of ten,
    otherwise the reduced ratio."""
    den = t.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{t.numerator}/{t.denominator}"
    places = max(twos, fives)
    if places == 0:
        return str(t.numerator)
    scaled = t.numerator * 10**places // t.denominator
    return f"{scaled // 10**places}.{scaled % 10**places:0{places}d}"


def trace_to_csv(trace: list[tuple[Fraction, float]]) -> str:
    lines = ["t,fidelity"]
    for t, fid in trace:
        lines.append(f"{_decimal_or_ratio(Fraction(t))},{float(fid):.12f}")
    return "\n".join(lines) + "\n"
