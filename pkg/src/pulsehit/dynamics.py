"""Sparse states and pulsed continuous-time evolution of the beacon step.

Integer times are pure permutation dynamics: amplitudes ride along labels
unchanged and stay exact Gaussian rationals.  Between integers the step
permutation is driven by a pulse of width ``delta``: on [n, n + delta] the
generator is the principal logarithm of the permutation restricted to its
orbit cycles, and on [n + delta, n + 1] nothing happens.  Mid-pulse states
therefore exist only where the support's orbits close into finite cycles,
which on a cyclic clock happens exactly for halted labels; everywhere else
the evaluation refuses with a typed error instead of truncating.

Two independent computations of the same mid-pulse operator are provided:
:func:`evolve_to` uses floating coefficients (an inverse DFT of the
fractional eigenvalue powers) with tracked absolute error bounds, and
:func:`approx_unitary` evaluates the same sums in high-precision arithmetic
and rounds dyadically, returning an exact rational matrix with a certified
operator-norm distance to the true evolution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

import mpmath
import numpy as np

from .errors import (
    BasisNotClosedError,
    LabelError,
    OrbitNotClosedError,
    ParameterRangeError,
    PrecisionBudgetError,
    StateNormError,
    TimeTagError,
)
from .reversible import BeaconStep, ClockMode, Cyclic, ExtendedBasisState, Unbounded

CYCLE_CAP = 1 << 16

_EPS = 2.220446049250313e-16  # double-precision unit roundoff (2^-52)

Rational = Union[Fraction, int]


def _as_fraction(x, what: str) -> Fraction:
    try:
        return Fraction(x)
    except (TypeError, ValueError):
        raise ParameterRangeError(f"{what} must be rational, got {x!r}") from None


# ---------------------------------------------------------------------------
# amplitudes


@dataclass(frozen=True)
class Amplitude:
    """One complex amplitude, either exact (both parts Fraction, zero error)
    or floating with a tracked absolute error bound on the complex value."""

    re: Union[Fraction, float]
    im: Union[Fraction, float]
    err: float = 0.0

    def __post_init__(self):
        exact = isinstance(self.re, Fraction)
        if exact != isinstance(self.im, Fraction):
            raise LabelError("amplitude parts must be both exact or both floating")
        if exact and self.err != 0.0:
            raise LabelError("exact amplitudes carry no error bound")
        if self.err < 0.0 or not math.isfinite(self.err):
            raise LabelError(f"bad amplitude error bound {self.err!r}")

    @classmethod
    def exact(cls, re: Rational, im: Rational = 0) -> "Amplitude":
        return cls(Fraction(re), Fraction(im), 0.0)

    @classmethod
    def approx(cls, z: complex, err: float) -> "Amplitude":
        return cls(float(z.real), float(z.imag), float(err))

    @property
    def is_exact(self) -> bool:
        return isinstance(self.re, Fraction)

    def as_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def mag_upper(self) -> float:
        """Upper bound on the true |value| including the error bound."""
        return math.hypot(float(self.re), float(self.im)) * (1.0 + 4.0 * _EPS) + self.err

    def abs2(self) -> Union[Fraction, float]:
        if self.is_exact:
            return self.re * self.re + self.im * self.im
        return float(self.re) * float(self.re) + float(self.im) * float(self.im)

    def conj(self) -> "Amplitude":
        if self.is_exact:
            return Amplitude(self.re, -self.im, 0.0)
        return Amplitude(self.re, -self.im, self.err)

    def add(self, other: "Amplitude") -> "Amplitude":
        if self.is_exact and other.is_exact:
            return Amplitude(self.re + other.re, self.im + other.im, 0.0)
        z = self.as_complex() + other.as_complex()
        err = self.err + other.err + _EPS * (
            self.mag_upper() + other.mag_upper() + abs(z)
        )
        return Amplitude.approx(z, err)

    def mul(self, other: "Amplitude") -> "Amplitude":
        if self.is_exact and other.is_exact:
            return Amplitude(
                self.re * other.re - self.im * other.im,
                self.re * other.im + self.im * other.re,
                0.0,
            )
        z = self.as_complex() * other.as_complex()
        a, b = self.mag_upper(), other.mag_upper()
        err = self.err * b + other.err * a + 8.0 * _EPS * a * b
        return Amplitude.approx(z, err)

    def mul_complex(self, z: complex, zerr: float) -> "Amplitude":
        """Multiply by a floating coefficient with its own error bound."""
        w = self.as_complex() * z
        a = self.mag_upper()
        zmag = abs(z) + zerr
        err = self.err * zmag + zerr * a + 8.0 * _EPS * a * zmag
        return Amplitude.approx(w, err)


AMP_ONE = Amplitude.exact(1)

_NORM_TOL = 1e-12


# ---------------------------------------------------------------------------
# states


class SparseState:
    """Finitely supported assignment of amplitudes to basis labels, tagged
    with the time it represents.  Iteration order is the canonical byte
    order of label serializations, so floating sums are reproducible."""

    __slots__ = ("_amps", "time_tag")

    def __init__(
        self,
        pairs: Iterable[tuple[ExtendedBasisState, Amplitude]],
        time_tag: Rational = 0,
        *,
        _check_norm: bool = True,
    ):
        tag = _as_fraction(time_tag, "time_tag")
        if tag < 0:
            raise TimeTagError(f"time_tag must be nonnegative, got {tag}")
        amps: dict[bytes, tuple[ExtendedBasisState, Amplitude]] = {}
        for label, amp in pairs:
            if not isinstance(label, ExtendedBasisState):
                raise LabelError(f"not a basis label: {label!r}")
            if amp.is_exact and amp.re == 0 and amp.im == 0:
                continue
            key = label.serial
            if key in amps:
                raise LabelError(f"duplicate support label {label!r}")
            amps[key] = (label, amp)
        self._amps = amps
        self.time_tag = tag
        if _check_norm:
            n2 = self.norm2()
            if isinstance(n2, Fraction):
                if n2 != 1:
                    raise StateNormError(f"exact squared norm is {n2}, not 1")
            elif abs(n2 - 1.0) > _NORM_TOL:
                raise StateNormError(f"squared norm {n2!r} outside 1 +/- {_NORM_TOL}")

    @classmethod
    def basis_state(cls, label: ExtendedBasisState, time_tag: Rational = 0) -> "SparseState":
        return cls([(label, AMP_ONE)], time_tag, _check_norm=False)

    @classmethod
    def superposition(
        cls,
        pairs: Iterable[tuple[ExtendedBasisState, Amplitude]],
        time_tag: Rational = 0,
    ) -> "SparseState":
        return cls(pairs, time_tag)

    def items(self) -> list[tuple[ExtendedBasisState, Amplitude]]:
        return [self._amps[k] for k in sorted(self._amps)]

    def amplitude(self, label: ExtendedBasisState) -> Optional[Amplitude]:
        hit = self._amps.get(label.serial)
        return hit[1] if hit else None

    def labels(self) -> list[ExtendedBasisState]:
        return [lab for lab, _ in self.items()]

    @property
    def support_size(self) -> int:
        return len(self._amps)

    @property
    def is_exact(self) -> bool:
        return all(amp.is_exact for _, amp in self._amps.values())

    def norm2(self) -> Union[Fraction, float]:
        if self.is_exact:
            total = Fraction(0)
            for _, amp in self._amps.values():
                total += amp.abs2()
            return total
        return math.fsum(float(amp.abs2()) for _, amp in self.items())

    def max_err(self) -> float:
        return max((amp.err for _, amp in self._amps.values()), default=0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseState):
            return NotImplemented
        if self.time_tag != other.time_tag or len(self._amps) != len(other._amps):
            return False
        for key, (_, amp) in self._amps.items():
            hit = other._amps.get(key)
            if hit is None or hit[1] != amp:
                return False
        return True

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"<SparseState t={self.time_tag} support={self.support_size}>"


def state_to_json(psi: SparseState) -> str:
    """JSON array of (hex label serialization, real, imag) triples."""
    rows = [
        [lab.serial.hex(), float(amp.re), float(amp.im)] for lab, amp in psi.items()
    ]
    return json.dumps(rows)


# ---------------------------------------------------------------------------
# schedules and integer-time evolution


@dataclass(frozen=True)
class PulseSchedule:
    """Pulse width delta in (0, 1); the step acts on [n, n + delta] and the
    line is idle on [n + delta, n + 1]."""

    delta: Fraction
    clock: ClockMode

    def __post_init__(self):
        object.__setattr__(self, "delta", _as_fraction(self.delta, "delta"))
        if not 0 < self.delta < 1:
            raise ParameterRangeError(f"pulse width must lie in (0,1), got {self.delta}")
        if not isinstance(self.clock, (Unbounded, Cyclic)):
            raise ParameterRangeError(f"unknown clock mode {self.clock!r}")


def _split_time(t: Fraction) -> tuple[int, Fraction]:
    n = t.numerator // t.denominator
    return n, t - n


def evolve_integer(step: BeaconStep, psi: SparseState, n: int) -> SparseState:
    """Apply the step permutation ``n`` times; amplitudes ride unchanged."""
    if not isinstance(n, int) or n < 0:
        raise ParameterRangeError(f"step count must be a nonnegative integer, got {n!r}")
    if psi.time_tag.denominator != 1:
        raise TimeTagError(
            f"cannot integer-evolve a state tagged mid-pulse at t={psi.time_tag}"
        )
    pairs = []
    for label, amp in psi.items():
        for _ in range(n):
            label = step.forward(label)
        pairs.append((label, amp))
    return SparseState(pairs, psi.time_tag + n, _check_norm=False)


def enumerate_reachable(
    step: BeaconStep, seed: ExtendedBasisState, horizon: int
) -> list[ExtendedBasisState]:
    """Labels forward^k(seed) for 0 <= k <= horizon, first-reach order,
    deduplicated (cyclic orbits saturate at their finite size)."""
    if horizon < 0:
        raise ParameterRangeError(f"horizon must be nonnegative, got {horizon}")
    seen = {seed.serial}
    out = [seed]
    cur = seed
    for _ in range(horizon):
        cur = step.forward(cur)
        if cur.serial not in seen:
            seen.add(cur.serial)
            out.append(cur)
    return out


# ---------------------------------------------------------------------------
# cycles and fractional powers


def cycle_of(
    step: BeaconStep, label: ExtendedBasisState, cap: int = CYCLE_CAP
) -> list[ExtendedBasisState]:
    """The forward orbit of ``label`` as a closed cycle starting at
    ``label``, or a typed refusal when the orbit does not close.

    On an unbounded clock no orbit ever closes (the clock strictly
    increases).  On a cyclic clock a label recurs iff its halt flag is set:
    a closed loop cannot contain a rule step (histories only grow), so
    every step on it is a post-halt toggle, which forces h = 1 throughout.
    """
    if isinstance(step.clock, Unbounded):
        raise OrbitNotClosedError(
            "unbounded clock strictly increases; no orbit closes at any cap"
        )
    if label.h == 0:
        raise OrbitNotClosedError(
            "pre-halt label: its history grows every step, so the orbit "
            "cannot return (halt the machine or use an integer time)"
        )
    out = [label]
    cur = step.forward(label)
    while cur != label:
        out.append(cur)
        if len(out) > cap:
            raise OrbitNotClosedError(f"orbit did not close within cycle_cap={cap}")
        cur = step.forward(cur)
    return out


def principal_angles(k: int) -> np.ndarray:
    """Principal arguments of the k-cycle eigenvalues e^{-2 pi i j / k},
    j = 0..k-1, chosen in (-pi, pi] (the j = k/2 eigenvalue -1 gets +pi)."""
    j = np.arange(k)
    return -2.0 * np.pi * j / k + 2.0 * np.pi * (2 * j >= k)


def fractional_coeffs(k: int, alpha: float) -> tuple[np.ndarray, float]:
    """Transfer amplitudes of the alpha-th power of a k-cycle.

    Entry r is the amplitude carried from any cycle position p to position
    p + r (mod k).  Computed as the inverse DFT of the fractional
    eigenvalue powers; the returned scalar bounds the absolute error of
    every entry (unit-modulus spectrum, so the FFT backward error is a
    small multiple of the rounding unit times log k).
    """
    if k < 1:
        raise ParameterRangeError(f"cycle length must be positive, got {k}")
    spectrum = np.exp(1j * alpha * principal_angles(k))
    g = np.fft.ifft(spectrum)
    err = (6.0 + math.log2(k)) * 1e-15
    return g, err


def _dyadic(x: "mpmath.mpf", bits: int) -> Fraction:
    """Round to the nearest multiple of 2^-bits, exactly."""
    scaled = mpmath.nint(mpmath.ldexp(x, bits))
    return Fraction(int(scaled), 1 << bits)


def _rational_coeffs(k: int, alpha: Fraction, entry_bits: int) -> list[tuple[Fraction, Fraction]]:
    """The same transfer amplitudes as :func:`fractional_coeffs`, evaluated
    in high-precision arithmetic and dyadically rounded so each entry is an
    exact rational within 2^-entry_bits of the true value."""
    # error budget: ~6k high-precision operations per entry, each with
    # relative error 2^(1-prec) on magnitude <= 1 terms, plus the final
    # rounding of 2^-(entry_bits+1); working precision leaves the
    # computation error far below the rounding step.
    prec = entry_bits + k.bit_length() + 32
    with mpmath.workprec(prec):
        alpha_mp = mpmath.mpf(alpha.numerator) / alpha.denominator
        # e^{i alpha theta_j} with theta_j / pi = -2j/k, shifted by +2 into
        # the principal branch when 2j >= k
        spectrum = []
        for j in range(k):
            theta_over_pi = mpmath.mpf(-2 * j) / k
            if 2 * j >= k:
                theta_over_pi += 2
            spectrum.append(mpmath.expjpi(alpha_mp * theta_over_pi))
        roots = [mpmath.expjpi(mpmath.mpf(2 * r) / k) for r in range(k)]
        out = []
        for r in range(k):
            acc = mpmath.mpc(0)
            for j in range(k):
                acc += spectrum[j] * roots[(j * r) % k]
            acc /= k
            out.append((_dyadic(acc.real, entry_bits), _dyadic(acc.imag, entry_bits)))
    return out


# ---------------------------------------------------------------------------
# continuous-time evolution


class _CycleIndex:
    """Caches discovered cycles and the position of each member label."""

    def __init__(self, step: BeaconStep, cap: int):
        self.step = step
        self.cap = cap
        self.cycles: list[list[ExtendedBasisState]] = []
        self._position: dict[bytes, tuple[int, int]] = {}

    def locate(self, label: ExtendedBasisState) -> tuple[list[ExtendedBasisState], int]:
        hit = self._position.get(label.serial)
        if hit is not None:
            ci, pos = hit
            return self.cycles[ci], pos
        cyc = cycle_of(self.step, label, self.cap)
        ci = len(self.cycles)
        self.cycles.append(cyc)
        for pos, lab in enumerate(cyc):
            self._position[lab.serial] = (ci, pos)
        return cyc, 0


def _mid_pulse_pairs(
    step: BeaconStep,
    pairs: list[tuple[ExtendedBasisState, Amplitude]],
    alpha: Fraction,
    cycle_cap: int,
) -> list[tuple[ExtendedBasisState, Amplitude]]:
    index = _CycleIndex(step, cycle_cap)
    coeffs: dict[int, tuple[np.ndarray, float]] = {}
    acc: dict[bytes, tuple[ExtendedBasisState, Amplitude]] = {}
    for label, amp in pairs:
        cyc, pos = index.locate(label)
        k = len(cyc)
        if k not in coeffs:
            coeffs[k] = fractional_coeffs(k, float(alpha))
        g, gerr = coeffs[k]
        for r in range(k):
            target = cyc[(pos + r) % k]
            part = amp.mul_complex(complex(g[r]), gerr)
            prev = acc.get(target.serial)
            if prev is None:
                acc[target.serial] = (target, part)
            else:
                acc[target.serial] = (target, prev[1].add(part))
    return list(acc.values())


def evolve_to(
    step: BeaconStep,
    sched: PulseSchedule,
    psi0: SparseState,
    t,
    *,
    m: Optional[int] = None,
    cycle_cap: int = CYCLE_CAP,
) -> SparseState:
    """The state U(t)|psi0> under the pulsed lift.

    ``psi0`` must be tagged t = 0.  Writing t = n + s: integer s = 0 is the
    exact permutation power; s >= delta is the completed pulse, again exact,
    tagged at t; 0 < s < delta applies the fractional cycle power to every
    support orbit (typed refusal where orbits do not close).  When ``m`` is
    given, a tracked floating error above 2^-m raises
    :class:`PrecisionBudgetError`.
    """
    if sched.clock != step.clock:
        raise ParameterRangeError(
            f"schedule clock {sched.clock!r} does not match step clock {step.clock!r}"
        )
    t = _as_fraction(t, "t")
    if t < 0:
        raise ParameterRangeError(f"time must be nonnegative, got {t}")
    if psi0.time_tag != 0:
        raise TimeTagError(
            f"evolve_to starts from the t=0 state, got time_tag {psi0.time_tag}"
        )
    n, s = _split_time(t)
    if s == 0:
        return evolve_integer(step, psi0, n)
    if s >= sched.delta:
        done = evolve_integer(step, psi0, n + 1)
        return SparseState(done.items(), t, _check_norm=False)
    base = evolve_integer(step, psi0, n)
    alpha = s / sched.delta
    pairs = _mid_pulse_pairs(step, base.items(), alpha, cycle_cap)
    out = SparseState(pairs, t)
    if m is not None and out.max_err() > 0.5 ** m:
        raise PrecisionBudgetError(
            f"tracked amplitude error {out.max_err():.3e} exceeds 2^-{m}"
        )
    return out


# ---------------------------------------------------------------------------
# fidelity


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def fidelity(alpha: SparseState, beta: SparseState) -> Union[Fraction, float]:
    """|<alpha|beta>|^2 over the support intersection; exact Fraction when
    both states are exact, clamped float otherwise."""
    if alpha.is_exact and beta.is_exact:
        re = Fraction(0)
        im = Fraction(0)
        for lab, a in alpha.items():
            b = beta.amplitude(lab)
            if b is None:
                continue
            prod = a.conj().mul(b)
            re += prod.re
            im += prod.im
        return re * re + im * im
    total = complex(0.0)
    for lab, a in alpha.items():
        b = beta.amplitude(lab)
        if b is None:
            continue
        total += a.conj().mul(b).as_complex()
    return _clamp01(abs(total) ** 2)


def subspace_fidelity(
    alpha: SparseState, predicate: Callable[[ExtendedBasisState], bool]
) -> Union[Fraction, float]:
    """Total squared weight of the labels satisfying the predicate."""
    if alpha.is_exact:
        total = Fraction(0)
        for lab, amp in alpha.items():
            if predicate(lab):
                total += amp.abs2()
        return total
    total = math.fsum(
        float(amp.abs2()) for lab, amp in alpha.items() if predicate(lab)
    )
    return _clamp01(total)


# ---------------------------------------------------------------------------
# the rational approximation oracle


@dataclass(frozen=True)
class RationalMatrix:
    """Exact rational matrix certified within ``bound`` of U(t) in operator
    norm on the span of ``basis`` (entry [i][j] is (re, im) of
    <basis_i|U(t)|basis_j>)."""

    basis: tuple[ExtendedBasisState, ...]
    entries: tuple[tuple[tuple[Fraction, Fraction], ...], ...]
    bound: Fraction
    t: Fraction

    def column(self, j: int) -> list[tuple[Fraction, Fraction]]:
        return [row[j] for row in self.entries]

    def apply(
        self, vec: Sequence[tuple[Fraction, Fraction]]
    ) -> list[tuple[Fraction, Fraction]]:
        if len(vec) != len(self.basis):
            raise ParameterRangeError(
                f"vector length {len(vec)} does not match basis size {len(self.basis)}"
            )
        out = []
        for row in self.entries:
            re = Fraction(0)
            im = Fraction(0)
            for (mre, mim), (vre, vim) in zip(row, vec):
                re += mre * vre - mim * vim
                im += mre * vim + mim * vre
            out.append((re, im))
        return out

    def as_numpy(self) -> np.ndarray:
        n = len(self.basis)
        out = np.empty((n, n), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, (re, im) in enumerate(row):
                out[i, j] = complex(float(re), float(im))
        return out


def approx_unitary(
    step: BeaconStep,
    sched: PulseSchedule,
    basis: Sequence[ExtendedBasisState],
    t,
    m: int,
    *,
    cycle_cap: int = CYCLE_CAP,
) -> RationalMatrix:
    """Rational matrix within 2^-m of U(t) restricted to ``basis``.

    The basis must be closed under the evolution at time t (permutation
    images inside the basis for integer or completed-pulse times, whole
    orbit cycles for mid-pulse times); anything else is a
    :class:`BasisNotClosedError`, never a silent truncation.
    """
    if sched.clock != step.clock:
        raise ParameterRangeError(
            f"schedule clock {sched.clock!r} does not match step clock {step.clock!r}"
        )
    if not isinstance(m, int) or m < 1:
        raise ParameterRangeError(f"precision exponent must be a positive integer, got {m!r}")
    t = _as_fraction(t, "t")
    if t < 0:
        raise ParameterRangeError(f"time must be nonnegative, got {t}")
    basis = tuple(basis)
    size = len(basis)
    if size == 0:
        raise ParameterRangeError("basis must be nonempty")
    index: dict[bytes, int] = {}
    for i, lab in enumerate(basis):
        if lab.serial in index:
            raise LabelError(f"duplicate basis label {lab!r}")
        index[lab.serial] = i

    n, s = _split_time(t)
    zero = Fraction(0)
    one = Fraction(1)

    if s == 0 or s >= sched.delta:
        steps = n if s == 0 else n + 1
        cols: list[list[tuple[Fraction, Fraction]]] = [
            [(zero, zero)] * size for _ in range(size)
        ]
        taken: dict[int, int] = {}
        for j, lab in enumerate(basis):
            cur = lab
            for _ in range(steps):
                cur = step.forward(cur)
            i = index.get(cur.serial)
            if i is None:
                raise BasisNotClosedError(
                    f"image of basis label {j} at t={t} leaves the basis"
                )
            if i in taken:
                # the halt-entry pinch of a cyclic clock: the tail label and
                # the last cycle label share an image, so no basis spanning
                # both sides is carried unitarily
                raise BasisNotClosedError(
                    f"basis labels {taken[i]} and {j} collide at t={t}; "
                    "restrict the basis to one side of the halt entry"
                )
            taken[i] = j
            cols[j][i] = (one, zero)
        entries = tuple(
            tuple(cols[j][i] for j in range(size)) for i in range(size)
        )
        return RationalMatrix(basis, entries, Fraction(1, 2**m), t)

    # mid-pulse: entrywise precision gets log2(size) headroom so the
    # operator-norm bound ||A||_2 <= size * max|entry error| lands under 2^-m
    entry_bits = m + size.bit_length() + 1
    alpha = s / sched.delta
    cycle_index = _CycleIndex(step, cycle_cap)
    coeff_cache: dict[int, list[tuple[Fraction, Fraction]]] = {}
    cols = [[(zero, zero)] * size for _ in range(size)]
    for j, lab in enumerate(basis):
        cyc, pos = cycle_index.locate(lab)
        k = len(cyc)
        if k not in coeff_cache:
            coeff_cache[k] = _rational_coeffs(k, alpha, entry_bits)
        g = coeff_cache[k]
        # the permutation part of n whole steps just rotates the cycle
        shift = (pos + n) % k
        for r in range(k):
            target = cyc[(shift + r) % k]
            i = index.get(target.serial)
            if i is None:
                raise BasisNotClosedError(
                    f"cycle of basis label {j} is not contained in the basis"
                )
            cols[j][i] = g[r]
    entries = tuple(tuple(cols[j][i] for j in range(size)) for i in range(size))
    return RationalMatrix(basis, entries, Fraction(1, 2**m), t)
