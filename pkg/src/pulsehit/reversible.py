"""Reversible beacon dynamics on an extended machine basis.

A classical deterministic machine is compiled into an injective step map on
labels ``(state, head, tape, history, clock, halt flag, beacon bit)``.  The
history records the index of every rule applied so far, which is what makes
un-stepping possible; the clock counts steps; the halt flag latches when the
halt state is entered; and the beacon bit toggles on every step taken after
halting, so a run that halts at classical step K is in the beacon subspace
(b = 1) for the first time exactly at clock value K + 1, whether or not
K = 0.

Two clock conventions are supported.  ``Unbounded`` runs the clock over all
integers, with negative times occupied by pure idle shifts of the t = 0
label, so the step map has a two-sided orbit through every well-formed
label.  ``Cyclic(L)`` wraps the clock modulo L; after halting, the orbit of
a label closes into a finite cycle of length lcm(L, 2) (clock period L,
beacon period 2), which is the property the continuous-time lift exploits.

The step map is total injectivity only on well-formed labels: labels whose
clock, history length and halt flag could actually coincide on a run.  The
backward map resolves each image to its unique well-formed preimage and
answers ``NO_PREIMAGE`` otherwise; every non-``NO_PREIMAGE`` answer is
verified by re-applying the forward map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Union

from .errors import IllFormedMachineError, LabelError, ParameterRangeError
from .machine import MachineSpec, rule_table

_OFFSET = {"L": -1, "R": 1, "S": 0}


@dataclass(frozen=True)
class Unbounded:
    """Clock over all integers; negative times are idle shifts."""


@dataclass(frozen=True)
class Cyclic:
    """Clock wraps modulo ``period`` (at least 2)."""

    period: int

    def __post_init__(self):
        if not isinstance(self.period, int) or self.period < 2:
            raise ParameterRangeError(
                f"cyclic clock period must be an integer >= 2, got {self.period!r}"
            )


ClockMode = Union[Unbounded, Cyclic]


@dataclass(frozen=True)
class BeaconSubspace:
    """Target: the span of all labels with beacon bit 1."""


@dataclass(frozen=True)
class ExactLabel:
    """Target: one specific basis label."""

    phi: "ExtendedBasisState"


@dataclass(frozen=True)
class NoPreimage:
    """Answer of the backward map at labels no well-formed label reaches."""


NO_PREIMAGE = NoPreimage()


class HistChain:
    """Immutable rule-index history with O(1) append and shared tails.

    Chains built by repeated ``append`` along one orbit share structure, so
    equality checks between nearby orbit labels short-circuit on identity.
    Iteration yields rule indices oldest first.
    """

    __slots__ = ("prev", "rule_index", "length", "_hash")

    def __init__(self, prev: Optional["HistChain"], rule_index: Optional[int]):
        self.prev = prev
        self.rule_index = rule_index
        if prev is None:
            self.length = 0
            self._hash = hash(("hist",))
        else:
            self.length = prev.length + 1
            self._hash = hash((prev._hash, rule_index))

    def append(self, rule_index: int) -> "HistChain":
        return HistChain(self, rule_index)

    def pop(self) -> tuple[int, "HistChain"]:
        if self.prev is None:
            raise LabelError("cannot pop an empty history")
        return self.rule_index, self.prev

    @property
    def last(self) -> Optional[int]:
        return self.rule_index

    def __len__(self) -> int:
        return self.length

    def __iter__(self):
        out = []
        node = self
        while node.prev is not None:
            out.append(node.rule_index)
            node = node.prev
        return iter(reversed(out))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, HistChain):
            return NotImplemented
        if self.length != other.length:
            return False
        a, b = self, other
        while a is not b:
            if a.rule_index != b.rule_index:
                return False
            a, b = a.prev, b.prev
        return True

    def __repr__(self) -> str:
        return f"HistChain({list(self)})"


EMPTY_HISTORY = HistChain(None, None)


def history_of(indices: Iterable[int]) -> HistChain:
    node = EMPTY_HISTORY
    for i in indices:
        node = node.append(i)
    return node


# ---------------------------------------------------------------------------
# labels and their serialization


def _uvarint(out: bytearray, n: int) -> None:
    while n > 0x7F:
        out.append((n & 0x7F) | 0x80)
        n >>= 7
    out.append(n)


def _zigzag(n: int) -> int:
    return (n << 1) if n >= 0 else ((-n << 1) - 1)


def _field(out: bytearray, tag: int, payload: bytes) -> None:
    out.append(tag)
    _uvarint(out, len(payload))
    out.extend(payload)


class ExtendedBasisState:
    """One basis label of the extended space.

    ``tape`` is sparse (blank cells absent) and must never be mutated;
    labels are value objects whose identity is their byte serialization.
    """

    __slots__ = ("state", "head", "tape", "hist", "tau", "h", "b", "_serial", "_hash")

    def __init__(
        self,
        state: str,
        head: int,
        tape: dict[int, str],
        hist: HistChain,
        tau: int,
        h: int,
        b: int,
    ):
        self.state = state
        self.head = head
        self.tape = tape
        self.hist = hist
        self.tau = tau
        self.h = h
        self.b = b
        self._serial = None
        self._hash = None

    @property
    def serial(self) -> bytes:
        """Canonical byte form; two labels are equal iff their serials are.

        Layout is tag/length/value with tags 1..7 in fixed order: state
        (utf-8), head (zigzag varint), tape (count, then sorted cell
        entries), history (count, then rule indices oldest first), clock
        (zigzag varint), halt flag, beacon bit.
        """
        if self._serial is None:
            out = bytearray()
            _field(out, 0x01, self.state.encode("utf-8"))
            head = bytearray()
            _uvarint(head, _zigzag(self.head))
            _field(out, 0x02, bytes(head))
            tp = bytearray()
            _uvarint(tp, len(self.tape))
            for cell in sorted(self.tape):
                _uvarint(tp, _zigzag(cell))
                sym = self.tape[cell].encode("utf-8")
                _uvarint(tp, len(sym))
                tp.extend(sym)
            _field(out, 0x03, bytes(tp))
            hs = bytearray()
            _uvarint(hs, len(self.hist))
            for idx in self.hist:
                _uvarint(hs, idx)
            _field(out, 0x04, bytes(hs))
            tv = bytearray()
            _uvarint(tv, _zigzag(self.tau))
            _field(out, 0x05, bytes(tv))
            _field(out, 0x06, bytes([self.h]))
            _field(out, 0x07, bytes([self.b]))
            self._serial = bytes(out)
        return self._serial

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.serial)
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, ExtendedBasisState):
            return NotImplemented
        return self.serial == other.serial

    def __repr__(self) -> str:
        tape = {k: self.tape[k] for k in sorted(self.tape)}
        return (
            f"<{self.state}@{self.head} tape={tape} hist={list(self.hist)}"
            f" tau={self.tau} h={self.h} b={self.b}>"
        )


def serialize_label(label: ExtendedBasisState) -> bytes:
    return label.serial


# ---------------------------------------------------------------------------
# the step permutation


class BeaconStep:
    """Forward and backward reversible step for one machine and clock mode.

    Forward semantics, in priority order:

    1. Unbounded clock, negative time: pure idle shift, only the clock
       moves.
    2. Halt flag set, or the control state is the halt state: the work half
       (state, head, tape, history) freezes, the clock ticks, the halt flag
       latches to 1, and the beacon bit flips.
    3. Otherwise one machine rule fires: tape, head and state update, the
       rule's index is appended to the history, the clock ticks, and the
       halt flag becomes 1 exactly when the new state is the halt state.

    A live label whose (state, symbol) pair has no rule raises
    :class:`IllFormedMachineError`; machines fed to the dynamics are
    expected to be total along their reachable configurations.
    """

    def __init__(self, spec: MachineSpec, clock: ClockMode):
        if not isinstance(clock, (Unbounded, Cyclic)):
            raise ParameterRangeError(f"unknown clock mode {clock!r}")
        for r in spec.rules:
            if r.state == spec.halt_state:
                raise IllFormedMachineError(
                    f"rule out of halt state ({r.state!r}, {r.read!r})"
                )
        self.spec = spec
        self.clock = clock
        self._table = rule_table(spec)
        self._rules = spec.rules
        self._blank = spec.blank
        self._halt = spec.halt_state
        self._cyclic = clock.period if isinstance(clock, Cyclic) else None

    # -- construction helpers ------------------------------------------------

    def initial_label(self) -> ExtendedBasisState:
        tape = {i: s for i, s in enumerate(self.spec.input_word)}
        return ExtendedBasisState(self.spec.start_state, 0, tape, EMPTY_HISTORY, 0, 0, 0)

    def make_label(
        self,
        state: str,
        head: int,
        tape: dict[int, str],
        hist: Union[HistChain, Iterable[int]],
        tau: int,
        h: int,
        b: int,
    ) -> ExtendedBasisState:
        """Validated public constructor (forward/backward build labels
        directly and skip these checks)."""
        spec = self.spec
        if state not in spec.states:
            raise LabelError(f"undeclared state {state!r}")
        symbols = set(spec.alphabet)
        for cell, sym in tape.items():
            if not isinstance(cell, int):
                raise LabelError(f"tape cell {cell!r} is not an integer")
            if sym not in symbols:
                raise LabelError(f"undeclared tape symbol {sym!r}")
            if sym == spec.blank:
                raise LabelError("sparse tapes must omit blank cells")
        if not isinstance(hist, HistChain):
            hist = history_of(hist)
        for idx in hist:
            if not 0 <= idx < len(spec.rules):
                raise LabelError(f"history rule index {idx} out of range")
        if self._cyclic is not None and not 0 <= tau < self._cyclic:
            raise LabelError(
                f"clock value {tau} outside cyclic range [0, {self._cyclic})"
            )
        if h not in (0, 1) or b not in (0, 1):
            raise LabelError("halt flag and beacon bit must be 0 or 1")
        return ExtendedBasisState(state, head, dict(tape), hist, tau, h, b)

    # -- forward ---------------------------------------------------------------

    def _tick(self, tau: int) -> int:
        if self._cyclic is None:
            return tau + 1
        return (tau + 1) % self._cyclic

    def forward(self, x: ExtendedBasisState) -> ExtendedBasisState:
        if self._cyclic is None and x.tau < 0:
            return ExtendedBasisState(
                x.state, x.head, x.tape, x.hist, x.tau + 1, x.h, x.b
            )
        if x.h == 1 or x.state == self._halt:
            return ExtendedBasisState(
                x.state, x.head, x.tape, x.hist, self._tick(x.tau), 1, x.b ^ 1
            )
        read = x.tape.get(x.head, self._blank)
        hit = self._table.get((x.state, read))
        if hit is None:
            raise IllFormedMachineError(
                f"no rule for ({x.state!r}, {read!r}) at clock {x.tau}"
            )
        idx, rule = hit
        tape = x.tape
        if rule.write != read:
            tape = dict(tape)
            if rule.write == self._blank:
                tape.pop(x.head, None)
            else:
                tape[x.head] = rule.write
        h = 1 if rule.next_state == self._halt else 0
        return ExtendedBasisState(
            rule.next_state,
            x.head + _OFFSET[rule.move],
            tape,
            x.hist.append(idx),
            self._tick(x.tau),
            h,
            x.b,
        )

    # -- backward ----------------------------------------------------------------

    def _unapply(self, y: ExtendedBasisState, idx: int) -> Optional[tuple[str, int, dict]]:
        """Reverse the work-half effect of rule ``idx``, or None if the
        label is not consistent with having just fired it."""
        if not 0 <= idx < len(self._rules):
            return None
        r = self._rules[idx]
        if r.next_state != y.state:
            return None
        head = y.head - _OFFSET[r.move]
        if y.tape.get(head, self._blank) != r.write:
            return None
        tape = y.tape
        if r.write != r.read:
            tape = dict(tape)
            if r.read == self._blank:
                tape.pop(head, None)
            else:
                tape[head] = r.read
        return r.state, head, tape

    def _verified(
        self, cand: ExtendedBasisState, y: ExtendedBasisState
    ) -> Union[ExtendedBasisState, NoPreimage]:
        try:
            ok = self.forward(cand) == y
        except IllFormedMachineError:
            ok = False
        return cand if ok else NO_PREIMAGE

    def _rule_preimage(
        self, y: ExtendedBasisState, tau: int
    ) -> Union[ExtendedBasisState, NoPreimage]:
        if len(y.hist) == 0:
            return NO_PREIMAGE
        idx, hist = y.hist.pop()
        work = self._unapply(y, idx)
        if work is None:
            return NO_PREIMAGE
        state, head, tape = work
        return self._verified(ExtendedBasisState(state, head, tape, hist, tau, 0, y.b), y)

    def backward(self, y: ExtendedBasisState) -> Union[ExtendedBasisState, NoPreimage]:
        """The unique well-formed preimage of ``y``, or ``NO_PREIMAGE``.

        Every returned label is verified to map back onto ``y`` under
        :meth:`forward`.  Labels whose clock, history and flags cannot
        belong to any run (for example a halt flag set before the history
        could have produced it) get ``NO_PREIMAGE`` even when some
        ill-formed label would also map onto them.
        """
        if self._cyclic is None:
            return self._backward_unbounded(y)
        return self._backward_cyclic(y)

    def _backward_unbounded(self, y):
        if y.tau <= 0:
            if y.h == 0 and len(y.hist) == 0:
                return ExtendedBasisState(
                    y.state, y.head, y.tape, y.hist, y.tau - 1, y.h, y.b
                )
            return NO_PREIMAGE
        if y.h == 0:
            if len(y.hist) != y.tau:
                return NO_PREIMAGE
            return self._rule_preimage(y, y.tau - 1)
        rise_time = max(len(y.hist), 1)
        if y.tau > rise_time:
            return ExtendedBasisState(
                y.state, y.head, y.tape, y.hist, y.tau - 1, 1, y.b ^ 1
            )
        if y.tau == rise_time:
            if len(y.hist) > 0:
                return self._rule_preimage(y, y.tau - 1)
            # halt at step 0: the flag rose out of the initial label itself
            return self._verified(
                ExtendedBasisState(y.state, y.head, y.tape, y.hist, 0, 0, y.b ^ 1), y
            )
        return NO_PREIMAGE

    def _backward_cyclic(self, y):
        period = self._cyclic
        tau_prev = (y.tau - 1) % period
        if y.h == 0:
            if len(y.hist) % period != y.tau % period:
                return NO_PREIMAGE
            return self._rule_preimage(y, tau_prev)
        # A halted label is the halt-entry point (end of the Bennett tail)
        # rather than an interior cycle point only if the clock matches the
        # history length and the beacon has the entry parity: b = 0 for a
        # rule entry at step K >= 1, b = 1 for the step-0 flag rise, whose
        # image already sits one toggle in.  For odd periods the clock
        # congruence alone recurs half way around the cycle with the
        # opposite beacon parity, so the parity check is load-bearing.
        if y.b == 0 and len(y.hist) > 0 and len(y.hist) % period == y.tau % period:
            cand = self._rule_preimage(y, tau_prev)
            if cand is not NO_PREIMAGE:
                return cand
        if y.b == 1 and len(y.hist) == 0 and y.tau % period == 1 % period:
            cand = self._verified(
                ExtendedBasisState(y.state, y.head, y.tape, y.hist, 0, 0, y.b ^ 1), y
            )
            if cand is not NO_PREIMAGE:
                return cand
        return ExtendedBasisState(y.state, y.head, y.tape, y.hist, tau_prev, 1, y.b ^ 1)

    # -- targets -----------------------------------------------------------------

    def target_predicate(
        self, target: Union[BeaconSubspace, ExactLabel]
    ) -> Callable[[ExtendedBasisState], bool]:
        if isinstance(target, BeaconSubspace):
            return lambda label: label.b == 1
        if isinstance(target, ExactLabel):
            phi = target.phi
            return lambda label: label == phi
        raise ParameterRangeError(f"unknown target {target!r}")
