"""Halting questions recast as hitting questions, and the shipped corpus.

The compilation is thin by design: a machine, a threshold margin, a
schedule and a target determine one hitting instance, and the biconditional
does the rest (the machine halts at step K iff the beacon subspace is hit,
with the hitting time inside [K, K + delta]).  The corpus carries machines
whose halting behaviour is known with checkable certificates: a halting
entry states its exact step count, a looping entry states two steps whose
configurations coincide, which by determinism pins the machine in a cycle
forever.  Certificates are replayed before any scanning, and a certificate
that fails to replay is a corpus bug, reported as its own error type so it
can never masquerade as a verdict about the reduction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence, Union

from .dynamics import PulseSchedule
from .errors import CorpusBugError, ParameterRangeError
from .hitting import (
    Exhausted,
    Hit,
    HitReport,
    InstanceDescriptor,
    grid_for,
    uhit_semidecide,
)
from .machine import (
    Configuration,
    MachineSpec,
    Rule,
    classical_trace,
    parse_machine,
)
from .reversible import BeaconSubspace, ClockMode, ExactLabel


@dataclass(frozen=True)
class Halts:
    """The machine halts after exactly this many steps."""

    steps: int


@dataclass(frozen=True)
class LoopsForever:
    """The configurations at the two named steps coincide, so the machine
    cycles forever without halting."""

    revisit: tuple[int, int]


GroundTruth = Union[Halts, LoopsForever]


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    machine: MachineSpec
    ground_truth: GroundTruth


@dataclass(frozen=True)
class ReductionReport:
    entry: CorpusEntry
    expected: GroundTruth
    observed: HitReport
    verdict: str  # "agree" | "disagree"


def encode(
    machine: MachineSpec,
    epsilon: Fraction,
    delta: Fraction,
    mode: ClockMode,
    target: Union[BeaconSubspace, ExactLabel],
    horizon: int,
    grid: int | None = None,
) -> InstanceDescriptor:
    """The hitting instance of one halting question.  The grid refinement
    defaults to the epsilon-dependent value that cannot step over the
    threshold crossing within a pulse."""
    epsilon = Fraction(epsilon)
    if grid is None:
        grid = grid_for(epsilon, Fraction(delta))
    return InstanceDescriptor(
        machine=machine,
        epsilon=epsilon,
        schedule=PulseSchedule(Fraction(delta), mode),
        target=target,
        horizon=horizon,
        grid=grid,
    )


# ---------------------------------------------------------------------------
# certificate replay


def _replay_halts(entry: CorpusEntry, claim: Halts) -> None:
    if claim.steps < 0:
        raise CorpusBugError(f"{entry.name}: negative step count {claim.steps}")
    last = None
    for cfg in classical_trace(entry.machine, claim.steps):
        last = cfg
    if last is None or last.step_count != claim.steps:
        raise CorpusBugError(
            f"{entry.name}: claimed to halt at step {claim.steps} but the "
            f"trace ended at {last.step_count if last else 'nowhere'}"
        )
    if last.state != entry.machine.halt_state:
        raise CorpusBugError(
            f"{entry.name}: still in state {last.state} after "
            f"{claim.steps} steps, not halted"
        )


def _replay_loops(entry: CorpusEntry, claim: LoopsForever) -> None:
    r, r2 = claim.revisit
    if not (isinstance(r, int) and isinstance(r2, int) and 0 <= r < r2):
        raise CorpusBugError(f"{entry.name}: malformed revisit pair {claim.revisit}")
    snapshots: dict[int, Configuration] = {}
    for cfg in classical_trace(entry.machine, r2):
        if cfg.state == entry.machine.halt_state:
            raise CorpusBugError(
                f"{entry.name}: halts at step {cfg.step_count}, cannot loop"
            )
        if cfg.step_count in (r, r2):
            snapshots[cfg.step_count] = cfg
    if len(snapshots) != 2:
        raise CorpusBugError(
            f"{entry.name}: trace too short to reach revisit step {r2}"
        )
    if not snapshots[r].same_snapshot(snapshots[r2]):
        raise CorpusBugError(
            f"{entry.name}: configurations at steps {r} and {r2} differ, "
            "revisit certificate is false"
        )


def validate_entry(entry: CorpusEntry) -> None:
    """Replay the entry's certificate; raises CorpusBugError when it lies."""
    if isinstance(entry.ground_truth, Halts):
        _replay_halts(entry, entry.ground_truth)
    elif isinstance(entry.ground_truth, LoopsForever):
        _replay_loops(entry, entry.ground_truth)
    else:
        raise CorpusBugError(
            f"{entry.name}: unknown ground truth {entry.ground_truth!r}"
        )


# ---------------------------------------------------------------------------
# corpus verification


def _agrees(
    truth: GroundTruth,
    observed: HitReport,
    epsilon: Fraction,
    delta: Fraction,
    horizon: int,
) -> bool:
    if isinstance(truth, Halts):
        if truth.steps <= horizon - 1:
            # detectable: the hit window must overlap [K, K + delta]
            if not isinstance(observed, Hit):
                return False
            lo, hi = observed.window
            return lo <= truth.steps + delta and hi >= truth.steps
        # halts beyond the scan: exhaustion is the right answer
        return isinstance(observed, Exhausted)
    if not isinstance(observed, Exhausted):
        return False
    return observed.max_fidelity_seen <= epsilon


def verify_corpus(
    corpus: Sequence[CorpusEntry],
    epsilon: Fraction,
    delta: Fraction,
    mode: ClockMode,
    target: Union[BeaconSubspace, ExactLabel],
    horizon: int,
) -> list[ReductionReport]:
    """Replay every certificate, scan every instance, compare the two."""
    epsilon = Fraction(epsilon)
    delta = Fraction(delta)
    reports = []
    for entry in corpus:
        validate_entry(entry)
        inst = encode(entry.machine, epsilon, delta, mode, target, horizon)
        observed = uhit_semidecide(inst)
        agree = _agrees(entry.ground_truth, observed, epsilon, delta, horizon)
        reports.append(
            ReductionReport(
                entry=entry,
                expected=entry.ground_truth,
                observed=observed,
                verdict="agree" if agree else "disagree",
            )
        )
    return reports


def _truth_payload(truth: GroundTruth) -> dict:
    if isinstance(truth, Halts):
        return {"kind": "halts", "K": truth.steps}
    return {"kind": "loops", "revisit": list(truth.revisit)}


def _observed_payload(observed: HitReport) -> dict:
    if isinstance(observed, Hit):
        return {
            "outcome": "hit",
            "t": str(observed.t_hit),
            "fidelity": float(observed.fidelity_at_hit),
            "window": [str(observed.window[0]), str(observed.window[1])],
        }
    return {
        "outcome": "exhausted",
        "horizon": observed.horizon,
        "max_fidelity": float(observed.max_fidelity_seen),
    }


def reduction_report_json(reports: Sequence[ReductionReport]) -> str:
    """One JSON object per line, one line per corpus entry."""
    lines = []
    for rep in reports:
        lines.append(
            json.dumps(
                {
                    "name": rep.entry.name,
                    "expected": _truth_payload(rep.expected),
                    "observed": _observed_payload(rep.observed),
                    "verdict": rep.verdict,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# the adversarial family and corpus loading


def counter_family(n: int) -> MachineSpec:
    """Unary right-scanner over n ones: halts after exactly n + 1 steps,
    so the halting step grows without bound along the family."""
    if not isinstance(n, int) or n < 0:
        raise ParameterRangeError(f"family index must be a nonnegative integer, got {n!r}")
    return MachineSpec(
        states=("q0", "qH"),
        alphabet=("_", "1"),
        start_state="q0",
        halt_state="qH",
        input_word=("1",) * n,
        rules=(
            Rule("q0", "1", "q0", "1", "R"),
            Rule("q0", "_", "qH", "_", "S"),
        ),
    )


def _parse_ground_truth(name: str, raw) -> GroundTruth:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise CorpusBugError(f"{name}: malformed ground truth {raw!r}")
    if raw["kind"] == "halts":
        steps = raw.get("K")
        if not isinstance(steps, int):
            raise CorpusBugError(f"{name}: halting entry needs an integer K")
        return Halts(steps)
    if raw["kind"] == "loops":
        pair = raw.get("revisit")
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, int) for x in pair)
        ):
            raise CorpusBugError(f"{name}: looping entry needs revisit [r, r']")
        return LoopsForever((pair[0], pair[1]))
    raise CorpusBugError(f"{name}: unknown ground truth kind {raw['kind']!r}")


def _corpus_from(manifest_text: str, read_file: Callable[[str], str]) -> list[CorpusEntry]:
    try:
        rows = json.loads(manifest_text)
    except json.JSONDecodeError as exc:
        raise CorpusBugError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(rows, list):
        raise CorpusBugError("manifest must be a JSON list")
    entries = []
    seen = set()
    for row in rows:
        name = row.get("name") if isinstance(row, dict) else None
        if not isinstance(name, str) or "machine_file" not in row:
            raise CorpusBugError(f"malformed manifest row {row!r}")
        if name in seen:
            raise CorpusBugError(f"duplicate corpus entry name {name!r}")
        seen.add(name)
        machine = parse_machine(read_file(row["machine_file"]))
        entries.append(
            CorpusEntry(name, machine, _parse_ground_truth(name, row["ground_truth"]))
        )
    return entries


def load_corpus(manifest_path: Union[str, Path]) -> list[CorpusEntry]:
    """Corpus from a manifest file; machine files are siblings of it."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent

    def read_file(rel: str) -> str:
        return (base / rel).read_text()

    return _corpus_from(manifest_path.read_text(), read_file)


def builtin_corpus() -> list[CorpusEntry]:
    """The corpus shipped inside the package."""
    root = resources.files("pulsehit").joinpath("corpus")

    def read_file(rel: str) -> str:
        return root.joinpath(rel).read_text()

    return _corpus_from(root.joinpath("manifest.json").read_text(), read_file)
