"""Circuits: element sequences with Mach-Zehnder blocks, exact runs and shot sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .elements import (
    Element,
    dove_prism,
    hwp,
    mirror,
    pbs_split,
    phase,
    qplate,
    qwp,
)
from .errors import MalformedInterferometerError, NormalizationError
from .hilbert import EMPTY_TOL, STRUCT_TOL, LogicalSubspace, PhotonState

_MIRROR = mirror()
_PBS = pbs_split()


@dataclass(frozen=True)
class InterferometerBlock:
    """Mach-Zehnder interferometer between two polarizing beam splitters.

    H light travels ``arm_a`` and V light ``arm_b``. Each arm also carries a
    declared number of mirror/PBS reflections, applied after the arm's
    elements (before them when ``reflections_first``). The total number of
    OAM flips per arm must be even unless ``compensated`` is set.
    """

    arm_a: tuple = ()
    arm_b: tuple = ()
    reflections_a: int = 2
    reflections_b: int = 2
    reflections_first: bool = False
    compensated: bool = False
    label: str = "mz"

    def __post_init__(self):
        object.__setattr__(self, "arm_a", tuple(self.arm_a))
        object.__setattr__(self, "arm_b", tuple(self.arm_b))
        for arm in (self.arm_a, self.arm_b):
            for e in arm:
                if not isinstance(e, Element) or not e.local:
                    raise MalformedInterferometerError(f"arm stage {e!r} is not a local element")
        if self.reflections_a < 0 or self.reflections_b < 0:
            raise MalformedInterferometerError("reflection counts must be non-negative")
        if not self.compensated:
            for name, parity in (("arm_a", self.flip_parity("a")), ("arm_b", self.flip_parity("b"))):
                if parity:
                    raise MalformedInterferometerError(f"{name} has an odd number of OAM flips")

    def flip_parity(self, arm: str) -> int:
        elements, refl = (self.arm_a, self.reflections_a) if arm == "a" else (self.arm_b, self.reflections_b)
        return (refl + sum(e.flips_oam for e in elements)) % 2

    # light leaving by the unused exit port is lost
    kind = "filter"

    def _arm_sequence(self, arm):
        elements, refl = (self.arm_a, self.reflections_a) if arm == "a" else (self.arm_b, self.reflections_b)
        mirrors = (_MIRROR,) * refl
        return mirrors + elements if self.reflections_first else elements + mirrors

    def apply(self, state: PhotonState) -> PhotonState:
        inside = state.path_weight("arm_a") + state.path_weight("arm_b")
        if inside > EMPTY_TOL:
            raise MalformedInterferometerError("interferometer entered with amplitude already in the arms")
        state = _PBS.apply(state)
        for arm, path in (("a", "arm_a"), ("b", "arm_b")):
            for e in self._arm_sequence(arm):
                state = e.apply(state, path=path)
        state = _PBS.apply(state)
        amps = state.amplitudes.copy()
        amps[1:] = 0
        return PhotonState(amps)

    def adjoint(self) -> "InterferometerBlock":
        return InterferometerBlock(
            arm_a=tuple(e.adjoint() for e in reversed(self.arm_a)),
            arm_b=tuple(e.adjoint() for e in reversed(self.arm_b)),
            reflections_a=self.reflections_a,
            reflections_b=self.reflections_b,
            reflections_first=not self.reflections_first,
            compensated=self.compensated,
            label=self.label,
        )

    def arm_operator(self, arm: str, m_max: int) -> np.ndarray:
        """Polarization x OAM matrix of one arm, reflections included."""
        op = np.eye(2 * (2 * m_max + 1), dtype=complex)
        for e in self._arm_sequence(arm):
            op = e.local_matrix(m_max) @ op
        return op


Stage = Union[Element, InterferometerBlock]


@dataclass(frozen=True)
class Circuit:
    stages: tuple = ()
    label: str = "circuit"

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        for s in self.stages:
            if not isinstance(s, (Element, InterferometerBlock)):
                raise TypeError(f"not a circuit stage: {s!r}")
            if isinstance(s, Element) and not s.local and s.name == "pbs_split":
                raise MalformedInterferometerError("bare pbs_split stage; use an InterferometerBlock")

    def __len__(self):
        return len(self.stages)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.stages + other.stages, label=f"{self.label}+{other.label}")

    def adjoint(self) -> "Circuit":
        """Light sent backwards: reversed order, every stage replaced by its adjoint."""
        return Circuit(tuple(s.adjoint() for s in reversed(self.stages)), label=f"{self.label}_rev")

    def qplates(self) -> list:
        out = []
        for s in self.stages:
            if isinstance(s, InterferometerBlock):
                out.extend(e for e in s.arm_a + s.arm_b if e.name == "qplate")
            elif s.name == "qplate":
                out.append(s)
        return out


@dataclass(frozen=True)
class RunResult:
    final_state: Optional[PhotonState]
    success_probability: float
    output: PhotonState
    stage_trace: tuple = ()

    @property
    def null(self) -> bool:
        return self.final_state is None


def _stage_label(stage, i):
    name = stage.label if isinstance(stage, InterferometerBlock) else stage.name
    return f"{i}:{name}"


def run_exact(circuit: Circuit, state: PhotonState) -> RunResult:
    """Propagate ``state`` through every stage, tracking the surviving probability."""
    if abs(state.norm2 - 1) > STRUCT_TOL:
        raise NormalizationError(f"input norm2 {state.norm2!r} must be 1")
    trace = []
    for i, stage in enumerate(circuit.stages):
        state = stage.apply(state)
        trace.append((_stage_label(stage, i), state.norm2))
    p = state.norm2
    if p < EMPTY_TOL:
        return RunResult(None, 0.0, state, tuple(trace))
    return RunResult(state.normalized(), min(p, 1.0), state, tuple(trace))


def deterministic_transferrer(direction: str = "pol_to_oam", variant: str = "pi8", delta: float = np.pi) -> Circuit:
    """Lossless polarization <-> OAM(|m|=2) transferrer with a Mach-Zehnder.

    After the QWP pair and q-plate, a QWP at 90 degrees turns R/L into A/D so
    that the V arm carries the sign to undo. That arm holds the sigma_z
    device: two Dove prisms at pi/8 and 0 (``variant="pi8"``), or one prism
    per arm at -/+ pi/16 with an odd reflection count (``variant="pi16"``).
    A phase shifter locks the interferometer so the photon leaves in A,
    and a final HWP at 22.5 degrees rotates A to H.

    ``oam_to_pol`` is the same optics crossed backwards.
    """
    if variant == "pi8":
        block = InterferometerBlock(
            arm_a=(),
            arm_b=(dove_prism(np.pi / 8), dove_prism(0.0), phase(np.pi / 2)),
            label="mz",
        )
    elif variant == "pi16":
        block = InterferometerBlock(
            arm_a=(dove_prism(-np.pi / 16),),
            arm_b=(dove_prism(np.pi / 16), phase(np.pi / 2)),
            reflections_a=1,
            reflections_b=1,
            label="mz",
        )
    else:
        raise ValueError(f"unknown variant {variant!r}")
    fwd = Circuit(
        (qwp(0.0), qwp(np.pi / 4), qplate(1, delta), qwp(np.pi / 2), block, hwp(np.pi / 8)),
        label="det_fwd",
    )
    if direction == "pol_to_oam":
        return fwd
    if direction == "oam_to_pol":
        rev = fwd.adjoint()
        return Circuit(rev.stages, label="det_rev")
    raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class CountRecord:
    """Detector counts per analyzer: ``label -> (counts, shots_attempted)``.

    Counts may be non-integer expected values for exact-mode records.
    """

    subspace: LogicalSubspace
    counts: Mapping[str, tuple]
    seed: Optional[int] = None

    def __post_init__(self):
        clean = {}
        for label, (n, shots) in self.counts.items():
            if n < 0 or shots < 0:
                raise ValueError(f"negative count for {label!r}")
            if n > shots + 1e-9 * max(1.0, shots):
                raise ValueError(f"counts exceed shots for {label!r}")
            clean[label] = (n, shots)
        object.__setattr__(self, "counts", clean)

    def frequency(self, label: str) -> float:
        return self.counts[label][0]

    def __eq__(self, other):
        if not isinstance(other, CountRecord):
            return NotImplemented
        return (self.subspace, self.counts, self.seed) == (other.subspace, other.counts, other.seed)


def _analyzer_items(analyzers) -> list:
    if isinstance(analyzers, Mapping):
        items = list(analyzers.items())
    else:
        items = [(e.label or e.name, e) for e in analyzers]
    if not items:
        raise ValueError("analyzer list is empty")
    labels = [k for k, _ in items]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate analyzer labels {labels}")
    return items


def analyzer_probabilities(state: PhotonState, analyzers) -> dict:
    """Detection probability of each analyzer applied to ``state``."""
    return {label: e.apply(state).norm2 for label, e in _analyzer_items(analyzers)}


def run_shots(
    circuit: Circuit,
    state: PhotonState,
    analyzers,
    shots: int,
    seed: int,
    subspace: Optional[LogicalSubspace] = None,
) -> CountRecord:
    """Simulated counting run: one independent binomial per analyzer.

    The detection probability of analyzer ``i`` is ``p * q_i`` with ``p`` the
    circuit success probability and ``q_i`` the analyzer's projection on the
    normalized output. Each analyzer draws from its own child of ``seed``.
    """
    items = _analyzer_items(analyzers)
    if shots <= 0:
        raise ValueError("shots must be positive")
    result = run_exact(circuit, state)
    children = np.random.SeedSequence(seed).spawn(len(items))
    counts = {}
    for (label, e), child in zip(items, children):
        q = 0.0 if result.null else e.apply(result.final_state).norm2
        prob = min(max(q * result.success_probability, 0.0), 1.0)
        counts[label] = (int(np.random.default_rng(child).binomial(shots, prob)), int(shots))
    return CountRecord(subspace if subspace is not None else _guess_subspace(items), counts, seed)


def _guess_subspace(items) -> Optional[LogicalSubspace]:
    labels = {k for k, _ in items}
    for sub in (LogicalSubspace("polarization"), LogicalSubspace("oam", 2)):
        if labels <= set(sub.labels):
            orders = {e.params.get("order") for _, e in items}
            if sub.kind == "oam" and len(orders) == 1:
                return LogicalSubspace("oam", orders.pop())
            return sub
    return None
