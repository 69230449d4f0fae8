"""Canned transferrer setups and drivers that reproduce the fidelity tables."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .circuit import CountRecord, Circuit, analyzer_probabilities, deterministic_transferrer, run_exact, run_shots
from .elements import hologram_analyze, hwp, polarizer, qplate, qwp, smf
from .hilbert import (
    OAM2,
    OAM4,
    OAM_STATES,
    POL_STATES,
    POLARIZATION,
    DensityMatrix2,
    LogicalSubspace,
    PhotonState,
    fidelity,
    make_source_state,
)
from .tomography import ProjectorSet, bootstrap_fidelity, project_physical, reconstruct_linear, reconstruct_mle


class SetupId(str, Enum):
    A = "a"  # polarization -> o2
    B = "b"  # o2 -> polarization
    C = "c"  # polarization -> o2 -> polarization
    D = "d"  # polarization -> o4
    DET_FWD = "det-fwd"
    DET_REV = "det-rev"

    @classmethod
    def parse(cls, value) -> "SetupId":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class NoiseConfig:
    """Per-plate retardation offsets (radians, added to pi) and hologram efficiency.

    A single offset is broadcast to every plate of the setup.
    """

    delta_offsets: tuple = ()
    hologram_efficiency: float = 1.0

    @classmethod
    def from_conversion(cls, eta, hologram_efficiency: float = 1.0) -> "NoiseConfig":
        """Offsets giving per-plate conversion fractions ``sin^2(delta/2) = eta``."""
        etas = np.atleast_1d(np.asarray(eta, dtype=float))
        if np.any((etas < 0) | (etas > 1)):
            raise ValueError("conversion fractions must lie in [0, 1]")
        offsets = tuple(float(2 * np.arcsin(np.sqrt(e)) - np.pi) for e in etas)
        return cls(offsets, hologram_efficiency)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseConfig":
        unknown = set(data) - {"delta_offsets", "conversion", "hologram_efficiency"}
        if unknown:
            raise ValueError(f"unknown noise keys {sorted(unknown)}")
        eff = float(data.get("hologram_efficiency", 1.0))
        if "conversion" in data:
            if "delta_offsets" in data:
                raise ValueError("give either conversion or delta_offsets, not both")
            return cls.from_conversion(data["conversion"], eff)
        offsets = data.get("delta_offsets", ())
        if np.isscalar(offsets):
            offsets = (offsets,)
        return cls(tuple(float(o) for o in offsets), eff)

    @classmethod
    def load(cls, path) -> "NoiseConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def delta(self, plate_index: int) -> float:
        if not self.delta_offsets:
            return np.pi
        if len(self.delta_offsets) == 1:
            return np.pi + self.delta_offsets[0]
        return np.pi + self.delta_offsets[plate_index]


IDEAL = NoiseConfig()

# table rows: (input label, expected output label), in the published order
TABLES = {
    SetupId.A: (("H", "l"), ("V", "r"), ("A", "h"), ("D", "v"), ("L", "a"), ("R", "d")),
    SetupId.B: (("l", "H"), ("r", "V"), ("a", "L"), ("d", "R"), ("h", "A"), ("v", "D")),
    SetupId.C: (("H", "H"), ("V", "V"), ("A", "A"), ("D", "D"), ("R", "R"), ("L", "L")),
    SetupId.D: (("H", "l"), ("V", "r"), ("L", "a"), ("R", "d"), ("A", "h"), ("D", "v")),
}
TABLES[SetupId.DET_FWD] = TABLES[SetupId.A]
TABLES[SetupId.DET_REV] = TABLES[SetupId.B]

INPUT_SUBSPACE = {
    SetupId.A: POLARIZATION,
    SetupId.B: OAM2,
    SetupId.C: POLARIZATION,
    SetupId.D: POLARIZATION,
    SetupId.DET_FWD: POLARIZATION,
    SetupId.DET_REV: OAM2,
}
OUTPUT_SUBSPACE = {
    SetupId.A: OAM2,
    SetupId.B: POLARIZATION,
    SetupId.C: POLARIZATION,
    SetupId.D: OAM4,
    SetupId.DET_FWD: OAM2,
    SetupId.DET_REV: POLARIZATION,
}


def _pol_to_oam2(delta):
    return (qwp(0.0), qwp(np.pi / 4), qplate(1, delta), polarizer("H"))


def _oam2_to_pol(delta):
    # qwp(135) then qwp(90) undoes the qwp(0), qwp(45) pair: L -> H, R -> V
    return (qplate(1, delta), qwp(3 * np.pi / 4), qwp(np.pi / 2), smf())


def build_setup(setup, noise: Optional[NoiseConfig] = None) -> Circuit:
    setup = SetupId.parse(setup)
    noise = noise or IDEAL
    d0, d1 = noise.delta(0), noise.delta(1)
    if setup is SetupId.A:
        stages = _pol_to_oam2(d0)
    elif setup is SetupId.B:
        stages = _oam2_to_pol(d0)
    elif setup is SetupId.C:
        stages = _pol_to_oam2(d0) + _oam2_to_pol(d1)
    elif setup is SetupId.D:
        stages = (qwp(0.0), qwp(np.pi / 4), qplate(1, d0), hwp(0.0), qplate(1, d1), polarizer("H"))
    elif setup is SetupId.DET_FWD:
        stages = deterministic_transferrer("pol_to_oam", delta=d0).stages
    else:
        stages = deterministic_transferrer("oam_to_pol", delta=d0).stages
    return Circuit(stages, label=f"setup_{setup.value.replace('-', '_')}")


def input_state(setup, label: str, m_max: Optional[int] = None) -> PhotonState:
    sub = INPUT_SUBSPACE[SetupId.parse(setup)]
    kwargs = {} if m_max is None else {"m_max": m_max}
    if sub.kind == "polarization":
        return make_source_state(POL_STATES[label], **kwargs)
    return sub.embed(OAM_STATES[label], carrier="H", **kwargs)


def expected_state(setup, label: str) -> np.ndarray:
    return OUTPUT_SUBSPACE[SetupId.parse(setup)].state(label)


def cascade_conversion_efficiency(plates: Sequence, m_max: int = 8) -> float:
    """Fraction of an m = 0 photon converted by every plate in turn.

    A left-circular probe crosses the plates with a handedness flip between
    them, so full conversion climbs the ladder by 2q per plate; the result
    is the probability found on the top rung.
    """
    if not plates:
        return 1.0
    state = make_source_state(POL_STATES["L"], m_max=m_max)
    top = 0
    flip = hwp(0.0)
    for i, plate in enumerate(plates):
        if i:
            state = flip.apply(state)
        state = plate.apply(state)
        top += int(round(2 * plate.params["q"]))
    return state.m_weights()[top]


@dataclass(frozen=True)
class FidelityRow:
    initial: str
    final: str
    fidelity: float
    std: float
    success_probability: float


@dataclass(frozen=True)
class FidelityTable:
    setup: str
    rows: tuple
    shots: int = 0
    seed: Optional[int] = None
    conversion_efficiency: float = 1.0

    @property
    def average_fidelity(self) -> float:
        return float(np.mean([r.fidelity for r in self.rows]))

    @property
    def mean_success_probability(self) -> float:
        return float(np.mean([r.success_probability for r in self.rows]))


def _exact_counts(state: Optional[PhotonState], p: float, sub: LogicalSubspace, efficiency: float) -> CountRecord:
    analyzers = ProjectorSet(sub).analyzers(efficiency)
    probs = analyzer_probabilities(state, analyzers)
    return CountRecord(sub, {k: (v * p, 1.0) for k, v in probs.items()}, None)


def run_table(
    setup,
    shots: int = 0,
    seed: Optional[int] = 0,
    noise: Optional[NoiseConfig] = None,
    resamples: int = 100,
) -> FidelityTable:
    """Run the six table inputs, do tomography on the output and score against the expected states.

    ``shots == 0`` uses exact analyzer probabilities and linear inversion;
    otherwise counts are sampled, reconstructed by maximum likelihood, and
    ``std`` is the bootstrap spread.
    """
    setup = SetupId.parse(setup)
    noise = noise or IDEAL
    if shots < 0:
        raise ValueError("shots must be >= 0")
    circuit = build_setup(setup, noise)
    sub = OUTPUT_SUBSPACE[setup]
    rows_spec = TABLES[setup]
    children = np.random.SeedSequence(seed).spawn(len(rows_spec))
    rows = []
    for (initial, final), child in zip(rows_spec, children):
        state = input_state(setup, initial)
        target = expected_state(setup, final)
        result = run_exact(circuit, state)
        if shots == 0:
            if result.null:
                f, std = 0.0, 0.0
            else:
                record = _exact_counts(result.final_state, result.success_probability, sub, noise.hologram_efficiency)
                rho = project_physical(reconstruct_linear(record))
                f, std = fidelity(rho, target), 0.0
        else:
            analyzers = ProjectorSet(sub).analyzers(noise.hologram_efficiency)
            row_seed, boot_seed = (int(s.generate_state(1)[0]) for s in child.spawn(2))
            record = run_shots(circuit, state, analyzers, shots, row_seed, subspace=sub)
            rho = reconstruct_mle(record)
            f = fidelity(rho, target)
            _, std = bootstrap_fidelity(record, target, resamples=resamples, seed=boot_seed)
        rows.append(FidelityRow(initial, final, float(f), float(std), result.success_probability))
    return FidelityTable(
        setup.value,
        tuple(rows),
        shots=shots,
        seed=seed,
        conversion_efficiency=cascade_conversion_efficiency(circuit.qplates()),
    )


def oam_sign_outcomes(noise: Optional[NoiseConfig] = None) -> dict:
    """Polarization detection probabilities of setup B used as an OAM-sign detector.

    ``{"l": {"H": p, "V": p}, "r": {...}}``.
    """
    circuit = build_setup(SetupId.B, noise)
    out = {}
    for label in ("l", "r"):
        result = run_exact(circuit, input_state(SetupId.B, label))
        out[label] = {pol: polarizer(pol).apply(result.output).norm2 for pol in ("H", "V")}
    return out


def oam_sign_detector_efficiency(
    shots: int = 0,
    seed: Optional[int] = 0,
    detector: str = "qplate",
    hologram_efficiency: float = 0.12,
) -> float:
    """Fraction of |l> and |r> photons that produce a detection.

    ``detector="qplate"`` uses setup B (both PBS outputs detected);
    ``"hologram"`` uses a fork hologram matched to the input sign. Exact
    probabilities when ``shots == 0``.
    """
    if shots < 0:
        raise ValueError("shots must be >= 0")
    probs = []
    for label in ("l", "r"):
        state = input_state(SetupId.B, label)
        if detector == "qplate":
            probs.append(run_exact(build_setup(SetupId.B), state).success_probability)
        elif detector == "hologram":
            probs.append(hologram_analyze(label, 2, efficiency=hologram_efficiency).apply(state).norm2)
        else:
            raise ValueError(f"unknown detector {detector!r}")
    if shots == 0:
        return float(np.mean(probs))
    children = np.random.SeedSequence(seed).spawn(len(probs))
    hits = sum(int(np.random.default_rng(c).binomial(shots, p)) for c, p in zip(children, probs))
    return hits / (shots * len(probs))


def reconstruct(record: CountRecord, method: str = "mle") -> DensityMatrix2:
    if method == "mle":
        return reconstruct_mle(record)
    if method == "linear":
        return reconstruct_linear(record)
    raise ValueError(f"unknown reconstruction method {method!r}")
