"""Single-photon states on path x polarization x truncated OAM ladder.

Amplitudes are stored densely with shape ``(3, 2, 2*m_max + 1)``: the
first axis is the path (``single``, ``arm_a``, ``arm_b``), the second the
polarization in the {H, V} basis and the last the OAM index ``m`` shifted
by ``m_max``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EmptySubspaceError, NormalizationError

STRUCT_TOL = 1e-10
EMPTY_TOL = 1e-12
NORM_SLACK = 1e-12
DEFAULT_M_MAX = 6
MIN_M_MAX = 4

PATHS = ("single", "arm_a", "arm_b")
POLS = ("H", "V")

_S = 1 / np.sqrt(2)

# Jones vectors in the {H, V} basis.
POL_STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "L": np.array([_S, 1j * _S]),
    "R": np.array([_S, -1j * _S]),
    "A": np.array([_S, _S], dtype=complex),
    "D": np.array([_S, -_S], dtype=complex),
}

# OAM logical states in the {l, r} = {|+|m|>, |-|m|>} basis.
OAM_STATES = {
    "l": np.array([1, 0], dtype=complex),
    "r": np.array([0, 1], dtype=complex),
    "h": np.array([_S, _S], dtype=complex),
    "v": np.array([_S, -_S]) / 1j,
    "a": np.exp(-1j * np.pi / 4) * np.array([_S, 1j * _S]),
    "d": np.exp(1j * np.pi / 4) * np.array([_S, -1j * _S]),
}


def path_index(path: str) -> int:
    try:
        return PATHS.index(path)
    except ValueError:
        raise ValueError(f"unknown path {path!r}") from None


def pol_index(pol: str) -> int:
    try:
        return POLS.index(pol)
    except ValueError:
        raise ValueError(f"unknown polarization {pol!r}") from None


def ladder_size(m_max: int) -> int:
    return 2 * m_max + 1


@dataclass(frozen=True, eq=False)
class PhotonState:
    """Immutable amplitude array; squared norm is the surviving probability."""

    amplitudes: np.ndarray
    norm2: float = field(init=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 3 or amps.shape[:2] != (len(PATHS), len(POLS)) or amps.shape[2] % 2 == 0:
            raise DimensionError(f"bad amplitude shape {amps.shape}")
        if (amps.shape[2] - 1) // 2 < MIN_M_MAX:
            raise DimensionError(f"m_max must be >= {MIN_M_MAX}")
        amps.setflags(write=False)
        norm2 = float(np.vdot(amps, amps).real)
        if norm2 > 1 + NORM_SLACK:
            raise NormalizationError(f"state norm2 {norm2!r} exceeds 1")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "norm2", norm2)

    @property
    def m_max(self) -> int:
        return (self.amplitudes.shape[2] - 1) // 2

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    @classmethod
    def zeros(cls, m_max: int = DEFAULT_M_MAX) -> "PhotonState":
        return cls(np.zeros((len(PATHS), len(POLS), ladder_size(m_max)), dtype=complex))

    @classmethod
    def basis(cls, pol: str, m: int, path: str = "single", m_max: int = DEFAULT_M_MAX) -> "PhotonState":
        if abs(m) > m_max:
            raise DimensionError(f"|m|={abs(m)} beyond m_max={m_max}")
        amps = np.zeros((len(PATHS), len(POLS), ladder_size(m_max)), dtype=complex)
        amps[path_index(path), pol_index(pol), m + m_max] = 1
        return cls(amps)

    @classmethod
    def from_vector(cls, vec, m_max: int) -> "PhotonState":
        return cls(np.asarray(vec, dtype=complex).reshape(len(PATHS), len(POLS), ladder_size(m_max)))

    def amplitude(self, pol: str, m: int, path: str = "single") -> complex:
        if abs(m) > self.m_max:
            return 0j
        return complex(self.amplitudes[path_index(path), pol_index(pol), m + self.m_max])

    def normalized(self) -> "PhotonState":
        if self.norm2 < EMPTY_TOL:
            raise EmptySubspaceError("cannot normalize a null state")
        return PhotonState(self.amplitudes / np.sqrt(self.norm2))

    def path_weight(self, path: str) -> float:
        a = self.amplitudes[path_index(path)]
        return float(np.vdot(a, a).real)

    def m_weights(self) -> dict[int, float]:
        """Probability per OAM level, summed over path and polarization."""
        w = np.sum(np.abs(self.amplitudes) ** 2, axis=(0, 1))
        return {m: float(w[m + self.m_max]) for m in range(-self.m_max, self.m_max + 1)}

    def __repr__(self):
        terms = []
        for (p, s, k), amp in np.ndenumerate(self.amplitudes):
            if abs(amp) > STRUCT_TOL:
                terms.append(f"({amp:.4g})|{POLS[s]},{k - self.m_max:+d},{PATHS[p]}>")
        return "PhotonState(" + (" + ".join(terms) or "0") + ")"


def _check_qubit(qubit, tol=STRUCT_TOL) -> np.ndarray:
    q = np.asarray(qubit, dtype=complex).reshape(-1)
    if q.shape != (2,):
        raise DimensionError("a qubit has exactly two amplitudes")
    n = float(np.vdot(q, q).real)
    if abs(n - 1) > tol:
        raise NormalizationError(f"qubit norm2 {n!r} differs from 1")
    return q


def make_source_state(pol_qubit, m_max: int = DEFAULT_M_MAX) -> PhotonState:
    """Heralded photon in ``alpha|H> + beta|V>`` with OAM m = 0."""
    alpha, beta = _check_qubit(pol_qubit)
    amps = np.zeros((len(PATHS), len(POLS), ladder_size(m_max)), dtype=complex)
    amps[0, 0, m_max] = alpha
    amps[0, 1, m_max] = beta
    return PhotonState(amps)


def inner(a: PhotonState, b: PhotonState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.amplitudes.shape != b.amplitudes.shape:
        raise DimensionError(f"m_max mismatch: {a.m_max} vs {b.m_max}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def overlap(a, b) -> float:
    """Phase-insensitive similarity |<a|b>|^2 / (|a|^2 |b|^2)."""
    if isinstance(a, PhotonState):
        num = abs(inner(a, b)) ** 2
        den = a.norm2 * b.norm2
    else:
        a = np.asarray(a, dtype=complex).reshape(-1)
        b = np.asarray(b, dtype=complex).reshape(-1)
        num = abs(np.vdot(a, b)) ** 2
        den = np.vdot(a, a).real * np.vdot(b, b).real
    if den < EMPTY_TOL:
        raise EmptySubspaceError("overlap with a null state")
    return float(num / den)


@dataclass(frozen=True)
class LogicalSubspace:
    """A two-level subspace used as a qubit: polarization, or OAM at ``|m| = order``."""

    kind: str
    order: int = 0

    def __post_init__(self):
        if self.kind == "polarization":
            if self.order != 0:
                raise ValueError("polarization subspace takes no order")
        elif self.kind == "oam":
            if self.order <= 0:
                raise ValueError("oam subspace needs a positive order")
        else:
            raise ValueError(f"unknown subspace kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "LogicalSubspace":
        t = text.strip().lower()
        if t in ("pol", "polarization", "pi"):
            return cls("polarization")
        if t.startswith("oam"):
            return cls("oam", int(t[3:]))
        raise ValueError(f"unknown subspace {text!r}")

    @property
    def tag(self) -> str:
        return "pol" if self.kind == "polarization" else f"oam{self.order}"

    @property
    def labels(self) -> tuple[str, ...]:
        """Cardinal labels ordered as (z+, z-, x+, x-, y+, y-)."""
        if self.kind == "polarization":
            return ("H", "V", "A", "D", "L", "R")
        return ("l", "r", "h", "v", "a", "d")

    def state(self, label: str) -> np.ndarray:
        table = POL_STATES if self.kind == "polarization" else OAM_STATES
        try:
            return table[label].copy()
        except KeyError:
            raise ValueError(f"label {label!r} not defined for {self.tag}") from None

    def embed(self, qubit, carrier: str = "H", m_max: int = DEFAULT_M_MAX) -> PhotonState:
        """Place a logical qubit into the full space.

        OAM qubits ride on polarization ``carrier``; polarization qubits sit at m = 0.
        """
        q = _check_qubit(qubit)
        if self.kind == "polarization":
            return make_source_state(q, m_max)
        if self.order > m_max:
            raise DimensionError(f"order {self.order} beyond m_max={m_max}")
        amps = np.zeros((len(PATHS), len(POLS), ladder_size(m_max)), dtype=complex)
        p = pol_index(carrier)
        amps[0, p, m_max + self.order] = q[0]
        amps[0, p, m_max - self.order] = q[1]
        return PhotonState(amps)


POLARIZATION = LogicalSubspace("polarization")
OAM2 = LogicalSubspace("oam", 2)
OAM4 = LogicalSubspace("oam", 4)


@dataclass(frozen=True, eq=False)
class DensityMatrix2:
    """2x2 Hermitian, unit-trace matrix over a logical basis.

    Positivity is only enforced when ``require_physical`` is set; linear
    inversion may legitimately return a slightly negative eigenvalue, which
    ``is_physical`` reports.
    """

    matrix: np.ndarray
    require_physical: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise DimensionError(f"density matrix must be 2x2, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > STRUCT_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1) > STRUCT_TOL:
            raise NormalizationError(f"density matrix trace {np.trace(m).real!r} != 1")
        m = (m + m.conj().T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.require_physical and not self.is_physical:
            raise ValueError(f"density matrix has negative eigenvalue {self.eigenvalues[0]!r}")

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def is_physical(self) -> bool:
        return bool(self.eigenvalues[0] >= -STRUCT_TOL)

    @property
    def bloch(self) -> np.ndarray:
        """Stokes vector (sx, sy, sz) in the logical basis."""
        m = self.matrix
        return np.array([2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real])

    @classmethod
    def from_pure(cls, psi) -> "DensityMatrix2":
        q = _check_qubit(psi)
        return cls(np.outer(q, q.conj()))

    @classmethod
    def from_bloch(cls, s, require_physical: bool = True) -> "DensityMatrix2":
        sx, sy, sz = s
        return cls(
            0.5 * np.array([[1 + sz, sx - 1j * sy], [sx + 1j * sy, 1 - sz]]),
            require_physical=require_physical,
        )

    def __repr__(self):
        return f"DensityMatrix2({np.array2string(self.matrix, precision=4)})"


def reduce_to_qubit(state: PhotonState, sub: LogicalSubspace) -> tuple[DensityMatrix2, float]:
    """Reduced density matrix of ``state`` on ``sub`` and the mass inside it.

    Only the ``single`` path contributes. For OAM subspaces the polarization
    is traced out; for the polarization subspace every OAM level is traced out.
    """
    if state.norm2 < EMPTY_TOL:
        raise EmptySubspaceError("null state has no reduced density matrix")
    single = state.amplitudes[0]
    if sub.kind == "polarization":
        rho = np.einsum("km,lm->kl", single, single.conj())
    else:
        if sub.order > state.m_max:
            raise DimensionError(f"order {sub.order} beyond m_max={state.m_max}")
        mm = state.m_max
        # rows: polarization (traced), columns: logical l, r
        amps = single[:, [mm + sub.order, mm - sub.order]]
        rho = amps.T @ amps.conj()
    weight = float(np.trace(rho).real)
    if weight < EMPTY_TOL:
        raise EmptySubspaceError(f"state has no support in {sub.tag}")
    return DensityMatrix2(rho / weight), weight


def fidelity(rho: DensityMatrix2, psi) -> float:
    """<psi|rho|psi> for a normalized logical pure state."""
    q = _check_qubit(psi)
    return float(np.vdot(q, rho.matrix @ q).real)
