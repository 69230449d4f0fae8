"""Optical elements acting on :class:`~oamtransfer.hilbert.PhotonState`.

Each element is a linear map built on demand as a dense matrix over an
OAM ladder extended by the element's ``reach``. Applying it to a state
embeds the state in the extended ladder, multiplies, and refuses to drop
any amplitude that lands beyond ``m_max``.

Waveplate conventions (angles in radians, optic axis measured from H)::

    HWP(t) = [[cos 2t,  sin 2t],
              [sin 2t, -cos 2t]]
    QWP(t) = Rot(t) @ diag(1, -1j) @ Rot(-t)

With ``L = (H + iV)/sqrt2`` this makes ``qwp(0)`` followed by ``qwp(pi/4)``
send H -> L and V -> R with a common phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import PreconditionError, TruncationError
from .hilbert import (
    EMPTY_TOL,
    OAM_STATES,
    PATHS,
    POL_STATES,
    POLS,
    STRUCT_TOL,
    PhotonState,
    _check_qubit,
    ladder_size,
    path_index,
)

UNITARY = "unitary"
FILTER = "filter"

_NPATH = len(PATHS)
_NPOL = len(POLS)


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def hwp_jones(theta):
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp_jones(theta):
    return _rot(theta) @ np.diag([1, -1j]) @ _rot(-theta)


def _pol_only(jones, m_ext):
    return np.kron(jones, np.eye(ladder_size(m_ext)))


def _oam_only(op, m_ext):
    return np.kron(np.eye(_NPOL), op)


def _oam_shift(m_ext, shift):
    """|m> -> |m + shift|, columns whose target leaves the ladder are zero."""
    n = ladder_size(m_ext)
    out = np.zeros((n, n), dtype=complex)
    for k in range(n):
        j = k + shift
        if 0 <= j < n:
            out[j, k] = 1
    return out


def _oam_reflect(m_ext, alpha=0.0):
    """|m> -> exp(-2i m alpha)|-m>."""
    n = ladder_size(m_ext)
    ms = np.arange(-m_ext, m_ext + 1)
    out = np.zeros((n, n), dtype=complex)
    for k, m in enumerate(ms):
        out[n - 1 - k, k] = np.exp(-2j * m * alpha)
    return out


def _level(m_ext, m):
    n = ladder_size(m_ext)
    v = np.zeros(n, dtype=complex)
    v[m + m_ext] = 1
    return v


def _logical_oam_vector(qubit, order, m_ext):
    """Embed a logical OAM qubit (amplitudes on |+order>, |-order>) in the ladder."""
    q = _check_qubit(qubit)
    return q[0] * _level(m_ext, order) + q[1] * _level(m_ext, -order)


def _resolve_pol(axis):
    if isinstance(axis, str):
        try:
            return axis, POL_STATES[axis].copy()
        except KeyError:
            raise ValueError(f"unknown polarization label {axis!r}") from None
    return None, _check_qubit(axis)


def _resolve_oam(state):
    if isinstance(state, str):
        try:
            return state, OAM_STATES[state].copy()
        except KeyError:
            raise ValueError(f"unknown OAM label {state!r}") from None
    return None, _check_qubit(state)


@dataclass(frozen=True, eq=False)
class Element:
    """An optical element: a unitary or a filter on the photon space.

    ``builder(m_ext)`` returns the matrix on the ladder ``|m| <= m_ext``.
    When ``local`` is true that matrix acts on polarization x OAM and is
    repeated on every path; otherwise it acts on the full path-resolved space.
    """

    name: str
    kind: str
    builder: Callable[[int], np.ndarray] = field(repr=False)
    reach: int = 0
    params: dict = field(default_factory=dict)
    local: bool = True
    flips_oam: bool = False
    label: Optional[str] = None
    precondition: Optional[Callable[[PhotonState], None]] = field(default=None, repr=False)
    dagger: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def matrix(self, m_ext: int, path: Optional[str] = None) -> np.ndarray:
        """Full-space matrix on ladder ``m_ext``; ``path`` restricts a local element to one path."""
        key = (m_ext, path)
        if key not in self._cache:
            op = self.builder(m_ext)
            if self.local:
                if path is None:
                    op = np.kron(np.eye(_NPATH), op)
                else:
                    sel = np.zeros((_NPATH, _NPATH))
                    sel[path_index(path), path_index(path)] = 1
                    op = np.kron(sel, op) + np.kron(np.eye(_NPATH) - sel, np.eye(op.shape[0]))
            elif path is not None:
                raise ValueError(f"{self.name} acts on all paths at once")
            self._cache[key] = op
        return self._cache[key]

    def local_matrix(self, m_max: int) -> np.ndarray:
        """Polarization x OAM matrix on the ladder ``|m| <= m_max`` (edge terms truncated)."""
        if not self.local:
            raise ValueError(f"{self.name} is not a local element")
        return self.builder(m_max)

    def apply(self, state: PhotonState, path: Optional[str] = None) -> PhotonState:
        if self.precondition is not None:
            self.precondition(state)
        m_max = state.m_max
        m_ext = m_max + self.reach
        vec = _embed(state.amplitudes, m_ext)
        out = (self.matrix(m_ext, path) @ vec).reshape(_NPATH, _NPOL, ladder_size(m_ext))
        if self.reach:
            spill = np.concatenate([out[..., : self.reach], out[..., -self.reach :]], axis=-1)
            lost = float(np.sum(np.abs(spill) ** 2))
            if lost > STRUCT_TOL**2:
                raise TruncationError(
                    f"{self.name} moves probability {lost:.3g} beyond |m|={m_max}"
                )
            out = out[..., self.reach : -self.reach]
        return PhotonState(out)

    def adjoint(self) -> "Element":
        builder = self.builder
        return replace(
            self,
            builder=lambda m_ext: builder(m_ext).conj().T,
            precondition=None,
            dagger=not self.dagger,
            _cache={},
        )

    def __call__(self, state: PhotonState) -> PhotonState:
        return self.apply(state)


def _embed(amps, m_ext):
    m_max = (amps.shape[2] - 1) // 2
    pad = m_ext - m_max
    if pad == 0:
        return amps.reshape(-1)
    return np.pad(amps, ((0, 0), (0, 0), (pad, pad))).reshape(-1)


def compose(*elements: Element, name: str = "compose", label: Optional[str] = None) -> Element:
    """Single element equivalent to applying ``elements`` left to right."""
    if not elements:
        raise ValueError("compose needs at least one element")
    if not all(e.local for e in elements):
        raise ValueError("only local elements can be composed")
    reach = sum(e.reach for e in elements)
    kind = UNITARY if all(e.kind == UNITARY for e in elements) else FILTER
    first_pre = elements[0].precondition

    def build(m_ext):
        op = np.eye(_NPOL * ladder_size(m_ext), dtype=complex)
        for e in elements:
            op = e.builder(m_ext) @ op
        return op

    return Element(
        name=name,
        kind=kind,
        builder=build,
        reach=reach,
        params={"elements": tuple(elements)},
        label=label,
        precondition=first_pre,
    )


def qplate(q: float = 1, delta: float = np.pi) -> Element:
    """q-plate of topological charge ``q`` and retardation ``delta``.

    At ``delta = pi``: |L, m> -> |R, m + 2q>, |R, m> -> |L, m - 2q>. In
    general the map is ``cos(delta/2) I + i sin(delta/2) T`` with ``T`` the
    full-conversion map above, so a fraction ``sin^2(delta/2)`` of any input
    is converted.
    """
    shift = 2 * q
    if abs(shift - round(shift)) > 1e-12:
        raise ValueError(f"charge q={q} must be an integer or half-integer")
    shift = int(round(shift))
    L, R = POL_STATES["L"], POL_STATES["R"]

    def build(m_ext):
        conv = np.kron(np.outer(R, L.conj()), _oam_shift(m_ext, shift)) + np.kron(
            np.outer(L, R.conj()), _oam_shift(m_ext, -shift)
        )
        ident = np.eye(_NPOL * ladder_size(m_ext))
        return np.cos(delta / 2) * ident + 1j * np.sin(delta / 2) * conv

    return Element("qplate", UNITARY, build, reach=abs(shift), params={"q": q, "delta": float(delta)})


def hwp(theta: float) -> Element:
    """Half-wave plate with optic axis at ``theta``."""
    jones = hwp_jones(theta)
    return Element("hwp", UNITARY, lambda m_ext: _pol_only(jones, m_ext), params={"theta": float(theta)})


def qwp(theta: float) -> Element:
    """Quarter-wave plate with optic axis at ``theta``."""
    jones = qwp_jones(theta)
    return Element("qwp", UNITARY, lambda m_ext: _pol_only(jones, m_ext), params={"theta": float(theta)})


def phase(phi: float) -> Element:
    """Uniform phase delay ``exp(i phi)``, e.g. an interferometer arm's path length."""
    return Element(
        "phase",
        UNITARY,
        lambda m_ext: np.exp(1j * phi) * np.eye(_NPOL * ladder_size(m_ext)),
        params={"phi": float(phi)},
    )


def polarizer(axis="H") -> Element:
    label, vec = _resolve_pol(axis)
    proj = np.outer(vec, vec.conj())
    params = {"axis": label if label is not None else tuple(vec)}
    return Element("polarizer", FILTER, lambda m_ext: _pol_only(proj, m_ext), params=params, label=label)


def smf() -> Element:
    """Single-mode fiber: keeps only m = 0."""

    def build(m_ext):
        v = _level(m_ext, 0)
        return _oam_only(np.outer(v, v), m_ext)

    return Element("smf", FILTER, build)


def _check_efficiency(efficiency):
    if not 0 <= efficiency <= 1:
        raise ValueError(f"efficiency {efficiency} outside [0, 1]")
    return float(efficiency)


def hologram_generate(target, order: int, efficiency: float = 1.0) -> Element:
    """Fork hologram fed with m = 0 light, emitting ``target`` in the |m| = order subspace.

    ``efficiency`` is the first-order diffraction probability; amplitudes are
    scaled by its square root so coherence is kept.
    """
    label, q = _resolve_oam(target)
    efficiency = _check_efficiency(efficiency)

    def build(m_ext):
        out = _logical_oam_vector(q, order, m_ext)
        return _oam_only(np.sqrt(efficiency) * np.outer(out, _level(m_ext, 0)), m_ext)

    def precondition(state):
        amps = state.amplitudes.copy()
        amps[..., state.m_max] = 0
        if np.sum(np.abs(amps) ** 2) > EMPTY_TOL:
            raise PreconditionError("hologram generation needs all amplitude at m=0")

    return Element(
        "hologram_generate",
        FILTER,
        build,
        reach=order,
        params={"state": label if label is not None else tuple(q), "order": order, "efficiency": efficiency},
        label=label,
        precondition=precondition,
    )


def hologram_analyze(analysis, order: int, efficiency: float = 1.0, invert: bool = False) -> Element:
    """Fork hologram followed by a single-mode fiber.

    Maps the projection onto ``analysis`` (per polarization) into m = 0 and
    discards everything else. ``invert`` swaps the sign of m before projecting.
    """
    label, q = _resolve_oam(analysis)
    efficiency = _check_efficiency(efficiency)
    if invert:
        q = q[::-1]

    def build(m_ext):
        ana = _logical_oam_vector(q, order, m_ext)
        return _oam_only(np.sqrt(efficiency) * np.outer(_level(m_ext, 0), ana.conj()), m_ext)

    return Element(
        "hologram_analyze",
        FILTER,
        build,
        params={
            "state": label if label is not None else tuple(q),
            "order": order,
            "efficiency": efficiency,
            "invert": invert,
        },
        label=label,
    )


def dove_prism(alpha: float) -> Element:
    """Dove prism at angle ``alpha``: |m> -> exp(-2i m alpha)|-m>, polarization compensated."""
    return Element(
        "dove",
        UNITARY,
        lambda m_ext: _oam_only(_oam_reflect(m_ext, alpha), m_ext),
        params={"alpha": float(alpha)},
        flips_oam=True,
    )


def mirror() -> Element:
    return Element("mirror", UNITARY, lambda m_ext: _oam_only(_oam_reflect(m_ext), m_ext), flips_oam=True)


def pbs_filter(port: str = "transmit_H") -> Element:
    """One output port of a PBS, the other port being discarded."""
    pols = {"transmit_H": "H", "reflect_V": "V"}
    if port not in pols:
        raise ValueError(f"unknown PBS port {port!r}")
    vec = POL_STATES[pols[port]]
    proj = np.outer(vec, vec.conj())
    return Element("pbs", FILTER, lambda m_ext: _pol_only(proj, m_ext), params={"port": port}, label=pols[port])


def _pbs_split_build(m_ext):
    n = ladder_size(m_ext)
    dim = _NPATH * _NPOL * n
    op = np.eye(dim, dtype=complex)

    def idx(path, pol, k):
        return (path * _NPOL + pol) * n + k

    single, arm_a, arm_b = (path_index(p) for p in PATHS)
    for k in range(n):
        for p_arm, pol in ((arm_a, 0), (arm_b, 1)):
            i, j = idx(single, pol, k), idx(p_arm, pol, k)
            op[i, i] = op[j, j] = 0
            op[i, j] = op[j, i] = 1
    return op


def _pbs_split_pre(state):
    inside = state.path_weight("arm_a") + state.path_weight("arm_b")
    if state.path_weight("single") > EMPTY_TOL and inside > EMPTY_TOL:
        raise PreconditionError("PBS split needs all amplitude either in the single path or inside the arms")


def pbs_split() -> Element:
    """Polarizing beam splitter as a path router.

    Entry: single-path H goes to ``arm_a`` and V to ``arm_b``. The same
    permutation recombines the arms on exit; arm light with the wrong
    polarization stays in the arms, i.e. leaves by the other exit port.
    OAM flips from reflections are booked by the enclosing interferometer.
    """
    return Element("pbs_split", UNITARY, _pbs_split_build, local=False, precondition=_pbs_split_pre)
