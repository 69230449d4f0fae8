"""Qubit state tomography from six cardinal projectors.

Three mutually unbiased basis pairs, in the order of
``LogicalSubspace.labels``: (z+, z-), (x+, x-), (y+, y-).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .circuit import CountRecord
from .elements import hologram_analyze, polarizer
from .errors import ConvergenceError, PreconditionError
from .hilbert import (
    DensityMatrix2,
    LogicalSubspace,
    PhotonState,
    _check_qubit,
    fidelity,
    reduce_to_qubit,
)

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

MLE_TOL = 1e-10
MLE_MAX_ITER = 10_000


@dataclass(frozen=True)
class ProjectorSet:
    subspace: LogicalSubspace

    @property
    def labels(self) -> tuple:
        return self.subspace.labels

    @property
    def pairs(self) -> tuple:
        """Basis pairs keyed by the Pauli axis they measure: ((x+, x-), (y+, y-), (z+, z-))."""
        z0, z1, x0, x1, y0, y1 = self.labels
        return ((x0, x1), (y0, y1), (z0, z1))

    def vector(self, label: str) -> np.ndarray:
        return self.subspace.state(label)

    def analyzers(self, efficiency: float = 1.0) -> dict:
        """Detector-ready analyzer per label.

        OAM: fork hologram + single-mode fiber. Polarization: polarizer.
        """
        if self.subspace.kind == "oam":
            return {
                lab: hologram_analyze(lab, self.subspace.order, efficiency=efficiency) for lab in self.labels
            }
        return {lab: polarizer(lab) for lab in self.labels}


def exact_record(source, subspace: LogicalSubspace, shots: float = 1.0) -> CountRecord:
    """Expected (non-integer) counts for a density matrix, logical qubit or photon state."""
    if isinstance(source, PhotonState):
        rho = reduce_to_qubit(source, subspace)[0].matrix
    elif isinstance(source, DensityMatrix2):
        rho = source.matrix
    else:
        q = _check_qubit(source)
        rho = np.outer(q, q.conj())
    ps = ProjectorSet(subspace)
    counts = {}
    for lab in ps.labels:
        v = ps.vector(lab)
        p = float(np.clip(np.vdot(v, rho @ v).real, 0.0, 1.0))
        counts[lab] = (shots * p, shots)
    return CountRecord(subspace, counts, None)


def _pair_counts(record: CountRecord):
    ps = ProjectorSet(record.subspace)
    out = []
    for plus, minus in ps.pairs:
        for lab in (plus, minus):
            if lab not in record.counts:
                raise PreconditionError(f"missing analyzer {lab!r}")
        n_plus, n_minus = record.frequency(plus), record.frequency(minus)
        if n_plus + n_minus <= 0:
            raise PreconditionError(f"no counts in basis pair ({plus}, {minus})")
        out.append((n_plus, n_minus))
    return ps, out


def stokes_vector(record: CountRecord) -> np.ndarray:
    _, pairs = _pair_counts(record)
    return np.array([(a - b) / (a + b) for a, b in pairs])


def reconstruct_linear(record: CountRecord) -> DensityMatrix2:
    """Stokes inversion ``rho = (I + s . sigma) / 2``; may be unphysical (see ``is_physical``)."""
    s = stokes_vector(record)
    rho = 0.5 * (np.eye(2) + sum(sk * p for sk, p in zip(s, PAULI)))
    return DensityMatrix2(rho, require_physical=False)


def project_physical(rho: DensityMatrix2) -> DensityMatrix2:
    """Nearest physical state by shrinking the Bloch vector into the unit ball."""
    s = rho.bloch
    n = np.linalg.norm(s)
    if n > 1:
        s = s / n
    return DensityMatrix2.from_bloch(s)


# -- maximum likelihood ------------------------------------------------------

_J = np.array([[0, 1], [1, 0]])


def _t_from_params(x):
    return np.array([[x[0], 0], [x[2] + 1j * x[3], x[1]]])


def _params_from_rho(rho):
    """Lower-triangular T with T^dag T = rho (rho positive definite)."""
    # T^dag is upper-triangular: factor the anti-diagonally flipped matrix
    chol = np.linalg.cholesky(_J @ rho @ _J)
    t = _J @ chol.conj().T @ _J
    return np.array([t[0, 0].real, t[1, 1].real, t[1, 0].real, t[1, 0].imag])


def _rho_from_params(x):
    t = _t_from_params(x)
    a = t.conj().T @ t
    return a / np.trace(a).real


class _Likelihood:
    """Mean multinomial log-likelihood over the six analyzers."""

    def __init__(self, record: CountRecord):
        ps, _ = _pair_counts(record)
        w = np.array([record.frequency(lab) for lab in ps.labels], dtype=float)
        keep = w > 0
        self.vectors = np.array([ps.vector(lab) for lab in ps.labels])[keep]
        self.weights = w[keep] / w.sum()

    def value(self, rho):
        probs = np.einsum("ki,ij,kj->k", self.vectors.conj(), rho, self.vectors).real
        return float(self.weights @ np.log(np.maximum(probs, 1e-300)))

    def neg_and_grad(self, x):
        t = _t_from_params(x)
        tpsi = self.vectors @ t.T  # row k is T @ psi_k
        num = np.maximum(np.sum(np.abs(tpsi) ** 2, axis=1), 1e-300)
        tr = float(np.sum(np.abs(t) ** 2))
        w = self.weights
        val = w @ np.log(num) - w.sum() * np.log(tr)
        # G = sum_k w_k psi_k psi_k^dag / num_k - (sum w) I / tr ; dLL = 2 Re tr(G T^dag dT)
        g = (self.vectors.T * (w / num)) @ self.vectors.conj() - w.sum() / tr * np.eye(2)
        m = g @ t.conj().T
        grad = np.array([2 * m[0, 0].real, 2 * m[1, 1].real, 2 * m[0, 1].real, -2 * m[0, 1].imag])
        return -val, -grad


def _start_params(record):
    rho = project_physical(reconstruct_linear(record)).matrix
    rho = 0.98 * rho + 0.01 * np.eye(2)
    return _params_from_rho(rho)


def reconstruct_mle(record: CountRecord, tol: float = MLE_TOL, max_iter: int = MLE_MAX_ITER) -> DensityMatrix2:
    """Maximum-likelihood physical state.

    Ascent over ``rho = T^dag T / tr``, ``T`` lower-triangular. Stops once a
    round improves the mean log-likelihood by less than ``tol``; raises
    :class:`ConvergenceError` (with the best iterate) after ``max_iter``
    optimizer iterations.
    """
    like = _Likelihood(record)
    x = _start_params(record)
    best = -like.neg_and_grad(x)[0]
    used = 0
    while True:
        res = minimize(
            like.neg_and_grad,
            x,
            jac=True,
            method="BFGS",
            options={"gtol": 1e-9, "maxiter": max(1, max_iter - used)},
        )
        used += max(int(res.nit), 1)
        val = -res.fun
        gain = val - best
        if val >= best:
            x, best = res.x, val
        if gain < tol:
            break
        if used >= max_iter:
            raise ConvergenceError(
                f"likelihood still improving by {gain:.3g} after {used} iterations",
                best=DensityMatrix2(_rho_from_params(x)),
            )
        # restart from a renormalized point so the scale of T stays O(1)
        x = x / np.linalg.norm(x)
    rho = _rho_from_params(x)
    return DensityMatrix2(rho)


def log_likelihood(record: CountRecord, rho: DensityMatrix2) -> float:
    """Mean log-likelihood per count of ``rho`` for ``record``."""
    return _Likelihood(record).value(rho.matrix)


def bootstrap_fidelity(
    record: CountRecord,
    target,
    resamples: int = 200,
    seed: Optional[int] = 0,
) -> tuple:
    """Mean and standard deviation of the MLE fidelity under multinomial resampling.

    Each basis pair is resampled as a binomial with its observed total and
    split; resample ``k`` uses the ``k``-th child of ``seed``.
    """
    if resamples < 100:
        raise ValueError("resamples must be at least 100")
    target = _check_qubit(target)
    ps, pairs = _pair_counts(record)
    totals = [int(round(a + b)) for a, b in pairs]
    fracs = [a / (a + b) for a, b in pairs]
    children = np.random.SeedSequence(seed).spawn(resamples)
    values = np.empty(resamples)
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        counts = {}
        for (plus, minus), n, f in zip(ps.pairs, totals, fracs):
            hit = int(rng.binomial(n, f))
            counts[plus] = (hit, n)
            counts[minus] = (n - hit, n)
        rho = reconstruct_mle(CountRecord(record.subspace, counts, None))
        values[k] = fidelity(rho, target)
    return float(values.mean()), float(values.std(ddof=1))


def tomography_analyzers(subspace: LogicalSubspace, efficiency: float = 1.0) -> dict:
    return ProjectorSet(subspace).analyzers(efficiency)
