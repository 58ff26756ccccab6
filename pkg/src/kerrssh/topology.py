"""Bloch Hamiltonian, winding number, spectra and edge localization."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, PreconditionError, ResolutionError, TopologyUndefinedError,
                     ZeroModeCountWarning)
from .linearize import SSHModel, finite_ssh_matrix
from .model import ModeIndex

GAP_TOL = 1e-6
# mid-gap means inside the infinite-chain gap |E - centre| < |W - V|
GAP_FRACTION = 0.5
RESIDUE_TOL = 0.01
HERMITIAN_TOL = 1e-10
MIN_K_POINTS = 16


@dataclass(frozen=True, eq=False)
class BlochSample:
    k: np.ndarray
    h: np.ndarray

    @classmethod
    def from_function(cls, f, m_k=256) -> BlochSample:
        k = k_grid(m_k)
        return cls(k, np.asarray(f(k), dtype=complex))


def k_grid(m_k: int) -> np.ndarray:
    """Uniform quasimomenta on ``[-pi, pi)``."""
    if m_k < MIN_K_POINTS:
        raise ConfigError(f"need at least {MIN_K_POINTS} k-points, got {m_k}")
    return -np.pi + 2 * np.pi * np.arange(m_k) / m_k


def bloch_h(m: SSHModel, m_k: int = 256) -> BlochSample:
    """``h(k) = V + W e^{-ik}``."""
    k = k_grid(m_k)
    return BlochSample(k, m.v + m.w * np.exp(-1j * k))


def winding_number(s: BlochSample, gap_tol=GAP_TOL) -> int:
    """Number of times ``h(k)`` encircles the origin, counted positive for ``e^{-ik}``.

    Phase increments between neighbouring samples are taken on the principal
    branch, so each must stay well below pi; an increment above pi/2 or a
    non-integer total signals an under-resolved grid.
    """
    h = np.asarray(s.h, dtype=complex)
    smallest = float(np.abs(h).min())
    if smallest <= gap_tol:
        raise TopologyUndefinedError(f"min |h(k)| = {smallest:.3g} <= {gap_tol:g}: gap closed")
    steps = np.angle(np.roll(h, -1) / h)
    if np.abs(steps).max() > np.pi / 2:
        raise ResolutionError("phase jumps by more than pi/2 between samples; refine the k-grid")
    nu = -steps.sum() / (2 * np.pi)
    nearest = round(nu)
    if abs(nu - nearest) >= RESIDUE_TOL:
        raise ResolutionError(f"winding {nu:.4f} is not close to an integer")
    return int(nearest)


MAX_K_POINTS = 1 << 22


def model_winding(m: SSHModel, m_k: int = 256) -> int:
    """Winding of the model's Bloch vector, doubling ``m_k`` until it is resolved.

    Near the transition ``h(k)`` turns by ``|W| / ||W| - |V||`` radians per unit
    ``k`` around ``k = pi``, so a fixed grid cannot resolve every gapped model.
    """
    while True:
        try:
            return winding_number(bloch_h(m, m_k))
        except ResolutionError:
            if 2 * m_k > MAX_K_POINTS:
                raise
            m_k *= 2


def spectrum(matrix, tol=HERMITIAN_TOL):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix."""
    H = np.asarray(matrix)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ConfigError("spectrum needs a square matrix")
    defect = float(np.abs(H - H.conj().T).max()) if H.size else 0.0
    if defect > tol * max(1.0, float(np.abs(H).max())):
        raise PreconditionError(f"matrix is not Hermitian (defect {defect:.3g}); "
                                "lossy matrices belong to spectroscopy")
    return np.linalg.eigh(H)


def zero_modes(eigs, model: SSHModel, gap_fraction=GAP_FRACTION, center=None,
               rotating_frame=False, m_k=256) -> list[int]:
    """Indices of eigenvalues within ``gap_fraction * 2|W - V|`` of the band centre.

    The centre is ``Delta_r`` unless ``rotating_frame`` (then 0) or an explicit
    ``center`` is given.  A count different from ``2 nu`` is reported as a
    :class:`ZeroModeCountWarning`.
    """
    gap = model.bulk_gap
    if gap <= 1e-12 * max(abs(model.v), abs(model.w), 1e-300):
        raise TopologyUndefinedError("bulk gap vanishes (|W| = |V|)")
    if center is None:
        center = 0.0 if rotating_frame else model.delta_r
    eigs = np.asarray(eigs)
    idx = [int(i) for i in np.nonzero(np.abs(eigs - center) < gap_fraction * gap)[0]]
    nu = model_winding(model, m_k)
    if len(idx) != 2 * nu:
        warnings.warn(f"{len(idx)} mid-gap modes but winding number {nu}",
                      ZeroModeCountWarning, stacklevel=2)
    return idx


@dataclass(frozen=True, eq=False)
class EdgeProfile:
    positions: np.ndarray
    weights: np.ndarray  # (n_vectors, 2N + 1)
    edge_weight: np.ndarray


def edge_sites(n_b: int) -> np.ndarray:
    """Flat positions of the b-modes of the two outermost unit cells."""
    idx = ModeIndex(n_b)
    return np.array([idx.b(1), idx.b(2), idx.b(n_b - 1), idx.b(n_b)])


def edge_profile(vectors, n_b: int, mapping: str = "ssh_only") -> EdgeProfile:
    """Site-resolved ``|psi|^2`` on the ``2N + 1`` point axis ``s_j = j / (2N)``.

    ``ssh_only`` expects length-``N`` vectors over the b-modes; ``full_chain``
    expects length ``2N + 1`` vectors, or doubled ``2(2N + 1)`` Bogoliubov
    vectors whose particle and hole weights are added per site.
    """
    v = np.asarray(vectors)
    if v.ndim == 1:
        v = v[:, None]
    idx = ModeIndex(n_b)
    m = idx.size
    dens = np.abs(v) ** 2
    if mapping == "ssh_only":
        if v.shape[0] != n_b:
            raise ConfigError(f"ssh_only vectors must have length {n_b}")
        w = np.zeros((m, v.shape[1]))
        w[idx.b_sites] = dens
    elif mapping == "full_chain":
        if v.shape[0] == 2 * m:
            w = dens[:m] + dens[m:]
        elif v.shape[0] == m:
            w = dens
        else:
            raise ConfigError(f"full_chain vectors must have length {m} or {2 * m}")
    else:
        raise ConfigError(f"mapping must be 'ssh_only' or 'full_chain', got {mapping!r}")
    total = w.sum(0)
    if np.any(total == 0):
        raise ConfigError("zero vector in edge_profile")
    w = (w / total).T
    return EdgeProfile(idx.positions(), w, w[:, edge_sites(n_b)].sum(1))


def b_weight(vectors, n_b: int) -> np.ndarray:
    """Fraction of each column's weight on b-modes (doubled vectors allowed)."""
    prof = edge_profile(vectors, n_b, "full_chain")
    return prof.weights[:, ModeIndex(n_b).b_sites].sum(1)


def b_dominant(eigs, vectors, n_b: int, threshold=0.5):
    """Eigenpairs whose eigenvectors carry at least ``threshold`` weight on b-modes."""
    keep = b_weight(vectors, n_b) >= threshold
    return np.asarray(eigs)[keep], np.asarray(vectors)[:, keep]


def central_modes(eigs, center: float, count: int = 2) -> list[int]:
    """Indices of the ``count`` eigenvalues closest to ``center``, ascending in energy."""
    eigs = np.asarray(eigs)
    order = np.argsort(np.abs(eigs - center), kind="stable")[:count]
    return sorted(int(i) for i in order)


def bulk_edge_consistent(model: SSHModel, gap_fraction=GAP_FRACTION) -> bool:
    """Whether the finite chain has exactly ``2 nu`` mid-gap modes."""
    e, _ = spectrum(finite_ssh_matrix(model, rotating_frame=True))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroModeCountWarning)
        n = len(zero_modes(e, model, gap_fraction, rotating_frame=True))
    return n == 2 * model_winding(model)


__all__ = ["BlochSample", "EdgeProfile", "b_dominant", "b_weight", "bloch_h",
           "bulk_edge_consistent", "central_modes", "edge_profile", "edge_sites", "k_grid",
           "model_winding", "spectrum", "winding_number", "zero_modes"]
