"""Weak-probe transmission through the linearized, lossy chain.

A probe at ``omega_p = omega_d + delta_p`` on mode ``b_1`` drives the
fluctuations at the first Floquet harmonic only.  Writing the lossy dynamical
matrix as ``D`` (so that ``dPsi/dt = -i D Psi``), the response is
``z = M^{-1} e_probe`` with ``M = i (D - delta_p)`` and the transmission is
``t = 2 gamma z[probe]``.  At an isolated resonance of a decoupled mode this
gives ``|t| = 2``, a feature of the convention rather than a gain.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (AggregationWarning, ConfigError, DispersiveWarning, PreconditionError,
                     SingularMatrixError, UnstableStateError)
from .linearize import SSHModel, effective_ssh, squeeze_params
from .model import ChainConfig, Detunings, build_fluctuation_hamiltonian, detunings, loss_vector
from .steadystate import stability_check

PEAK_FLOOR_FACTOR = 3.0
MIN_SEPARATION_LINEWIDTHS = 2.0
_CHUNK = 512
# half-width of the in-gap probe window, in units of the SSH bulk gap 2|W - V|
WINDOW_FRACTION = 0.25


class Peak(NamedTuple):
    delta_p: float
    abs_t: float


@dataclass(frozen=True, eq=False)
class ProbeConfig:
    delta_p_grid: np.ndarray
    probe_mode: str = "b1"
    gamma_probe: float | None = None
    probe_power: float = 0.0

    def __post_init__(self):
        grid = np.asarray(self.delta_p_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ConfigError("probe grid needs at least two points")
        if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
            raise ConfigError("probe grid must be finite and strictly increasing")
        object.__setattr__(self, "delta_p_grid", grid)

    @classmethod
    def linspace(cls, start, stop, steps, **kw) -> ProbeConfig:
        return cls(np.linspace(start, stop, int(steps)), **kw)


@dataclass(eq=False)
class TransmissionSpectrum:
    delta_p: np.ndarray
    t: np.ndarray
    linewidth: float
    peaks: list = field(default_factory=list)

    @property
    def abs_t(self) -> np.ndarray:
        return np.abs(self.t)


def mean_linewidth(config: ChainConfig) -> float:
    """``(mean gamma + mean kappa) / 2``."""
    return 0.5 * (float(config.gamma.mean()) + float(config.kappa.mean()))


def _probe_gamma(config: ChainConfig, position: int) -> float:
    return float(loss_vector(config)[position])


def transmission(config: ChainConfig, det: Detunings | None, ss, probe: ProbeConfig,
                 check_stability=True, find_peaks=True) -> TransmissionSpectrum:
    det = det or detunings(config)
    if np.any(loss_vector(config) <= 0):
        raise PreconditionError("transmission needs every decay rate > 0")
    if check_stability:
        ok, eig = stability_check(config, det, ss)
        if not ok:
            worst = eig[np.argmax(eig.real)]
            raise UnstableStateError(f"steady state is unstable: eigenvalue {worst:.6g} has "
                                     "non-negative real part")
    pos = config.index.parse(probe.probe_mode)
    gamma = probe.gamma_probe if probe.gamma_probe is not None else _probe_gamma(config, pos)
    D = build_fluctuation_hamiltonian(config, det, ss, with_losses=True).dynamical_matrix()
    n = D.shape[0]
    e = np.zeros(n, dtype=complex)
    e[pos] = 1.0
    grid = probe.delta_p_grid
    t = np.empty(grid.size, dtype=complex)
    eye = np.eye(n)
    for lo in range(0, grid.size, _CHUNK):
        dp = grid[lo:lo + _CHUNK]
        mats = 1j * (D[None] - dp[:, None, None] * eye)
        try:
            z = np.linalg.solve(mats, np.broadcast_to(e, (dp.size, n))[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise SingularMatrixError("probe matrix is singular on the grid") from None
        t[lo:lo + dp.size] = 2.0 * gamma * z[:, pos]
    if not np.all(np.isfinite(t)):
        raise SingularMatrixError("non-finite transmission; the probe matrix is singular")
    spec = TransmissionSpectrum(grid.copy(), t, mean_linewidth(config))
    if find_peaks:
        spec.peaks = peak_find(spec)
    return spec


def peak_find(spec: TransmissionSpectrum, floor=None, min_separation=None) -> list[Peak]:
    """Local maxima of ``|t|`` above ``floor``, thinned to ``min_separation``.

    Defaults: ``floor`` is three times the median ``|t|``; ``min_separation``
    is two mean linewidths.  When two maxima are closer than ``min_separation``
    only the taller survives.
    """
    a = spec.abs_t
    x = spec.delta_p
    if floor is None:
        floor = PEAK_FLOOR_FACTOR * float(np.median(a))
    if min_separation is None:
        min_separation = MIN_SEPARATION_LINEWIDTHS * spec.linewidth
    step = float(np.diff(x).max())
    if not step < min_separation / 4:
        raise PreconditionError(f"grid step {step:.3g} is not below min_separation/4 = "
                                f"{min_separation / 4:.3g}")
    inner = np.arange(1, a.size - 1)
    is_max = (a[inner] >= a[inner - 1]) & (a[inner] > a[inner + 1]) & (a[inner] > floor)
    cand = inner[is_max]
    kept: list[int] = []
    for i in cand[np.argsort(-a[cand], kind="stable")]:
        if all(abs(x[i] - x[j]) >= min_separation for j in kept):
            kept.append(int(i))
    return [Peak(float(x[i]), float(a[i])) for i in sorted(kept)]


# --- resonances and the band gap ---------------------------------------------------

def resonances(config: ChainConfig, det: Detunings | None, ss, b_threshold=0.5) -> np.ndarray:
    """Complex eigenvalues of the lossy dynamical matrix for b-like particle modes.

    Keeps eigenvectors with non-negative symplectic norm and at least
    ``b_threshold`` of their weight on b-modes; sorted by real part.
    """
    qf = build_fluctuation_hamiltonian(config, det, ss, with_losses=True)
    w, v = np.linalg.eig(qf.dynamical_matrix())
    m = qf.n_sites
    part, hole = np.abs(v[:m]) ** 2, np.abs(v[m:]) ** 2
    total = (part + hole).sum(0)
    bsites = config.index.b_sites
    keep = (part.sum(0) >= hole.sum(0)) & ((part + hole)[bsites].sum(0) >= b_threshold * total)
    w = w[keep]
    return w[np.argsort(w.real)]


class GapWindow(NamedTuple):
    center: float
    half_width: float
    model: SSHModel
    edge_modes: np.ndarray

    def contains(self, delta_p) -> np.ndarray:
        return np.abs(np.asarray(delta_p) - self.center) < self.half_width


def gap_window(config: ChainConfig, det: Detunings | None, ss,
               gap_fraction=WINDOW_FRACTION) -> GapWindow:
    """Probe detunings that count as inside the SSH band gap.

    The model is aggregated from this state's squeezing without enforcing
    uniformity.  The centre is the midpoint between the nearest b-like
    resonances below and above ``Delta + Delta_r`` (the band centre the model
    predicts), so the second-order error in ``Delta_r`` does not shift the
    window; the half-width is ``gap_fraction * 2|W - V|``.
    """
    det = det or detunings(config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AggregationWarning)
        warnings.simplefilter("ignore", DispersiveWarning)
        sq = squeeze_params(config, ss, det, warn=False)
        model = effective_ssh(config, det, sq, strict=False)
    res = resonances(config, det, ss)
    ref = model.big_delta + model.delta_r
    below, above = res[res.real <= ref], res[res.real > ref]
    if below.size == 0 or above.size == 0:
        raise PreconditionError("no resonances on both sides of the predicted band centre")
    near = np.array([below[-1], above[0]])
    return GapWindow(float(near.real.mean()), gap_fraction * model.bulk_gap, model, near)


def in_gap_peaks(spec: TransmissionSpectrum, window: GapWindow) -> list[Peak]:
    return [p for p in spec.peaks if window.contains(p.delta_p)]
