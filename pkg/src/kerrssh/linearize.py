"""Squeezing, Bogoliubov transformation and the effective SSH model.

A Kerr cavity driven to occupation ``|a_s|^2`` sees the linearized Hamiltonian
``Dt a^dag a + (Ut a^dag a^dag + h.c.)`` with ``Dt = Delta_a + 4U|a_s|^2`` and
``Ut = U a_s^2``.  The Bogoliubov rotation ``a = cosh(r) alpha + e^{i theta}
sinh(r) alpha^dag`` with ``tanh(2r) = 2|Ut|/Dt`` diagonalizes it to
``xi alpha^dag alpha``.  Substituting into the chain, each b-neighbour of a Kerr
cavity couples to ``alpha`` with ``g cosh r`` and to ``alpha^dag`` with
``g sinh r``; for large ``r`` both approach ``g e^r / 2``.

Eliminating every a-mode to second order in ``lambda = g / (Delta - delta)``
leaves an SSH chain of the b-modes with alternating hoppings ``V`` and ``W``.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (AggregationError, AggregationWarning, DispersiveWarning,
                     InstabilityBoundaryError, PhaseWarning, PreconditionError, RWAError)
from .model import ChainConfig, Detunings, QuadraticForm, detunings

THETA_TOL = 1e-2
RWA_TOL = 0.25
RWA_MARGIN = 3.0
R_TOL = 0.05
UNIFORMITY_TOL = 0.5
DISPERSIVE_THRESHOLD = 0.2
# relative guard on the instability boundary Dt > 2|Ut|
BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SqueezeParams:
    """Per-Kerr-site linearization data, one array entry per driven site.

    ``theta = arctan(Im Ut / Re Ut)`` is the phase of ``Ut`` modulo pi, the
    quantity that must be small for the phase to be dropped.
    ``bogoliubov_phase = arg(-Ut)`` is the full phase entering the
    transformation; with ``theta`` zeroed it is rounded to a multiple of pi,
    which only flips a sign that a global gauge change removes when all Kerr
    sites agree.
    """

    sites: np.ndarray
    u_tilde: np.ndarray
    theta: np.ndarray
    delta_tilde_a: np.ndarray
    r: np.ndarray
    xi: np.ndarray
    theta_tol: float = THETA_TOL

    @property
    def bogoliubov_phase(self) -> np.ndarray:
        return np.angle(-self.u_tilde) * (np.abs(self.u_tilde) > 0)

    @property
    def phase(self) -> np.ndarray:
        """Phase used by the exact transformation, with small ``theta`` removed."""
        full = self.bogoliubov_phase
        return np.where(np.abs(self.theta) < self.theta_tol, full - self.theta, full)

    @classmethod
    def from_r(cls, r, xi, sites=None, theta=0.0) -> SqueezeParams:
        """Parameters realizing given ``(r, xi)``; inverse of :func:`squeeze_from`."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        xi = np.broadcast_to(np.asarray(xi, dtype=float), r.shape).copy()
        phase = np.broadcast_to(np.asarray(theta, dtype=float), r.shape).copy()
        if sites is None:
            sites = 4 * np.arange(1, r.size + 1)
        dt = xi * np.cosh(2 * r)
        u_tilde = -0.5 * xi * np.sinh(2 * r) * np.exp(1j * phase)
        return cls(np.asarray(sites, dtype=int), u_tilde, _theta_mod_pi(u_tilde), dt, r, xi)


def _theta_mod_pi(u_tilde) -> np.ndarray:
    u = np.asarray(u_tilde, dtype=complex)
    full = np.angle(u) * (np.abs(u) > 0)
    return full - np.pi * np.round(full / np.pi)


def squeeze_from(delta_tilde_a: float, u_tilde: complex) -> tuple[float, float]:
    """``(r, xi)`` for a single mode; raises past the instability boundary."""
    dt = float(delta_tilde_a)
    two_u = 2.0 * abs(u_tilde)
    if not dt - two_u > BOUNDARY_RTOL * max(dt, two_u, 1e-300):
        raise InstabilityBoundaryError(
            f"detuning {dt:.6g} does not exceed 2|U~| = {two_u:.6g}; squeezing undefined")
    # r = 1/4 ln((dt + 2u)/(dt - 2u)), written in a cancellation-free form
    return 0.5 * math.atanh(two_u / dt), math.sqrt((dt - two_u) * (dt + two_u))


def squeeze_params(config: ChainConfig, ss, det: Detunings | None = None,
                   theta_tol=THETA_TOL, warn=True) -> SqueezeParams:
    if ss is None:
        raise PreconditionError("a converged steady state is required")
    if config.kerr_u > 0:
        raise PreconditionError("squeezing needs U <= 0")
    det = det or detunings(config)
    z = np.asarray(getattr(ss, "flat", ss), dtype=complex)
    sites = config.index.driven
    u_tilde = config.kerr_u * z[sites] ** 2
    dt = det.flat()[sites] + 4.0 * config.kerr_u * np.abs(z[sites]) ** 2
    theta = _theta_mod_pi(u_tilde)
    rx = [squeeze_from(d, u) for d, u in zip(dt, u_tilde)]
    r = np.array([p[0] for p in rx])
    xi = np.array([p[1] for p in rx])
    big = np.abs(theta) >= theta_tol
    if warn and big.any():
        warnings.warn(f"anomalous phase theta = {theta[big]} exceeds {theta_tol}; "
                      "kept in the exact transformation", PhaseWarning, stacklevel=2)
    return SqueezeParams(sites, u_tilde, theta, dt, r, xi, theta_tol)


def _rwa_violations(det: Detunings, g: float, sq: SqueezeParams, margin: float) -> list[str]:
    energies = det.flat().copy()
    energies[sq.sites] = sq.xi
    bogo = dict(zip(sq.sites.tolist(), sq.r))
    bad = []
    for k in range(1, energies.size, 2):  # b-sites
        for j in (k - 1, k + 1):
            c = g * math.exp(bogo[j]) / 2 if j in bogo else g
            diff = abs(energies[k] - energies[j])
            if diff < margin * c:
                bad.append(f"bond b{(k + 1) // 2}-a{j // 2}: |detuning gap| {diff:.3g} "
                           f"< {margin:g} x coupling {c:.3g}")
            if j in bogo and abs(energies[k] + energies[j]) < margin * diff:
                bad.append(f"bond b{(k + 1) // 2}-a{j // 2}: counter-rotating gap "
                           f"{abs(energies[k] + energies[j]):.3g} < {margin:g} x {diff:.3g}")
    return bad


def reduced_hamiltonian(config: ChainConfig, det: Detunings | None, sq: SqueezeParams,
                        mode: str = "rwa", force=False, rwa_tol=RWA_TOL, margin=RWA_MARGIN):
    """Fluctuation Hamiltonian in the Bogoliubov basis of the Kerr cavities.

    ``mode="rwa"`` returns the real symmetric single-particle matrix with bond
    ``g e^r / 2`` to each Bogoliubov mode and counter-rotating terms dropped; it
    refuses (``RWAError``) unless ``e^{-2r} < rwa_tol`` on every site and each
    link of the dispersive/RWA hierarchy holds by ``margin`` (``force`` skips
    both checks).  ``mode="exact"`` returns the doubled
    :class:`~kerrssh.model.QuadraticForm` with ``g cosh r`` and
    ``g e^{i theta} sinh r`` bonds, valid for any ``r``.
    """
    det = det or detunings(config)
    n = config.index.size
    g = config.g
    diag = det.flat().astype(float)
    diag[sq.sites] = sq.xi
    if mode == "exact":
        A = np.zeros((n, n), dtype=complex)
        B = np.zeros((n, n), dtype=complex)
        A[np.diag_indices(n)] = diag
        i = np.arange(n - 1)
        A[i, i + 1] = A[i + 1, i] = g
        for s, r, ph in zip(sq.sites, sq.r, sq.phase):
            for k in (s - 1, s + 1):
                A[k, s] = A[s, k] = g * math.cosh(r)
                B[k, s] = B[s, k] = g * np.exp(1j * ph) * math.sinh(r)
        return QuadraticForm(np.block([[A, B], [B.conj(), A.conj()]]))
    if mode != "rwa":
        raise ValueError(f"mode must be 'rwa' or 'exact', got {mode!r}")
    if not force:
        bad = [f"a{s // 2}: e^(-2r) = {math.exp(-2 * r):.3g} >= {rwa_tol:g}"
               for s, r in zip(sq.sites, sq.r) if math.exp(-2 * r) >= rwa_tol]
        bad += _rwa_violations(det, g, sq, margin)
        if bad:
            raise RWAError("rotating-wave reduction refused: " + "; ".join(bad))
    H = np.diag(diag)
    i = np.arange(n - 1)
    H[i, i + 1] = H[i + 1, i] = g
    for s, r in zip(sq.sites, sq.r):
        H[s - 1, s] = H[s, s - 1] = H[s + 1, s] = H[s, s + 1] = g * math.exp(r) / 2
    return H


# --- effective SSH model ----------------------------------------------------------

@dataclass(frozen=True)
class SSHModel:
    """Two-band chain ``Delta_r + V (intra-cell) + W (inter-cell)`` on ``2 n_cells`` sites."""

    v: float
    w: float
    delta_r: float = 0.0
    n_cells: int = 3
    lambda_bar: float = float("nan")
    r: float = float("nan")
    big_delta: float = float("nan")
    small_delta: float = float("nan")
    g: float = float("nan")
    warnings: tuple = field(default=(), compare=False)

    @classmethod
    def from_params(cls, g, big_delta, small_delta, r, n_cells=3, warnings_=()) -> SSHModel:
        d = big_delta - small_delta
        if d == 0:
            raise PreconditionError("Delta - delta = 0: no dispersive elimination possible")
        e2r = math.exp(2 * r)
        return cls(v=g * g / d, w=g * g * e2r / (4 * d), delta_r=g * g * (4 + e2r) / (4 * d),
                   n_cells=n_cells, lambda_bar=g / d, r=r, big_delta=big_delta,
                   small_delta=small_delta, g=g, warnings=tuple(warnings_))

    @property
    def topological(self) -> bool:
        return abs(self.w) > abs(self.v)

    @property
    def bulk_gap(self) -> float:
        return 2.0 * abs(abs(self.w) - abs(self.v))

    def to_dict(self) -> dict:
        return {"V": self.v, "W": self.w, "delta_r": self.delta_r, "r": self.r,
                "lambda_bar": self.lambda_bar, "n_cells": self.n_cells,
                "big_delta": self.big_delta, "small_delta": self.small_delta, "g": self.g,
                "warnings": list(self.warnings)}


def edge_rule_detuning(big_delta: float, small_delta: float, r: float) -> float:
    """Edge a-mode detuning that makes the end b-modes see the bulk shift ``Delta_r``.

    Equals ``4 delta e^{-2r}`` in the frame where ``Delta = 0``.
    """
    return big_delta + 4.0 * (small_delta - big_delta) * math.exp(-2.0 * r)


def apply_edge_rule(config: ChainConfig, r: float, big_delta=None, small_delta=None,
                      det: Detunings | None = None) -> ChainConfig:
    """Copy of ``config`` with ``a_0`` and ``a_N`` retuned by :func:`edge_rule_detuning`."""
    det = det or detunings(config)
    if big_delta is None:
        big_delta = float(det.delta_b.mean())
    if small_delta is None:
        small_delta = float(_interior_undriven(config, det).mean())
    edge = edge_rule_detuning(big_delta, small_delta, r) + config.drive_freq
    omega_a = config.omega_a.copy()
    omega_a[0] = omega_a[-1] = edge
    return config.replace(omega_a=omega_a)


def _interior_undriven(config: ChainConfig, det: Detunings) -> np.ndarray:
    n = config.n_b
    return det.delta_a[1:n:2]


def effective_ssh(config: ChainConfig, det: Detunings | None, sq: SqueezeParams,
                  r_tol=R_TOL, uniformity_tol=UNIFORMITY_TOL, edge_override=False,
                  strict=True, dispersive_threshold=DISPERSIVE_THRESHOLD) -> SSHModel:
    """Aggregate per-site data into one SSH model.

    ``Delta`` is the (uniform) b-detuning and ``delta`` the interior undriven
    a-detuning, which the Bogoliubov frequencies must match.  Non-uniformity
    beyond ``r_tol`` (in ``r``) or ``uniformity_tol * g`` (in detunings) raises
    :class:`AggregationError`; with ``strict=False`` it is downgraded to a
    warning recorded on the model.
    """
    det = det or detunings(config)
    g = config.g
    tol = uniformity_tol * g
    big_delta = float(det.delta_b.mean())
    interior = _interior_undriven(config, det)
    small_delta = float(interior.mean())
    r = float(sq.r.mean()) if sq.r.size else 0.0
    problems = []
    if np.ptp(det.delta_b) > tol:
        problems.append(f"b-detunings spread {np.ptp(det.delta_b):.3g} > {tol:.3g}")
    if np.ptp(interior) > tol:
        problems.append(f"undriven a-detunings spread {np.ptp(interior):.3g} > {tol:.3g}")
    off = np.abs(sq.xi - small_delta)
    if off.size and off.max() > tol:
        problems.append(f"Bogoliubov frequencies {sq.xi} differ from delta={small_delta:.6g} "
                        f"by more than {tol:.3g}")
    if sq.r.size and np.ptp(sq.r) > r_tol:
        problems.append(f"squeezing parameters {sq.r} spread more than r_tol={r_tol}")
    if not edge_override:
        target = edge_rule_detuning(big_delta, small_delta, r)
        edges = det.delta_a[[0, -1]]
        if np.abs(edges - target).max() > tol:
            problems.append(f"edge detunings {edges} differ from the edge rule value "
                            f"{target:.6g} by more than {tol:.3g}")
    if problems:
        if strict:
            raise AggregationError("cannot aggregate an SSH model: " + "; ".join(problems))
        for p in problems:
            warnings.warn(p, AggregationWarning, stacklevel=2)
    model = SSHModel.from_params(g, big_delta, small_delta, r, config.n_b // 2, problems)
    if abs(model.lambda_bar) > dispersive_threshold:
        msg = (f"|lambda_bar| = {abs(model.lambda_bar):.3g} exceeds "
               f"{dispersive_threshold}; second-order elimination is inaccurate")
        warnings.warn(msg, DispersiveWarning, stacklevel=2)
        model = dataclasses.replace(model, warnings=model.warnings + (msg,))
    return model


def finite_ssh_matrix(m: SSHModel, rotating_frame=False) -> np.ndarray:
    """Open chain of ``2 n_cells`` sites with bonds ``V, W, V, ..., V``."""
    n = 2 * m.n_cells
    H = np.zeros((n, n))
    if not rotating_frame:
        H[np.diag_indices(n)] = m.delta_r
    for i in range(n - 1):
        H[i, i + 1] = H[i + 1, i] = m.v if i % 2 == 0 else m.w
    return H
