"""Classical steady states of the driven chain.

Three routes to a fixed point of the mean-field equations:

* relaxation in time (:func:`evolve_to_steady`), the physical route and the one
  used to fall off a fold during a sweep;
* damped Newton on the real/imaginary split system (:func:`newton_refine`);
* for the symmetric six-mode chain, the closed cubic for ``x = |a_2|^2``
  (:func:`build_cubic_reduction`, :func:`solve_cubic`).

Tolerances are absolute max-norms of the time derivative in units of
``g * amplitude`` for a dimensionless config, scaled by ``max(1, E_max)`` so that
strongly driven chains are not held to a residual below round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import (ConfigError, ConvergenceTimeout, DegenerateCubicError, NewtonError,
                     NumericalError, PoleError, PreconditionError, SingularJacobianError,
                     SweepError)
from .model import (ChainConfig, Detunings, build_fluctuation_hamiltonian, detunings,
                    hopping_matrix, pack_mean_field, rabi_amplitudes)

ODE_TOL = 1e-8
NEWTON_TOL = 1e-10
JUMP_FACTOR = 5.0
MAX_HALVINGS = 30
MAX_RK4_STEPS = 5_000_000


@dataclass(eq=False)
class SteadyState:
    a_s: np.ndarray
    b_s: np.ndarray
    residual: float
    stable: bool | None = None
    iterations: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def from_flat(cls, z, residual, **kw) -> SteadyState:
        z = np.asarray(z, dtype=complex)
        return cls(z[0::2].copy(), z[1::2].copy(), float(residual), **kw)

    @property
    def flat(self) -> np.ndarray:
        z = np.empty(self.a_s.size + self.b_s.size, dtype=complex)
        z[0::2] = self.a_s
        z[1::2] = self.b_s
        return z

    @property
    def x(self) -> float | None:
        """``|a_2|^2``; ``None`` for chains without a Kerr site."""
        return float(abs(self.a_s[2]) ** 2) if self.a_s.size > 3 else None

    @property
    def occupations(self) -> np.ndarray:
        """``|a_{2j}|^2`` on every Kerr site."""
        return np.abs(self.a_s[2:-1:2]) ** 2

    def is_symmetric(self, rtol=1e-8) -> bool:
        occ = self.occupations
        return occ.size == 0 or float(np.ptp(occ)) <= rtol * max(float(occ.max()), 1.0)


def _scaled_tol(config: ChainConfig, tol: float) -> float:
    drive = config.drive_amp
    return tol * max(1.0, float(drive.max()) if drive.size else 1.0)


def _residual(z, packed) -> float:
    return float(np.abs(kernels.rhs(z, *packed)).max())


def linear_response(config: ChainConfig, det: Detunings | None = None) -> np.ndarray:
    """Fixed point with the Kerr term removed: ``(diag - i g H) z = -drive``."""
    diag, g, _, drive = pack_mean_field(config, det)
    L = np.diag(diag) - 1j * g * hopping_matrix(diag.size, 1.0)
    return np.linalg.solve(L, -drive.astype(complex))


def complete_from_driven(config: ChainConfig, driven_amps, det: Detunings | None = None):
    """Full amplitude vector given the Kerr-site amplitudes.

    With those fixed, the remaining mean-field equations are linear.
    """
    diag, g, _, drive = pack_mean_field(config, det)
    idx = config.index
    drv = idx.driven
    rest = np.setdiff1d(np.arange(idx.size), drv)
    L = np.diag(diag) - 1j * g * hopping_matrix(idx.size, 1.0)
    z = np.zeros(idx.size, dtype=complex)
    z[drv] = driven_amps
    z[rest] = -np.linalg.solve(L[np.ix_(rest, rest)],
                               L[np.ix_(rest, drv)] @ z[drv] + drive[rest])
    return z


def evolve_to_steady(config: ChainConfig, initial=None, t_max=None, dt=None, tol=ODE_TOL,
                     det: Detunings | None = None, check_every=64,
                     max_steps=MAX_RK4_STEPS) -> SteadyState:
    """Integrate the mean-field equations with fixed-step RK4 until they stop moving.

    The run is also capped at ``max_steps`` steps: high-Q chains driven hard
    need ``t_max / dt`` far beyond what a desk computation can afford, and for
    those a timeout is more useful than a hang.
    """
    if np.any(config.gamma <= 0) or np.any(config.kappa <= 0):
        raise PreconditionError("time relaxation needs every decay rate > 0")
    det = det or detunings(config)
    packed = pack_mean_field(config, det)
    n = config.index.size
    z0 = np.zeros(n, dtype=complex) if initial is None else np.asarray(initial, dtype=complex)
    if z0.shape != (n,):
        raise ConfigError(f"initial state must have length {n}")
    if t_max is None:
        t_max = 2000.0 / min(config.gamma.min(), config.kappa.min())
    if dt is None:
        scale = [np.abs(det.flat()).max(), config.g]
        if config.drive_amp.size:
            scale.append(config.drive_amp.max())
        dt = 0.01 / max(scale)
    n_steps = int(min(math.ceil(t_max / dt), max_steps))
    tol_eff = _scaled_tol(config, tol)
    z, steps, res, ok = kernels.rk4_evolve(z0, *packed, dt, n_steps, tol_eff, check_every)
    state = SteadyState.from_flat(z, res, iterations=steps)
    if not ok:
        raise ConvergenceTimeout(
            f"no steady state after {steps} steps, t={steps * dt:g} of t_max={t_max:g} "
            f"(residual {res:.3g})", state)
    return state


def _real_jacobian(z, packed) -> np.ndarray:
    diag, g, kerr, _ = packed
    n = z.size
    Jz = np.diag(diag - 2j * kerr * np.abs(z) ** 2) - 1j * g * hopping_matrix(n, 1.0)
    Jzb = np.diag(-1j * kerr * z ** 2)
    P, Q = Jz + Jzb, 1j * (Jz - Jzb)
    return np.block([[P.real, Q.real], [P.imag, Q.imag]])


def newton_refine(config: ChainConfig, guess, tol=NEWTON_TOL, max_iter=50,
                  det: Detunings | None = None) -> SteadyState:
    """Damped Newton polish of a steady-state guess.

    Steps are halved (up to 30 times) while they increase the residual.
    """
    packed = pack_mean_field(config, det)
    z = np.array(guess, dtype=complex)
    if z.shape != (config.index.size,) or not np.all(np.isfinite(z)):
        raise ConfigError("guess must be a finite vector over the chain")
    tol_eff = _scaled_tol(config, tol)
    f = kernels.rhs(z, *packed)
    res = float(np.abs(f).max())
    history = [res]
    n = z.size
    for it in range(1, max_iter + 1):
        if res <= tol_eff:
            return SteadyState.from_flat(z, res, iterations=it - 1, history=history)
        J = _real_jacobian(z, packed)
        try:
            step = np.linalg.solve(J, -np.concatenate([f.real, f.imag]))
        except np.linalg.LinAlgError:
            raise SingularJacobianError("singular Jacobian in Newton iteration",
                                        SteadyState.from_flat(z, res)) from None
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError("non-finite Newton step", SteadyState.from_flat(z, res))
        dz = step[:n] + 1j * step[n:]
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            z_new = z + lam * dz
            f_new = kernels.rhs(z_new, *packed)
            res_new = float(np.abs(f_new).max())
            if res_new < res or res_new <= tol_eff:
                break
            lam *= 0.5
        else:
            raise NewtonError(f"Newton stalled at residual {res:.3g}",
                              SteadyState.from_flat(z, res, iterations=it, history=history))
        z, f, res = z_new, f_new, res_new
        history.append(res)
    if res <= tol_eff:
        return SteadyState.from_flat(z, res, iterations=max_iter, history=history)
    raise NewtonError(f"no convergence in {max_iter} iterations (residual {res:.3g})",
                      SteadyState.from_flat(z, res, iterations=max_iter, history=history))


# --- cubic reduction for the symmetric six-mode chain -------------------------

@dataclass(frozen=True)
class CubicReduction:
    """Elimination of every mode except the two Kerr cavities.

    ``delta_tilde`` is defined so that ``x = |a_2|^2`` solves
    ``4U^2 x^3 - 4U Re(delta_tilde) x^2 + |delta_tilde|^2 x - E^2 = 0`` exactly;
    it equals ``-conj(D)`` with ``D = (Delta_a2 - i kappa_2) + g (chi1 + chi2)``
    the effective complex detuning seen by ``a_2`` (``(D + 2U x) a_2 = -i E``).
    """

    delta_tilde: complex
    chi1: complex
    chi2: complex
    eff_delta_a1: complex
    eff_delta_b1: complex
    kerr_u: float
    rabi: float = 0.0

    @property
    def response(self) -> complex:
        return -self.delta_tilde.conjugate()

    def coefficients(self, rabi=None):
        E = self.rabi if rabi is None else rabi
        U, d = self.kerr_u, self.delta_tilde
        return 4 * U * U, -4 * U * d.real, abs(d) ** 2, -E * E

    def amplitude(self, x, rabi=None) -> complex:
        """Complex ``a_2`` on the root ``x`` (phase fixed by the drive)."""
        E = self.rabi if rabi is None else rabi
        return -1j * E / (self.response + 2 * self.kerr_u * x)


class CubicRoot(NamedTuple):
    x: float
    tag: str  # "candidate-stable", "unstable" or "fold"


def _is_symmetric_six(config: ChainConfig, det: Detunings, rtol=1e-12) -> list[str]:
    bad = []
    def close(u, v):
        return np.allclose(u, v, rtol=rtol, atol=rtol * max(1.0, np.abs(u).max()))
    if config.n_b != 6:
        return ["n_b must be 6"]
    if not close(det.delta_a, det.delta_a[::-1]):
        bad.append("a-detunings not mirror symmetric about a_3")
    if not close(det.delta_b, det.delta_b[::-1]):
        bad.append("b-detunings not mirror symmetric")
    if not close(config.kappa, config.kappa[::-1]) or not close(config.gamma, config.gamma[::-1]):
        bad.append("losses not mirror symmetric")
    if not close(config.drive_amp, config.drive_amp[::-1]):
        bad.append("drive not symmetric")
    return bad


def build_cubic_reduction(config: ChainConfig, det: Detunings | None = None) -> CubicReduction:
    det = det or detunings(config)
    bad = _is_symmetric_six(config, det)
    if bad:
        raise PreconditionError("cubic reduction needs a symmetric six-mode chain: " + "; ".join(bad))
    g = config.g
    ca = det.delta_a - 1j * config.kappa
    cb = det.delta_b - 1j * config.gamma
    scale = max(1.0, g * g, float(np.abs(ca).max()), float(np.abs(cb).max()))

    def guard(value, name):
        if abs(value) <= 1e-12 * scale:
            raise PoleError(f"vanishing denominator {name}", culprit=name)
        return value

    eff_b1 = cb[0] - g * g / guard(ca[0], "Delta_a0")
    eff_a1 = ca[1] - g * g / guard(eff_b1, "eff_Delta_b1")
    den1 = guard(cb[1] - g * g / guard(eff_a1, "eff_Delta_a1"), "Delta_b2 - g^2/eff_Delta_a1")
    chi1 = -g / den1
    den2 = guard(cb[2] * ca[3] - 2 * g * g, "g - Delta_b3 Delta_a3 / 2g")
    chi2 = -g * ca[3] / den2
    D = ca[2] + g * (chi1 + chi2)
    rabi = float(config.drive_amp[0])
    return CubicReduction(complex(-np.conj(D)), complex(chi1), complex(chi2), complex(eff_a1),
                          complex(eff_b1), config.kerr_u, rabi)


def _polish(p, dp, lo, hi):
    """Bisection to full precision inside a sign-changing bracket, then Newton."""
    plo = p(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        pm = p(mid)
        if pm == 0:
            lo = hi = mid
            break
        if (pm < 0) == (plo < 0):
            lo, plo = mid, pm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        d = dp(x)
        if d == 0:
            break
        nx = x - p(x) / d
        if not lo <= nx <= hi or abs(p(nx)) >= abs(p(x)):
            break
        x = nx
    return x


def solve_cubic(red: CubicReduction, rabi: float) -> list[CubicRoot]:
    """Non-negative roots ``x`` of the Kerr cubic at drive ``rabi``, ascending."""
    if rabi < 0:
        raise ConfigError("drive amplitude must be non-negative")
    c3, c2, c1, c0 = red.coefficients(rabi)
    if c0 == 0:  # undriven, or E^2 below the smallest float
        return [CubicRoot(0.0, "candidate-stable")]
    if c3 == 0:
        if c1 == 0:
            raise DegenerateCubicError("U = 0 and delta_tilde = 0: no finite response")
        return [CubicRoot(-c0 / c1, "candidate-stable")]

    p = lambda x: ((c3 * x + c2) * x + c1) * x + c0  # noqa: E731
    dp = lambda x: (3 * c3 * x + 2 * c2) * x + c1  # noqa: E731
    upper = 1.0 + max(abs(c2), abs(c1), abs(c0)) / c3
    while p(upper) <= 0:
        upper *= 2
    disc = c2 * c2 - 3 * c3 * c1
    crit = []
    if disc > 0:
        s = math.sqrt(disc)
        crit = sorted(x for x in ((-c2 - s) / (3 * c3), (-c2 + s) / (3 * c3)) if 0 < x < upper)
    knots = [0.0, *crit, upper]
    scale = max(abs(c0), abs(c1) * upper, 1e-300)
    roots = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        plo, phi = p(lo), p(hi)
        if abs(phi) <= 1e-13 * scale and hi in crit:
            if not roots or abs(roots[-1].x - hi) > 1e-12 * max(hi, 1):
                roots.append(CubicRoot(hi, "fold"))
            continue
        if (plo < 0) != (phi < 0) and not (abs(plo) <= 1e-13 * scale and lo in crit):
            x = _polish(p, dp, lo, hi)
            roots.append(CubicRoot(x, "candidate-stable" if dp(x) > 0 else "unstable"))
    return roots


# --- stability ----------------------------------------------------------------

STABILITY_MARGIN = 0.0


def stability_check(config: ChainConfig, det: Detunings | None, ss: SteadyState):
    """``(stable, eigenvalues)`` of the linearized mean-field dynamics at ``ss``.

    Stable iff every eigenvalue has real part strictly below zero; marginal
    (lossless) modes therefore count as unstable.
    """
    qf = build_fluctuation_hamiltonian(config, det, ss, with_losses=True)
    eig = np.linalg.eigvals(qf.jacobian())
    eig = eig[np.argsort(eig.real)]
    return bool(eig.real.max() < STABILITY_MARGIN), eig


# --- continuation -------------------------------------------------------------

def _with_drive(config: ChainConfig, control: str, value: float) -> ChainConfig:
    if control == "rabi":
        amps = np.full(config.drive_amp.size, float(value))
    elif control == "power":
        amps = rabi_amplitudes(config, float(value))
    else:
        raise ConfigError(f"control must be 'rabi' or 'power', got {control!r}")
    return config.replace(drive_amp=amps)


def _site_cubic_guess(config: ChainConfig, det: Detunings, branch: str) -> np.ndarray:
    # each Kerr cavity treated in isolation
    amps = []
    for k, E in zip(config.index.driven, config.drive_amp):
        D = det.flat()[k] - 1j * config.kappa[k // 2]
        red = CubicReduction(complex(-np.conj(D)), 0j, 0j, 0j, 0j, config.kerr_u, float(E))
        roots = [r for r in solve_cubic(red, E) if r.tag != "unstable"]
        x = roots[0].x if branch == "low" else roots[-1].x
        amps.append(red.amplitude(x) if E > 0 else 0j)
    return complete_from_driven(config, np.array(amps), det)


def initial_state(config: ChainConfig, branch: str = "low", det: Detunings | None = None,
                  tol=NEWTON_TOL) -> SteadyState:
    """A converged steady state on the requested branch (``"low"`` or ``"high"``).

    Uses the cubic reduction when the chain allows it, otherwise per-cavity
    cubic guesses with a time-relaxation fallback.
    """
    if branch not in ("low", "high"):
        raise ConfigError("branch must be 'low' or 'high'")
    det = det or detunings(config)
    if config.kerr_u == 0 or config.drive_amp.size == 0 or not np.any(config.drive_amp):
        return newton_refine(config, linear_response(config, det), tol, det=det)
    guess = None
    try:
        red = build_cubic_reduction(config, det)
    except (PreconditionError, PoleError):
        red = None
    if red is not None:
        roots = solve_cubic(red, red.rabi)
        stable = [r for r in roots if r.tag != "unstable"] or roots
        x = stable[0].x if branch == "low" else stable[-1].x
        a2 = red.amplitude(x)
        guess = complete_from_driven(config, np.full(config.index.driven.size, a2), det)
    else:
        guess = _site_cubic_guess(config, det, branch)
    try:
        return newton_refine(config, guess, tol, det=det)
    except NewtonError:
        relaxed = evolve_to_steady(config, guess, det=det)
        return newton_refine(config, relaxed.flat, tol, det=det)


@dataclass(eq=False)
class SweepResult:
    branch: str
    control: str
    grid: np.ndarray
    states: list
    x: np.ndarray
    r: np.ndarray
    stable: np.ndarray
    jumps: list
    rabi: np.ndarray

    @property
    def jump_flags(self) -> np.ndarray:
        flags = np.zeros(self.grid.size, dtype=bool)
        flags[self.jumps] = True
        return flags


def detect_jumps(x, factor=JUMP_FACTOR) -> list[int]:
    """Indices ``i`` where ``x`` jumps between grid points ``i - 1`` and ``i``.

    A change counts as a jump when it exceeds ``factor`` times the median
    adjacent change and also ``factor`` times both neighbouring changes, so the
    steepening of a branch just before its fold is not flagged.
    """
    dx = np.abs(np.diff(np.asarray(x, dtype=float)))
    if dx.size == 0:
        return []
    med = float(np.median(dx))
    padded = np.concatenate([[0.0], dx, [0.0]])
    local = np.maximum(padded[:-2], padded[2:])
    hits = (dx > factor * med) & (dx > factor * local) & (dx > 0)
    return [int(i) + 1 for i in np.nonzero(hits)[0]]


def _jump_target(cfg, det, z_prev, prev_x, strategy, tol):
    if strategy in ("auto", "cubic"):
        try:
            red = build_cubic_reduction(cfg, det)
        except (PreconditionError, PoleError):
            if strategy == "cubic":
                raise
        else:
            roots = [r for r in solve_cubic(red, red.rabi) if r.tag != "unstable"]
            root = min(roots, key=lambda r: abs(r.x - prev_x))
            guess = complete_from_driven(cfg, np.full(cfg.index.driven.size,
                                                      red.amplitude(root.x)), det)
            return newton_refine(cfg, guess, tol, det=det)
    relaxed = evolve_to_steady(cfg, z_prev, det=det)
    return newton_refine(cfg, relaxed.flat, tol, det=det)


def _run_branch(config, control, grid, branch, tol, strategy, jump_factor):
    from .linearize import squeeze_params  # deferred: linearize imports this module

    states, xs, rs, stable, rabi = [], [], [], [], []
    ss = None
    for i, value in enumerate(grid):
        cfg = _with_drive(config, control, value)
        det = detunings(cfg)
        try:
            if config.kerr_u == 0:
                # linear chain: one fixed point, computed without the warm start so
                # that both sweep directions give identical values
                ss = newton_refine(cfg, linear_response(cfg, det), tol, det=det)
            elif ss is None:
                ss = initial_state(cfg, "low" if branch == "forward" else "high", det, tol)
            else:
                prev = ss
                try:
                    ss = newton_refine(cfg, prev.flat, tol, det=det)
                    ok, _ = stability_check(cfg, det, ss)
                except NewtonError:
                    ok = False
                if not ok:
                    ss = _jump_target(cfg, det, prev.flat, prev.x or 0.0, strategy, tol)
            ok, _ = stability_check(cfg, det, ss)
        except (NumericalError, PreconditionError) as exc:
            raise SweepError(f"{branch} sweep failed at grid index {i} "
                             f"({control}={value:g}): {exc}", index=i, cause=exc) from exc
        ss.stable = ok
        states.append(ss)
        xs.append(ss.x if ss.x is not None else 0.0)
        rabi.append(cfg.drive_amp.copy())
        stable.append(ok)
        try:
            rs.append(squeeze_params(cfg, ss, warn=False).r)
        except NumericalError:
            rs.append(np.full(cfg.index.driven.size, np.nan))
    xs = np.array(xs)
    return SweepResult(branch, control, np.asarray(grid, dtype=float), states, xs,
                       np.array(rs).reshape(len(grid), -1), np.array(stable),
                       detect_jumps(xs, jump_factor), np.array(rabi))


def hysteresis_sweep(config: ChainConfig, control: str, start: float, stop: float, steps: int,
                     direction: str = "forward", tol=NEWTON_TOL, strategy: str = "auto",
                     jump_factor=JUMP_FACTOR):
    """Warm-started continuation of the steady state in drive amplitude or power.

    Each point is seeded with the previous state.  When Newton fails or lands on
    an unstable state, the branch has ended and the solution jumps: to the
    closest surviving stable cubic root (``strategy="cubic"``), by time
    relaxation from the previous state (``"evolve"``), or whichever applies
    (``"auto"``).  ``direction="both"`` returns ``(forward, backward)``.
    """
    if steps < 2:
        raise ConfigError("steps must be >= 2")
    if not start < stop:
        raise ConfigError("sweep needs start < stop; direction sets the order")
    if direction not in ("forward", "backward", "both"):
        raise ConfigError(f"unknown direction {direction!r}")
    if strategy not in ("auto", "cubic", "evolve"):
        raise ConfigError(f"unknown strategy {strategy!r}")
    grid = np.linspace(start, stop, steps)
    out = []
    if direction in ("forward", "both"):
        out.append(_run_branch(config, control, grid, "forward", tol, strategy, jump_factor))
    if direction in ("backward", "both"):
        out.append(_run_branch(config, control, grid[::-1], "backward", tol, strategy,
                               jump_factor))
    return tuple(out) if direction == "both" else out[0]


def loop_area(forward: SweepResult, backward: SweepResult) -> float:
    """Area enclosed between the two branches in the (control, x) plane."""
    xb = backward.x[::-1]
    gap = np.abs(forward.x - xb)
    return float(np.sum(0.5 * (gap[1:] + gap[:-1]) * np.diff(forward.grid)))
