"""Chain configuration, mode indexing and the matrices built from them.

The chain has ``N`` b-modes and ``N + 1`` a-modes laid out as one interleaved
line ``[a_0, b_1, a_1, b_2, ..., b_N, a_N]`` of ``M = 2N + 1`` sites.  With that
ordering every site couples only to its two flat neighbours, and ``b_1`` sits at
flat position 1 (position 2 when counting from one).

Kerr nonlinearity and coherent drive live on the even interior a-modes
``a_2, a_4, ..., a_{N-2}``.

Detuning naming: ``delta_b`` belongs to the b-modes (``Omega_i - omega_d``) and
``delta_a`` to the a-modes (``omega_i - omega_d``).  The source text pairs the
symbols the other way round in one place; every later formula uses this pairing.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, PreconditionError, ShapeError

HBAR = 1.054571817e-34  # J s

UNIT_MODES = ("dimensionless_g", "si")

_FREQ_FIELDS = ("omega_b", "omega_a", "g", "gamma", "kappa", "drive_freq", "drive_amp")


def _vec(value, n, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and n != 1:
        arr = np.full(n, float(arr[0]))
    if arr.shape != (n,):
        raise ShapeError(f"{name} must have length {n}, got {arr.size}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ChainConfig:
    """Physical parameters of the ``2N + 1`` mode chain.

    Scalars given for array fields are broadcast.  In ``dimensionless_g`` mode
    every rate is in units of ``g``; ``g_si`` and ``drive_freq_si`` (rad/s) are
    then only needed to convert a drive power into a Rabi amplitude.
    """

    n_b: int
    omega_b: np.ndarray
    omega_a: np.ndarray
    kerr_u: float
    g: float
    gamma: np.ndarray
    kappa: np.ndarray
    drive_freq: float
    drive_amp: np.ndarray
    unit_mode: str = "dimensionless_g"
    g_si: float | None = None
    drive_freq_si: float | None = None

    def __post_init__(self):
        n = int(self.n_b)
        if n < 2 or n != self.n_b:
            raise ConfigError(f"n_b must be an integer >= 2, got {self.n_b!r}")
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("n_b", n)
        set_("omega_b", _vec(self.omega_b, n, "omega_b"))
        set_("omega_a", _vec(self.omega_a, n + 1, "omega_a"))
        set_("gamma", _vec(self.gamma, n, "gamma"))
        set_("kappa", _vec(self.kappa, n + 1, "kappa"))
        set_("drive_amp", _vec(self.drive_amp, max(n // 2 - 1, 0), "drive_amp"))
        set_("kerr_u", float(self.kerr_u))
        set_("g", float(self.g))
        set_("drive_freq", float(self.drive_freq))

    @property
    def index(self) -> ModeIndex:
        return ModeIndex(self.n_b)

    def replace(self, **changes) -> ChainConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ChainConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {f.name for f in dataclasses.fields(cls)
                   if f.default is dataclasses.MISSING} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def to_dimensionless(self) -> ChainConfig:
        """Rescale an SI config so that ``g = 1``; no-op in dimensionless mode."""
        if self.unit_mode == "dimensionless_g":
            return self
        g = self.g
        changes = {k: np.asarray(getattr(self, k)) / g for k in _FREQ_FIELDS}
        changes.update(unit_mode="dimensionless_g", g_si=g, drive_freq_si=self.drive_freq)
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Detunings:
    delta_b: np.ndarray
    delta_a: np.ndarray

    @classmethod
    def from_config(cls, config: ChainConfig) -> Detunings:
        return cls(config.omega_b - config.drive_freq, config.omega_a - config.drive_freq)

    def flat(self) -> np.ndarray:
        """Detunings in flat chain order."""
        n = self.delta_b.size
        out = np.empty(2 * n + 1)
        out[0::2] = self.delta_a
        out[1::2] = self.delta_b
        return out


def detunings(config: ChainConfig) -> Detunings:
    return Detunings.from_config(config)


@dataclass(frozen=True)
class ModeIndex:
    """Bijection between ``(species, i)`` labels and flat chain positions (0-based)."""

    n_b: int

    @property
    def size(self) -> int:
        return 2 * self.n_b + 1

    def a(self, i: int) -> int:
        if not 0 <= i <= self.n_b:
            raise IndexError(f"a_{i} outside 0..{self.n_b}")
        return 2 * i

    def b(self, i: int) -> int:
        if not 1 <= i <= self.n_b:
            raise IndexError(f"b_{i} outside 1..{self.n_b}")
        return 2 * i - 1

    def flat(self, species: str, i: int) -> int:
        if species == "a":
            return self.a(i)
        if species == "b":
            return self.b(i)
        raise ValueError(f"unknown species {species!r}")

    def label(self, k: int) -> tuple[str, int]:
        if not 0 <= k < self.size:
            raise IndexError(k)
        return ("a", k // 2) if k % 2 == 0 else ("b", (k + 1) // 2)

    def parse(self, name: str) -> int:
        """``"b1"`` / ``"a_2"`` style labels to a flat position."""
        s = name.replace("_", "")
        return self.flat(s[0], int(s[1:]))

    @property
    def driven(self) -> np.ndarray:
        """Flat positions of the Kerr/driven sites a_2, a_4, ..., a_{N-2}."""
        return np.array([2 * (2 * j) for j in range(1, self.n_b // 2)], dtype=int)

    @property
    def b_sites(self) -> np.ndarray:
        return np.arange(1, self.size, 2)

    @property
    def a_sites(self) -> np.ndarray:
        return np.arange(0, self.size, 2)

    def positions(self) -> np.ndarray:
        """Sites mapped onto ``[0, 1]``; ``a_0`` at 0 and ``a_N`` at 1."""
        return np.arange(self.size) / (self.size - 1)


@dataclass(frozen=True)
class DriveSpec:
    power: float
    drive_freq: float
    kappa: float
    hbar: float = HBAR


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self):
        return self.ok

    def raise_if_failed(self):
        if self.errors:
            raise ConfigError("invalid config: " + "; ".join(self.errors))


def validate(config: ChainConfig) -> ValidationReport:
    rep = ValidationReport()
    n = config.n_b
    if n % 2:
        rep.errors.append("n_b must be even")
    if config.kerr_u > 0:
        rep.errors.append("U must satisfy U = -|U| (kerr_u <= 0)")
    if not config.g > 0:
        rep.errors.append("g must be positive")
    if np.any(config.gamma < 0) or np.any(config.kappa < 0):
        rep.errors.append("decay rates must be non-negative")
    if np.any(config.drive_amp < 0):
        rep.errors.append("drive amplitudes must be non-negative")
    if config.unit_mode not in UNIT_MODES:
        rep.errors.append(f"unit_mode must be one of {UNIT_MODES}")
    for name in ("omega_b", "omega_a", "gamma", "kappa", "drive_amp"):
        if not np.all(np.isfinite(getattr(config, name))):
            rep.errors.append(f"{name} must be finite")
    return rep


def require_valid(config: ChainConfig) -> ChainConfig:
    validate(config).raise_if_failed()
    return config


def rabi_from_power(d: DriveSpec) -> float:
    """Rabi amplitude ``sqrt(2 kappa P / (hbar omega_d))`` of a drive of power ``P``."""
    if not d.drive_freq > 0:
        raise ConfigError("drive_freq must be positive")
    if d.power < 0 or d.kappa < 0:
        raise ConfigError("power and kappa must be non-negative")
    return float(np.sqrt(2.0 * d.kappa * d.power / (d.hbar * d.drive_freq)))


def rabi_amplitudes(config: ChainConfig, power: float) -> np.ndarray:
    """Per-site Rabi amplitudes for drive power ``power`` (W), in the config's units."""
    drv = config.index.driven // 2
    kappa = config.kappa[drv]
    if config.unit_mode == "si":
        return np.array([rabi_from_power(DriveSpec(power, config.drive_freq, k)) for k in kappa])
    if config.g_si is None or config.drive_freq_si is None:
        raise ConfigError("power control in dimensionless mode needs g_si and drive_freq_si")
    return np.array([
        rabi_from_power(DriveSpec(power, config.drive_freq_si, k * config.g_si)) / config.g_si
        for k in kappa
    ])


def load_config(path) -> ChainConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return ChainConfig.from_dict(data)


def save_config(config: ChainConfig, path):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


# --- mean-field equations ------------------------------------------------------

def pack_mean_field(config: ChainConfig, det: Detunings | None = None):
    """Per-site kernel arrays ``(diag, g, kerr, drive)`` for the mean-field equations."""
    det = det or detunings(config)
    idx = config.index
    loss = np.empty(idx.size)
    loss[0::2] = config.kappa
    loss[1::2] = config.gamma
    diag = -1j * (det.flat() - 1j * loss)
    kerr = np.zeros(idx.size)
    drive = np.zeros(idx.size)
    kerr[idx.driven] = 2.0 * config.kerr_u
    drive[idx.driven] = config.drive_amp
    return diag, config.g, kerr, drive


def mean_field_rhs(config: ChainConfig, det: Detunings | None, state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.shape != (config.index.size,):
        raise ShapeError(f"state must have length {config.index.size}, got {state.shape}")
    return kernels.rhs(state, *pack_mean_field(config, det))


def loss_vector(config: ChainConfig) -> np.ndarray:
    loss = np.empty(config.index.size)
    loss[0::2] = config.kappa
    loss[1::2] = config.gamma
    return loss


def hopping_matrix(n_sites: int, g: float) -> np.ndarray:
    h = np.zeros((n_sites, n_sites))
    i = np.arange(n_sites - 1)
    h[i, i + 1] = h[i + 1, i] = g
    return h


# --- fluctuation Hamiltonian ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Doubled matrix ``[[A, B], [B*, A*]]`` in the ``[Y, Y*]`` basis.

    ``H = 1/2 Psi^dag matrix Psi`` with ``Psi = (Y, Y^dag)``, so the anomalous
    block carries ``2 U (a_s)^2`` on Kerr sites.  With losses, ``-i*loss`` is on
    the upper diagonal and ``+i*loss`` on the lower one; ``dynamical_matrix``
    then generates ``dPsi/dt = -i D Psi``.
    """

    matrix: np.ndarray
    with_losses: bool = False

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def normal(self) -> np.ndarray:
        n = self.n_sites
        return self.matrix[:n, :n]

    @property
    def anomalous(self) -> np.ndarray:
        n = self.n_sites
        return self.matrix[:n, n:]

    def dynamical_matrix(self) -> np.ndarray:
        n = self.n_sites
        out = self.matrix.copy()
        out[n:] *= -1
        return out

    def jacobian(self) -> np.ndarray:
        """Linearized mean-field Jacobian ``-i D``."""
        return -1j * self.dynamical_matrix()

    def bdg_defect(self) -> float:
        """Largest violation of the particle-hole block structure (lossless forms)."""
        n = self.n_sites
        A, B = self.normal, self.anomalous
        C, D = self.matrix[n:, :n], self.matrix[n:, n:]
        return float(max(np.abs(A - A.conj().T).max(), np.abs(B - B.T).max(),
                         np.abs(C - B.conj()).max(), np.abs(D - A.conj()).max()))

    def symplectic_spectrum(self):
        """Eigen-decomposition of the lossless dynamics, split by symplectic norm.

        Returns ``(freqs, vecs)`` for the ``n_sites`` positive-norm modes, ordered by
        frequency; ``vecs`` columns are normalized so that the particle part minus
        the hole part has unit norm.  Frequencies are complex when the form is
        dynamically unstable.
        """
        n = self.n_sites
        w, v = np.linalg.eig(self.dynamical_matrix())
        norms = (np.abs(v[:n]) ** 2).sum(0) - (np.abs(v[n:]) ** 2).sum(0)
        order = np.argsort(-norms)[:n]
        w, v, norms = w[order], v[:, order], norms[order]
        scale = np.sqrt(np.where(np.abs(norms) > 1e-300, np.abs(norms), 1.0))
        v = v / scale
        o = np.argsort(w.real)
        return w[o], v[:, o]


def build_fluctuation_hamiltonian(config: ChainConfig, det: Detunings | None, ss,
                                  with_losses: bool = False) -> QuadraticForm:
    """Bilinear fluctuation Hamiltonian about the steady state ``ss``."""
    if ss is None:
        raise PreconditionError("a converged steady state is required")
    det = det or detunings(config)
    idx = config.index
    z = np.asarray(getattr(ss, "flat", ss), dtype=complex)
    if z.shape != (idx.size,):
        raise ShapeError(f"steady state must have length {idx.size}")
    A = hopping_matrix(idx.size, config.g).astype(complex)
    diag = det.flat().astype(complex)
    drv = idx.driven
    diag[drv] += 4.0 * config.kerr_u * np.abs(z[drv]) ** 2
    A[np.diag_indices(idx.size)] = diag
    B = np.zeros_like(A)
    B[drv, drv] = 2.0 * config.kerr_u * z[drv] ** 2
    upper = A - 1j * np.diag(loss_vector(config)) if with_losses else A
    H = np.block([[upper, B], [B.conj(), upper.conj()]])
    return QuadraticForm(H, with_losses)
