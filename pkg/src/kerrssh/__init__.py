"""Driven Kerr-bosonic chains: steady states, emergent SSH topology and probe transmission."""
from .errors import (ConfigError, KerrSSHError, NumericalError,  # noqa: F401
                     PreconditionError)
from .kernels import BACKEND  # noqa: F401
from .linearize import (SqueezeParams, SSHModel, effective_ssh, finite_ssh_matrix,  # noqa: F401
                        reduced_hamiltonian, squeeze_params)
from .model import (ChainConfig, Detunings, DriveSpec, ModeIndex, QuadraticForm,  # noqa: F401
                    build_fluctuation_hamiltonian, detunings, load_config, mean_field_rhs,
                    rabi_from_power, validate)
from .spectroscopy import ProbeConfig, TransmissionSpectrum, peak_find, transmission  # noqa: F401
from .steadystate import (CubicReduction, SteadyState, SweepResult,  # noqa: F401
                          build_cubic_reduction, evolve_to_steady, hysteresis_sweep,
                          newton_refine, solve_cubic, stability_check)
from .topology import (BlochSample, EdgeProfile, bloch_h, edge_profile, spectrum,  # noqa: F401
                       winding_number, zero_modes)

__version__ = "0.1.0"
