"""Point vortices coupled to a gyroscopic spray, with exact signed
Wasserstein distances for comparing particle clouds."""
from .config import ConfigError, SimConfig, parse_config
from .diagnostics import BlobVortex, RigidRotation, hamiltonian, modulated_energy, observables
from .dynamics import CouplingParams, SprayState, integrate, step_rk4, step_split
from .kernels import BlobKernel, biot_savart, blob_stream, blob_velocity, kernel_bounds
from .measures import PhaseAtomCloud, SignedAtomCloud
from .transport import w1_pair, w1_signed, w2_signed, w_p_positive

__version__ = "0.1.0"

__all__ = [
    "BlobKernel",
    "BlobVortex",
    "ConfigError",
    "CouplingParams",
    "PhaseAtomCloud",
    "RigidRotation",
    "SignedAtomCloud",
    "SimConfig",
    "SprayState",
    "biot_savart",
    "blob_stream",
    "blob_velocity",
    "hamiltonian",
    "integrate",
    "kernel_bounds",
    "modulated_energy",
    "observables",
    "parse_config",
    "step_rk4",
    "step_split",
    "w1_pair",
    "w1_signed",
    "w2_signed",
    "w_p_positive",
]
