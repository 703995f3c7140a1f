"""Charge-parity detection on an offset-charge-tunable transmon: pulse-level
dynamics, randomized benchmarking, and quasiparticle-tunneling statistics."""

from qpd_sim._accel import USE_NUMBA, backend_name
from qpd_sim.qdyn import ParityLabel, TransmonParams

__version__ = "0.1.0"

__all__ = ["ParityLabel", "TransmonParams", "USE_NUMBA", "backend_name", "__version__"]
