"""Small-signal stability certificates for multi-microgrid networks."""

__version__ = "0.1.0"

from .certificates import (
    CertReport,
    certify_lossy,
    certify_structure_preserving,
    certify_topology,
    stability_index,
)
from .control import ControlPlan, TuneBounds, search_line_switching, stabilize, tune_distributed, tune_node
from .kron import check_assumption1, check_assumption2, eliminate_node, kron_reduce, schur_reduce
from .netmodel import InterfaceParams, Line, Network, Node, build_admittance, load_network, save_network
from .powerflow import Equilibrium, check_omega_region, flow_active, flow_reactive, solve_equilibrium
from .simulate import SwingSystem, VSISystem, integrate, vsi_to_swing
from .spectral import Spectrum, build_jacobian, build_laplacian, classify_spectrum, eigenvalues, pencil_residual
from .synth import SynthConfig, generate, generate_case

__all__ = [name for name in dir() if not name.startswith("_")]
