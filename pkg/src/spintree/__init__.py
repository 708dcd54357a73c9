"""Quantum state transfer over XY spin trees in the single-excitation sector."""

from .analytic import (
    H4System,
    ResonancePoint,
    SymmetryBasis,
    analytic_fidelity,
    analytic_infidelity,
    best_resonance,
    exact_fidelity,
    exact_infidelity,
    h4_eigensystem,
    resonance_params,
    symmetry_basis,
    transfer_amplitude,
)
from .dynamics import (
    ExcitationState,
    SectorHamiltonian,
    SectorLeakError,
    evolve,
    full_space_evolve,
    overlap,
    sector_hamiltonian,
)
from .network import (
    NetworkSpec,
    Wiring,
    attach_sender_aux,
    attach_singlet_link,
    build_binary_tree,
    build_bt2_aux,
    build_modified_bt2,
    concatenate_trees,
)
from .protocol import (
    Evolve,
    NoPerfectTransferError,
    PhaseFlip,
    TransferReport,
    apply_phase_flip,
    bt2_protocol,
    concatenated_protocol,
    link_transfer_time,
    resonant_switch,
    run_protocol,
    trigger_release,
)

__version__ = "0.1.0"
