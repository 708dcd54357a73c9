"""
Closed-form results for the order-2 tree with a sender auxiliary.

In the symmetry-adapted basis the 9-dimensional one-flip sector splits into
a uniform 4-site chain (coupling J = sqrt(2) j0), a 2-site chain, a
degenerate 2x2 block and the decoupled sender singlet. Choosing
omega = (7 + sqrt 5) J / 2 and tau_n = (2n+1) pi / J leaves a single residual
phase phi_n = sqrt(5) (2n+1) pi, and the three-step protocol reaches the
chosen leaf with fidelity

    F_n = cos^2(phi_n/2) [3 - cos^2(phi_n/2)]^2 / 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .dynamics import ExcitationState
from .network import NetworkSpec, build_bt2_aux

__all__ = [
    "BASIS_ORDER",
    "H4System",
    "ResonancePoint",
    "SymmetryBasis",
    "analytic_fidelity",
    "analytic_infidelity",
    "best_resonance",
    "exact_amplitude_from_phase",
    "exact_fidelity",
    "exact_fidelity_from_phase",
    "exact_infidelity",
    "exact_infidelity_from_phase",
    "fidelity_from_phase",
    "h4_eigensystem",
    "h4_matrix",
    "infidelity_from_phase",
    "phase_mod_2pi",
    "resonance_omega",
    "resonance_params",
    "resonance_point",
    "rotate",
    "sqrt5_convergents",
    "symmetry_basis",
    "transfer_amplitude",
]

SQRT5 = math.sqrt(5.0)

# sqrt(5) as a 60-digit fixed-point integer; phases are reduced mod 2 pi in
# exact integer arithmetic before any float conversion
_SCALE_DIGITS = 60
_SCALE = 10**_SCALE_DIGITS
_SQRT5_FIXED = math.isqrt(5 * _SCALE * _SCALE)


# --------------------------------------------------------------------------
# Symmetry-adapted basis
# --------------------------------------------------------------------------

BASIS_ORDER = ("v0_new", "v1", "v2", "v3", "v4", "v5", "v6", "v7", "s0")


@dataclass(frozen=True)
class SymmetryBasis:
    v0_new: ExcitationState
    v1: ExcitationState
    v2: ExcitationState
    v3: ExcitationState
    v4: ExcitationState
    v5: ExcitationState
    v6: ExcitationState
    v7: ExcitationState
    s0: ExcitationState

    def vectors(self) -> list[ExcitationState]:
        return [getattr(self, name) for name in BASIS_ORDER]

    def matrix(self) -> np.ndarray:
        """Columns are the basis vectors in ``BASIS_ORDER`` (node basis rows)."""
        return np.column_stack([v.amps for v in self.vectors()])


def _bt2_aux_signature() -> tuple[frozenset, frozenset]:
    ref = build_bt2_aux(1.0, 0.0)
    return frozenset(ref.nodes), frozenset(frozenset((a, b)) for a, b, _ in ref.edges)


def symmetry_basis(net: NetworkSpec) -> SymmetryBasis:
    nodes, edges = _bt2_aux_signature()
    if frozenset(net.nodes) != nodes or frozenset(frozenset((a, b)) for a, b, _ in net.edges) != edges:
        raise ValueError("symmetry basis is defined only for the order-2 tree with a sender aux")

    h, q = 0.5, 1.0 / math.sqrt(2.0)

    def state(**amps: float) -> ExcitationState:
        return ExcitationState.from_amplitudes(net.nodes, {_label(k): v for k, v in amps.items()})

    return SymmetryBasis(
        v0_new=state(n00=q, aux=q),
        v1=state(n01=1.0),
        v2=state(n11=q, n12=q),
        v3=state(n21=h, n22=h, n23=h, n24=h),
        v4=state(n11=q, n12=-q),
        v5=state(n21=h, n22=h, n23=-h, n24=-h),
        v6=state(n21=h, n22=-h, n23=h, n24=-h),
        v7=state(n21=h, n22=-h, n23=-h, n24=h),
        s0=state(n00=q, aux=-q),
    )


def _label(key: str) -> str:
    if key == "aux":
        return "(0,0)/aux"
    return f"({key[1]},{key[2]})"


def rotate(h: np.ndarray, basis: SymmetryBasis) -> np.ndarray:
    """Matrix elements <x|H|y> for x, y in ``BASIS_ORDER``."""
    b = basis.matrix()
    return b.conj().T @ h @ b


# --------------------------------------------------------------------------
# Four-site chain
# --------------------------------------------------------------------------


def h4_matrix(omega: float, j: float) -> np.ndarray:
    return np.array(
        [
            [omega, j, 0.0, 0.0],
            [j, omega, j, 0.0],
            [0.0, j, omega, j],
            [0.0, 0.0, j, omega],
        ]
    )


@dataclass(frozen=True)
class H4System:
    omega: float
    j: float
    energies: tuple[float, float, float, float]
    vectors: np.ndarray  # columns e1..e4 over (v0_new, v1, v2, v3)


def h4_eigensystem(omega: float, j: float) -> H4System:
    if j == 0:
        raise ValueError("chain coupling must be nonzero")
    g = (1.0 + SQRT5) / 2.0
    g_bar = (1.0 - SQRT5) / 2.0
    energies = (
        omega - (SQRT5 + 1.0) * j / 2.0,
        omega - (SQRT5 - 1.0) * j / 2.0,
        omega + (SQRT5 - 1.0) * j / 2.0,
        omega + (SQRT5 + 1.0) * j / 2.0,
    )
    big, small = 1.0 / math.sqrt(5.0 + SQRT5), 1.0 / math.sqrt(5.0 - SQRT5)
    vectors = np.column_stack(
        [
            big * np.array([-1.0, g, -g, 1.0]),
            small * np.array([1.0, g_bar, g_bar, 1.0]),
            small * np.array([-1.0, g_bar, -g_bar, 1.0]),
            big * np.array([1.0, g, g, 1.0]),
        ]
    )
    if j < 0:
        # H4(j) = D H4(|j|) D with D = diag(1,-1,1,-1)
        d = np.array([1.0, -1.0, 1.0, -1.0])
        vectors = d[:, None] * vectors
        energies = energies[::-1]
    return H4System(omega, j, energies, vectors)


def resonance_omega(j: float) -> float:
    return (7.0 + SQRT5) * j / 2.0


def resonance_params(n: int, j: float) -> tuple[float, float]:
    """(omega, tau_n) for the n-th resonant instance of a chain with coupling ``j``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if j <= 0:
        raise ValueError("chain coupling must be positive")
    return resonance_omega(j), (2 * n + 1) * math.pi / j


def transfer_amplitude(sys: H4System, tau: float) -> complex:
    """<v3| exp(-i H tau) |v0_new>."""
    e1, e2, e3, e4 = (complex(math.cos(e * tau), -math.sin(e * tau)) for e in sys.energies)
    amp = (SQRT5 - 5.0) / 20.0 * (e1 - e4) + (SQRT5 + 5.0) / 20.0 * (e2 - e3)
    return amp if sys.j > 0 else -amp


# --------------------------------------------------------------------------
# Resonant fidelity
# --------------------------------------------------------------------------


def phase_mod_2pi(n: int) -> float:
    """phi_n = sqrt(5)(2n+1) pi reduced to [0, 2 pi), exact before rounding."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    frac = ((2 * n + 1) * _SQRT5_FIXED) % (2 * _SCALE)
    return math.pi * (frac / _SCALE)


def fidelity_from_phase(phi: float) -> float:
    c = math.cos(phi / 2.0) ** 2
    return 0.25 * c * (3.0 - c) ** 2


def infidelity_from_phase(phi: float) -> float:
    """1 - F = s^2 (3 + s) / 4 with s = sin^2(phi / 2).

    Written in terms of s so that tiny infidelities are not lost to
    cancellation in 1 - F.
    """
    s = math.sin(phi / 2.0) ** 2
    return s * s * (3.0 + s) / 4.0


def analytic_fidelity(n: int) -> float:
    return fidelity_from_phase(phase_mod_2pi(n))


def analytic_infidelity(n: int) -> float:
    return infidelity_from_phase(phase_mod_2pi(n))


# The closed form above is the published one. Carrying the residual
# v0_new/v2 components of the first evolution through the flip and the 2 tau
# evolution (<v3|U(3 tau_n)|v0_new> = (1 + x^3)/2 with x = exp(-i phi_n))
# gives the leaf amplitude (1 + x)(3 + 2x + 3x^2)/16, i.e.
#     F = c (3c - 1)^2 / 4,   c = cos^2(phi/2),
# which is what direct simulation of the three steps reproduces.


def exact_fidelity_from_phase(phi: float) -> float:
    c = math.cos(phi / 2.0) ** 2
    return 0.25 * c * (3.0 * c - 1.0) ** 2


def exact_infidelity_from_phase(phi: float) -> float:
    """1 - F = s (16 - 21 s + 9 s^2) / 4 with s = sin^2(phi / 2)."""
    s = math.sin(phi / 2.0) ** 2
    return s * (16.0 - 21.0 * s + 9.0 * s * s) / 4.0


def exact_amplitude_from_phase(phi: float) -> complex:
    """<1_leaf| V_n |v0_new> at resonance as a function of the residual phase."""
    x = complex(math.cos(phi), -math.sin(phi))
    return (1 + x) * (3 + 2 * x + 3 * x * x) / 16


def exact_fidelity(n: int) -> float:
    return exact_fidelity_from_phase(phase_mod_2pi(n))


def exact_infidelity(n: int) -> float:
    return exact_infidelity_from_phase(phase_mod_2pi(n))


@dataclass(frozen=True)
class ResonancePoint:
    n: int
    tau_n: float
    phi_n: float
    phi_mod_2pi: float
    fidelity: float
    infidelity: float


def resonance_point(n: int, j: float = 1.0) -> ResonancePoint:
    _, tau = resonance_params(n, j)
    return ResonancePoint(
        n=n,
        tau_n=tau,
        phi_n=SQRT5 * (2 * n + 1) * math.pi,
        phi_mod_2pi=phase_mod_2pi(n),
        fidelity=analytic_fidelity(n),
        infidelity=analytic_infidelity(n),
    )


def best_resonance(max_n: int, j: float = 1.0) -> ResonancePoint:
    """Lowest-infidelity resonance with n <= max_n (smallest n on ties)."""
    if max_n < 0:
        raise ValueError("max_n must be nonnegative")
    best_n = min(range(max_n + 1), key=analytic_infidelity)
    return resonance_point(best_n, j)


def sqrt5_convergents() -> Iterator[tuple[int, int]]:
    """Continued-fraction convergents p/q of sqrt(5) = [2; 4, 4, 4, ...]."""
    p_prev, q_prev = 1, 0
    p, q = 2, 1
    while True:
        yield p, q
        p, p_prev = 4 * p + p_prev, p
        q, q_prev = 4 * q + q_prev, q
