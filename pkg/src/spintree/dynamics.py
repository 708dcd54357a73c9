"""
Single-excitation dynamics.

Because the XY Hamiltonian conserves total S_z, a state in span{vacuum,
one-flip states} never leaves it. The vacuum is an eigenstate of energy 0,
and on the one-flip states the Hamiltonian is the N x N matrix with the
local fields on the diagonal and the edge couplings off the diagonal.

``full_space_evolve`` builds the full 2^N Pauli-sum Hamiltonian instead and
is kept as an independent check of the sector reduction.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .network import NetworkSpec

__all__ = [
    "ExcitationState",
    "OracleSizeError",
    "SectorHamiltonian",
    "SectorLeakError",
    "evolve",
    "full_space_evolve",
    "full_space_hamiltonian",
    "overlap",
    "sector_hamiltonian",
]

NORM_TOL = 1e-10
ORACLE_MAX_SPINS = 12
LEAK_TOL = 1e-9


class OracleSizeError(ValueError):
    """Network too large for the dense full-space oracle."""


class SectorLeakError(RuntimeError):
    """Full-space evolution left the vacuum + one-flip sector."""


# --------------------------------------------------------------------------
# States
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExcitationState:
    """``vacuum * |0...0> + sum_i amps[i] * |1_i>`` over the labelled nodes."""

    nodes: tuple[str, ...]
    vacuum: complex
    amps: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=complex)
        if amps.shape != (len(self.nodes),):
            raise ValueError(f"expected {len(self.nodes)} amplitudes, got shape {amps.shape}")
        amps.flags.writeable = False
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "vacuum", complex(self.vacuum))
        object.__setattr__(self, "amps", amps)
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalised (norm {self.norm():.3e})")

    @classmethod
    def basis(cls, nodes: Sequence[str], label: str) -> ExcitationState:
        """The one-flip state ``|1_label>``."""
        return cls.from_amplitudes(nodes, {label: 1.0})

    @classmethod
    def vacuum_state(cls, nodes: Sequence[str]) -> ExcitationState:
        return cls(tuple(nodes), 1.0, np.zeros(len(nodes)))

    @classmethod
    def from_amplitudes(
        cls, nodes: Sequence[str], amps: Mapping[str, complex], vacuum: complex = 0.0
    ) -> ExcitationState:
        nodes = tuple(nodes)
        vec = np.zeros(len(nodes), dtype=complex)
        index = {n: i for i, n in enumerate(nodes)}
        for label, a in amps.items():
            if label not in index:
                raise ValueError(f"unknown node {label!r}")
            vec[index[label]] += a
        return cls(nodes, vacuum, vec)

    @property
    def dimension(self) -> int:
        return len(self.nodes)

    def norm(self) -> float:
        return float(np.sqrt(abs(self.vacuum) ** 2 + np.vdot(self.amps, self.amps).real))

    def amplitude(self, label: str) -> complex:
        return complex(self.amps[self.nodes.index(label)])

    def with_amps(self, amps: np.ndarray, vacuum: complex | None = None) -> ExcitationState:
        return ExcitationState(self.nodes, self.vacuum if vacuum is None else vacuum, amps)

    def to_dict(self) -> dict:
        return {
            "vacuum": [self.vacuum.real, self.vacuum.imag],
            "amps": {n: [a.real, a.imag] for n, a in zip(self.nodes, self.amps) if a != 0},
        }

    @classmethod
    def from_dict(cls, nodes: Sequence[str], doc: Mapping) -> ExcitationState:
        def cplx(pair) -> complex:
            re, im = pair
            return complex(float(re), float(im))

        try:
            vacuum = cplx(doc.get("vacuum", [0.0, 0.0]))
            amps = {str(k): cplx(v) for k, v in doc.get("amps", {}).items()}
        except (TypeError, ValueError, AttributeError) as exc:
            raise ValueError(f"malformed state document: {exc}") from exc
        return cls.from_amplitudes(nodes, amps, vacuum)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_same_space(a: ExcitationState, b: ExcitationState) -> None:
    if a.nodes != b.nodes:
        raise ValueError(f"states live on different node sets ({a.dimension} vs {b.dimension} nodes)")


def overlap(a: ExcitationState, b: ExcitationState) -> complex:
    """<a|b>, vacuum component included."""
    _check_same_space(a, b)
    return complex(np.conj(a.vacuum) * b.vacuum + np.vdot(a.amps, b.amps))


# --------------------------------------------------------------------------
# Sector Hamiltonian
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SectorHamiltonian:
    nodes: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.nodes)

    def propagator(self, t: float) -> np.ndarray:
        """exp(-i H t) restricted to the one-flip states."""
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.T

    def expectation(self, state: ExcitationState) -> float:
        return float(np.vdot(state.amps, self.matrix @ state.amps).real)


def sector_hamiltonian(net: NetworkSpec) -> SectorHamiltonian:
    index = {n: i for i, n in enumerate(net.nodes)}
    h = np.diag(np.asarray(net.omegas, dtype=float))
    for a, b, j in net.edges:
        h[index[a], index[b]] = j
        h[index[b], index[a]] = j
    energies, vectors = np.linalg.eigh(h)
    for arr in (h, energies, vectors):
        arr.flags.writeable = False
    return SectorHamiltonian(net.nodes, h, energies, vectors)


def evolve(h: SectorHamiltonian, state: ExcitationState, t: float) -> ExcitationState:
    if state.nodes != h.nodes:
        raise ValueError(
            f"state has {state.dimension} nodes but the Hamiltonian acts on {h.dimension}"
        )
    if not np.isfinite(t):
        raise ValueError(f"evolution time must be finite, got {t}")
    coeffs = h.vectors.T @ state.amps
    amps = h.vectors @ (np.exp(-1j * h.energies * t) * coeffs)
    return state.with_amps(amps)


# --------------------------------------------------------------------------
# Full 2^N oracle
# --------------------------------------------------------------------------

# local basis (down, up); sigma_z|up> = +|up>
_SX = sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex))
_SY = sp.csr_matrix(np.array([[0, 1j], [-1j, 0]], dtype=complex))
_SZ = sp.csr_matrix(np.array([[-1, 0], [0, 1]], dtype=complex))


def _site_op(op: sp.spmatrix, site: int, n: int) -> sp.spmatrix:
    # kron order puts node n-1 first so that node i is bit i of the index
    left = sp.identity(2 ** (n - 1 - site), format="csr", dtype=complex)
    right = sp.identity(2**site, format="csr", dtype=complex)
    return sp.kron(sp.kron(left, op), right, format="csr")


def full_space_hamiltonian(net: NetworkSpec) -> np.ndarray:
    """Dense 2^N Hamiltonian assembled from Pauli products.

    H = sum_edges j/2 (X_a X_b + Y_a Y_b) + sum_nodes omega/2 (Z + 1).
    """
    n = len(net)
    if n > ORACLE_MAX_SPINS:
        raise OracleSizeError(f"full-space oracle supports at most {ORACLE_MAX_SPINS} spins, got {n}")
    index = {label: i for i, label in enumerate(net.nodes)}
    dim = 2**n
    h = sp.csr_matrix((dim, dim), dtype=complex)
    one = sp.identity(dim, format="csr", dtype=complex)
    for a, b, j in net.edges:
        ia, ib = index[a], index[b]
        h = h + 0.5 * j * (
            _site_op(_SX, ia, n) @ _site_op(_SX, ib, n) + _site_op(_SY, ia, n) @ _site_op(_SY, ib, n)
        )
    for i, w in enumerate(net.omegas):
        h = h + 0.5 * w * (_site_op(_SZ, i, n) + one)
    dense = h.toarray()
    if np.abs(dense.imag).max(initial=0.0) > 1e-14:
        raise AssertionError("XY Hamiltonian should be real in the computational basis")
    return dense.real


@functools.lru_cache(maxsize=8)
def _full_spectrum(net: NetworkSpec) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(full_space_hamiltonian(net))


def full_space_evolve(
    net: NetworkSpec, state: ExcitationState, t: float
) -> tuple[ExcitationState, float]:
    """Evolve in the full 2^N space and project back onto the sector.

    Returns the projected state and the norm that ended up outside
    span{vacuum, one-flip states}.
    """
    if state.nodes != net.nodes:
        raise ValueError("state and network have different node sets")
    n = len(net)
    if n > ORACLE_MAX_SPINS:
        raise OracleSizeError(f"full-space oracle supports at most {ORACLE_MAX_SPINS} spins, got {n}")
    energies, vectors = _full_spectrum(net)
    sector = np.array([0] + [1 << i for i in range(n)])

    psi = np.zeros(2**n, dtype=complex)
    psi[sector] = np.concatenate(([state.vacuum], state.amps))
    psi = vectors @ (np.exp(-1j * energies * t) * (vectors.T @ psi))

    inside = psi[sector]
    rest = psi.copy()
    rest[sector] = 0.0
    leak = float(np.linalg.norm(rest))
    if leak > LEAK_TOL:
        raise SectorLeakError(f"{leak:.3e} of the norm left the single-excitation sector")
    return ExcitationState(state.nodes, inside[0], inside[1:]), leak
