"""Resonance sweep over n: the data behind the minimum-infidelity curve."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import (
    analytic_fidelity,
    analytic_infidelity,
    exact_fidelity,
    exact_infidelity,
    phase_mod_2pi,
)
from .dynamics import sector_hamiltonian
from .protocol import bt2_protocol, run_protocol

SWEEP_COLUMNS = (
    "n",
    "tau_n",
    "phi_mod_2pi",
    "F_analytic",
    "F_numeric",
    "infidelity",
    "running_min_infidelity",
    "F_exact",
    "exact_infidelity",
)


@dataclass(frozen=True)
class SweepRow:
    n: int
    tau_n: float
    phi_mod_2pi: float
    F_analytic: float
    F_numeric: float | None
    infidelity: float
    running_min_infidelity: float
    F_exact: float
    exact_infidelity: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


def resonance_sweep(max_n: int, numeric_cap: int = 200, j0: float = 1.0) -> list[SweepRow]:
    """One row per n in 0..max_n; the numeric column is simulated for n <= numeric_cap."""
    if max_n < 0:
        raise ValueError("max_n must be nonnegative")
    if numeric_cap < 0:
        raise ValueError("numeric_cap must be nonnegative")
    j = math.sqrt(2.0) * j0
    net = bt2_protocol(1, 0, j0).network
    h = sector_hamiltonian(net)
    rows = []
    running = math.inf
    for n in range(max_n + 1):
        inf = analytic_infidelity(n)
        running = min(running, inf)
        numeric = None
        if n <= numeric_cap:
            p = bt2_protocol(1, n, j0)
            numeric = run_protocol(p.network, p.initial, p.steps, p.target, h=h).fidelity
        rows.append(
            SweepRow(
                n=n,
                tau_n=(2 * n + 1) * math.pi / j,
                phi_mod_2pi=phase_mod_2pi(n),
                F_analytic=analytic_fidelity(n),
                F_numeric=numeric,
                infidelity=inf,
                running_min_infidelity=running,
                F_exact=exact_fidelity(n),
                exact_infidelity=exact_infidelity(n),
            )
        )
    return rows


def record_points(values: list[float]) -> list[int]:
    """Indices where the running minimum strictly decreases."""
    out = []
    best = math.inf
    for i, v in enumerate(values):
        if v < best:
            out.append(i)
            best = v
    return out


def fit_decay_exponent(values: list[float]) -> float:
    """gamma in min_{n<=N}(1-F_n) ~ c N^-gamma, fitted on the record points n >= 1."""
    pts = [i for i in record_points(values) if i >= 1 and values[i] > 0]
    if len(pts) < 2:
        raise ValueError("need at least two record points to fit an exponent")
    slope, _ = np.polyfit(np.log(pts), np.log([values[i] for i in pts]), 1)
    return float(-slope)
