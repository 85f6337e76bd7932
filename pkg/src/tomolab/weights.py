"""Combination matrices over interaction graphs.

Two left-stochastic-style averaging rules are provided, both scaled so
every row sums to exactly ``rho`` (the stability margin of the diffusion):

* Laplacian: off-diagonal weight ``rho * lam / d_max`` on every edge, with
  the diagonal absorbing the remainder.
* Metropolis: off-diagonal weight ``rho / max(d_i, d_j)`` on every edge.

Degrees count the self-loop, so ``d_i = |N_i|`` with ``i`` included.
Matrices are symmetric, entrywise non-negative, and have spectral radius
at most ``rho``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import TextIO

import numpy as np

from .graphs import Graph, max_degree

TOL = 1e-12


class CombinationRule(Enum):
    LAPLACIAN = "laplacian"
    METROPOLIS = "metropolis"


@dataclass(frozen=True)
class PolicyParams:
    """Averaging rule with its stability margin and Laplacian step size."""

    rule: CombinationRule
    rho: float
    lam: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lam must lie in (0, 1], got {self.lam}")


class CombinationMatrix:
    """Non-negative symmetric weights whose rows sum to at most ``rho_bound``."""

    __slots__ = ("entries", "rho_bound")

    def __init__(self, entries, rho_bound: float, validate: bool = True):
        arr = np.array(entries, dtype=np.float64)
        if validate:
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ValueError("entries must form a square matrix")
            if not 0.0 < rho_bound < 1.0:
                raise ValueError(f"rho_bound must lie in (0, 1), got {rho_bound}")
            if np.abs(arr - arr.T).max() > TOL:
                raise ValueError("combination matrix must be symmetric")
            if arr.min() < -TOL:
                raise ValueError("combination matrix entries must be non-negative")
            if arr.sum(axis=1).max() > rho_bound + TOL:
                raise ValueError(f"row sums must not exceed rho = {rho_bound}")
        arr.setflags(write=False)
        self.entries = arr
        self.rho_bound = float(rho_bound)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def support_graph(self) -> Graph:
        """Graph of strictly positive off-diagonal entries, self-loops forced."""
        adj = self.entries > 0.0
        np.fill_diagonal(adj, True)
        return Graph(adj, validate=False)

    def save_csv(self, dest: str | TextIO) -> None:
        """One matrix row per line, for debugging and external inspection."""
        if isinstance(dest, str):
            with open(dest, "w", encoding="ascii", newline="") as fh:
                self.save_csv(fh)
            return
        writer = csv.writer(dest)
        for row in self.entries:
            writer.writerow([repr(float(x)) for x in row])

    def __repr__(self) -> str:
        return f"CombinationMatrix(n={self.n}, rho_bound={self.rho_bound})"


def laplacian_matrix(g: Graph, params: PolicyParams) -> CombinationMatrix:
    """Laplacian rule: every edge gets ``rho*lam/d_max``; rows sum to ``rho``."""
    if params.rule is not CombinationRule.LAPLACIAN:
        raise ValueError(f"params carry rule {params.rule.value}, expected laplacian")
    adj = g.adjacency
    deg = adj.sum(axis=1)
    dmax = int(deg.max())
    w = (params.rho * params.lam / dmax) * adj.astype(np.float64)
    diag = params.rho * (1.0 - params.lam * (deg - 1) / dmax)
    w[np.diag_indices_from(w)] = diag
    return CombinationMatrix(w, params.rho, validate=False)


def metropolis_matrix(g: Graph, params: PolicyParams) -> CombinationMatrix:
    """Metropolis rule: edge ``(i, j)`` gets ``rho / max(d_i, d_j)``."""
    if params.rule is not CombinationRule.METROPOLIS:
        raise ValueError(f"params carry rule {params.rule.value}, expected metropolis")
    adj = g.adjacency
    deg = adj.sum(axis=1)
    pair_max = np.maximum.outer(deg, deg)
    ratio = adj.astype(np.float64) / pair_max
    np.fill_diagonal(ratio, 0.0)
    w = params.rho * ratio
    w[np.diag_indices_from(w)] = params.rho * (1.0 - ratio.sum(axis=1))
    return CombinationMatrix(w, params.rho, validate=False)


def build_matrix(g: Graph, params: PolicyParams) -> CombinationMatrix:
    if params.rule is CombinationRule.LAPLACIAN:
        return laplacian_matrix(g, params)
    return metropolis_matrix(g, params)


def class_tau(params: PolicyParams) -> float:
    """Universal threshold constant of the rule class.

    ``rho*lam/e`` for Laplacian, ``rho/e`` for Metropolis: on any graph,
    a connected pair scaled by ``N*p`` clears this threshold with high
    probability in the sparse regime.
    """
    if params.rule is CombinationRule.LAPLACIAN:
        return params.rho * params.lam / math.e
    return params.rho / math.e


def check_weight_floor(a: CombinationMatrix, g: Graph, gamma: float) -> bool:
    """Does ``a_ij >= gamma * g_ij / d_max`` hold for every pair ``i != j``?

    Slack down to ``-1e-12`` is tolerated so exact-equality constructions
    (the Laplacian rule with ``gamma = rho*lam``) pass under rounding.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    floor = (gamma / max_degree(g)) * g.adjacency.astype(np.float64)
    slack = a.entries - floor
    off = ~np.eye(a.n, dtype=bool)
    return bool(slack[off].min() >= -TOL)
