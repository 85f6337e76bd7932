"""Patch-based reconstruction of a large observable region.

When the tomography machinery can only ingest ``M`` nodes at a time, the
observable set is split into patches of at most ``M // 2`` nodes and every
patch pair is probed in turn: estimate the combination submatrix on the
union of the two patches, classify its pairs, and merge the decisions into
a growing picture of the region.  Pairs internal to a patch are probed once
per partner patch, so a tie-break policy settles repeat appearances.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .dynamics import CorrelationSet, SimConfig, simulate_and_accumulate
from .errors import ConfigError
from .graphs import Graph, NodeSet
from .inference import classify_kmeans2, granger_truncated, symmetrize
from .weights import CombinationMatrix


class TieBreak(Enum):
    FIRST = "first"
    AND = "and"


class PairStatus(Enum):
    CONNECTED = "connected"
    DISCONNECTED = "disconnected"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class PatchPlan:
    """Disjoint patches covering the observable region."""

    patches: tuple[NodeSet, ...]
    probe_limit: int

    def __post_init__(self):
        if self.probe_limit < 4:
            raise ValueError(
                f"the probe limit must be at least 4, got {self.probe_limit}"
            )
        if not self.patches:
            raise ValueError("a plan needs at least one patch")
        seen: set[int] = set()
        cap = self.probe_limit // 2
        for patch in self.patches:
            if len(patch) == 0:
                raise ValueError("patches must be nonempty")
            if len(patch) > cap:
                raise ValueError(
                    f"patch of size {len(patch)} exceeds the per-patch cap {cap}"
                )
            overlap = seen & set(patch.members)
            if overlap:
                raise ValueError(f"patches overlap on nodes {sorted(overlap)}")
            seen.update(patch.members)

    def observable(self) -> NodeSet:
        return NodeSet.of(m for patch in self.patches for m in patch)

    @property
    def patch_count(self) -> int:
        return len(self.patches)


def make_patches(s: NodeSet, m: int) -> PatchPlan:
    """Slice ``s`` into consecutive blocks of ``m // 2`` nodes.

    The last block may be smaller.  ``m`` must be at least 4 so a patch
    union always contains two nodes or more per patch.
    """
    if m < 4:
        raise ValueError(f"the probe limit must be at least 4, got {m}")
    if len(s) == 0:
        raise ValueError("cannot partition an empty observable set")
    cap = m // 2
    members = s.members
    blocks = [
        NodeSet(members[i : i + cap]) for i in range(0, len(members), cap)
    ]
    return PatchPlan(tuple(blocks), m)


@dataclass
class ExperimentRecord:
    """One probed patch pair and the reconstruction state it left behind."""

    index: int
    patch_a: int
    patch_b: int
    union: NodeSet
    subgraph: Graph
    pairs_decided: int
    distance: float | None


class ReconstructionState:
    """Pair decisions over an observable set, filled in experiment by experiment."""

    def __init__(self, s: NodeSet):
        self.s = s
        self.status: dict[tuple[int, int], PairStatus] = {
            (s[i], s[j]): PairStatus.UNDECIDED
            for i in range(len(s))
            for j in range(i + 1, len(s))
        }
        self.experiment_log: list[ExperimentRecord] = []

    def decided_count(self) -> int:
        return sum(1 for v in self.status.values() if v is not PairStatus.UNDECIDED)

    def absorb(self, union: NodeSet, decided: Graph, tiebreak: TieBreak) -> None:
        """Merge the classified subgraph on ``union`` into the pair map.

        Under ``FIRST`` the earliest classification of a pair wins; under
        ``AND`` a pair stays connected only while every experiment that
        sees it votes connected.
        """
        if decided.n != len(union):
            raise ValueError("decision graph size does not match the union")
        for p in range(len(union)):
            for q in range(p + 1, len(union)):
                key = (union[p], union[q])
                if key not in self.status:
                    raise ValueError(f"pair {key} lies outside the observable set")
                vote = (
                    PairStatus.CONNECTED
                    if decided.adjacency[p, q]
                    else PairStatus.DISCONNECTED
                )
                cur = self.status[key]
                if cur is PairStatus.UNDECIDED:
                    self.status[key] = vote
                elif tiebreak is TieBreak.AND and vote is PairStatus.DISCONNECTED:
                    self.status[key] = PairStatus.DISCONNECTED

    def estimated_graph(self) -> Graph:
        """Current decisions as a graph on ``s``; undecided pairs stay open."""
        k = len(self.s)
        adj = np.eye(k, dtype=bool)
        pos = {node: i for i, node in enumerate(self.s)}
        for (u, v), st in self.status.items():
            if st is PairStatus.CONNECTED:
                adj[pos[u], pos[v]] = True
                adj[pos[v], pos[u]] = True
        return Graph(adj, validate=False)

    def undecided_pairs(self) -> list[tuple[int, int]]:
        return [k for k, v in self.status.items() if v is PairStatus.UNDECIDED]


def graph_distance(g_true: Graph, g_est: Graph) -> float:
    """Fraction of node pairs on which two graphs disagree.

    ``(2 / (S (S - 1))) * sum_{i<j} |g_ij - g_hat_ij|``; zero when the
    graphs match.  Both graphs must have the same order.
    """
    if g_true.n != g_est.n:
        raise ValueError(
            f"graph orders differ ({g_true.n} != {g_est.n}); cannot compare"
        )
    k = g_true.n
    if k < 2:
        return 0.0
    diff = np.triu(g_true.adjacency ^ g_est.adjacency, 1).sum()
    return 2.0 * float(diff) / (k * (k - 1))


def run_patch_catch(
    a: CombinationMatrix,
    plan: PatchPlan,
    cfg: SimConfig,
    tiebreak: TieBreak = TieBreak.FIRST,
    truth: Graph | None = None,
    shared_trajectory: bool = True,
) -> ReconstructionState:
    """Probe every patch pair and assemble the observable region's graph.

    Pairs ``(i, j)`` of patch indices are visited with ``i`` ascending and
    ``j < i``.  Each experiment estimates empirical correlations on the
    patch union, applies the truncated estimator and the 2-means
    classifier, and merges the outcome.  With ``shared_trajectory`` one
    long simulation covers the whole observable set and every experiment
    reads its correlations off that single run; otherwise each experiment
    simulates afresh with a seed derived from ``(cfg.seed, experiment)``.

    ``truth`` (a graph on the plan's observable set, in set order) enables
    the per-experiment distance trace.
    """
    s_all = plan.observable()
    s_all.check_within(a.n)
    if truth is not None and truth.n != len(s_all):
        raise ValueError("truth graph must cover exactly the observable set")
    for i in range(plan.patch_count):
        for j in range(i):
            if len(plan.patches[i]) + len(plan.patches[j]) < 3:
                raise ConfigError(
                    f"patch union ({j}, {i}) has fewer than 3 nodes; "
                    "the classifier cannot operate"
                )

    state = ReconstructionState(s_all)
    shared: CorrelationSet | None = None
    if shared_trajectory and plan.patch_count > 1:
        shared = simulate_and_accumulate(a, cfg, s_all)

    exp_index = 0
    for i in range(plan.patch_count):
        for j in range(i):
            union = plan.patches[j].union(plan.patches[i])
            if shared is not None:
                corr = shared.restrict(union)
            else:
                per_seed = int(
                    np.random.SeedSequence([int(cfg.seed), exp_index]).generate_state(
                        1, np.uint64
                    )[0]
                )
                corr = simulate_and_accumulate(
                    a, replace(cfg, seed=per_seed), union
                )
            est = symmetrize(granger_truncated(corr))
            decided = classify_kmeans2(est)
            state.absorb(union, decided, tiebreak)
            dist = None
            if truth is not None:
                dist = graph_distance(truth, state.estimated_graph())
            state.experiment_log.append(
                ExperimentRecord(
                    exp_index, j, i, union, decided, state.decided_count(), dist
                )
            )
            exp_index += 1
    return state


def experiment_log_csv(state: ReconstructionState) -> str:
    """Log as ``experiment_index,patch_a,patch_b,pairs_decided,distance`` CSV."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(
        ["experiment_index", "patch_a", "patch_b", "pairs_decided", "distance"]
    )
    for rec in state.experiment_log:
        writer.writerow(
            [
                rec.index,
                rec.patch_a,
                rec.patch_b,
                rec.pairs_decided,
                "" if rec.distance is None else repr(rec.distance),
            ]
        )
    return out.getvalue()
