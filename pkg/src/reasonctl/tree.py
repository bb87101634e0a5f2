"""Tree of partial reasoning trajectories with an explicit active frontier.

Nodes move through a one-way lifecycle (active -> pruned / repaired /
terminal / abstained); the frontier is the set of active nodes with no
active children and is kept consistent after every mutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .oracle import StepScores, step_reward


class Strategy(str, Enum):
    """Reasoning mode a generated thought was produced under."""

    DIRECT = "direct"
    DECOMPOSE = "decompose"
    VERIFY = "verify"


STRATEGY_ORDER = (Strategy.DIRECT, Strategy.DECOMPOSE, Strategy.VERIFY)


class NodeStatus(str, Enum):
    ACTIVE = "active"
    PRUNED = "pruned"
    REPAIRED = "repaired"
    TERMINAL = "terminal"
    ABSTAINED = "abstained"


# status -> statuses it may transition to
_LEGAL_TRANSITIONS: dict[NodeStatus, frozenset[NodeStatus]] = {
    NodeStatus.ACTIVE: frozenset(
        {NodeStatus.PRUNED, NodeStatus.REPAIRED, NodeStatus.TERMINAL, NodeStatus.ABSTAINED}
    ),
    NodeStatus.REPAIRED: frozenset({NodeStatus.ACTIVE}),
    NodeStatus.PRUNED: frozenset(),
    NodeStatus.TERMINAL: frozenset(),
    NodeStatus.ABSTAINED: frozenset(),
}


class TreeError(Exception):
    """Base error for reasoning-tree misuse."""


class UnknownNodeError(TreeError):
    pass


class IllegalTransitionError(TreeError):
    pass


class ClosedNodeError(TreeError):
    """Raised when expanding under a pruned or terminal parent."""


class DepthLimitError(TreeError):
    pass


@dataclass
class ReasoningNode:
    """One thought in the tree plus its control metadata."""

    id: int
    parent: int | None
    depth: int
    thought: str
    strategy: Strategy | None
    status: NodeStatus = NodeStatus.ACTIVE
    visit_count: int = 0
    step_scores: StepScores | None = None
    value_cache: float | None = None
    confidence_cache: float | None = None
    created_by_repair: bool = False

    @property
    def is_root(self) -> bool:
        return self.parent is None


@dataclass
class Trajectory:
    """Root-child-to-leaf path together with per-step rewards."""

    node_ids: list[int]
    rewards: list[float]

    def __post_init__(self) -> None:
        if not self.node_ids:
            raise ValueError("trajectory must contain at least one step")
        if len(self.rewards) != len(self.node_ids):
            raise ValueError("rewards must align with steps")

    @property
    def length(self) -> int:
        return len(self.node_ids)


@dataclass
class Frontier:
    """Active nodes with no active children, plus the running selection count."""

    node_ids: set[int] = field(default_factory=set)
    total_selections: int = 0


class ReasoningTree:
    """Single-writer store for the evolving reasoning tree.

    All mutations happen on the controller's decision thread; reads of a
    snapshot are safe to share.
    """

    def __init__(self, root_thought: str = "", max_depth: int = 12):
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.max_depth = max_depth
        self.nodes: dict[int, ReasoningNode] = {}
        self.children: dict[int, list[int]] = {}
        self.frontier = Frontier()
        self._next_id = 0
        root = ReasoningNode(id=self._take_id(), parent=None, depth=0,
                             thought=root_thought, strategy=None)
        self.nodes[root.id] = root
        self.children[root.id] = []
        self.frontier.node_ids.add(root.id)

    @property
    def root_id(self) -> int:
        return 0

    def _take_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def node(self, node_id: int) -> ReasoningNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"no node with id {node_id}") from None

    # -- mutations ---------------------------------------------------------

    def add_child(self, parent: int, thought: str, strategy: Strategy,
                  created_by_repair: bool = False) -> int:
        parent_node = self.node(parent)
        if parent_node.status in (NodeStatus.PRUNED, NodeStatus.TERMINAL):
            raise ClosedNodeError(
                f"cannot expand node {parent} with status {parent_node.status.value}"
            )
        depth = parent_node.depth + 1
        if depth > self.max_depth:
            raise DepthLimitError(f"depth {depth} exceeds cap {self.max_depth}")
        child = ReasoningNode(id=self._take_id(), parent=parent, depth=depth,
                              thought=thought, strategy=strategy,
                              created_by_repair=created_by_repair)
        self.nodes[child.id] = child
        self.children[child.id] = []
        self.children[parent].append(child.id)
        self.frontier.node_ids.discard(parent)
        self.frontier.node_ids.add(child.id)
        return child.id

    def set_status(self, node_id: int, status: NodeStatus) -> None:
        node = self.node(node_id)
        if status not in _LEGAL_TRANSITIONS[node.status]:
            raise IllegalTransitionError(
                f"node {node_id}: {node.status.value} -> {status.value} is not allowed"
            )
        # pruning applies to leaves only, so a pruned subtree can never exist
        if status is NodeStatus.PRUNED and self.children[node_id]:
            raise IllegalTransitionError(f"node {node_id} has children and cannot be pruned")
        node.status = status
        self._refresh_frontier_around(node_id)

    def record_visit(self, node_id: int) -> None:
        self.node(node_id).visit_count += 1

    # -- queries -----------------------------------------------------------

    def path_ids(self, leaf: int) -> list[int]:
        """Node ids from the root's child down to ``leaf`` (excludes the root)."""
        node = self.node(leaf)
        path: list[int] = []
        while node.parent is not None:
            path.append(node.id)
            node = self.node(node.parent)
        path.reverse()
        return path

    def path_thoughts(self, leaf: int) -> list[str]:
        return [self.nodes[nid].thought for nid in self.path_ids(leaf)]

    def path_to_root(self, leaf: int, weights: tuple[float, float, float] | None = None) -> Trajectory:
        """Trajectory for ``leaf``; rewards come from cached step scores (0 when unscored)."""
        ids = self.path_ids(leaf)
        if not ids:
            raise TreeError("the root itself is not a trajectory")
        rewards = []
        for nid in ids:
            scores = self.nodes[nid].step_scores
            if scores is None:
                rewards.append(0.0)
            elif weights is None:
                rewards.append(step_reward(scores))
            else:
                rewards.append(step_reward(scores, weights))
        return Trajectory(node_ids=ids, rewards=rewards)

    def repairs_along_path(self, leaf: int) -> int:
        return sum(1 for nid in self.path_ids(leaf) if self.nodes[nid].created_by_repair)

    def is_leaf(self, node_id: int) -> bool:
        return not self.children[self.node(node_id).id]

    def leaves(self) -> list[int]:
        return [nid for nid in self.nodes if not self.children[nid]]

    def best_surviving(self) -> tuple[int, float] | None:
        """Highest-value non-pruned leaf with a cached value; ties go to the lower id."""
        best: tuple[int, float] | None = None
        for nid in sorted(self.leaves()):
            node = self.nodes[nid]
            if node.status is NodeStatus.PRUNED or node.value_cache is None:
                continue
            if best is None or node.value_cache > best[1]:
                best = (nid, node.value_cache)
        return best

    # -- frontier maintenance ----------------------------------------------

    def _eligible(self, node_id: int) -> bool:
        node = self.nodes[node_id]
        if node.status is not NodeStatus.ACTIVE:
            return False
        return not any(
            self.nodes[c].status is NodeStatus.ACTIVE for c in self.children[node_id]
        )

    def _refresh_frontier_around(self, node_id: int) -> None:
        affected = [node_id]
        parent = self.nodes[node_id].parent
        if parent is not None:
            affected.append(parent)
        for nid in affected:
            if self._eligible(nid):
                self.frontier.node_ids.add(nid)
            else:
                self.frontier.node_ids.discard(nid)

    def recompute_frontier(self) -> set[int]:
        """Frontier membership derived from scratch (used to cross-check the incremental set)."""
        return {nid for nid in self.nodes if self._eligible(nid)}

    def check_invariants(self) -> None:
        """Raise if connectivity, depth bookkeeping, or the frontier is inconsistent."""
        for nid, node in self.nodes.items():
            if node.parent is None:
                assert nid == self.root_id and node.depth == 0, "root must be node 0 at depth 0"
            else:
                parent = self.nodes[node.parent]
                assert node.depth == parent.depth + 1, f"depth mismatch at {nid}"
                assert nid in self.children[node.parent], f"missing child link for {nid}"
                assert parent.status is not NodeStatus.PRUNED, (
                    f"node {nid} descends from a pruned parent"
                )
            seen: set[int] = set()
            cur: int | None = nid
            while cur is not None:
                assert cur not in seen, f"cycle through {cur}"
                seen.add(cur)
                cur = self.nodes[cur].parent
            assert self.root_id in seen, f"node {nid} is disconnected from the root"
        assert self.frontier.node_ids == self.recompute_frontier(), "frontier out of sync"

    def snapshot(self) -> dict:
        """JSON-friendly dump of all nodes, used by traces and demos."""
        return {
            str(nid): {
                "parent": node.parent,
                "depth": node.depth,
                "strategy": node.strategy.value if node.strategy else None,
                "status": node.status.value,
                "visits": node.visit_count,
                "value": node.value_cache,
                "confidence": node.confidence_cache,
                "repair": node.created_by_repair,
                "thought": node.thought,
            }
            for nid, node in sorted(self.nodes.items())
        }
