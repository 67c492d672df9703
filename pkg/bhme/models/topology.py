"""Binary gating-tree shapes.

Trees are stored in canonical form: at every gate the child with fewer
leaves goes left, and children with equal leaf counts are ordered by their
canonical string. Expert leaves are numbered left to right and gates in
pre-order of the canonical tree, both 0-based. Taking the left branch of
gate i corresponds to z_i = 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Union

import numpy as np

from bhme.core.errors import InvalidArgumentError, StructuralError

DEFAULT_MAX_EXPERTS = 8


@dataclass(frozen=True)
class ExpertLeaf:
    index: int = 0


@dataclass(frozen=True)
class GateNode:
    left: Node
    right: Node
    index: int = 0


Node = Union[ExpertLeaf, GateNode]


class Branch(str, enum.Enum):
    left = "left"  # z_i = 1
    right = "right"  # z_i = 0


@dataclass(frozen=True)
class PathStep:
    gate_id: int
    branch: Branch


def _leaf_count(node: Node) -> int:
    if isinstance(node, ExpertLeaf):
        return 1
    return _leaf_count(node.left) + _leaf_count(node.right)


def _shape_string(node: Node) -> str:
    if isinstance(node, ExpertLeaf):
        return "E"
    return f"({_shape_string(node.left)},{_shape_string(node.right)})"


def _check_node(node: Any) -> None:
    if isinstance(node, ExpertLeaf):
        return
    if not isinstance(node, GateNode):
        raise StructuralError(f"Expected a gate or expert node, got {node!r}")
    if node.left is None or node.right is None:
        raise StructuralError("Every gate must have exactly two children")
    _check_node(node.left)
    _check_node(node.right)


def _canonical_shape(node: Node) -> Node:
    """Rebuild ``node`` with children ordered by (leaf count, shape string)."""
    if isinstance(node, ExpertLeaf):
        return ExpertLeaf()
    left = _canonical_shape(node.left)
    right = _canonical_shape(node.right)
    if (_leaf_count(right), _shape_string(right)) < (
        _leaf_count(left),
        _shape_string(left),
    ):
        left, right = right, left
    return GateNode(left, right)


def _number(node: Node, counters: list[int]) -> Node:
    """Assign pre-order gate indices and left-to-right expert indices."""
    if isinstance(node, ExpertLeaf):
        leaf = ExpertLeaf(counters[1])
        counters[1] += 1
        return leaf
    gate_index = counters[0]
    counters[0] += 1
    left = _number(node.left, counters)
    right = _number(node.right, counters)
    return GateNode(left, right, gate_index)


@dataclass(frozen=True)
class TreeTopology:
    """A canonical binary HME tree. Build it with :func:`canonicalize`."""

    root: Node
    gates: tuple[GateNode, ...] = field(init=False, repr=False, compare=False)
    experts: tuple[ExpertLeaf, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gates: list[GateNode] = []
        experts: list[ExpertLeaf] = []

        def walk(node: Node):
            if isinstance(node, ExpertLeaf):
                experts.append(node)
            else:
                gates.append(node)
                walk(node.left)
                walk(node.right)

        walk(self.root)
        object.__setattr__(self, "gates", tuple(gates))
        object.__setattr__(self, "experts", tuple(experts))

    @property
    def num_experts(self) -> int:
        return len(self.experts)

    @property
    def num_gates(self) -> int:
        return len(self.gates)

    @property
    def shape(self) -> str:
        """Compact string form, e.g. ``(E,(E,E))``."""
        return _shape_string(self.root)

    @cached_property
    def path_signs(self) -> np.ndarray:
        """M x G matrix: +1 where expert j is left of gate i, -1 right, 0 off-path."""
        signs = np.zeros((self.num_experts, self.num_gates))
        for expert in self.experts:
            for step in path_to_expert(self, expert.index):
                signs[expert.index, step.gate_id] = (
                    1.0 if step.branch is Branch.left else -1.0
                )
        return signs

    @cached_property
    def left_mask(self) -> np.ndarray:
        return (self.path_signs > 0).astype(float)

    @cached_property
    def right_mask(self) -> np.ndarray:
        return (self.path_signs < 0).astype(float)

    def depth(self, expert_id: int) -> int:
        return len(path_to_expert(self, expert_id))

    def to_nested(self) -> dict:
        """Nested form: gates as ``{"gate": {"left": ..., "right": ...}}``."""

        def encode(node: Node) -> dict:
            if isinstance(node, ExpertLeaf):
                return {"expert": node.index}
            return {"gate": {"left": encode(node.left), "right": encode(node.right)}}

        return encode(self.root)

    def __str__(self) -> str:
        return self.shape


def canonicalize(tree: TreeTopology | Node) -> TreeTopology:
    """Return the canonical representative of a tree's mirror class.

    Two trees are mirror-equivalent iff their canonical forms are equal.
    Idempotent; expert and gate indices are reassigned.
    """
    root = tree.root if isinstance(tree, TreeTopology) else tree
    _check_node(root)
    return TreeTopology(_number(_canonical_shape(root), [0, 0]))


def from_nested(document: Any) -> TreeTopology:
    """Parse the nested JSON form; expert labels in the input are ignored."""

    def decode(obj: Any) -> Node:
        if not isinstance(obj, dict) or len(obj) != 1:
            raise StructuralError(f"Malformed topology node: {obj!r}")
        if "expert" in obj:
            return ExpertLeaf()
        gate = obj.get("gate")
        if not isinstance(gate, dict) or set(gate) != {"left", "right"}:
            raise StructuralError("Every gate must have exactly two children")
        return GateNode(decode(gate["left"]), decode(gate["right"]))

    return canonicalize(decode(document))


def parse_shape(text: str) -> TreeTopology:
    """Parse the compact form, e.g. ``(E,(E,E))``; whitespace is ignored."""
    source = "".join(text.split())
    pos = 0

    def parse() -> Node:
        nonlocal pos
        if pos >= len(source):
            raise StructuralError(f"Unexpected end of topology string {text!r}")
        if source[pos] == "E":
            pos += 1
            return ExpertLeaf()
        if source[pos] != "(":
            raise StructuralError(f"Unexpected {source[pos]!r} at {pos} in {text!r}")
        pos += 1
        left = parse()
        if pos >= len(source) or source[pos] != ",":
            raise StructuralError(f"Gate needs two children in {text!r}")
        pos += 1
        right = parse()
        if pos >= len(source) or source[pos] != ")":
            raise StructuralError(f"Gate needs exactly two children in {text!r}")
        pos += 1
        return GateNode(left, right)

    root = parse()
    if pos != len(source):
        raise StructuralError(f"Trailing characters in topology string {text!r}")
    return canonicalize(root)


def _shapes(num_leaves: int, memo: dict[int, list[Node]]) -> list[Node]:
    if num_leaves in memo:
        return memo[num_leaves]
    result: list[Node] = []
    for k in range(1, num_leaves // 2 + 1):
        smaller = _shapes(k, memo)
        larger = _shapes(num_leaves - k, memo)
        for a_pos, a in enumerate(smaller):
            # equal-size halves: keep one ordering of each unordered pair
            start = a_pos if k == num_leaves - k else 0
            for b in larger[start:]:
                result.append(GateNode(a, b))
    memo[num_leaves] = result
    return result


def enumerate_topologies(
    num_experts: int, max_experts: int = DEFAULT_MAX_EXPERTS
) -> list[TreeTopology]:
    """All full binary trees with ``num_experts`` leaves, one per mirror class.

    The count follows the Wedderburn-Etherington numbers 1, 1, 1, 2, 3, 6, 11, 23.
    """
    if not 1 <= num_experts <= max_experts:
        raise InvalidArgumentError(
            f"num_experts must be in 1..{max_experts}, got {num_experts}"
        )
    memo: dict[int, list[Node]] = {1: [ExpertLeaf()]}
    trees = [canonicalize(node) for node in _shapes(num_experts, memo)]
    return sorted(trees, key=lambda tree: tree.shape)


def balanced_topology(num_experts: int) -> TreeTopology:
    """The most balanced tree with ``num_experts`` leaves (any size >= 1)."""
    if num_experts < 1:
        raise InvalidArgumentError(f"num_experts must be >= 1, got {num_experts}")

    def build(n: int) -> Node:
        if n == 1:
            return ExpertLeaf()
        return GateNode(build(n // 2), build(n - n // 2))

    return canonicalize(build(num_experts))


def path_to_expert(tree: TreeTopology, expert_id: int) -> list[PathStep]:
    """Root-to-leaf gate steps for ``expert_id``."""
    if not 0 <= expert_id < tree.num_experts:
        raise InvalidArgumentError(
            f"expert_id must be in 0..{tree.num_experts - 1}, got {expert_id}"
        )

    def find(node: Node, trail: list[PathStep]) -> list[PathStep] | None:
        if isinstance(node, ExpertLeaf):
            return trail if node.index == expert_id else None
        return find(node.left, trail + [PathStep(node.index, Branch.left)]) or find(
            node.right, trail + [PathStep(node.index, Branch.right)]
        )

    return find(tree.root, []) or []


def zeta_indicator(tree: TreeTopology, z: Any, expert_id: int) -> int:
    """Product of path-aligned gate variables: z_i on left steps, 1 - z_i on right."""
    z = np.asarray(z, dtype=int).reshape(-1)
    if z.shape[0] != tree.num_gates:
        raise StructuralError(
            f"Assignment has {z.shape[0]} values for {tree.num_gates} gates"
        )
    value = 1
    for step in path_to_expert(tree, expert_id):
        bit = int(z[step.gate_id])
        value *= bit if step.branch is Branch.left else 1 - bit
    return value
