"""The placement constraint language.

Programs are CSG trees: ``and`` and ``or`` nodes over constraint leaves.
Four constraint types exist. ``attach`` and ``reachable_by_arm`` take a
direction argument interpreted in the reference object's local frame;
``align`` and ``face`` take none.

Concrete syntax (whitespace insignificant)::

    node := "and(" node "," node ")" | "or(" node "," node ")" | leaf
    leaf := ctype "(" ref ["," dir] ")"
    ctype := "attach" | "reachable_by_arm" | "align" | "face"
    dir := "up" | "down" | "left" | "right"

References are object ids; serialization is canonical (no whitespace),
so ``parse_program(serialize_program(p))`` reproduces ``p`` exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError, ValidationError
from .geometry import DIRECTIONS

CONSTRAINT_TYPES = ("attach", "reachable_by_arm", "align", "face")
DIRECTIONAL_TYPES = ("attach", "reachable_by_arm")

MAX_TREE_DEPTH = 12

_REF_RE = re.compile(r"[A-Za-z0-9_.\-]+")


@dataclass(frozen=True)
class Constraint:
    ctype: str
    reference: str
    direction: str | None = None


@dataclass(frozen=True)
class Leaf:
    constraint: Constraint


@dataclass(frozen=True)
class And:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Or:
    left: "Node"
    right: "Node"


Node = Leaf | And | Or


@dataclass(frozen=True)
class QuerySpec:
    """The object a program places: category, (width, depth), human support."""

    category: str
    size: tuple[float, float]
    holds_humans: bool = False


@dataclass(frozen=True)
class PlacementProgram:
    root: Node
    query: QuerySpec | None = None


# ---------------------------------------------------------------------------
# parsing


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        raise ParseError(message, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, token: str):
        self.skip_ws()
        if not self.text.startswith(token, self.pos):
            self.error(f"expected {token!r}")
        self.pos += len(token)

    def name(self) -> str:
        self.skip_ws()
        match = _REF_RE.match(self.text, self.pos)
        if not match:
            self.error("expected a name")
        self.pos = match.end()
        return match.group(0)

    def node(self) -> Node:
        self.skip_ws()
        start = self.pos
        head = self.name()
        if head in ("and", "or"):
            self.expect("(")
            left = self.node()
            self.expect(",")
            right = self.node()
            self.expect(")")
            return And(left, right) if head == "and" else Or(left, right)
        if head not in CONSTRAINT_TYPES:
            self.pos = start
            self.error(f"unknown constraint type {head!r}")
        self.expect("(")
        reference = self.name()
        direction = None
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == ",":
            self.pos += 1
            direction = self.name()
            if direction not in DIRECTIONS:
                self.error(f"unknown direction {direction!r}")
        self.expect(")")
        if head in DIRECTIONAL_TYPES and direction is None:
            self.error(f"{head} requires a direction")
        if head not in DIRECTIONAL_TYPES and direction is not None:
            self.error(f"{head} takes no direction")
        return Leaf(Constraint(ctype=head, reference=reference, direction=direction))

    def parse(self) -> Node:
        root = self.node()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing input after program")
        return root


def parse_program(text: str, query: QuerySpec | None = None) -> PlacementProgram:
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty program text", 0)
    program = PlacementProgram(root=_Parser(text).parse(), query=query)
    validate_program(program)
    return program


def serialize_node(node: Node) -> str:
    if isinstance(node, Leaf):
        c = node.constraint
        if c.direction is None:
            return f"{c.ctype}({c.reference})"
        return f"{c.ctype}({c.reference},{c.direction})"
    op = "and" if isinstance(node, And) else "or"
    return f"{op}({serialize_node(node.left)},{serialize_node(node.right)})"


def serialize_program(program: PlacementProgram) -> str:
    return serialize_node(program.root)


# ---------------------------------------------------------------------------
# structure helpers


def leaves(node: Node) -> list[Constraint]:
    """Constraints in left-to-right order."""
    if isinstance(node, Leaf):
        return [node.constraint]
    return leaves(node.left) + leaves(node.right)


def leaf_count(program: PlacementProgram) -> int:
    return len(leaves(program.root))


def tree_depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def validate_program(program: PlacementProgram, max_depth: int = MAX_TREE_DEPTH):
    """Structural rules: direction arity per constraint type, depth cap."""

    def check(node: Node):
        if isinstance(node, Leaf):
            c = node.constraint
            if c.ctype not in CONSTRAINT_TYPES:
                raise ValidationError(f"unknown constraint type {c.ctype!r}")
            if c.ctype in DIRECTIONAL_TYPES:
                if c.direction not in DIRECTIONS:
                    raise ValidationError(f"{c.ctype} requires a direction")
            elif c.direction is not None:
                raise ValidationError(f"{c.ctype} takes no direction")
            if not c.reference or not _REF_RE.fullmatch(c.reference):
                raise ValidationError(f"bad reference {c.reference!r}")
            return
        check(node.left)
        check(node.right)

    check(program.root)
    if tree_depth(program.root) > max_depth:
        raise ValidationError(
            f"tree depth {tree_depth(program.root)} exceeds cap {max_depth}"
        )


def delete_constraint(program: PlacementProgram, leaf_index: int) -> PlacementProgram:
    """Remove the leaf at ``leaf_index`` (left-to-right order).

    The deleted leaf's parent collapses into the sibling subtree. The
    program must have at least two leaves.
    """
    total = leaf_count(program)
    if total < 2:
        raise ValidationError("cannot delete the only constraint")
    if not (0 <= leaf_index < total):
        raise ValidationError(f"leaf index {leaf_index} out of range 0..{total - 1}")

    def rebuild(node: Node, target: int, offset: int):
        """Returns (new_node_or_None, leaves_in_subtree)."""
        if isinstance(node, Leaf):
            return (None, 1) if offset == target else (node, 1)
        left, n_left = rebuild(node.left, target, offset)
        right, n_right = rebuild(node.right, target, offset + n_left)
        if left is None:
            return right, n_left + n_right
        if right is None:
            return left, n_left + n_right
        cls = And if isinstance(node, And) else Or
        return cls(left, right), n_left + n_right

    new_root, _ = rebuild(program.root, leaf_index, 0)
    assert new_root is not None
    return PlacementProgram(root=new_root, query=program.query)


def enumerate_subtrees(program: PlacementProgram) -> list[PlacementProgram]:
    """Every rooted subtree as a standalone program, pre-order.

    The first element is the program itself; the count equals the node
    count of the tree.
    """
    out = []

    def walk(node: Node):
        out.append(PlacementProgram(root=node, query=program.query))
        if not isinstance(node, Leaf):
            walk(node.left)
            walk(node.right)

    walk(program.root)
    return out


def or_join(programs) -> PlacementProgram:
    """Left-deep Or chain over the inputs; a single input passes through."""
    programs = list(programs)
    if not programs:
        raise ValidationError("or_join needs at least one program")
    root = programs[0].root
    for p in programs[1:]:
        root = Or(root, p.root)
    return PlacementProgram(root=root, query=programs[0].query)


def and_join(programs) -> PlacementProgram:
    programs = list(programs)
    if not programs:
        raise ValidationError("and_join needs at least one program")
    root = programs[0].root
    for p in programs[1:]:
        root = And(root, p.root)
    return PlacementProgram(root=root, query=programs[0].query)


def referenced_ids(program: PlacementProgram) -> list[str]:
    """Distinct reference ids in first-appearance order."""
    seen = []
    for c in leaves(program.root):
        if c.reference not in seen:
            seen.append(c.reference)
    return seen


def map_references(program: PlacementProgram, mapping: dict) -> PlacementProgram:
    """New program with reference ids substituted via ``mapping``."""

    def walk(node: Node) -> Node:
        if isinstance(node, Leaf):
            c = node.constraint
            ref = mapping.get(c.reference, c.reference)
            return Leaf(Constraint(ctype=c.ctype, reference=ref, direction=c.direction))
        cls = And if isinstance(node, And) else Or
        return cls(walk(node.left), walk(node.right))

    return PlacementProgram(root=walk(program.root), query=program.query)
