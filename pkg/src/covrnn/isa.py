"""Instruction-set description: parsing, the acyclic constraint graph and the
neuron index space.

An ISA file declares *sets* (named groups of alternatives) and *elements*
(terminal instruction parts: opcodes, registers, immediate-range tags).  The
member-of relation forms a DAG rooted at the first declared set.  Every
(set, member) edge, in document order, is one neuron of the controlling
network; constraint distributions are categorical per set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple


class ParseError(ValueError):
    """Malformed ISA document."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class CycleError(ValueError):
    """The member-of relation is not acyclic."""

    def __init__(self, path: list[str]):
        super().__init__("cycle: " + " -> ".join(path))
        self.path = path


class UnknownReference(ValueError):
    """A member or operand reference names nothing that was declared."""

    def __init__(self, name: str):
        super().__init__(f"unknown reference: {name}")
        self.name = name


class InstancePair(NamedTuple):
    """One (set, member) edge of the graph; its index is the neuron index."""

    set: str
    member: str


# Marker on an opcode operand slot: the sampled value is a control-flow
# target (a relative offset to resolve against the instruction position).
TARGET_MARK = "@"


@dataclass(frozen=True)
class Element:
    name: str
    kind: str = "opcode"  # opcode | register | imm
    # opcode: operand slots, each a set name, "@"-prefixed for targets
    operands: tuple[str, ...] = ()
    # register: index in the processor register file
    reg_index: int | None = None
    # imm (and target slots): inclusive sampling range
    imm_range: tuple[int, int] | None = None


@dataclass(frozen=True)
class IsaGraph:
    """Immutable ISA model: safe to share across concurrent evaluators."""

    root: str
    sets: Mapping[str, tuple[str, ...]]
    elements: Mapping[str, Element]
    pairs: tuple[InstancePair, ...] = field(default=(), compare=False)

    @property
    def n_neurons(self) -> int:
        return len(self.pairs)

    def is_set(self, name: str) -> bool:
        return name in self.sets

    def opcodes(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.elements.values() if e.kind == "opcode")


def _parse_payload(kind: str, payload: str, lineno: int) -> dict:
    if kind == "opcode":
        slots = tuple(s for s in payload.split(",") if s) if payload else ()
        return {"operands": slots}
    if kind == "register":
        try:
            return {"reg_index": int(payload)}
        except ValueError:
            raise ParseError(lineno, f"register payload must be an index: {payload!r}")
    if kind == "imm":
        try:
            lo, hi = payload.split("..")
            lo_i, hi_i = int(lo), int(hi)
        except ValueError:
            raise ParseError(lineno, f"imm payload must be 'lo..hi': {payload!r}")
        if lo_i > hi_i:
            raise ParseError(lineno, f"empty imm range: {payload!r}")
        return {"imm_range": (lo_i, hi_i)}
    raise ParseError(lineno, f"unknown element kind: {kind!r}")


def parse_isa(text: str) -> IsaGraph:
    """Parse an ISA description document into a validated graph.

    Rejects cycles, dangling references, duplicate names and unreachable
    elements.  The first declared set is the root.
    """
    sets: dict[str, tuple[str, ...]] = {}
    elements: dict[str, Element] = {}
    root: str | None = None
    declared_at: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "set":
            if len(tokens) < 4 or tokens[2] != "{" or tokens[-1] != "}":
                raise ParseError(lineno, "expected: set <name> { <member> ... }")
            name = tokens[1]
            members = tuple(tokens[3:-1])
            if not members:
                raise ParseError(lineno, f"set {name} has no members")
            if name in declared_at:
                raise ParseError(lineno, f"duplicate name: {name}")
            if len(set(members)) != len(members):
                raise ParseError(lineno, f"duplicate member in set {name}")
            declared_at[name] = lineno
            sets[name] = members
            if root is None:
                root = name
        elif tokens[0] == "element":
            if len(tokens) < 2:
                raise ParseError(lineno, "expected: element <name> [kind=..] [payload=..]")
            name = tokens[1]
            if name in declared_at:
                raise ParseError(lineno, f"duplicate name: {name}")
            declared_at[name] = lineno
            kind, payload = "opcode", ""
            for tok in tokens[2:]:
                if tok.startswith("kind="):
                    kind = tok[len("kind="):]
                elif tok.startswith("payload="):
                    payload = tok[len("payload="):]
                else:
                    raise ParseError(lineno, f"unexpected token: {tok!r}")
            fields = _parse_payload(kind, payload, lineno)
            elements[name] = Element(name=name, kind=kind, **fields)
        else:
            raise ParseError(lineno, f"unknown directive: {tokens[0]!r}")

    if root is None:
        raise ParseError(0, "no root set declared")

    # Dangling references: set members and opcode operand sets.
    for name, members in sets.items():
        for m in members:
            if m not in sets and m not in elements:
                raise UnknownReference(m)
    for el in elements.values():
        for slot in el.operands:
            if slot.lstrip(TARGET_MARK) not in sets:
                raise UnknownReference(slot.lstrip(TARGET_MARK))

    _check_acyclic(sets, elements, root)

    pairs = tuple(InstancePair(s, m) for s, members in sets.items() for m in members)
    graph = IsaGraph(root=root, sets=sets, elements=elements, pairs=pairs)

    unreachable = (set(sets) | set(elements)) - _reachable(graph)
    if unreachable:
        raise ParseError(0, "unreachable from root: " + ", ".join(sorted(unreachable)))
    return graph


def _edges_of(sets, elements, node: str) -> Iterable[str]:
    if node in sets:
        return sets[node]
    el = elements[node]
    return tuple(s.lstrip(TARGET_MARK) for s in el.operands)


def _check_acyclic(sets, elements, root: str) -> None:
    # Operand references count as edges too, so a set cannot contain an
    # opcode whose syntax refers back into it.
    visiting: set[str] = set()
    done: set[str] = set()

    def visit(node: str, path: list[str]) -> None:
        if node in done:
            return
        if node in visiting:
            raise CycleError(path + [node])
        visiting.add(node)
        for child in _edges_of(sets, elements, node):
            visit(child, path + [node])
        visiting.discard(node)
        done.add(node)

    for start in sets:
        visit(start, [])


def _reachable(graph: IsaGraph) -> set[str]:
    seen: set[str] = set()
    frontier = [graph.root]
    while frontier:
        node = frontier.pop()
        if node in seen:
            continue
        seen.add(node)
        frontier.extend(_edges_of(graph.sets, graph.elements, node))
    return seen


def instance_vector(graph: IsaGraph) -> tuple[InstancePair, ...]:
    """All (set, member) edges in document order; index == neuron index."""
    return graph.pairs


def path_probability(
    graph: IsaGraph,
    constraints: Mapping[str, Mapping[str, float]],
    element: str,
) -> float:
    """Probability that a root descent under `constraints` ends at `element`.

    Product of the conditional selection probabilities along the descent
    path; elements with several parents accumulate the sum over paths.
    """
    if element not in graph.elements and element not in graph.sets:
        raise UnknownReference(element)
    reach: dict[str, float] = {graph.root: 1.0}
    # Document order is a valid topological order only by accident, so walk
    # the DAG explicitly.
    order = _topological(graph)
    for node in order:
        if node not in graph.sets or node not in reach:
            continue
        p_node = reach[node]
        dist = constraints[node]
        for m in graph.sets[node]:
            reach[m] = reach.get(m, 0.0) + p_node * dist[m]
    return reach.get(element, 0.0)


def _topological(graph: IsaGraph) -> list[str]:
    indeg: dict[str, int] = {graph.root: 0}
    for s, members in graph.sets.items():
        indeg.setdefault(s, 0)
        for m in members:
            indeg[m] = indeg.get(m, 0) + 1
    ready = [n for n, d in indeg.items() if d == 0]
    order: list[str] = []
    while ready:
        node = ready.pop()
        order.append(node)
        for m in graph.sets.get(node, ()):
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return order


def descent_leaves(graph: IsaGraph) -> tuple[str, ...]:
    """Elements reachable from the root through set membership alone,
    i.e. the possible outcomes of one instruction descent."""
    seen: set[str] = set()
    leaves: list[str] = []
    frontier = [graph.root]
    while frontier:
        node = frontier.pop()
        if node in seen:
            continue
        seen.add(node)
        if node in graph.sets:
            frontier.extend(graph.sets[node])
        elif node not in leaves:
            leaves.append(node)
    return tuple(sorted(leaves))
