"""Constrained pseudo-random program generation.

Network outputs become categorical distributions: the outputs of a set's
member neurons, normalized by their sum, are the selection probabilities of
that set.  One instruction is sampled by descending the ISA graph from the
root, choosing at every set, until an opcode element is reached; its operand
slots are then resolved the same way (registers and immediate-range tags are
plain sets too, so sub-instruction distributions are also under network
control).  Generation is a pure function of (graph, constraints, length,
seed).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .isa import TARGET_MARK, Element, InstancePair, IsaGraph

# Bounded retries for control-flow targets before clamping into range.
TARGET_RESAMPLE_LIMIT = 100


class EmptySet(ValueError):
    pass


class Instruction(NamedTuple):
    op: str
    args: tuple


@dataclass(frozen=True)
class Program:
    """One stimulus: an instruction sequence plus its generation metadata."""

    instructions: tuple[Instruction, ...]
    seed: int | None = None
    state_hash: str | None = None

    def __len__(self) -> int:
        return len(self.instructions)


@dataclass(frozen=True)
class ConstraintSet:
    """Per-set categorical distributions, plus the hash of the network state
    they were derived from (None for hand-built constraints)."""

    dists: Mapping[str, Mapping[str, float]]
    state_hash: str | None = None

    def __getitem__(self, set_name: str) -> Mapping[str, float]:
        return self.dists[set_name]

    def __contains__(self, set_name: str) -> bool:
        return set_name in self.dists


def state_hash(state: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(state, dtype=float).tobytes()).hexdigest()[:16]


def state_to_constraints(
    state: np.ndarray, pairs: tuple[InstancePair, ...]
) -> ConstraintSet:
    """Normalize sibling neuron outputs into per-set distributions.

    Outputs are strictly positive (sigmoid range), so denominators never
    vanish and every member stays reachable.
    """
    if len(state) != len(pairs):
        raise ValueError(f"state length {len(state)} != pair count {len(pairs)}")
    if len(pairs) == 0:
        raise EmptySet("no (set, member) pairs to constrain")
    by_set: dict[str, dict[str, float]] = {}
    for v, pair in zip(state, pairs):
        by_set.setdefault(pair.set, {})[pair.member] = float(v)
    dists = {}
    for set_name, members in by_set.items():
        if not members:
            raise EmptySet(set_name)
        total = sum(members.values())
        dists[set_name] = {m: v / total for m, v in members.items()}
    return ConstraintSet(dists=dists, state_hash=state_hash(np.asarray(state)))


def uniform_constraints(graph: IsaGraph) -> ConstraintSet:
    """The default configuration: every member of a set equally likely
    (what the all-0.5 network state normalizes to)."""
    return state_to_constraints(
        np.full(len(graph.pairs), 0.5), graph.pairs
    )


def _descend(graph: IsaGraph, constraints: ConstraintSet, rng, set_name: str) -> Element:
    node = set_name
    while graph.is_set(node):
        members = graph.sets[node]
        dist = constraints[node]
        p = np.array([dist[m] for m in members])
        p = p / p.sum()
        node = members[int(rng.choice(len(members), p=p))]
    return graph.elements[node]


def _resolve_target(graph, constraints, rng, set_name, position, length) -> int:
    # Relative-offset tags; resample until the absolute index is inside the
    # program, then clamp as a last resort so generation always terminates.
    target = position
    for _ in range(TARGET_RESAMPLE_LIMIT):
        el = _descend(graph, constraints, rng, set_name)
        lo, hi = el.imm_range
        target = position + int(rng.integers(lo, hi + 1))
        if 0 <= target < length:
            return target
    return min(max(target, 0), length - 1)


def generate_program(
    graph: IsaGraph,
    constraints: ConstraintSet,
    length: int,
    seed: int,
) -> Program:
    """Sample an instruction stream of `length` instructions.

    Each instruction is one root descent; an opcode's operand slots are
    resolved from the sets its syntax names.  Control-flow targets are
    guaranteed to land inside the program.
    """
    if length < 1:
        raise ValueError(f"program length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)
    instructions = []
    for position in range(length):
        opcode = _descend(graph, constraints, rng, graph.root)
        args = []
        for slot in opcode.operands:
            is_target = slot.startswith(TARGET_MARK)
            operand_set = slot.lstrip(TARGET_MARK)
            if is_target:
                args.append(_resolve_target(graph, constraints, rng,
                                            operand_set, position, length))
                continue
            el = _descend(graph, constraints, rng, operand_set)
            if el.kind == "register":
                args.append(el.name)
            elif el.kind == "imm":
                lo, hi = el.imm_range
                args.append(int(rng.integers(lo, hi + 1)))
            else:
                args.append(el.name)
        instructions.append(Instruction(opcode.name, tuple(args)))
    return Program(
        instructions=tuple(instructions),
        seed=seed,
        state_hash=constraints.state_hash,
    )


def serialize(program: Program) -> str:
    """Assembly text, one instruction per line; metadata in comment lines."""
    lines = []
    if program.seed is not None:
        lines.append(f"# seed: {program.seed}")
    if program.state_hash is not None:
        lines.append(f"# state: {program.state_hash}")
    for instr in program.instructions:
        lines.append(" ".join([instr.op, *map(str, instr.args)]))
    return "\n".join(lines) + ("\n" if lines else "")


def deserialize(text: str) -> Program:
    """Inverse of serialize: deserialize(serialize(p)) == p."""
    seed = None
    shash = None
    instructions = []
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("# seed:"):
            seed = int(line.split(":", 1)[1])
            continue
        if line.startswith("# state:"):
            shash = line.split(":", 1)[1].strip()
            continue
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        args = []
        for tok in tokens[1:]:
            try:
                args.append(int(tok))
            except ValueError:
                args.append(tok)
        instructions.append(Instruction(tokens[0], tuple(args)))
    return Program(instructions=tuple(instructions), seed=seed, state_hash=shash)
