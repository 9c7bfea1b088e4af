"""Core model for nested path problems.

An instance is a layered element graph.  Elements are grouped into ordered
blocks; arcs connect elements of the same block; consecutive blocks are
fully connected through *boundary* arcs that separate into an exit half
(attached to the predecessor element) and an entry half (attached to the
successor element), so inter-block connectivity is never stored explicitly.
A master-problem column is a path that traverses exactly one subpath per
block.

Two resource families constrain paths:

* subpath resources -- scalar window resources that only bind inside their
  own block (think vehicle load, or duty elapsed time).  Windows on
  elements of other blocks are implicitly infinite and arcs of other
  blocks leave the value unchanged.
* path resources -- d-dimensional resources whose per-block contribution
  vectors are aggregated over blocks with a monotone separable operator
  (componentwise sum or componentwise max) and tested against a single
  downward-closed linear predicate ``a . v <= b`` (``a >= 0``) at the sink.

Costs live in integer millicost units and resource values are integers, so
every feasibility and reduced-cost comparison in the package is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Mapping

SUM = "sum"
MAX = "max"
COVER = "cover"
PARTITION = "partition"

MILLI = 1000  # millicost units per cost unit; all Arc/Boundary costs are ints


class ModelError(ValueError):
    """Raised for malformed instances or ill-typed model operations."""


# ---------------------------------------------------------------------------
# graph pieces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Arc:
    """Intra-block arc: cost plus one additive delta per resource it extends.

    ``sub_deltas`` follows the declaration order of the owning block's
    subpath resources; ``path_deltas`` holds one vector per path resource.
    Empty tuples mean all-zero deltas.
    """

    cost: int = 0
    sub_deltas: tuple[int, ...] = ()
    path_deltas: tuple[tuple[int, ...], ...] = ()


@dataclass(frozen=True)
class Boundary:
    """Separable half of a boundary arc.

    The entry half is charged when a subpath starts at an element (coming
    from the source or from any element of the previous block); the exit
    half when it ends there.  The full cost of the implicit inter-block
    arc (u, v) is exit(u).cost + entry(v).cost, and likewise for deltas.
    """

    cost: int = 0
    sub_deltas: tuple[int, ...] = ()
    path_deltas: tuple[tuple[int, ...], ...] = ()


_ZERO_BOUNDARY = Boundary()


@dataclass(frozen=True)
class Block:
    elements: tuple[int, ...]
    arcs: dict = field(default_factory=dict)    # (u, v) -> Arc
    entry: dict = field(default_factory=dict)   # element -> Boundary
    exit: dict = field(default_factory=dict)    # element -> Boundary

    def entry_at(self, v) -> Boundary:
        return self.entry.get(v, _ZERO_BOUNDARY)

    def exit_at(self, u) -> Boundary:
        return self.exit.get(u, _ZERO_BOUNDARY)


# ---------------------------------------------------------------------------
# resources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubpathResource:
    """Scalar window resource bound to one block.

    The value starts at 0, is extended additively by entry/arc deltas, and
    is checked against ``windows[element]`` at every visited element.  With
    ``floor_at_lower`` the value snaps up to the window's lower bound after
    each extension (time-window semantics); otherwise both window ends are
    hard bounds.  Windows are stored only for the owning block's elements,
    which is exactly the "inactive outside its block" requirement.
    """

    block: int
    windows: dict = field(default_factory=dict)  # element -> (lo | None, hi | None)
    floor_at_lower: bool = False

    def window(self, v) -> tuple[int | None, int | None]:
        return self.windows.get(v, (None, None))


@dataclass(frozen=True)
class PathResource:
    """Global d-dimensional resource with a linear sink predicate.

    ``agg`` is "sum" or "max" (componentwise).  ``box`` gives, per
    coordinate, the integer range that per-block contributions can take;
    it seeds the bucket partition and is not itself a feasibility
    constraint.
    """

    dim: int
    agg: str
    a: tuple[int, ...]
    b: int
    box: tuple[tuple[int, int], ...]

    def admits(self, aggregate: tuple[int, ...]) -> bool:
        return sum(w * v for w, v in zip(self.a, aggregate)) <= self.b


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Subpath:
    """A feasible element sequence within one block.

    ``cost`` includes the entry and exit boundary legs.  ``contributions``
    holds one integer vector per path resource, accumulated along the same
    trajectory.
    """

    block: int
    nodes: tuple[int, ...]
    cost: int
    contributions: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class Path:
    """One subpath per block; the master problem prices these as columns."""

    subpaths: tuple[Subpath, ...]
    cost: int
    aggregate: tuple[tuple[int, ...], ...]

    @property
    def covered(self) -> frozenset:
        return frozenset(k for sp in self.subpaths for k in sp.nodes)

    @property
    def node_key(self) -> tuple:
        """Identity used for column deduplication."""
        return tuple(sp.nodes for sp in self.subpaths)


@dataclass(frozen=True)
class Violation:
    """First failed feasibility check.

    ``position`` is the 1-based index of the offending element in the node
    sequence for subpath resources, and None for path-level predicates.
    """

    kind: str          # "subpath_resource" | "path_resource"
    resource: int      # index into the problem's resource list
    position: int | None = None


# ---------------------------------------------------------------------------
# duals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Duals:
    """Element duals plus the optional cardinality-row dual.

    The cardinality (convexity) dual is charged exactly once per path, on
    the source side, never at subpath level.
    """

    by_element: Mapping
    convexity: Fraction | int = 0

    def value(self, k):
        return self.by_element.get(k, 0)

    def scaled(self) -> "ScaledDuals":
        """Integer-scaled copy for exact labeling arithmetic.

        Returns duals multiplied by the lcm of all denominators, so label
        costs can be carried as plain ints and unscaled once at the end.
        """
        denom = Fraction(self.convexity).denominator
        for v in self.by_element.values():
            denom = lcm(denom, Fraction(v).denominator)
        lam = {k: int(v * denom) for k, v in self.by_element.items()}
        return ScaledDuals(lam, int(self.convexity * denom), denom)


@dataclass(frozen=True)
class ScaledDuals:
    by_element: Mapping
    convexity: int
    denom: int

    def value(self, k) -> int:
        return self.by_element.get(k, 0)


ZERO_DUALS = Duals({}, 0)


# ---------------------------------------------------------------------------
# the problem
# ---------------------------------------------------------------------------


@dataclass
class NestedProblem:
    """A nested path problem instance.  Treat as immutable once built."""

    blocks: list
    subpath_resources: list = field(default_factory=list)
    path_resources: list = field(default_factory=list)
    sense: str = COVER
    cardinality: int | None = None
    name: str = "instance"

    def __post_init__(self):
        self._validate()
        self._index()
        self._views = {}       # labeling caches, keyed by block index
        self._enum_cache = {}  # enumerative pricer caches

    # -- validation ---------------------------------------------------

    def _validate(self):
        if not self.blocks:
            raise ModelError("a problem needs at least one block")
        if self.sense not in (COVER, PARTITION):
            raise ModelError(f"unknown sense {self.sense!r}")
        if self.cardinality is not None and self.cardinality < 1:
            raise ModelError("cardinality row needs a positive right-hand side")
        seen = set()
        for bi, block in enumerate(self.blocks):
            if not block.elements:
                raise ModelError(f"block {bi} is empty")
            for k in block.elements:
                if k in seen:
                    raise ModelError(f"element {k} appears in more than one block")
                seen.add(k)
            elems = set(block.elements)
            for (u, v) in block.arcs:
                if u not in elems or v not in elems:
                    raise ModelError(f"arc ({u}, {v}) leaves block {bi}")
                if u == v:
                    raise ModelError(f"self-loop on element {u}")
            for v in list(block.entry) + list(block.exit):
                if v not in elems:
                    raise ModelError(f"boundary data for {v} outside block {bi}")
        for ri, res in enumerate(self.subpath_resources):
            if not 0 <= res.block < len(self.blocks):
                raise ModelError(f"subpath resource {ri} references block {res.block}")
            elems = set(self.blocks[res.block].elements)
            for v in res.windows:
                if v not in elems:
                    raise ModelError(
                        f"subpath resource {ri} has a window on {v}, "
                        f"outside its block"
                    )
        for ri, res in enumerate(self.path_resources):
            if res.agg not in (SUM, MAX):
                raise ModelError(f"unknown aggregator {res.agg!r}")
            if len(res.a) != res.dim or len(res.box) != res.dim:
                raise ModelError(f"path resource {ri} has inconsistent dimension")
            if any(w < 0 for w in res.a):
                raise ModelError("predicate weights must be nonnegative")
            if any(lo > hi for lo, hi in res.box):
                raise ModelError(f"path resource {ri} has an empty box")
        self._check_delta_shapes()

    def _check_delta_shapes(self):
        n_path = len(self.path_resources)
        for bi, block in enumerate(self.blocks):
            n_sub = sum(1 for r in self.subpath_resources if r.block == bi)
            items = list(block.arcs.values())
            items += list(block.entry.values()) + list(block.exit.values())
            for item in items:
                if item.sub_deltas and len(item.sub_deltas) != n_sub:
                    raise ModelError(
                        f"block {bi}: expected {n_sub} subpath deltas, "
                        f"got {len(item.sub_deltas)}"
                    )
                if item.path_deltas:
                    if len(item.path_deltas) != n_path:
                        raise ModelError(
                            f"block {bi}: expected {n_path} path-delta vectors"
                        )
                    for r, vec in zip(self.path_resources, item.path_deltas):
                        if len(vec) != r.dim:
                            raise ModelError("path delta has wrong dimension")

    # -- derived indexes ----------------------------------------------

    def _index(self):
        self._block_of = {}
        for bi, block in enumerate(self.blocks):
            for k in block.elements:
                self._block_of[k] = bi
        # subpath resources per block, in declaration order
        self.block_subs = [
            [ri for ri, r in enumerate(self.subpath_resources) if r.block == bi]
            for bi in range(len(self.blocks))
        ]
        # concatenated path-resource coordinate layout
        self.coord_offset = []
        off = 0
        for r in self.path_resources:
            self.coord_offset.append(off)
            off += r.dim
        self.total_coords = off
        self.monotone = tuple(self._monotone(ri) for ri in range(len(self.path_resources)))

    def _monotone(self, ri: int) -> bool:
        """True when the aggregate is componentwise non-decreasing in the
        number of blocks appended -- always for max, and for sum exactly
        when no delta is negative."""
        res = self.path_resources[ri]
        if res.agg == MAX:
            return True
        for block in self.blocks:
            items = list(block.arcs.values())
            items += list(block.entry.values()) + list(block.exit.values())
            for item in items:
                if item.path_deltas and any(d < 0 for d in item.path_deltas[ri]):
                    return False
        return True

    # -- conveniences ---------------------------------------------------

    @property
    def elements(self) -> tuple:
        return tuple(k for b in self.blocks for k in b.elements)

    def block_of(self, k) -> int:
        try:
            return self._block_of[k]
        except KeyError:
            raise ModelError(f"unknown element {k}") from None

    def contribution_box(self) -> tuple[tuple[int, int], ...]:
        """Per-coordinate (lo, hi) over the concatenated coordinate space."""
        out = []
        for r in self.path_resources:
            out.extend(r.box)
        return tuple(out)


# ---------------------------------------------------------------------------
# trajectory replay and feasibility
# ---------------------------------------------------------------------------


def _padded(deltas: tuple, n: int) -> tuple:
    if len(deltas) == n:
        return deltas
    return deltas + (0,) * (n - len(deltas))


def _sub_step(problem, block_index, values, deltas, node):
    """Extend subpath-resource values by one hop and check windows at node.

    Returns (new_values, violated_resource_index or None).
    """
    subs = problem.block_subs[block_index]
    deltas = _padded(deltas, len(subs))
    out = []
    bad = None
    for j, ri in enumerate(subs):
        res = problem.subpath_resources[ri]
        val = values[j] + deltas[j]
        lo, hi = res.window(node)
        if res.floor_at_lower and lo is not None and val < lo:
            val = lo
        if bad is None:
            if lo is not None and val < lo:
                bad = ri
            elif hi is not None and val > hi:
                bad = ri
        out.append(val)
    return tuple(out), bad


def _contrib_step(problem, contribs, deltas):
    n = len(problem.path_resources)
    if not deltas:
        return contribs
    return tuple(
        tuple(c + d for c, d in zip(vec, delta))
        for vec, delta in zip(contribs, deltas)
    )


def replay_subpath(problem: NestedProblem, block_index: int, nodes: Iterable):
    """Replay the trajectory of a node sequence within one block.

    Returns (cost, contributions, violation) where violation is None when
    every window check passed.  Structural mistakes (unknown elements,
    missing arcs) raise ModelError; resource infeasibility is a reported
    outcome, not an error.
    """
    nodes = tuple(nodes)
    if not nodes:
        raise ModelError("a subpath must visit at least one element")
    block = problem.blocks[block_index]
    elems = set(block.elements)
    for v in nodes:
        if v not in elems:
            raise ModelError(f"element {v} is not in block {block_index}")
    if len(set(nodes)) != len(nodes):
        raise ModelError("subpaths are elementary; repeated element")

    n_sub = len(problem.block_subs[block_index])
    values = (0,) * n_sub
    contribs = tuple((0,) * r.dim for r in problem.path_resources)

    entry = block.entry_at(nodes[0])
    cost = entry.cost
    values, bad = _sub_step(problem, block_index, values, entry.sub_deltas, nodes[0])
    contribs = _contrib_step(problem, contribs, entry.path_deltas)
    if bad is not None:
        return cost, contribs, Violation("subpath_resource", bad, 1)

    for pos in range(1, len(nodes)):
        u, v = nodes[pos - 1], nodes[pos]
        arc = block.arcs.get((u, v))
        if arc is None:
            raise ModelError(f"missing arc ({u}, {v}) in block {block_index}")
        cost += arc.cost
        values, bad = _sub_step(problem, block_index, values, arc.sub_deltas, v)
        contribs = _contrib_step(problem, contribs, arc.path_deltas)
        if bad is not None:
            return cost, contribs, Violation("subpath_resource", bad, pos + 1)

    exit_ = block.exit_at(nodes[-1])
    cost += exit_.cost
    # the exit half extends values/contributions but there is no element
    # left to check a window at
    subs = problem.block_subs[block_index]
    deltas = _padded(exit_.sub_deltas, len(subs))
    values = tuple(v + d for v, d in zip(values, deltas))
    contribs = _contrib_step(problem, contribs, exit_.path_deltas)
    return cost, contribs, None


def check_subpath_feasible(problem: NestedProblem, block_index: int, nodes):
    """Build a Subpath from a node sequence, or report the first violation."""
    cost, contribs, violation = replay_subpath(problem, block_index, nodes)
    if violation is not None:
        return violation
    return Subpath(block_index, tuple(nodes), cost, contribs)


def aggregate_contributions(resource: PathResource, vectors):
    """Fold per-block contribution vectors with the resource's aggregator."""
    vectors = list(vectors)
    if not vectors:
        raise ModelError("cannot aggregate zero blocks")
    agg = vectors[0]
    for vec in vectors[1:]:
        if resource.agg == SUM:
            agg = tuple(x + y for x, y in zip(agg, vec))
        else:
            agg = tuple(max(x, y) for x, y in zip(agg, vec))
    return agg


def check_path_feasible(problem: NestedProblem, subpaths):
    """Assemble one subpath per block into a Path, or report a violation.

    Subpaths are assumed individually feasible (as produced by
    check_subpath_feasible); only the ordering and the path-level
    predicates are checked here.
    """
    subpaths = tuple(subpaths)
    if len(subpaths) != len(problem.blocks):
        raise ModelError(
            f"need one subpath per block, got {len(subpaths)} "
            f"for {len(problem.blocks)} blocks"
        )
    for bi, sp in enumerate(subpaths):
        if sp.block != bi:
            raise ModelError("subpaths out of block order")
    aggregate = tuple(
        aggregate_contributions(res, [sp.contributions[ri] for sp in subpaths])
        for ri, res in enumerate(problem.path_resources)
    )
    for ri, res in enumerate(problem.path_resources):
        if not res.admits(aggregate[ri]):
            return Violation("path_resource", ri, None)
    return Path(subpaths, sum(sp.cost for sp in subpaths), aggregate)


def reduced_cost(obj, duals: Duals):
    """Cost minus covered-element duals; paths also pay the convexity dual."""
    if isinstance(obj, Subpath):
        covered = obj.nodes
        convexity = 0
    elif isinstance(obj, Path):
        covered = [k for sp in obj.subpaths for k in sp.nodes]
        convexity = duals.convexity
    else:
        raise ModelError(f"cannot price a {type(obj).__name__}")
    return obj.cost - sum(duals.value(k) for k in covered) - convexity


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------
#
# Schema, informally:
#
# {
#   "name": str, "sense": "cover" | "partition", "cardinality": int | null,
#   "blocks": [
#     {"elements": [int, ...],
#      "arcs": [[u, v, cost, [deltas...]], ...]}
#   ],
#   "source_arcs": [[v, cost, [deltas...]], ...],   # block-entry halves
#   "sink_arcs":   [[u, cost, [deltas...]], ...],   # block-exit halves
#   "subpath_resources": [
#     {"block": int, "floor": bool, "windows": {"elem": [lo|null, hi|null]}}
#   ],
#   "path_resources": [
#     {"dim": int, "agg": "sum"|"max", "a": [...], "b": int,
#      "box": [[lo, hi], ...]}
#   ]
# }
#
# A delta list is flat: the owning block's subpath-resource deltas in
# declaration order, then every path-resource coordinate in order.


def _flatten_deltas(problem_like, block_index, sub_deltas, path_deltas, n_sub, n_coords):
    flat = list(_padded(sub_deltas, n_sub))
    if path_deltas:
        for vec in path_deltas:
            flat.extend(vec)
    else:
        flat.extend([0] * n_coords)
    return flat


def _split_deltas(flat, n_sub, dims):
    flat = list(flat)
    expected = n_sub + sum(dims)
    if len(flat) != expected:
        raise ModelError(f"expected {expected} deltas, got {len(flat)}")
    sub = tuple(flat[:n_sub])
    path = []
    off = n_sub
    for d in dims:
        path.append(tuple(flat[off:off + d]))
        off += d
    return sub, tuple(path)


def problem_to_json(problem: NestedProblem) -> dict:
    dims = [r.dim for r in problem.path_resources]
    n_coords = sum(dims)
    blocks = []
    source_arcs = []
    sink_arcs = []
    for bi, block in enumerate(problem.blocks):
        n_sub = len(problem.block_subs[bi])
        arcs = [
            [u, v, a.cost,
             _flatten_deltas(problem, bi, a.sub_deltas, a.path_deltas, n_sub, n_coords)]
            for (u, v), a in sorted(block.arcs.items())
        ]
        blocks.append({"elements": list(block.elements), "arcs": arcs})
        for v in block.elements:
            e = block.entry_at(v)
            source_arcs.append(
                [v, e.cost,
                 _flatten_deltas(problem, bi, e.sub_deltas, e.path_deltas, n_sub, n_coords)]
            )
            x = block.exit_at(v)
            sink_arcs.append(
                [v, x.cost,
                 _flatten_deltas(problem, bi, x.sub_deltas, x.path_deltas, n_sub, n_coords)]
            )
    return {
        "name": problem.name,
        "sense": problem.sense,
        "cardinality": problem.cardinality,
        "blocks": blocks,
        "source_arcs": source_arcs,
        "sink_arcs": sink_arcs,
        "subpath_resources": [
            {
                "block": r.block,
                "floor": r.floor_at_lower,
                "windows": {
                    str(v): [lo, hi] for v, (lo, hi) in sorted(r.windows.items())
                },
            }
            for r in problem.subpath_resources
        ],
        "path_resources": [
            {"dim": r.dim, "agg": r.agg, "a": list(r.a), "b": r.b,
             "box": [list(iv) for iv in r.box]}
            for r in problem.path_resources
        ],
    }


def problem_from_json(data: dict) -> NestedProblem:
    dims = [int(r["dim"]) for r in data.get("path_resources", [])]
    raw_blocks = data["blocks"]
    block_of = {}
    for bi, rb in enumerate(raw_blocks):
        for k in rb["elements"]:
            block_of[int(k)] = bi

    sub_resources = [
        SubpathResource(
            block=int(r["block"]),
            windows={
                int(v): (None if lo is None else int(lo),
                         None if hi is None else int(hi))
                for v, (lo, hi) in r.get("windows", {}).items()
            },
            floor_at_lower=bool(r.get("floor", False)),
        )
        for r in data.get("subpath_resources", [])
    ]
    n_sub_of = [
        sum(1 for r in sub_resources if r.block == bi) for bi in range(len(raw_blocks))
    ]

    entry = [dict() for _ in raw_blocks]
    exit_ = [dict() for _ in raw_blocks]
    for v, cost, flat in data.get("source_arcs", []):
        bi = block_of[int(v)]
        sub, path = _split_deltas(flat, n_sub_of[bi], dims)
        entry[bi][int(v)] = Boundary(int(cost), sub, path)
    for u, cost, flat in data.get("sink_arcs", []):
        bi = block_of[int(u)]
        sub, path = _split_deltas(flat, n_sub_of[bi], dims)
        exit_[bi][int(u)] = Boundary(int(cost), sub, path)

    blocks = []
    for bi, rb in enumerate(raw_blocks):
        arcs = {}
        for u, v, cost, flat in rb.get("arcs", []):
            sub, path = _split_deltas(flat, n_sub_of[bi], dims)
            arcs[(int(u), int(v))] = Arc(int(cost), sub, path)
        blocks.append(
            Block(tuple(int(k) for k in rb["elements"]), arcs, entry[bi], exit_[bi])
        )

    path_resources = [
        PathResource(
            dim=int(r["dim"]),
            agg=r["agg"],
            a=tuple(int(w) for w in r["a"]),
            b=int(r["b"]),
            box=tuple((int(lo), int(hi)) for lo, hi in r["box"]),
        )
        for r in data.get("path_resources", [])
    ]
    return NestedProblem(
        blocks=blocks,
        subpath_resources=sub_resources,
        path_resources=path_resources,
        sense=data.get("sense", COVER),
        cardinality=data.get("cardinality"),
        name=data.get("name", "instance"),
    )


def save_problem(problem: NestedProblem, path):
    with open(path, "w") as fh:
        json.dump(problem_to_json(problem), fh, indent=1)


def load_problem(path) -> NestedProblem:
    with open(path) as fh:
        return problem_from_json(json.load(fh))
