"""Label-setting search engines.

Two engines share one dominance core:

* :func:`label_search` -- monodirectional label setting over an explicit
  layered DAG.  Used for path-level pricing over subpath/bucket graphs and
  generic enough for direct use in tests.
* :func:`elementary_rcspp` -- elementary resource-constrained search over
  one block of a nested problem, used to compute bucket representatives
  and as the default per-block subpath pricer.

Dominance is configured per resource coordinate: ``LE`` (smaller-or-equal
dominates), ``EQ`` (values must match), or ``IGNORE``.  Both engines keep
up to ``top_k`` mutually non-dominated labels per node -- a label is only
discarded once at least ``top_k`` stored labels dominate it -- which makes
the returned result list a prefix of the fully enumerated, rcost-sorted
solution list.

All arithmetic is integer: callers pass duals through
``model.Duals.scaled()`` so reduced costs stay exact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .model import Duals, ScaledDuals, Subpath

LE = "le"
EQ = "eq"
IGNORE = "ignore"


class LabelingError(ValueError):
    """Raised for inputs the engines cannot handle (e.g. oversize blocks)."""


@dataclass(frozen=True)
class DominanceRule:
    modes: tuple            # one of LE / EQ / IGNORE per resource coordinate
    elementary: bool = False


@dataclass(frozen=True)
class ArcStep:
    """Extension applied when an arc is traversed.

    ``ops`` holds one (kind, value) pair per resource coordinate:
    ``("add", d)`` for additive deltas, ``("max", c)`` for running maxima,
    ``("set", c)`` to overwrite (used on first-layer arcs so maxima never
    need a neutral element).
    """

    rcost: int
    ops: tuple


@dataclass(frozen=True)
class LayeredDag:
    """Explicit layered DAG; arcs only connect consecutive layers."""

    layers: tuple   # tuple of tuples of node ids; layers[0] = (source,), layers[-1] = (sink,)
    arcs: tuple     # tuple of (u, v) pairs

    def __post_init__(self):
        pos = {}
        for li, layer in enumerate(self.layers):
            for v in layer:
                if v in pos:
                    raise LabelingError(f"node {v} appears in two layers")
                pos[v] = li
        for u, v in self.arcs:
            if u not in pos or v not in pos:
                raise LabelingError(f"arc ({u}, {v}) uses an unknown node")
            if pos[v] != pos[u] + 1:
                raise LabelingError(f"arc ({u}, {v}) skips layers")


@dataclass(frozen=True)
class SearchResult:
    nodes: tuple
    rcost: int
    resources: tuple


class _Label:
    __slots__ = ("node", "rcost", "res", "visited", "pred", "alive", "cost", "sub")

    def __init__(self, node, rcost, res, visited=0, pred=None, cost=0, sub=()):
        self.node = node
        self.rcost = rcost
        self.res = res
        self.visited = visited
        self.pred = pred
        self.alive = True
        self.cost = cost      # unscaled cost, tracked by the rcspp engine
        self.sub = sub        # subpath-resource values, rcspp only

    def sequence(self):
        out = []
        lab = self
        while lab is not None:
            out.append(lab.node)
            lab = lab.pred
        out.reverse()
        return tuple(out)


def _dominates(a: _Label, b: _Label, modes, elementary) -> bool:
    if a.rcost > b.rcost:
        return False
    if elementary and (a.visited & ~b.visited):
        return False
    for m, x, y in zip(modes, a.res, b.res):
        if m == LE:
            if x > y:
                return False
        elif m == EQ:
            if x != y:
                return False
    return True


def _sub_dominates(a: _Label, b: _Label, sub_modes) -> bool:
    for m, x, y in zip(sub_modes, a.sub, b.sub):
        if m == LE:
            if x > y:
                return False
        elif m == EQ:
            if x != y:
                return False
    return True


def _insert(store: list, label: _Label, modes, elementary, top_k, sub_modes=None) -> bool:
    """Count-based retention: keep ``label`` unless top_k stored labels
    dominate it; afterwards drop stored labels that top_k others dominate."""
    dominators = 0
    for other in store:
        if not other.alive:
            continue
        if _dominates(other, label, modes, elementary) and (
            sub_modes is None or _sub_dominates(other, label, sub_modes)
        ):
            dominators += 1
            if dominators >= top_k:
                return False
    store.append(label)
    for other in store:
        if other is label or not other.alive:
            continue
        if _dominates(label, other, modes, elementary) and (
            sub_modes is None or _sub_dominates(label, other, sub_modes)
        ):
            count = 0
            for third in store:
                if third is other or not third.alive:
                    continue
                if _dominates(third, other, modes, elementary) and (
                    sub_modes is None or _sub_dominates(third, other, sub_modes)
                ):
                    count += 1
                    if count >= top_k:
                        other.alive = False
                        break
    return True


# ---------------------------------------------------------------------------
# layered DAG search
# ---------------------------------------------------------------------------


def _apply_ops(ops, res):
    out = list(res)
    for i, (kind, val) in enumerate(ops):
        if kind == "add":
            out[i] += val
        elif kind == "set":
            out[i] = val
        elif kind == "max":
            if val > out[i]:
                out[i] = val
        else:
            raise LabelingError(f"unknown ref op {kind!r}")
    return tuple(out)


def label_search(
    dag: LayeredDag,
    refs,
    dominance: DominanceRule,
    windows=None,
    top_k: int = 1,
    *,
    start=None,
    sink_checks=(),
    prune_checks=(),
):
    """Find up to ``top_k`` cheapest feasible source-to-sink paths.

    ``refs`` maps each arc (u, v) to its :class:`ArcStep`.  ``windows``
    optionally maps a node to per-coordinate (lo, hi) bounds checked on
    arrival (None = unbounded).  ``sink_checks`` is a sequence of
    (weights, bound) linear predicates enforced on the final resource
    vector; ``prune_checks`` is a same-length sequence of bools marking
    which of them may also prune partial labels (only sound when the
    weighted value cannot decrease along any extension).

    Returns :class:`SearchResult` objects sorted by (rcost, resources,
    node sequence); the rcost sequence is a prefix of the sorted rcosts of
    all feasible paths.
    """
    if top_k < 1:
        raise LabelingError("top_k must be positive")
    n_coords = len(dominance.modes)
    if start is None:
        start = (0,) * n_coords
    windows = windows or {}
    source = dag.layers[0][0]
    sink = dag.layers[-1][0]

    adjacency = {}
    for u, v in dag.arcs:
        adjacency.setdefault(u, []).append(v)

    store = {source: [_Label(source, 0, tuple(start))]}
    for layer in dag.layers[:-1]:
        for u in layer:
            for lab in store.get(u, ()):
                if not lab.alive:
                    continue
                for v in adjacency.get(u, ()):
                    step = refs[(u, v)]
                    res = _apply_ops(step.ops, lab.res)
                    win = windows.get(v)
                    if win is not None:
                        bad = False
                        for (lo, hi), val in zip(win, res):
                            if lo is not None and val < lo:
                                bad = True
                                break
                            if hi is not None and val > hi:
                                bad = True
                                break
                        if bad:
                            continue
                    if v == sink:
                        ok = all(
                            sum(w * x for w, x in zip(weights, res)) <= bound
                            for weights, bound in sink_checks
                        )
                        if not ok:
                            continue
                    elif prune_checks:
                        bad = False
                        for (weights, bound), prune in zip(sink_checks, prune_checks):
                            if prune and sum(w * x for w, x in zip(weights, res)) > bound:
                                bad = True
                                break
                        if bad:
                            continue
                    new = _Label(v, lab.rcost + step.rcost, res, pred=lab)
                    _insert(
                        store.setdefault(v, []),
                        new,
                        dominance.modes,
                        dominance.elementary,
                        top_k,
                    )

    finals = [lab for lab in store.get(sink, ()) if lab.alive]
    finals.sort(key=lambda l: (l.rcost, l.res, l.sequence()))
    return [
        SearchResult(lab.sequence(), lab.rcost, lab.res) for lab in finals[:top_k]
    ]


# ---------------------------------------------------------------------------
# per-block elementary search
# ---------------------------------------------------------------------------


class BlockView:
    """Precomputed arrays for labeling over one block.

    Elements get local indices 0..m-1 (bit positions of the visited set),
    path-resource deltas are flattened into the problem's concatenated
    coordinate space, and adjacency is sorted for determinism.
    """

    MAX_ELEMENTS = 31

    def __init__(self, problem, block_index):
        block = problem.blocks[block_index]
        if len(block.elements) > self.MAX_ELEMENTS:
            raise LabelingError(
                f"block {block_index} has {len(block.elements)} elements; "
                f"the visited bit-set supports at most {self.MAX_ELEMENTS}"
            )
        self.problem = problem
        self.index = block_index
        self.elements = block.elements
        self.local = {k: i for i, k in enumerate(block.elements)}
        self.n_coords = problem.total_coords

        subs = problem.block_subs[block_index]
        self.sub_resources = subs
        self.n_sub = len(subs)
        self.floor = tuple(problem.subpath_resources[ri].floor_at_lower for ri in subs)
        self.windows = [
            tuple(problem.subpath_resources[ri].window(v) for ri in subs)
            for v in block.elements
        ]

        def flat_coords(item):
            if not item.path_deltas:
                return (0,) * self.n_coords
            out = []
            for vec in item.path_deltas:
                out.extend(vec)
            return tuple(out)

        def padded_sub(item):
            d = item.sub_deltas
            if len(d) == self.n_sub:
                return d
            return d + (0,) * (self.n_sub - len(d))

        self.entry = [
            (block.entry_at(v).cost, padded_sub(block.entry_at(v)),
             flat_coords(block.entry_at(v)))
            for v in block.elements
        ]
        self.exit = [
            (block.exit_at(v).cost, padded_sub(block.exit_at(v)),
             flat_coords(block.exit_at(v)))
            for v in block.elements
        ]
        self.arcs_out = [[] for _ in block.elements]
        for (u, v), arc in sorted(block.arcs.items()):
            self.arcs_out[self.local[u]].append(
                (self.local[v], arc.cost, padded_sub(arc), flat_coords(arc))
            )

        self.coord_monotone = self._coord_monotone()
        self.sub_le_safe = self._sub_le_safe()
        self._min_achievable = {}

    def _coord_monotone(self):
        mono = [True] * self.n_coords
        rows = self.entry + self.exit
        rows += [(c, s, f) for outs in self.arcs_out for (_, c, s, f) in outs]
        for _, _, coords in rows:
            for c, d in enumerate(coords):
                if d < 0:
                    mono[c] = False
        return tuple(mono)

    def _sub_le_safe(self):
        """Smaller-is-better dominance is sound per subpath resource when
        its lower window bounds can never bind."""
        out = []
        for j, ri in enumerate(self.sub_resources):
            res = self.problem.subpath_resources[ri]
            if res.floor_at_lower:
                out.append(True)
                continue
            lowers = [w[0] for w in (res.window(v) for v in self.elements)]
            finite = [lo for lo in lowers if lo is not None]
            if not finite:
                out.append(True)
                continue
            deltas_nonneg = True
            for cost, sub, _ in self.entry + self.exit:
                if sub[j] < 0:
                    deltas_nonneg = False
            for outs in self.arcs_out:
                for _, _, sub, _ in outs:
                    if sub[j] < 0:
                        deltas_nonneg = False
            out.append(deltas_nonneg and all(lo <= 0 for lo in finite))
        return tuple(out)

    def min_achievable(self, coord: int) -> int | None:
        """Smallest contribution value on one coordinate over all feasible
        subpaths of the block; None when the block admits none at all."""
        if coord not in self._min_achievable:
            results = elementary_rcspp(
                self.problem, self.index, objective=("coord", coord)
            )
            # when minimizing a coordinate the reported rcost is its value
            self._min_achievable[coord] = results[0][1] if results else None
        return self._min_achievable[coord]


def _flatten(contribs):
    out = []
    for vec in contribs:
        out.extend(vec)
    return tuple(out)


def block_view(problem, block_index) -> BlockView:
    views = problem._views
    if block_index not in views:
        views[block_index] = BlockView(problem, block_index)
    return views[block_index]


def _check_sub_window(view, local, values):
    for val, (lo, hi) in zip(values, view.windows[local]):
        if lo is not None and val < lo:
            return False
        if hi is not None and val > hi:
            return False
    return True


def _extend_sub(view, values, deltas, local, extra=None):
    out = []
    for j in range(view.n_sub):
        val = values[j] + deltas[j]
        if view.floor[j]:
            lo = view.windows[local][j][0]
            if lo is not None and val < lo:
                val = lo
        out.append(val)
    if extra is not None:
        win = extra.get(view.elements[local])
        if win is not None:
            for val, (lo, hi) in zip(out, win):
                if lo is not None and val < lo:
                    return None
                if hi is not None and val > hi:
                    return None
    return tuple(out)


def elementary_rcspp(
    problem,
    block_index: int,
    duals=None,
    *,
    contribution_box=None,
    banned=frozenset(),
    extra_windows=None,
    top_k: int = 1,
    objective="rcost",
):
    """Cheapest elementary subpaths of one block under per-element duals.

    ``contribution_box`` optionally restricts the final contribution
    vector to per-coordinate [lo, hi] ranges (concatenated coordinate
    space).  ``banned`` elements are skipped entirely.  ``extra_windows``
    layers additional per-element (lo, hi) bounds over the block's
    subpath resources.  ``objective`` is "rcost" or ("coord", c) to
    minimize one contribution coordinate instead (used to decide when a
    box lower bound can actually bind).

    Returns up to ``top_k`` (Subpath, scaled_rcost) pairs sorted by
    reduced cost; the scale is ``duals.denom``.
    """
    view = block_view(problem, block_index)
    if duals is None:
        duals = ScaledDuals({}, 0, 1)
    elif isinstance(duals, Duals):
        duals = duals.scaled()
    denom = duals.denom

    minimize_coord = None
    if objective != "rcost":
        kind, minimize_coord = objective
        if kind != "coord":
            raise LabelingError(f"unknown objective {objective!r}")

    # dominance modes per contribution coordinate: a box lower bound that
    # can bind forces exact-match dominance on that coordinate
    modes = []
    for c in range(view.n_coords):
        if contribution_box is None:
            modes.append(LE)
            continue
        lo = contribution_box[c][0]
        if lo is None:
            modes.append(LE)
            continue
        reachable = view.min_achievable(c)
        modes.append(LE if reachable is None or lo <= reachable else EQ)
    modes = tuple(modes)
    sub_modes = tuple(LE if safe else EQ for safe in view.sub_le_safe)

    banned_local = {view.local[k] for k in banned if k in view.local}

    def entry_label(local):
        cost, sub_d, coord_d = view.entry[local]
        values = _extend_sub(view, (0,) * view.n_sub, sub_d, local, extra_windows)
        if values is None or not _check_sub_window(view, local, values):
            return None
        contribs = coord_d
        if minimize_coord is None:
            rcost = cost * denom - duals.value(view.elements[local])
        else:
            rcost = contribs[minimize_coord]
        lab = _Label(local, rcost, contribs, visited=1 << local, cost=cost, sub=values)
        return lab

    def too_high(contribs):
        if contribution_box is None:
            return False
        for c, val in enumerate(contribs):
            hi = contribution_box[c][1]
            if hi is not None and view.coord_monotone[c] and val > hi:
                return True
        return False

    store = [[] for _ in view.elements]
    queue = deque()
    candidates = []

    def complete(lab):
        cost, sub_d, coord_d = view.exit[lab.node]
        contribs = tuple(x + d for x, d in zip(lab.res, coord_d))
        if contribution_box is not None:
            for c, val in enumerate(contribs):
                lo, hi = contribution_box[c]
                if lo is not None and val < lo:
                    return
                if hi is not None and val > hi:
                    return
        total_cost = lab.cost + cost
        if minimize_coord is None:
            rcost = lab.rcost + cost * denom
        else:
            rcost = contribs[minimize_coord]
        candidates.append((rcost, contribs, lab.sequence(), total_cost))

    for local in range(len(view.elements)):
        if local in banned_local:
            continue
        lab = entry_label(local)
        if lab is None or too_high(lab.res):
            continue
        if _insert(store[local], lab, modes, True, top_k, sub_modes):
            queue.append(lab)
            complete(lab)

    while queue:
        lab = queue.popleft()
        if not lab.alive:
            continue
        for target, cost, sub_d, coord_d in view.arcs_out[lab.node]:
            if target in banned_local or lab.visited & (1 << target):
                continue
            values = _extend_sub(view, lab.sub, sub_d, target, extra_windows)
            if values is None or not _check_sub_window(view, target, values):
                continue
            contribs = tuple(x + d for x, d in zip(lab.res, coord_d))
            if too_high(contribs):
                continue
            if minimize_coord is None:
                rcost = lab.rcost + cost * denom - duals.value(view.elements[target])
            else:
                rcost = contribs[minimize_coord]
            new = _Label(
                target, rcost, contribs,
                visited=lab.visited | (1 << target),
                pred=lab, cost=lab.cost + cost, sub=values,
            )
            if _insert(store[target], new, modes, True, top_k, sub_modes):
                queue.append(new)
                complete(new)

    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    out = []
    seen = set()
    for rcost, contribs, seq, total_cost in candidates:
        if seq in seen:
            continue
        seen.add(seq)
        nodes = tuple(view.elements[i] for i in seq)
        contributions = _unflatten(problem, contribs)
        out.append((Subpath(block_index, nodes, total_cost, contributions), rcost))
        if len(out) == top_k:
            break
    return out


def _unflatten(problem, flat):
    out = []
    for r, off in zip(problem.path_resources, problem.coord_offset):
        out.append(tuple(flat[off:off + r.dim]))
    return tuple(out)
