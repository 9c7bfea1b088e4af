"""Restricted master problem over a growing path pool.

One covering/partitioning row per element, an optional cardinality row
(its dual is the convexity charge each path pays once), and a pool of
path columns deduplicated by node sequence.  Solves are exact -- the LP
runs on the bundled rational simplex -- so the reported value is a
Fraction in millicost and identical across pricer configurations that
reach the same optimum.

Infeasibility is reported as a status.  The big-M artificials that keep
intermediate masters solvable never leak into values: when artificials
remain basic at positive level the value is None, whatever M was.

Diving support: fixing a path to one removes its elements' rows.  Under
partitioning those elements also become banned for pricing; under
covering, paths may still visit them for free.  The cardinality row's
right-hand side shrinks by one per fixed path.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction

from .model import COVER, PARTITION, Duals, Path
from .simplex import LpResult, solve_lp

POOL_PERIOD = 5
POOL_MAX_AGE = 10
POOL_FLOOR = 1000


class MasterError(RuntimeError):
    pass


@dataclass
class PoolEntry:
    path: Path
    serial: int
    added: int          # iteration the column joined
    last_used: int      # last iteration it was added or sat in the basis


@dataclass(frozen=True)
class RmpSolution:
    status: str                      # "optimal" | "infeasible"
    lp_value: Fraction | None        # residual LP value, excludes fixed paths
    duals: Duals                     # per-element duals + convexity charge
    primal: dict                     # pool serial -> Fraction, nonzero only
    fractional: tuple                # (serial, Fraction) pairs with 0 < v < 1


class Rmp:
    def __init__(self, problem, *, pool_floor=POOL_FLOOR, max_age=POOL_MAX_AGE):
        self.problem = problem
        self.pool_floor = pool_floor
        self.max_age = max_age
        self.pool: list[PoolEntry] = []
        self.by_key = {}
        self.by_serial = {}
        self._next_serial = 0
        self.fixed: list[Path] = []
        self.satisfied = set()
        self._basis = None
        self._basis_sig = None
        self.solves = 0

    # -- pool ----------------------------------------------------------------

    def add_columns(self, paths, iteration=0) -> int:
        added = 0
        for path in paths:
            key = path.node_key
            entry = self.by_key.get(key)
            if entry is not None:
                entry.last_used = iteration
                continue
            entry = PoolEntry(path, self._next_serial, iteration, iteration)
            self._next_serial += 1
            self.pool.append(entry)
            self.by_key[key] = entry
            self.by_serial[entry.serial] = entry
            added += 1
        return added

    def manage_pool(self, iteration) -> int:
        """Evict long-unused columns once the pool outgrows its floor.

        Oldest-by-last-use go first, insertion order breaking ties.  Any
        eviction invalidates the warm basis.
        """
        excess = len(self.pool) - self.pool_floor
        if excess <= 0:
            return 0
        candidates = sorted(
            (e for e in self.pool if iteration - e.last_used > self.max_age),
            key=lambda e: (e.last_used, e.serial),
        )
        evict = candidates[:excess]
        if not evict:
            return 0
        dead = {e.serial for e in evict}
        self.pool = [e for e in self.pool if e.serial not in dead]
        for e in evict:
            del self.by_key[e.path.node_key]
            del self.by_serial[e.serial]
        self._basis = None
        self._basis_sig = None
        return len(evict)

    # -- diving --------------------------------------------------------------

    @property
    def banned(self) -> frozenset:
        if self.problem.sense == PARTITION:
            return frozenset(self.satisfied)
        return frozenset()

    @property
    def remaining_cardinality(self):
        if self.problem.cardinality is None:
            return None
        return self.problem.cardinality - len(self.fixed)

    @property
    def fixed_cost(self) -> int:
        return sum(p.cost for p in self.fixed)

    def fix_path(self, serial) -> Path:
        entry = self.by_serial.get(serial)
        if entry is None:
            raise MasterError(f"no pool column with serial {serial}")
        path = entry.path
        remaining = self.remaining_cardinality
        if remaining is not None and remaining <= 0:
            raise MasterError("cardinality exhausted; cannot fix another path")
        self.fixed.append(path)
        self.satisfied.update(path.covered)
        self._basis = None
        self._basis_sig = None
        return path

    # -- solving ---------------------------------------------------------------

    def _active_rows(self):
        return [k for k in self.problem.elements if k not in self.satisfied]

    def _usable(self, entry) -> bool:
        if self.problem.sense == PARTITION and self.satisfied.intersection(
            entry.path.covered
        ):
            return False
        return True

    def solve(self, iteration=0) -> RmpSolution:
        problem = self.problem
        rows = self._active_rows()
        row_of = {k: i for i, k in enumerate(rows)}
        card_row = None
        rhs = [1] * len(rows)
        senses = ["=" if problem.sense == PARTITION else ">="] * len(rows)
        remaining = self.remaining_cardinality
        if remaining is not None:
            if remaining < 0:
                raise MasterError("more fixed paths than the cardinality allows")
            card_row = len(rows)
            rhs.append(remaining)
            senses.append("=")

        entries = [e for e in self.pool if self._usable(e)]
        costs = []
        columns = []
        for e in entries:
            coeffs = [(row_of[k], 1) for k in sorted(e.path.covered) if k in row_of]
            if card_row is not None:
                coeffs.append((card_row, 1))
            costs.append(e.path.cost)
            columns.append(tuple(coeffs))

        peak = max((abs(c) for c in costs), default=0)
        big_m = max(10 * peak, 10**6)

        sig = (tuple(rows), tuple(rhs), len(entries))
        basis = self._basis if self._basis_sig == sig or (
            self._basis_sig is not None
            and self._basis_sig[:2] == sig[:2]
            and self._basis_sig[2] <= sig[2]
        ) else None
        result: LpResult = solve_lp(
            costs, columns, rhs, senses, basis=basis, big_m=big_m
        )
        self._basis = result.basis
        self._basis_sig = sig
        self.solves += 1

        by_element = {k: result.duals[i] for i, k in enumerate(rows)}
        convexity = result.duals[card_row] if card_row is not None else Fraction(0)
        duals = Duals(by_element, convexity)

        primal = {}
        fractional = []
        for j, value in result.primal.items():
            entry = entries[j]
            primal[entry.serial] = value
            entry.last_used = iteration
            if 0 < value < 1:
                fractional.append((entry.serial, value))
        fractional.sort(key=lambda t: (-t[1], t[0]))

        return RmpSolution(
            status=result.status,
            lp_value=result.value,
            duals=duals,
            primal=primal,
            fractional=tuple(fractional),
        )


# ---------------------------------------------------------------------------
# dual smoothing
# ---------------------------------------------------------------------------


@dataclass
class SmoothingState:
    """Wentges smoothing with a self-tuning weight.

    The pricer sees ``alpha * center + (1 - alpha) * pure``.  A misprice
    (smoothed duals yield nothing) shrinks alpha by a fifth; a productive
    call nudges it up, capped below one.  The center moves to whatever
    duals last improved the Lagrangian bound.  Alpha stays on a coarse
    rational grid so scaled-dual denominators cannot snowball.
    """

    alpha: Fraction = Fraction(1, 2)
    center: Duals | None = None

    def smoothed(self, pure: Duals) -> Duals:
        if self.center is None or self.alpha == 0:
            return pure
        a = self.alpha
        keys = set(pure.by_element) | set(self.center.by_element)
        mixed = {
            k: a * self.center.value(k) + (1 - a) * pure.value(k) for k in keys
        }
        convexity = a * self.center.convexity + (1 - a) * pure.convexity
        return Duals(mixed, convexity)

    def on_misprice(self):
        self.alpha = (self.alpha * Fraction(4, 5)).limit_denominator(1000)

    def on_success(self):
        self.alpha = min(
            Fraction(9, 10),
            (self.alpha + Fraction(1, 50)).limit_denominator(1000),
        )

    def recentre(self, duals: Duals):
        self.center = duals


def lagrangian_bound(problem, rmp: Rmp, duals: Duals, optimistic: Fraction):
    """Valid lower bound on the residual LP value from any correctly
    signed duals plus a lower bound on the pricing problem: the dual
    objective, plus the path-count multiplier times the negative part of
    the bound."""
    rows = [k for k in problem.elements if k not in rmp.satisfied]
    value = sum(duals.value(k) for k in rows)
    remaining = rmp.remaining_cardinality
    if remaining is not None:
        value += remaining * duals.convexity
        multiplier = remaining
    else:
        multiplier = len(rows)
    return value + multiplier * min(Fraction(0), optimistic)


# ---------------------------------------------------------------------------
# MPS export (debug / interop)
# ---------------------------------------------------------------------------


def write_mps(rmp: Rmp, name="master") -> str:
    """Serialize the current master as free-format MPS (minimization,
    millicost objective).  Mostly useful for eyeballing a failing LP in
    an external solver."""
    problem = rmp.problem
    rows = rmp._active_rows()
    remaining = rmp.remaining_cardinality
    out = io.StringIO()
    out.write(f"NAME {name}\n")
    out.write("ROWS\n")
    out.write(" N COST\n")
    sense = "E" if problem.sense == PARTITION else "G"
    for k in rows:
        out.write(f" {sense} R{k}\n")
    if remaining is not None:
        out.write(" E CARD\n")
    out.write("COLUMNS\n")
    for e in rmp.pool:
        if not rmp._usable(e):
            continue
        col = f"X{e.serial}"
        out.write(f" {col} COST {e.path.cost}\n")
        for k in sorted(e.path.covered):
            if k in rmp.satisfied:
                continue
            out.write(f" {col} R{k} 1\n")
        if remaining is not None:
            out.write(f" {col} CARD 1\n")
    out.write("RHS\n")
    for k in rows:
        out.write(f" RHS R{k} 1\n")
    if remaining is not None:
        out.write(f" RHS CARD {remaining}\n")
    out.write("BOUNDS\nENDATA\n")
    return out.getvalue()
