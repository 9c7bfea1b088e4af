"""Exact revised simplex over rational arithmetic.

Purpose-built for restricted master problems: minimize c.x subject to
rows that are either equalities or >= covering rows, x >= 0, with sparse
+-1 column coefficients.  Everything is computed in Fractions -- the
returned objective value, primal solution, and row duals are exact, so
two solvers given the same column set must agree bit for bit.

Implementation notes.  A dense basis inverse is maintained and updated in
product form (O(m^2) per pivot); warm starts rebuild it once by
Gauss-Jordan from a caller-supplied basis.  Entering columns are picked
by Dantzig's rule on reduced costs evaluated in integer arithmetic (duals
are rescaled by their common denominator each iteration), with Bland's
rule taking over during long degenerate streaks so cycling cannot occur.
Feasibility comes from one big-M phase: each row carries an artificial
column, and an artificial that stays basic at positive value at optimality
means the system is infeasible -- reported as a status, never as an
M-dependent objective value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

_DEGENERATE_STREAK = 40


class LpError(RuntimeError):
    """Simplex invariant failure (singular warm basis is handled, not raised)."""


@dataclass(frozen=True)
class LpResult:
    status: str                 # "optimal" | "infeasible" | "unbounded"
    value: Fraction | None
    primal: dict                # caller column index -> Fraction (nonzeros)
    duals: tuple                # one Fraction per row
    basis: tuple                # opaque warm-start token (internal indices)
    pivots: int = 0


class _Columns:
    """Internal column store: artificials, then surplus, then caller columns.

    The fixed blocks keep internal indices stable as caller columns are
    appended, so a basis survives pool growth between solves.
    """

    def __init__(self, m, senses):
        self.m = m
        self.senses = senses
        self.surplus_rows = [i for i, s in enumerate(senses) if s == ">="]
        self.n_fixed = m + len(self.surplus_rows)
        self.entries = []      # caller columns: tuple of (row, coeff)
        self.costs = []

    def append(self, cost, entries):
        self.costs.append(Fraction(cost))
        self.entries.append(tuple(entries))

    def column(self, j):
        if j < self.m:
            return ((j, 1),)                       # artificial
        if j < self.n_fixed:
            row = self.surplus_rows[j - self.m]
            return ((row, -1),)                    # surplus on a >= row
        return self.entries[j - self.n_fixed]

    def cost(self, j, big_m):
        if j < self.m:
            return big_m
        if j < self.n_fixed:
            return Fraction(0)
        return self.costs[j - self.n_fixed]

    @property
    def total(self):
        return self.n_fixed + len(self.entries)


def _gauss_jordan_inverse(matrix):
    m = len(matrix)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(m)]
           for i, row in enumerate(matrix)]
    for col in range(m):
        pivot = None
        for r in range(col, m):
            if aug[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[m:] for row in aug]


def solve_lp(costs, columns, rhs, senses, *, basis=None, big_m=None,
             max_pivots=None) -> LpResult:
    """Minimize ``costs . x`` s.t. the sparse system, x >= 0.

    ``columns[j]`` is an iterable of (row, coeff) pairs; ``senses`` holds
    "=" or ">=" per row, ``rhs`` must be nonnegative.  ``basis`` is the
    ``LpResult.basis`` of a previous solve over a prefix of these columns.
    """
    m = len(rhs)
    if any(b < 0 for b in rhs):
        raise LpError("rhs entries must be nonnegative")
    if any(s not in ("=", ">=") for s in senses):
        raise LpError("row senses must be '=' or '>='")
    store = _Columns(m, tuple(senses))
    for c, col in zip(costs, columns):
        store.append(c, col)
    if len(store.costs) != len(costs):
        raise LpError("cost/column length mismatch")
    n_total = store.total
    b = [Fraction(x) for x in rhs]

    if big_m is None:
        peak = max((abs(c) for c in store.costs), default=Fraction(0))
        big_m = max(10 * peak, Fraction(10**6))
    else:
        big_m = Fraction(big_m)
    if max_pivots is None:
        max_pivots = 10_000 + 50 * (m + n_total)

    # -- initial basis -----------------------------------------------------
    def fresh():
        return list(range(m)), [
            [Fraction(int(i == j)) for j in range(m)] for i in range(m)
        ]

    binv = None
    if basis is not None and len(basis) == m and all(
        0 <= j < n_total for j in basis
    ) and len(set(basis)) == m:
        mat = [[Fraction(0)] * m for _ in range(m)]
        for k, j in enumerate(basis):
            for row, coeff in store.column(j):
                mat[row][k] = Fraction(coeff)
        binv = _gauss_jordan_inverse(mat)
        if binv is not None:
            base = list(basis)
    if binv is None:
        base, binv = fresh()

    in_basis = [False] * n_total
    for j in base:
        in_basis[j] = True

    x_b = [sum(binv[i][r] * b[r] for r in range(m)) for i in range(m)]
    if any(v < 0 for v in x_b):
        # stale warm basis is primal infeasible; restart clean
        base, binv = fresh()
        in_basis = [False] * n_total
        for j in base:
            in_basis[j] = True
        x_b = [sum(binv[i][r] * b[r] for r in range(m)) for i in range(m)]

    pivots = 0
    degen = 0
    while True:
        if pivots > max_pivots:
            raise LpError(f"pivot limit {max_pivots} exceeded")
        # duals y = c_B . B^-1, then integer-rescaled for the pricing scan
        c_b = [store.cost(j, big_m) for j in base]
        y = [
            sum(c_b[i] * binv[i][r] for i in range(m)) for r in range(m)
        ]
        scale = math.lcm(*(f.denominator for f in y)) if m else 1
        y_int = [int(f * scale) for f in y]

        entering = None
        use_bland = degen >= _DEGENERATE_STREAK
        best = 0
        for j in range(n_total):
            if in_basis[j]:
                continue
            cost_scaled = store.cost(j, big_m) * scale
            if cost_scaled.denominator != 1:
                d = cost_scaled - sum(
                    y_int[row] * coeff for row, coeff in store.column(j)
                )
            else:
                d = int(cost_scaled) - sum(
                    y_int[row] * coeff for row, coeff in store.column(j)
                )
            if d < 0:
                if use_bland:
                    entering = j
                    break
                if d < best:
                    best = d
                    entering = j

        if entering is None:
            # optimal for the big-M program
            for i, j in enumerate(base):
                if j < m and x_b[i] > 0:
                    return LpResult(
                        "infeasible", None, {}, tuple(y), tuple(base), pivots
                    )
            value = sum(
                store.cost(j, big_m) * x_b[i]
                for i, j in enumerate(base)
                if j >= m
            )
            primal = {}
            for i, j in enumerate(base):
                if j >= store.n_fixed and x_b[i] != 0:
                    primal[j - store.n_fixed] = x_b[i]
            return LpResult(
                "optimal", value, primal, tuple(y), tuple(base), pivots
            )

        # direction w = B^-1 A_j and ratio test
        col = store.column(entering)
        w = [
            sum(binv[i][row] * coeff for row, coeff in col) for i in range(m)
        ]
        leave = None
        best_ratio = None
        for i in range(m):
            if w[i] > 0:
                ratio = x_b[i] / w[i]
                key = (ratio, base[i])
                if best_ratio is None or key < best_ratio:
                    best_ratio = key
                    leave = i
        if leave is None:
            return LpResult(
                "unbounded", None, {}, tuple(y), tuple(base), pivots
            )
        degen = degen + 1 if best_ratio[0] == 0 else 0

        # pivot: eta update of B^-1 and of x_B
        piv = w[leave]
        binv[leave] = [v / piv for v in binv[leave]]
        x_b[leave] = x_b[leave] / piv
        for i in range(m):
            if i != leave and w[i] != 0:
                f = w[i]
                row_l = binv[leave]
                binv[i] = [a - f * z for a, z in zip(binv[i], row_l)]
                x_b[i] = x_b[i] - f * x_b[leave]
        in_basis[base[leave]] = False
        in_basis[entering] = True
        base[leave] = entering
        pivots += 1
