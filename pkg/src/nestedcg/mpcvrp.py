"""Multi-period capacitated vehicle routing with a fleet distance cap.

Blocks are days.  A column is a vehicle *schedule*: one depot-to-depot
route on every day of the horizon.  Vehicle load is a subpath resource
(running demand total, capped by Q at every stop); cumulative route
distance is a one-dimensional path resource summed over days and capped
by D per vehicle.  Customers are partitioned (each visited exactly once,
on its assigned day) and a cardinality row pins the number of schedules
to the fleet size K.

Distances follow the classical rounded-Euclidean convention (nearest
integer, which is unambiguous for integer coordinates); model costs are
those integers in millicost units so that bucket coordinates stay small
while LP arithmetic stays exact.

The distance cap of a generated instance interpolates between two
calibrated anchors: ``d_min``, the per-vehicle share of the summed
optimal daily routing costs, and ``d_max``, the best max-workload
assignment of those same optimal routes to vehicles.  Both anchors are
computed exactly (dynamic programming over customer subsets), which is
why the generator enforces a desk-scale limit on customers per day.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .labeling import elementary_rcspp
from .model import (
    MILLI,
    PARTITION,
    SUM,
    Arc,
    Block,
    Boundary,
    ModelError,
    NestedProblem,
    PathResource,
    SubpathResource,
)

# Exact calibration enumerates customer subsets per day; 2^14 masks is
# the largest table we are willing to build before refusing.
MAX_DAY_SIZE = 14

_INF = math.inf


def euclidean(a, b) -> int:
    """Rounded-Euclidean distance between two integer points."""
    return int(math.hypot(a[0] - b[0], a[1] - b[1]) + 0.5)


# ---------------------------------------------------------------------------
# instance model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapDerivation:
    """How a distance cap was derived: anchors, interpolation, and seed."""

    d_min: Fraction
    d_max: int
    delta: Fraction
    seed: int | None = None


@dataclass(frozen=True)
class MpcvrpInstance:
    days: int
    vehicles: int
    capacity: int
    depot: tuple[int, int]
    customers: tuple[tuple[int, int], ...]
    demands: tuple[int, ...]
    day_of: tuple[int, ...]
    distance_cap: int
    derivation: CapDerivation | None = None
    name: str = "mpcvrp"

    def __post_init__(self):
        if self.days < 1 or self.vehicles < 1 or self.capacity < 1:
            raise ModelError("days, vehicles and capacity must be positive")
        if self.distance_cap <= 0:
            raise ModelError("distance cap must be positive")
        if not (len(self.customers) == len(self.demands) == len(self.day_of)):
            raise ModelError("customers, demands and day_of must align")
        for i, d in enumerate(self.demands):
            if not 1 <= d <= self.capacity:
                raise ModelError(f"demand of customer {i} outside [1, Q]")
        seen_days = set()
        for i, t in enumerate(self.day_of):
            if not 0 <= t < self.days:
                raise ModelError(f"customer {i} assigned to unknown day {t}")
            seen_days.add(t)
        if len(seen_days) != self.days:
            raise ModelError("every day needs at least one customer")

    def day_members(self, day: int) -> tuple[int, ...]:
        """Customer indices visited on ``day``, in index order."""
        return tuple(i for i, t in enumerate(self.day_of) if t == day)


def route_distance(instance: MpcvrpInstance, route) -> int:
    """Total rounded-Euclidean length of depot -> route... -> depot."""
    route = list(route)
    if not route:
        return 0
    legs = euclidean(instance.depot, instance.customers[route[0]])
    for u, w in zip(route, route[1:]):
        legs += euclidean(instance.customers[u], instance.customers[w])
    return legs + euclidean(instance.customers[route[-1]], instance.depot)


# ---------------------------------------------------------------------------
# nested-problem encoding
# ---------------------------------------------------------------------------


def build_nested(instance: MpcvrpInstance) -> NestedProblem:
    """Encode an instance as a nested path problem.

    One block per day over that day's customers, complete intra-day arcs,
    and depot legs carried by the boundary halves.  The load window is
    checked at every stop; the distance contribution of a day is the full
    route length including both depot legs.
    """
    blocks = []
    sub_resources = []
    for day in range(instance.days):
        members = instance.day_members(day)
        entry = {}
        exits = {}
        arcs = {}
        for u in members:
            leg_in = euclidean(instance.depot, instance.customers[u])
            leg_out = euclidean(instance.customers[u], instance.depot)
            entry[u] = Boundary(
                cost=leg_in * MILLI,
                sub_deltas=(instance.demands[u],),
                path_deltas=((leg_in,),),
            )
            exits[u] = Boundary(cost=leg_out * MILLI, path_deltas=((leg_out,),))
            for w in members:
                if w == u:
                    continue
                hop = euclidean(instance.customers[u], instance.customers[w])
                arcs[(u, w)] = Arc(
                    cost=hop * MILLI,
                    sub_deltas=(instance.demands[w],),
                    path_deltas=((hop,),),
                )
        blocks.append(Block(members, arcs, entry, exits))
        sub_resources.append(
            SubpathResource(
                block=day,
                windows={u: (None, instance.capacity) for u in members},
            )
        )
    distance = PathResource(
        dim=1,
        agg=SUM,
        a=(1,),
        b=instance.distance_cap,
        box=((0, instance.distance_cap),),
    )
    return NestedProblem(
        blocks=blocks,
        subpath_resources=sub_resources,
        path_resources=[distance],
        sense=PARTITION,
        cardinality=instance.vehicles,
        name=instance.name,
    )


def cheapest_routes(problem, day, duals=None, *, window=None, top_k=1):
    """Least-reduced-cost routes of one day, optionally within a distance
    window [lo, hi].  Thin veneer over the block labeling search; the
    cardinality-row dual is charged at schedule assembly, not here."""
    box = (tuple(window),) if window is not None else None
    return elementary_rcspp(problem, day, duals, contribution_box=box, top_k=top_k)


# ---------------------------------------------------------------------------
# exact daily routing (calibration backend)
# ---------------------------------------------------------------------------


def _day_tables(instance: MpcvrpInstance, day: int):
    """Held-Karp tables for one day.

    Returns (members, dist, leg, dp, route_cost): the local distance
    matrix, depot legs, the open-path table dp[mask][j] (cheapest
    depot-start path visiting exactly ``mask`` and ending at local j),
    and route_cost[mask], the cheapest closed route over ``mask`` or inf
    when the mask's demand exceeds capacity.
    """
    members = instance.day_members(day)
    m = len(members)
    if m > MAX_DAY_SIZE:
        raise ModelError(
            f"day {day} has {m} customers; exact calibration handles at most "
            f"{MAX_DAY_SIZE}"
        )
    pts = [instance.customers[i] for i in members]
    dist = [[euclidean(a, b) for b in pts] for a in pts]
    leg = [euclidean(instance.depot, p) for p in pts]
    load = [0] * (1 << m)
    for mask in range(1, 1 << m):
        low = (mask & -mask).bit_length() - 1
        load[mask] = load[mask ^ (1 << low)] + instance.demands[members[low]]

    dp = [[_INF] * m for _ in range(1 << m)]
    for j in range(m):
        dp[1 << j][j] = leg[j]
    for mask in range(1, 1 << m):
        row = dp[mask]
        for j in range(m):
            base = row[j]
            if base == _INF or not mask & (1 << j):
                continue
            dj = dist[j]
            for w in range(m):
                if mask & (1 << w):
                    continue
                cand = base + dj[w]
                if cand < dp[mask | (1 << w)][w]:
                    dp[mask | (1 << w)][w] = cand

    route_cost = [_INF] * (1 << m)
    for mask in range(1, 1 << m):
        if load[mask] > instance.capacity:
            continue
        row = dp[mask]
        best = _INF
        for j in range(m):
            if mask & (1 << j) and row[j] + leg[j] < best:
                best = row[j] + leg[j]
        route_cost[mask] = best
    return members, dist, leg, dp, route_cost


def _order_route(members, dist, leg, dp, mask):
    """Walk the Held-Karp table backwards to one cheapest visit order
    (deterministic: lowest local index wins every tie)."""
    m = len(members)
    end, best = -1, _INF
    for j in range(m):
        if mask & (1 << j) and dp[mask][j] + leg[j] < best:
            end, best = j, dp[mask][j] + leg[j]
    order = [members[end]]
    while mask != 1 << end:
        prev_mask = mask ^ (1 << end)
        for j in range(m):
            if prev_mask & (1 << j) and dp[prev_mask][j] + dist[j][end] == dp[mask][end]:
                break
        end, mask = j, prev_mask
        order.append(members[end])
    order.reverse()
    return tuple(order)


def solve_day(instance: MpcvrpInstance, day: int, *, routes: int | None = None):
    """Exact daily routing: cheapest partition of the day's customers into
    exactly ``routes`` capacity-feasible routes (default: the fleet size).

    Returns (total_distance, route_tuple) with each route a customer-index
    visit sequence.  Raises ModelError when no such partition exists.
    """
    k = instance.vehicles if routes is None else routes
    members, dist, leg, dp, route_cost = _day_tables(instance, day)
    m = len(members)
    full = (1 << m) - 1
    if k > m:
        raise ModelError(f"day {day}: {k} routes need at least {k} customers")

    # part[r][mask]: cheapest split of mask into exactly r feasible routes.
    # Submasks are forced to contain the mask's lowest bit so every split
    # is enumerated once.
    part = [[_INF] * (1 << m) for _ in range(k + 1)]
    part[0][0] = 0
    choice = [[0] * (1 << m) for _ in range(k + 1)]
    for r in range(1, k + 1):
        prev, cur, pick = part[r - 1], part[r], choice[r]
        for mask in range(1, 1 << m):
            low = mask & -mask
            best, arg = _INF, 0
            sub = mask
            while sub:
                if sub & low:
                    cand = route_cost[sub] + prev[mask ^ sub]
                    if cand < best:
                        best, arg = cand, sub
                sub = (sub - 1) & mask
            cur[mask], pick[mask] = best, arg
    if part[k][full] == _INF:
        raise ModelError(
            f"day {day}: no partition into {k} capacity-feasible routes"
        )

    routes_out = []
    mask = full
    for r in range(k, 0, -1):
        sub = choice[r][mask]
        routes_out.append(_order_route(members, dist, leg, dp, sub))
        mask ^= sub
    return int(part[k][full]), tuple(reversed(routes_out))


def calibrate_caps(instance: MpcvrpInstance, delta, seed=None) -> CapDerivation:
    """Compute the cap anchors for an instance.

    ``d_min`` spreads the summed optimal daily routing cost evenly over
    the fleet.  ``d_max`` keeps those same optimal routes but assigns
    them to vehicles so the largest per-vehicle total is smallest; with K
    routes per day that is an exact enumeration of per-day assignments
    (vehicles are interchangeable, so the first day is pinned).
    """
    k = instance.vehicles
    day_routes = []
    total = 0
    for day in range(instance.days):
        cost, routes = solve_day(instance, day)
        total += cost
        day_routes.append([route_distance(instance, r) for r in routes])

    best = _INF
    tail = [list(itertools.permutations(range(k))) for _ in day_routes[1:]]
    for assignment in itertools.product(*tail):
        loads = list(day_routes[0])
        for lengths, perm in zip(day_routes[1:], assignment):
            for v in range(k):
                loads[v] += lengths[perm[v]]
        worst = max(loads)
        if worst < best:
            best = worst
    delta = delta if isinstance(delta, Fraction) else Fraction(str(delta))
    d_min = Fraction(total, k)
    if not 0 <= delta <= 1:
        raise ModelError("delta must lie in [0, 1]")
    return CapDerivation(d_min=d_min, d_max=int(best), delta=delta, seed=seed)


# ---------------------------------------------------------------------------
# point pools
# ---------------------------------------------------------------------------


def parse_points(text: str):
    """Parse NODE_COORD_SECTION / DEMAND_SECTION data into aligned
    (coords, demands) tuples ordered by 1-based node id."""
    coords = {}
    demands = {}
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line == "EOF":
            section = None
            continue
        upper = line.upper()
        if upper.startswith("NODE_COORD_SECTION"):
            section = "coord"
            continue
        if upper.startswith("DEMAND_SECTION"):
            section = "demand"
            continue
        if ":" in line and section is None:
            continue  # header key/value
        if upper.endswith("_SECTION"):
            section = None
            continue
        fields = line.split()
        if section == "coord" and len(fields) == 3:
            i, x, y = (int(float(f)) for f in fields)
            coords[i] = (x, y)
        elif section == "demand" and len(fields) == 2:
            i, d = (int(float(f)) for f in fields)
            demands[i] = d
    if not coords:
        raise ModelError("no NODE_COORD_SECTION entries found")
    ids = sorted(coords)
    if ids != list(range(1, len(ids) + 1)):
        raise ModelError("node ids must be contiguous from 1")
    out_coords = tuple(coords[i] for i in ids)
    out_demands = tuple(demands.get(i, 1) for i in ids)
    return out_coords, out_demands


def load_points(path=None):
    """The bundled desk-scale point pool, or any file in the same format."""
    if path is None:
        text = resources.files("nestedcg").joinpath("data/points.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_points(text)


def random_points(count: int, seed: int, *, grid: int = 1000, demand_range=(1, 10)):
    """Uniform fallback pool: ``count`` distinct integer points with
    demands, reproducible from ``seed``."""
    rng = random.Random(seed)
    cells = rng.sample(range((grid + 1) * (grid + 1)), count)
    coords = tuple((c % (grid + 1), c // (grid + 1)) for c in cells)
    demands = tuple(rng.randint(*demand_range) for _ in range(count))
    return coords, demands


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def generate_instance(
    points=None,
    *,
    n: int,
    days: int,
    vehicles: int,
    delta,
    seed: int,
    capacity: int | None = None,
    name: str | None = None,
) -> MpcvrpInstance:
    """Draw a desk-scale instance from a point pool.

    Samples (n + 1) * days distinct pool points: ``n`` customers for each
    day plus one depot (the draw beyond the customer chunks).  Unless
    given, the capacity is set just high enough that every day provably
    splits into ``vehicles`` feasible routes while single-route days stay
    excluded.  The distance cap interpolates the calibration anchors:
    floor(d_min + delta * (d_max - d_min)).
    """
    if n < vehicles:
        raise ModelError("need at least as many customers per day as vehicles")
    coords, demands = points if points is not None else load_points()
    need = (n + 1) * days
    if need > len(coords):
        raise ModelError(f"pool has {len(coords)} points, need {need}")
    rng = random.Random(seed)
    drawn = rng.sample(range(len(coords)), need)
    chosen = drawn[: n * days]
    depot = coords[drawn[n * days]]
    day_of = tuple(i // n for i in range(n * days))
    cust = tuple(coords[i] for i in chosen)
    dem = tuple(demands[i] for i in chosen)

    if capacity is None:
        worst_day = max(
            sum(dem[i] for i in range(t * n, (t + 1) * n)) for t in range(days)
        )
        capacity = -(-worst_day // vehicles) + max(dem)

    probe = MpcvrpInstance(
        days=days,
        vehicles=vehicles,
        capacity=capacity,
        depot=depot,
        customers=cust,
        demands=dem,
        day_of=day_of,
        distance_cap=1,  # placeholder until calibrated
    )
    derivation = calibrate_caps(probe, delta, seed)
    cap = math.floor(
        derivation.d_min + derivation.delta * (derivation.d_max - derivation.d_min)
    )
    if name is None:
        name = (
            f"mpcvrp-n{n}-t{days}-k{vehicles}"
            f"-d{float(derivation.delta):g}-s{seed}"
        )
    return MpcvrpInstance(
        days=days,
        vehicles=vehicles,
        capacity=capacity,
        depot=depot,
        customers=cust,
        demands=dem,
        day_of=day_of,
        distance_cap=cap,
        derivation=derivation,
        name=name,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def instance_to_json(instance: MpcvrpInstance) -> dict:
    data = {
        "kind": "mpcvrp",
        "name": instance.name,
        "days": instance.days,
        "vehicles": instance.vehicles,
        "capacity": instance.capacity,
        "distance_cap": instance.distance_cap,
        "depot": list(instance.depot),
        "customers": [list(c) for c in instance.customers],
        "demands": list(instance.demands),
        "day_of": list(instance.day_of),
    }
    if instance.derivation is not None:
        d = instance.derivation
        data["derivation"] = {
            "d_min": str(d.d_min),
            "d_max": d.d_max,
            "delta": str(d.delta),
            "seed": d.seed,
        }
    return data


def instance_from_json(data: dict) -> MpcvrpInstance:
    derivation = None
    if data.get("derivation"):
        d = data["derivation"]
        derivation = CapDerivation(
            d_min=Fraction(d["d_min"]),
            d_max=int(d["d_max"]),
            delta=Fraction(d["delta"]),
            seed=d.get("seed"),
        )
    return MpcvrpInstance(
        days=int(data["days"]),
        vehicles=int(data["vehicles"]),
        capacity=int(data["capacity"]),
        depot=tuple(data["depot"]),
        customers=tuple(tuple(c) for c in data["customers"]),
        demands=tuple(int(d) for d in data["demands"]),
        day_of=tuple(int(t) for t in data["day_of"]),
        distance_cap=int(data["distance_cap"]),
        derivation=derivation,
        name=data.get("name", "mpcvrp"),
    )


def save_instance(instance: MpcvrpInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_json(instance), indent=2) + "\n")


def load_instance(path) -> MpcvrpInstance:
    return instance_from_json(json.loads(Path(path).read_text()))
