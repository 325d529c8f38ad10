"""Instance generators, an exact micro-instance oracle, and the benchmark
harness.

Generators are deterministic (gen_random is seeded).  The oracle does a
breadth-first search over exact world states for one agent, giving ground
truth on buildability and optimal makespan for footprints small enough to
enumerate.  The suite runner times the planner, validates every plan, and
writes a CSV report plus a JSON sidecar.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import random
import statistics
import time
from dataclasses import dataclass

from .core import Instance, Pos, border_cells, neighbors
from .planner import multi_agent_reramp
from .validator import validate_plan


class BenchError(Exception):
    def __init__(self, code: str, msg: str = ""):
        super().__init__(f"{code}: {msg}" if msg else code)
        self.code = code


# --- generators --------------------------------------------------------------

def gen_corridor(length: int, col_h: int) -> Instance:
    """A 1-cell-wide corridor of `length` cells with one column of height
    col_h on its last cell; grid (length+2) x 3."""
    if length < 2 or col_h < 1:
        raise BenchError("bad-params", "corridor needs length >= 2 and col_h >= 1")
    x_size = length + 2
    tgt = [[0] * 3 for _ in range(x_size)]
    tgt[length][1] = col_h
    return Instance.from_heights(x_size, 3, max(col_h, 1), tgt)


def gen_comb(spine: int, teeth: list[tuple[int, int]], col_h: int | None = None) -> Instance:
    """A comb area: spine of `spine` cells along y=1 from the border cell
    (0,1), teeth of given lengths hanging off spine cells in +y, and a
    terminal column behind the spine end.

    Every other interior cell is filled to an unclearable height, pinning
    the walkable area to exactly the comb, and a filler row seals the
    teeth from the far border.  col_h defaults to spine + sum of the
    teeth's reversible heights, the tallest column the comb can serve.
    """
    if spine < 2:
        raise BenchError("bad-params", "comb needs a spine of >= 2 cells")
    for idx, l in teeth:
        if not 1 <= idx <= spine or l < 1:
            raise BenchError("bad-params", f"tooth at {idx} length {l} out of range")
    lmax = max((l for _, l in teeth), default=0)
    x_size = spine + 3
    y_size = lmax + 4
    want = spine + sum(l // 2 for _, l in teeth)
    if col_h is None:
        col_h = want
    comb = {(x, 1) for x in range(1, spine + 1)}
    for idx, l in teeth:
        for d in range(1, l + 1):
            cell = (idx, 1 + d)
            if cell in comb:
                raise BenchError("bad-params", "teeth overlap")
            comb.add(cell)
    interior = {(x, y) for x in range(1, x_size - 1) for y in range(1, y_size - 1)}
    tall = len(interior) + 2
    tgt = [[0] * y_size for _ in range(x_size)]
    for (x, y) in interior - comb - {(spine + 1, 1)}:
        tgt[x][y] = tall
    tgt[spine + 1][1] = col_h
    return Instance.from_heights(x_size, y_size, max(col_h, tall), tgt)


def gen_pyramid(base: int, levels: int) -> Instance:
    """Concentric square layers: an outer ring of height 1 up to a center
    plateau of height `levels`, on a base x base footprint."""
    if base < 1 or levels < 1 or levels > (base + 1) // 2:
        raise BenchError("bad-params", f"pyramid base {base} cannot hold {levels} levels")
    size = base + 2
    tgt = [[0] * size for _ in range(size)]
    for x in range(1, base + 1):
        for y in range(1, base + 1):
            ring = min(x, y, base + 1 - x, base + 1 - y)
            tgt[x][y] = min(ring, levels)
    return Instance.from_heights(size, size, levels, tgt)


def gen_random(x: int, y: int, max_h: int, seed: int, density: float = 0.3) -> Instance:
    """Seeded random structure: each interior cell independently holds a
    column of uniform height 1..max_h with probability `density`."""
    if x < 3 or y < 3 or max_h < 1 or not 0 <= density <= 1:
        raise BenchError("bad-params", "bad random-instance parameters")
    rng = random.Random(seed)
    tgt = [[0] * y for _ in range(x)]
    for i in range(1, x - 1):
        for j in range(1, y - 1):
            if rng.random() < density:
                tgt[i][j] = rng.randint(1, max_h)
    return Instance.from_heights(x, y, max_h, tgt)


def gen_house(scale: float = 1.0) -> Instance:
    """A single-story house shell: rectangular walls with a door gap,
    window columns at sill height, and lintel-free openings (the height
    map is solid columns, so openings run to the top).

    Full scale is a 76x44-cell wall rectangle of 58-block walls padded by
    5 empty cells plus the border ring; `scale` shrinks walls and
    footprint proportionally (wall height rounds up).
    """
    if not 0 < scale <= 1:
        raise BenchError("bad-params", "scale must be in (0, 1]")
    wall_h = max(2, math.ceil(58 * scale - 1e-9))
    wx = max(5, round(76 * scale))
    wy = max(4, round(44 * scale))
    pad = max(1, round(5 * scale))
    x_size = wx + 2 * pad + 2
    y_size = wy + 2 * pad + 2
    x0, y0 = pad + 1, pad + 1
    sill = max(1, wall_h * 2 // 5)
    tgt = [[0] * y_size for _ in range(x_size)]
    wall: list[Pos] = []
    for x in range(x0, x0 + wx):
        wall.append((x, y0))
        wall.append((x, y0 + wy - 1))
    for y in range(y0 + 1, y0 + wy - 1):
        wall.append((x0, y))
        wall.append((x0 + wx - 1, y))
    door = {(x0 + wx // 2, y0), (x0 + wx // 2 + 1, y0)}
    windows = {(x0, y0 + wy // 2), (x0 + wx - 1, y0 + wy // 2),
               (x0 + wx // 4, y0 + wy - 1), (x0 + 3 * wx // 4, y0 + wy - 1)}
    for c in wall:
        if c in door:
            continue
        tgt[c[0]][c[1]] = sill if c in windows else wall_h
    return Instance.from_heights(x_size, y_size, wall_h, tgt)


# --- exact oracle ------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    buildable: bool
    optimal_makespan: int | None
    explored_states: int


def bfs_oracle(inst: Instance, state_limit: int = 2_000_000) -> OracleResult:
    """Exact single-agent buildability check by breadth-first search.

    States are (heights, agent position or off-grid, carry flag); the
    search runs the full action semantics from the empty world and reports
    the shortest plan length reaching the finished target with the agent
    gone.  Intended for micro instances (about 4x4 footprints, z <= 2).
    """
    g = inst.grid
    target = inst.target
    cells = [(x, y) for x in range(g.x_size) for y in range(g.y_size)]
    idx = {c: k for k, c in enumerate(cells)}
    interior = [c for c in cells if g.is_interior(c)]
    border = border_cells(g)
    h0 = tuple(0 for _ in cells)
    goal_h = tuple(target[x][y] for (x, y) in cells)
    start = (h0, None, False)
    if h0 == goal_h:
        return OracleResult(True, 0, 1)
    seen = {start}
    frontier = [start]
    depth = 0
    while frontier:
        depth += 1
        nxt = []
        for heights, pos, carry in frontier:
            moves = []
            if pos is None:
                for b in border:
                    moves.append((heights, b, False))
                    moves.append((heights, b, True))
            else:
                if g.is_border(pos):
                    moves.append((heights, None, carry))
                zf = heights[idx[pos]]
                for q in neighbors(pos, g):
                    zt = heights[idx[q]]
                    if abs(zf - zt) <= 1:
                        moves.append((heights, q, carry))
                    if carry and zf == zt and zt < g.z_size and not g.is_border(q):
                        hh = list(heights)
                        hh[idx[q]] += 1
                        moves.append((tuple(hh), pos, False))
                    if not carry and zt >= 1 and zf == zt - 1:
                        hh = list(heights)
                        hh[idx[q]] -= 1
                        moves.append((tuple(hh), pos, True))
            for st in moves:
                if st in seen:
                    continue
                if st[0] == goal_h and st[1] is None:
                    return OracleResult(True, depth, len(seen) + 1)
                seen.add(st)
                nxt.append(st)
                if len(seen) > state_limit:
                    raise BenchError("limit-exceeded",
                                     f"more than {state_limit} states")
        frontier = nxt
    return OracleResult(False, None, len(seen))


# --- benchmark harness -------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    name: str
    time_mean: float
    time_std: float
    makespan: int
    sum_of_costs: int
    robots: int
    valid: bool
    complete: bool


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "time_mean_s", "time_std_s", "makespan",
                    "sum_of_costs", "robots", "valid", "complete"])
        for r in self.rows:
            w.writerow([r.name, f"{r.time_mean:.6f}", f"{r.time_std:.6f}",
                        r.makespan, r.sum_of_costs, r.robots,
                        str(r.valid).lower(), str(r.complete).lower()])
        return buf.getvalue()

    def to_json_dict(self, with_timing: bool = True) -> dict:
        rows = []
        for r in self.rows:
            d = {
                "instance": r.name,
                "makespan": r.makespan,
                "sum_of_costs": r.sum_of_costs,
                "robots": r.robots,
                "valid": r.valid,
                "complete": r.complete,
            }
            if with_timing:
                d["time_mean_s"] = round(r.time_mean, 6)
                d["time_std_s"] = round(r.time_std, 6)
            rows.append(d)
        return {"rows": rows}


def benchmark_lookalikes() -> list[tuple[str, Instance]]:
    """Small benchmark structures in the spirit of the published suite.

    The published instances exist only as figures, so these are
    reconstructions at comparable footprints (at most 10x10x4), named and
    ordered deterministically.
    """
    out: list[tuple[str, Instance]] = []
    out.append(("bench1-pyramid", gen_pyramid(8, 4)))

    plus = [[0] * 10 for _ in range(10)]
    for k in range(2, 8):
        plus[k][4] = plus[k][5] = 3
        plus[4][k] = plus[5][k] = 3
    out.append(("bench2-plus", Instance.from_heights(10, 10, 4, plus)))

    hole = [[0] * 9 for _ in range(9)]
    for x in range(2, 7):
        for y in range(2, 7):
            if not (3 <= x <= 5 and 3 <= y <= 5):
                hole[x][y] = 3
    out.append(("bench3-blocks-with-hole", Instance.from_heights(9, 9, 4, hole)))

    wall = [[0] * 8 for _ in range(10)]
    for x in range(2, 8):
        wall[x][3] = 4
        wall[x][4] = 2
    out.append(("bench4-stepped-wall", Instance.from_heights(10, 8, 4, wall)))

    towers = [[0] * 9 for _ in range(9)]
    for c in ((2, 2), (2, 6), (6, 2), (6, 6)):
        towers[c[0]][c[1]] = 4
        towers[c[0] + 1][c[1]] = 2
    out.append(("bench5-towers", Instance.from_heights(9, 9, 4, towers)))

    out.append(("bench6-random", gen_random(10, 10, 4, seed=20240521, density=0.3)))
    return out


GENERATORS = {
    "corridor": gen_corridor,
    "comb": gen_comb,
    "pyramid": gen_pyramid,
    "random": gen_random,
    "house": gen_house,
}


def instance_from_spec(spec) -> tuple[str, Instance]:
    """Resolve one suite entry: a path to an instance JSON, or a generator
    spec {"gen": name, "args": {...}, "name": optional}."""
    if isinstance(spec, str):
        with open(spec, "r", encoding="utf-8") as f:
            inst = Instance.from_json_dict(json.load(f))
        return os.path.basename(spec), inst
    try:
        gen = spec["gen"]
        args = spec.get("args", {})
    except (KeyError, TypeError) as exc:
        raise BenchError("bad-params", f"malformed instance spec: {exc}") from exc
    if gen not in GENERATORS:
        raise BenchError("bad-params", f"unknown generator {gen!r}")
    if gen == "comb" and "teeth" in args:
        args = dict(args, teeth=[tuple(t) for t in args["teeth"]])
    inst = GENERATORS[gen](**args)
    name = spec.get("name") or f"{gen}-" + "-".join(
        f"{k}={v}" for k, v in sorted(args.items())
    )
    return name, inst


def bench_one(name: str, inst: Instance, repetitions: int, i_r: int) -> BenchRow:
    """Plan one instance, timing the planning call `repetitions` times."""
    times = []
    result = None
    for _ in range(max(1, repetitions)):
        t0 = time.perf_counter()
        result = multi_agent_reramp(inst, i_r=i_r)
        times.append(time.perf_counter() - t0)
    report, metrics = validate_plan(inst, result.plan)
    valid = report.ok if result.complete else False
    return BenchRow(
        name,
        statistics.fmean(times),
        statistics.stdev(times) if len(times) > 1 else 0.0,
        metrics.makespan,
        metrics.sum_of_costs,
        metrics.robots,
        valid,
        result.complete,
    )


def _bench_entry(job) -> BenchRow:
    spec, repetitions, i_r = job
    name = spec if isinstance(spec, str) else str(spec.get("name", spec.get("gen", "?")))
    try:
        name, inst = instance_from_spec(spec)
        return bench_one(name, inst, repetitions, i_r)
    except Exception:  # a failing row must not sink the suite
        return BenchRow(os.path.basename(name), 0.0, 0.0, 0, 0, 0, False, False)


def run_suite(config: dict, workers: int | None = None) -> BenchReport:
    """Run the benchmark suite described by a config dict.

    Config: {"instances": [path | spec, ...], "repetitions": int,
    "i_r": int}.  Rows are sorted by instance name; timing runs are
    sequential within a row.  `workers` (or MACC_THREADS) caps optional
    process parallelism across rows; results are identical either way.
    """
    specs = config.get("instances", [])
    reps = int(config.get("repetitions", 20))
    i_r = int(config.get("i_r", 1))
    if workers is None:
        workers = int(os.environ.get("MACC_THREADS", "1"))
    jobs = [(spec, reps, i_r) for spec in specs]
    if workers > 1 and len(jobs) > 1:
        import multiprocessing

        with multiprocessing.Pool(workers) as pool:
            rows = pool.map(_bench_entry, jobs)
    else:
        rows = [_bench_entry(j) for j in jobs]
    return BenchReport(tuple(sorted(rows, key=lambda r: r.name)))


def write_report(report: BenchReport, out_dir: str) -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "report.csv")
    json_path = os.path.join(out_dir, "report.json")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(report.to_csv())
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(report.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, json_path
