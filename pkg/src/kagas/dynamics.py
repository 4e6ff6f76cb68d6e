"""Kob-Andersen exchange kernel and rejection-free Kawasaki dynamics.

A particle may jump to an empty neighboring site iff it has at least ``s``
empty neighbors both before and after the jump; every allowed ordered bond
carries rate one.  The simulator keeps an exact catalog of allowed bonds,
advances time by an exponential of the total rate, and updates the catalog
only inside the distance-2 influence neighborhood of the swapped bond.
"""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .lattice import TORUS, FIXED1, Configuration, Region, Site, neighbors, swap
from .rng import numpy_stream, xoshiro_state


@dataclass(frozen=True)
class ConstraintSpec:
    """Dimension and facilitation parameter of the exchange kernel.

    The cooperative regime is 2 <= s <= d.  s=1 (plain SSEP) and s>d (models
    with finite blocked clusters) are admitted for testing but flagged.
    """

    d: int
    s: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.s < 1:
            raise ValueError("facilitation parameter must be >= 1")

    @property
    def regime(self) -> str:
        if self.s == 1:
            return "ssep"
        if self.s > self.d:
            return "non-ergodic"
        return "cooperative"


@functools.lru_cache(maxsize=64)
def _torus_tables(dims: tuple[int, ...]):
    nbr = _kernels.neighbor_table(dims)
    return nbr


def _dirsteps(d: int) -> np.ndarray:
    # sign of the step along its axis, per direction slot
    steps = np.empty(2 * d, dtype=np.int64)
    steps[0::2] = 1
    steps[1::2] = -1
    return steps


def constraint_ka(cfg: Configuration, x: Site, y: Site, spec: ConstraintSpec) -> int:
    """The exchange indicator for the ordered bond (x, y).

    1 iff there is a particle at x, a vacancy at y, y has at least s-1 empty
    neighbors and x has at least s; both sums run over all 2d neighbors, so x
    counts among y's neighbors and vice versa.
    """
    nbrs_y = neighbors(y, cfg)
    if cfg.boundary == TORUS:
        xw = tuple(c % n for c, n in zip(x, cfg.dims))
    else:
        xw = tuple(x)
    if xw not in nbrs_y:
        raise ValueError(f"sites {x} and {y} are not nearest neighbors")
    if cfg.get(x) != 1 or cfg.get(y) != 0:
        return 0
    if sum(1 - cfg.get(z) for z in nbrs_y) < spec.s - 1:
        return 0
    if sum(1 - cfg.get(z) for z in neighbors(x, cfg)) < spec.s:
        return 0
    return 1


class RateCatalog:
    """The set of allowed ordered bonds, with O(1) insert/remove/sample."""

    def __init__(self, cfg: Configuration, spec: ConstraintSpec):
        if cfg.boundary != TORUS:
            raise ValueError("rate catalogs run on torus domains")
        if spec.d != cfg.d:
            raise ValueError("spec dimension does not match configuration")
        self.dims = cfg.dims
        self.spec = spec
        V = int(np.prod(cfg.dims))
        self.nbr = _torus_tables(cfg.dims)
        self.occ = np.concatenate([cfg.occ, np.zeros(1, np.uint8)])
        self.movable = np.ones(V + 1, dtype=np.uint8)
        self.movable[V] = 0
        self.nbemp = _kernels.build_nbemp(self.occ, self.nbr)
        self.cat, self.pos, self.K = _kernels.catalog_build(
            self.occ, self.nbr, spec.s, self.movable)

    @property
    def size(self) -> int:
        return int(self.K)

    def bonds(self) -> set[tuple[Site, Site]]:
        """The allowed ordered bonds as site-tuple pairs (for checking)."""
        nd = 2 * len(self.dims)
        out = set()
        for i in range(self.K):
            bid = int(self.cat[i])
            x, k = divmod(bid, nd)
            y = int(self.nbr[x, k])
            out.add((np.unravel_index(x, self.dims), np.unravel_index(y, self.dims)))
        return {(tuple(int(c) for c in a), tuple(int(c) for c in b)) for a, b in out}


def rebuild_catalog(cfg: Configuration, spec: ConstraintSpec) -> RateCatalog:
    """Exhaustive scan of the allowed ordered bonds of a torus configuration."""
    return RateCatalog(cfg, spec)


def is_blocked(cfg: Configuration, spec: ConstraintSpec) -> bool:
    """True iff every exchange rate vanishes."""
    return rebuild_catalog(cfg, spec).size == 0


@dataclass
class Trajectory:
    """A KMC run: initial state, seed, the event list, and the final state."""

    initial: Configuration
    seed: int
    times: np.ndarray
    bonds_x: np.ndarray  # flat site indices
    bonds_y: np.ndarray
    final: Configuration
    params: dict = field(default_factory=dict)

    @property
    def n_events(self) -> int:
        return len(self.times)

    def events(self) -> list[tuple[float, Site, Site]]:
        dims = self.initial.dims
        out = []
        for t, fx, fy in zip(self.times, self.bonds_x, self.bonds_y):
            x = tuple(int(c) for c in np.unravel_index(int(fx), dims))
            y = tuple(int(c) for c in np.unravel_index(int(fy), dims))
            out.append((float(t), x, y))
        return out

    def replay(self) -> Configuration:
        """Re-apply every event to the initial configuration."""
        cfg = self.initial.copy()
        for _, x, y in self.events():
            cfg = swap(cfg, x, y)
        return cfg

    def header(self) -> dict:
        return dict(self.params)

    def write_csv(self, fh) -> None:
        d = self.initial.d
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_index", "time"]
                   + [f"x{i+1}" for i in range(d)] + [f"y{i+1}" for i in range(d)])
        for i, (t, x, y) in enumerate(self.events()):
            w.writerow([i, f"{t:.12g}", *x, *y])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


_CHUNK = 1 << 18


def kmc_run(eta0: Configuration, spec: ConstraintSpec, t_max: float, seed: int,
            *, stream: int = 0, record_events: bool = True,
            sample_times: Optional[np.ndarray] = None,
            max_events: Optional[int] = None,
            debug_check_every: Optional[int] = None,
            rho: Optional[float] = None):
    """Rejection-free continuous-time simulation of the exchange dynamics.

    With catalog size K the clock advances by Exponential(K) and a uniform
    catalog bond is swapped.  Deterministic given (seed, stream).  An empty
    catalog ends the run early with final time t_max (the configuration is
    blocked).  Returns a Trajectory; if sample_times is given, also returns
    the tracer displacement sampled at those times (shape (n_times, d)).
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    cat = RateCatalog(eta0, spec)
    V = int(np.prod(eta0.dims))
    nd = 2 * eta0.d
    state = xoshiro_state(seed, stream)
    tracer = eta0._flat(eta0.tracer) if eta0.tracer is not None else np.int64(-1)
    disp = (eta0.disp.copy() if eta0.disp is not None
            else np.zeros(eta0.d, dtype=np.int64))
    dirsteps = _dirsteps(eta0.d)
    if sample_times is None:
        st = np.empty(0, dtype=np.float64)
    else:
        st = np.asarray(sample_times, dtype=np.float64)
        if not np.all(np.diff(st) > 0):
            raise ValueError("sample times must be strictly increasing")
    samples = np.zeros((len(st), eta0.d), dtype=np.int64)

    all_t: list[np.ndarray] = []
    all_x: list[np.ndarray] = []
    all_y: list[np.ndarray] = []
    t = 0.0
    si = 0
    total = 0
    chunk = _CHUNK if debug_check_every is None else min(_CHUNK, debug_check_every)
    while True:
        ev_t = np.empty(chunk if record_events else 0, dtype=np.float64)
        ev_x = np.empty(chunk if record_events else 0, dtype=np.int64)
        ev_y = np.empty(chunk if record_events else 0, dtype=np.int64)
        steps = chunk
        if max_events is not None:
            steps = min(steps, max_events - total)
            if steps <= 0:
                break
        t, K, tracer, si, n_done, finished = _kernels.kmc_chunk(
            cat.occ, cat.nbemp, cat.nbr, spec.s, cat.movable, cat.cat, cat.pos, cat.K,
            t, t_max, state, tracer, disp, dirsteps, st, samples, si,
            ev_t, ev_x, ev_y, record_events, steps)
        cat.K = K
        total += n_done
        if record_events and n_done:
            all_t.append(ev_t[:n_done].copy())
            all_x.append(ev_x[:n_done].copy())
            all_y.append(ev_y[:n_done].copy())
        if debug_check_every is not None:
            ref_cat, ref_pos, ref_K = _kernels.catalog_build(
                cat.occ, cat.nbr, spec.s, cat.movable)
            if ref_K != cat.K or set(ref_cat[:ref_K]) != set(cat.cat[:cat.K]):
                raise AssertionError("incremental catalog diverged from full rebuild")
        if finished:
            break

    final = Configuration(
        eta0.dims, cat.occ[:V].copy(), TORUS, None,
        tuple(int(c) for c in np.unravel_index(int(tracer), eta0.dims)) if tracer >= 0 else None,
        disp if tracer >= 0 else None)
    params = {"d": spec.d, "s": spec.s, "dims": list(eta0.dims),
              "seed": seed, "stream": stream, "t_max": t_max}
    if rho is not None:
        params["rho"] = rho
    traj = Trajectory(
        eta0.copy(), seed,
        np.concatenate(all_t) if all_t else np.empty(0),
        np.concatenate(all_x) if all_x else np.empty(0, np.int64),
        np.concatenate(all_y) if all_y else np.empty(0, np.int64),
        final, params)
    if sample_times is None:
        return traj
    return traj, samples


def sample_bernoulli(domain, rho: float, seed: int, condition: str = "none",
                     *, stream: int = 0, boundary: str | None = None) -> Configuration:
    """An i.i.d. Bernoulli(rho) occupancy field, optionally conditioned.

    domain: a dims tuple (torus) or a box Region.  Conditions:
      none            -- plain product measure;
      tracer_at_origin-- site 0 forced occupied and tagged;
      event_A         -- the box {0,1}^d holds the tagged particle at the
                         origin and vacancies on its other 2^d - 1 sites.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("density must lie in [0,1]")
    if isinstance(domain, Region):
        if not domain.is_box:
            raise ValueError("explicit-site regions are not samplable domains")
        origin, hi = domain.bounding_box()
        dims = tuple(h - o for o, h in zip(origin, hi))
        bmode = boundary or FIXED1
    else:
        dims = tuple(domain)
        origin = None
        bmode = boundary or TORUS
    rng = numpy_stream(seed, stream)
    occ = (rng.random(int(np.prod(dims))) < rho).astype(np.uint8)
    cfg = Configuration(dims, occ, bmode, origin)
    if condition == "none":
        return cfg
    d = len(dims)
    zero = (0,) * d
    if condition == "tracer_at_origin":
        cfg.set(zero, 1)
        cfg.tracer = zero
        cfg.disp = np.zeros(d, dtype=np.int64)
        return cfg
    if condition == "event_A":
        import itertools
        for corner in itertools.product((0, 1), repeat=d):
            cfg.set(corner, 0)
        cfg.set(zero, 1)
        cfg.tracer = zero
        cfg.disp = np.zeros(d, dtype=np.int64)
        return cfg
    raise ValueError(f"unknown condition {condition!r}")
