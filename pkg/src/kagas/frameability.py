"""Framed/frameable configuration checks and allowed-path machinery.

A configuration is framed on a region when its interior boundary is empty.
It is frameable when an allowed path inside the region (exterior clamped
fully occupied) reaches a framed configuration.  The search is best-first
toward emptier boundaries with exact visited-state deduplication, so a
negative verdict means the full reachable set was enumerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Optional

import numpy as np

from . import _kernels
from .dynamics import ConstraintSpec, constraint_ka
from .lattice import (FIXED1, Configuration, Region, Site, boundary_sets,
                      swap, translate)
from .rng import numpy_stream

DEFAULT_BUDGET = 10_000_000


@dataclass
class PathStep:
    bond: tuple[Site, Site]
    tracer_move: bool
    digest: bytes


@dataclass
class AllowedPath:
    """A validated-format sequence of exchange moves between two configurations.

    In tracer mode a step with bond origin 0 re-centers the field after the
    exchange; all other steps are plain swaps.
    """

    initial: Configuration
    steps: list[PathStep]
    final: Configuration

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def displacement(self) -> np.ndarray:
        """Sum of tracer-step directions (the displacement ledger)."""
        d = self.initial.d
        out = np.zeros(d, dtype=np.int64)
        for st in self.steps:
            if st.tracer_move:
                out += np.asarray(st.bond[1], dtype=np.int64)
        return out


@dataclass
class ValidationResult:
    ok: bool
    first_violation: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def step_path(cfg: Configuration, bond: tuple[Site, Site], mode: str) -> Configuration:
    """One path step: plain swap, or re-centered swap for tracer moves."""
    x, y = bond
    if mode == "tracer" and all(c == 0 for c in x):
        return translate(swap(cfg, x, y), y)
    return swap(cfg, x, y)


def validate_path(path: AllowedPath, spec: ConstraintSpec,
                  mode: str = "environment") -> ValidationResult:
    """Replay a path, checking constraints, successors and the no-repeat rule.

    Violations are reported by step index, not raised.
    """
    if mode not in ("environment", "tracer"):
        raise ValueError("mode must be 'environment' or 'tracer'")
    cfg = path.initial.copy()
    seen = {cfg.digest()}
    for i, st in enumerate(path.steps):
        x, y = st.bond
        try:
            ok = constraint_ka(cfg, x, y, spec) == 1
        except (ValueError, IndexError) as e:
            return ValidationResult(False, i, f"bad bond: {e}")
        if not ok:
            return ValidationResult(False, i, "constraint not satisfied")
        cfg = step_path(cfg, st.bond, mode)
        dg = cfg.digest()
        if dg != st.digest:
            return ValidationResult(False, i, "successor digest mismatch")
        if dg in seen:
            return ValidationResult(False, i, "configuration repeated")
        seen.add(dg)
    if cfg.digest() != path.final.digest():
        return ValidationResult(False, len(path.steps), "final configuration mismatch")
    return ValidationResult(True)


def is_framed(omega: Configuration, region: Region) -> bool:
    """True iff every interior-boundary site of the region is empty."""
    _, inner = boundary_sets(region)
    return all(omega.get(s) == 0 for s in inner)


@dataclass
class FrameabilityVerdict:
    status: str  # frameable | not_frameable | unknown
    witness: Optional[AllowedPath] = None
    states_visited: int = 0
    frontier_peak: int = 0

    @property
    def is_frameable(self) -> bool:
        return self.status == "frameable"


class _BoxSearchSpace:
    """Search geometry for a region inside its bounding box.

    The working arrays carry one virtual exterior site (occupied); sites of
    the bounding box outside the region are clamped occupied and immovable.
    """

    _cache: dict = {}

    def __init__(self, region: Region):
        self.origin, hi = region.bounding_box()
        self.dims = tuple(h - o for o, h in zip(self.origin, hi))
        self.d = len(self.dims)
        V = int(np.prod(self.dims))
        self.V = V
        key = (self.dims,)
        cached = self._cache.get(key)
        if cached is None:
            cached = _kernels.box_neighbor_table(self.dims)
            self._cache[key] = cached
        self.nbr = cached
        self.movable = np.zeros(V + 1, dtype=np.uint8)
        self.clamped = np.zeros(V, dtype=np.uint8)  # bbox sites outside the region
        if region.is_box:
            self.movable[:V] = 1
        else:
            self.clamped[:] = 1
            for s in region:
                f = self._flat(s)
                self.movable[f] = 1
                self.clamped[f] = 0
        _, inner = boundary_sets(region)
        self.inner_idx = np.array(sorted(self._flat(s) for s in inner), dtype=np.int64)
        self.move_buf = np.empty(V * 2 * self.d, dtype=np.int64)

    def _flat(self, site: Site) -> int:
        f = 0
        for c, o, n in zip(site, self.origin, self.dims):
            if not o <= c < o + n:
                raise IndexError(f"site {site} outside bounding box")
            f = f * n + (c - o)
        return f

    def _site(self, flat: int) -> Site:
        return tuple(int(o) + int(c)
                     for o, c in zip(self.origin, np.unravel_index(flat, self.dims)))

    def initial_state(self, omega: Configuration) -> np.ndarray:
        occ = np.empty(self.V + 1, dtype=np.uint8)
        if omega.dims == self.dims and omega.origin == self.origin:
            occ[:self.V] = omega.occ
        else:
            for f in range(self.V):
                occ[f] = omega.get(self._site(f))
        occ[:self.V] = np.where(self.clamped == 1, 1, occ[:self.V])
        occ[self.V] = 1  # exterior fully occupied
        return occ

    def config(self, occ: np.ndarray) -> Configuration:
        return Configuration(self.dims, occ[:self.V].copy(), FIXED1, self.origin)


def _pack(occ: np.ndarray, V: int) -> bytes:
    return np.packbits(occ[:V], bitorder="little").tobytes()


def frameability_search(omega: Configuration, region: Region, spec: ConstraintSpec,
                        budget: int = DEFAULT_BUDGET,
                        want_witness: bool = True) -> FrameabilityVerdict:
    """Search for an allowed path to a framed configuration inside a region.

    The search state is the region's occupancy with the exterior clamped
    occupied; moves are exchanges with both endpoints inside the region
    (constraints may read the occupied exterior).  Best-first by number of
    occupied interior-boundary sites, ties broken by insertion order.
    not_frameable is only returned after the reachable set was exhausted.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if spec.d != region.d:
        raise ValueError("spec dimension does not match region")
    space = _BoxSearchSpace(region)
    occ0 = space.initial_state(omega)
    status, witness_bids, visited, peak = _best_first(
        space, occ0, spec.s, budget, want_witness)
    witness = None
    if status == "frameable" and want_witness:
        witness = _witness_path(space, occ0, witness_bids, spec)
    return FrameabilityVerdict(status, witness, visited, peak)


def _best_first(space: _BoxSearchSpace, occ0: np.ndarray, s: int, budget: int,
                want_witness: bool):
    V = space.V
    nd = 2 * space.d
    key0 = _pack(occ0, V)
    prio0 = int(occ0[space.inner_idx].sum()) if len(space.inner_idx) else 0
    if prio0 == 0:
        return "frameable", [], 1, 0
    heap = [(prio0, 0, key0)]
    parent: dict[bytes, tuple[bytes, int] | None] = {key0: None}
    counter = 1
    peak = 1
    buf = space.move_buf
    unpack_len = V
    while heap:
        prio, _, key = heappop(heap)
        occ = np.empty(V + 1, dtype=np.uint8)
        occ[:V] = np.unpackbits(np.frombuffer(key, np.uint8),
                                bitorder="little")[:unpack_len]
        occ[V] = 1
        n = _kernels.search_moves(occ, space.nbr, s, space.movable, buf)
        for i in range(n):
            bid = int(buf[i])
            x, k = divmod(bid, nd)
            y = int(space.nbr[x, k])
            occ[x] = 0
            occ[y] = 1
            nkey = _pack(occ, V)
            if nkey not in parent:
                if len(parent) >= budget:
                    occ[x] = 1
                    occ[y] = 0
                    return "unknown", [], len(parent), peak
                parent[nkey] = (key, bid)
                nprio = int(occ[space.inner_idx].sum())
                if nprio == 0:
                    return ("frameable",
                            _chain(parent, nkey) if want_witness else [],
                            len(parent), peak)
                heappush(heap, (nprio, counter, nkey))
                counter += 1
                peak = max(peak, len(heap))
            occ[x] = 1
            occ[y] = 0
    return "not_frameable", [], len(parent), peak


def _chain(parent, key) -> list[int]:
    bids = []
    while parent[key] is not None:
        key, bid = parent[key]
        bids.append(bid)
    bids.reverse()
    return bids


def _witness_path(space: _BoxSearchSpace, occ0: np.ndarray, bids: list[int],
                  spec: ConstraintSpec) -> AllowedPath:
    nd = 2 * space.d
    initial = space.config(occ0)
    cfg = initial.copy()
    steps = []
    for bid in bids:
        x, k = divmod(bid, nd)
        y = int(space.nbr[x, k])
        bond = (space._site(x), space._site(y))
        cfg = swap(cfg, *bond)
        steps.append(PathStep(bond, False, cfg.digest()))
    return AllowedPath(initial, steps, cfg)


def frameable_status(face: np.ndarray, s: int, budget: int = DEFAULT_BUDGET) -> tuple[str, int]:
    """Frameability verdict for a bare occupancy array (whole-box region).

    The array's own dimension sets the embedding dimension of the exchange
    kernel; the exterior is clamped occupied.  No witness is produced.
    Returns (status, states_visited).
    """
    face = np.asarray(face, dtype=np.uint8)
    region = Region.box((0,) * face.ndim, face.shape)
    cfg = Configuration(face.shape, face.reshape(-1), FIXED1, (0,) * face.ndim)
    v = frameability_search(cfg, region, ConstraintSpec(face.ndim, s), budget,
                            want_witness=False)
    return v.status, v.states_visited


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class FrameableEstimate:
    p_frameable: float
    p_unknown: float
    ci: tuple[float, float]
    n_samples: int
    mean_states_visited: float


def estimate_frameable_prob(rho: float, L: int, d: int, spec: ConstraintSpec,
                            n_samples: int, budget: int = DEFAULT_BUDGET,
                            seed: int = 0) -> FrameableEstimate:
    """Empirical frameability probability on the box [0, L]^d.

    Samples Bernoulli(rho) fields, searches each, and reports the frameable
    fraction with a Wilson 95% interval, plus the budget-hit fraction.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    region = Region.box((0,) * d, (L + 1,) * d)
    rng = numpy_stream(seed, 0)
    n_frameable = 0
    n_unknown = 0
    states = 0
    nsites = (L + 1) ** d
    for _ in range(n_samples):
        occ = (rng.random(nsites) < rho).astype(np.uint8)
        cfg = Configuration((L + 1,) * d, occ, FIXED1, (0,) * d)
        v = frameability_search(cfg, region, spec, budget, want_witness=False)
        if v.status == "frameable":
            n_frameable += 1
        elif v.status == "unknown":
            n_unknown += 1
        states += v.states_visited
    return FrameableEstimate(
        n_frameable / n_samples, n_unknown / n_samples,
        wilson_interval(n_frameable, n_samples), n_samples,
        states / n_samples)
