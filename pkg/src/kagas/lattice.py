"""Lattice geometry, occupancy configurations and elementary transformations.

Sites are integer tuples ``(x_1, ..., x_d)``.  Occupancy fields live on either
a torus (per-axis side lengths, coordinates wrap) or an axis-aligned box with
a fixed exterior value (0 or 1).  The flat storage order is row-major over
axes in index order: the last axis varies fastest.
"""

from __future__ import annotations

import base64
import hashlib
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

Site = tuple[int, ...]

TORUS = "torus"
FIXED0 = "fixed0"
FIXED1 = "fixed1"


def unit_vector(axis: int, d: int, sign: int = 1) -> Site:
    """Basis vector ``sign * e_{axis+1}`` in d dimensions."""
    v = [0] * d
    v[axis] = sign
    return tuple(v)


def add(x: Site, y: Site) -> Site:
    return tuple(a + b for a, b in zip(x, y))


def sub(x: Site, y: Site) -> Site:
    return tuple(a - b for a, b in zip(x, y))


def neighbor_offsets(d: int) -> list[Site]:
    """The 2d unit offsets, ordered +e1, -e1, +e2, -e2, ..."""
    offs = []
    for axis in range(d):
        offs.append(unit_vector(axis, d, +1))
        offs.append(unit_vector(axis, d, -1))
    return offs


class Region:
    """A finite set of sites: an axis-aligned box or an explicit site list.

    Box form: ``origin`` corner plus per-axis side lengths ``shape``.
    Both forms answer the same membership queries.
    """

    def __init__(self, sites: Iterable[Site] | None = None, *,
                 origin: Site | None = None, shape: Sequence[int] | None = None):
        if (sites is None) == (origin is None and shape is None):
            raise ValueError("give either explicit sites or origin+shape")
        if sites is not None:
            self._sites = frozenset(tuple(s) for s in sites)
            if not self._sites:
                raise ValueError("region must be non-empty")
            dims = {len(s) for s in self._sites}
            if len(dims) != 1:
                raise ValueError("mixed site dimensions")
            self.d = dims.pop()
            self._origin = None
            self._shape = None
        else:
            if origin is None or shape is None:
                raise ValueError("box form needs origin and shape")
            self._origin = tuple(origin)
            self._shape = tuple(int(n) for n in shape)
            if any(n <= 0 for n in self._shape):
                raise ValueError("box sides must be positive")
            self.d = len(self._origin)
            if len(self._shape) != self.d:
                raise ValueError("origin/shape dimension mismatch")
            self._sites = None

    @classmethod
    def box(cls, origin: Site, shape: Sequence[int]) -> "Region":
        return cls(origin=origin, shape=shape)

    @classmethod
    def cube(cls, side: int, d: int, origin: Site | None = None) -> "Region":
        """The box [0, side-1]^d (or shifted to origin)."""
        return cls(origin=origin or (0,) * d, shape=(side,) * d)

    @property
    def is_box(self) -> bool:
        return self._sites is None

    def __contains__(self, site: Site) -> bool:
        if self._sites is not None:
            return tuple(site) in self._sites
        return all(o <= c < o + n for c, o, n in zip(site, self._origin, self._shape))

    def __len__(self) -> int:
        if self._sites is not None:
            return len(self._sites)
        return int(np.prod(self._shape))

    def __iter__(self) -> Iterator[Site]:
        if self._sites is not None:
            return iter(sorted(self._sites))
        ranges = [range(o, o + n) for o, n in zip(self._origin, self._shape)]
        return iter(itertools.product(*ranges))

    def bounding_box(self) -> tuple[Site, Site]:
        """(lo corner, exclusive hi corner)."""
        if self._sites is None:
            return self._origin, tuple(o + n for o, n in zip(self._origin, self._shape))
        arr = np.array(sorted(self._sites))
        return tuple(arr.min(axis=0)), tuple(arr.max(axis=0) + 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return set(self) == set(other)

    def __repr__(self) -> str:
        if self._sites is None:
            return f"Region.box({self._origin}, {self._shape})"
        return f"Region({len(self._sites)} sites)"


def boundary_sets(region: Region) -> tuple[Region, Region]:
    """Exterior neighborhood and interior boundary of a finite region.

    Returns ``(outer, inner)`` where ``outer`` holds the sites outside the
    region at distance one from it and ``inner`` the sites inside at distance
    one from the complement.
    """
    offs = neighbor_offsets(region.d)
    members = set(region)
    outer: set[Site] = set()
    inner: set[Site] = set()
    for s in members:
        for o in offs:
            n = add(s, o)
            if n not in members:
                outer.add(n)
                inner.add(s)
    return Region(outer), Region(inner)


@dataclass
class Configuration:
    """A 0/1 occupancy field with optional tagged particle.

    ``dims`` are the per-axis side lengths; ``origin`` places the stored box
    in the lattice (torus fields always use origin 0 and wrap coordinates).
    ``occ`` is flat uint8 in row-major site order.  ``tracer`` is the tagged
    particle's site; ``disp`` its unwrapped displacement, updated at each
    tracer move so torus wrap-around never corrupts displacement statistics.
    """

    dims: tuple[int, ...]
    occ: np.ndarray
    boundary: str = TORUS
    origin: tuple[int, ...] = None  # type: ignore[assignment]
    tracer: Optional[Site] = None
    disp: Optional[np.ndarray] = None

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        if self.origin is None:
            self.origin = (0,) * len(self.dims)
        else:
            self.origin = tuple(int(c) for c in self.origin)
        if self.boundary not in (TORUS, FIXED0, FIXED1):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if self.boundary == TORUS and any(c != 0 for c in self.origin):
            raise ValueError("torus fields use origin 0")
        self.occ = np.ascontiguousarray(self.occ, dtype=np.uint8).reshape(-1)
        if self.occ.size != int(np.prod(self.dims)):
            raise ValueError("occupancy size does not match dims")
        if self.tracer is not None:
            self.tracer = tuple(int(c) for c in self.tracer)
            if self.get(self.tracer) != 1:
                raise ValueError("tracer site must be occupied")
            if self.disp is None:
                self.disp = np.zeros(self.d, dtype=np.int64)
            else:
                self.disp = np.asarray(self.disp, dtype=np.int64).copy()

    @property
    def d(self) -> int:
        return len(self.dims)

    @classmethod
    def empty(cls, dims: Sequence[int], boundary: str = TORUS,
              origin: Site | None = None) -> "Configuration":
        dims = tuple(dims)
        return cls(dims, np.zeros(int(np.prod(dims)), np.uint8), boundary, origin)

    @classmethod
    def full(cls, dims: Sequence[int], boundary: str = TORUS,
             origin: Site | None = None) -> "Configuration":
        dims = tuple(dims)
        return cls(dims, np.ones(int(np.prod(dims)), np.uint8), boundary, origin)

    # -- site addressing ---------------------------------------------------

    def _flat(self, site: Site) -> int:
        idx = 0
        for c, o, n in zip(site, self.origin, self.dims):
            if self.boundary == TORUS:
                c = c % n
            else:
                c = c - o
                if not 0 <= c < n:
                    raise IndexError(f"site {site} outside box domain")
            idx = idx * n + c
        return idx

    def in_domain(self, site: Site) -> bool:
        if self.boundary == TORUS:
            return True
        return all(o <= c < o + n for c, o, n in zip(site, self.origin, self.dims))

    def get(self, site: Site) -> int:
        if self.boundary != TORUS and not self.in_domain(site):
            return 1 if self.boundary == FIXED1 else 0
        return int(self.occ[self._flat(site)])

    def set(self, site: Site, value: int) -> None:
        self.occ[self._flat(site)] = value

    def domain_sites(self) -> Iterator[Site]:
        ranges = [range(o, o + n) for o, n in zip(self.origin, self.dims)]
        return iter(itertools.product(*ranges))

    def as_array(self) -> np.ndarray:
        return self.occ.reshape(self.dims)

    def particle_count(self) -> int:
        return int(self.occ.sum())

    def copy(self) -> "Configuration":
        return Configuration(self.dims, self.occ.copy(), self.boundary, self.origin,
                             self.tracer,
                             None if self.disp is None else self.disp.copy())

    def same_field(self, other: "Configuration") -> bool:
        return (self.dims == other.dims and self.boundary == other.boundary
                and self.origin == other.origin
                and np.array_equal(self.occ, other.occ)
                and self.tracer == other.tracer)

    # -- packing, digests, snapshots ----------------------------------------

    def packed(self) -> bytes:
        """Bit-packed field: little-endian within bytes, row-major site order."""
        return np.packbits(self.occ, bitorder="little").tobytes()

    def digest(self) -> bytes:
        """128-bit hash of the bit-packed field (plus tracer if set)."""
        h = hashlib.blake2b(self.packed(), digest_size=16)
        if self.tracer is not None:
            h.update(np.asarray(self.tracer, dtype=np.int64).tobytes())
        return h.digest()

    def to_snapshot(self) -> dict:
        return {
            "dims": list(self.dims),
            "boundary": self.boundary,
            "occupancy": base64.b64encode(self.packed()).decode("ascii"),
            "tracer": list(self.tracer) if self.tracer is not None else None,
            "displacement": self.disp.tolist() if self.disp is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_snapshot())

    @classmethod
    def from_snapshot(cls, obj: dict, origin: Site | None = None) -> "Configuration":
        dims = tuple(obj["dims"])
        n = int(np.prod(dims))
        raw = np.frombuffer(base64.b64decode(obj["occupancy"]), dtype=np.uint8)
        occ = np.unpackbits(raw, bitorder="little")[:n]
        tracer = tuple(obj["tracer"]) if obj.get("tracer") is not None else None
        disp = obj.get("displacement")
        cfg = cls(dims, occ, obj["boundary"], origin, tracer,
                  np.asarray(disp, np.int64) if disp is not None else None)
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        return cls.from_snapshot(json.loads(text))


def neighbors(x: Site, domain: Configuration | Region | Sequence[int]) -> list[Site]:
    """The 2d nearest neighbors of x, wrapped under torus mode.

    ``domain`` may be a Configuration (its boundary mode decides wrapping),
    a Region, or a plain dims tuple (treated as torus sides).
    """
    x = tuple(x)
    if isinstance(domain, Configuration):
        d = domain.d
        if len(x) != d:
            raise ValueError("site dimension does not match domain")
        out = []
        for off in neighbor_offsets(d):
            n = add(x, off)
            if domain.boundary == TORUS:
                n = tuple(c % m for c, m in zip(n, domain.dims))
            out.append(n)
        return out
    if isinstance(domain, Region):
        if len(x) != domain.d:
            raise ValueError("site dimension does not match domain")
        return [add(x, off) for off in neighbor_offsets(domain.d)]
    dims = tuple(domain)
    if len(x) != len(dims):
        raise ValueError("site dimension does not match domain")
    return [tuple(c % m for c, m in zip(add(x, off), dims))
            for off in neighbor_offsets(len(dims))]


def _check_adjacent(cfg: Configuration, x: Site, y: Site) -> None:
    if tuple(y) not in neighbors(x, cfg):
        raise ValueError(f"sites {x} and {y} are not nearest neighbors")


def swap(cfg: Configuration, x: Site, y: Site) -> Configuration:
    """Exchange the occupation values at the bond (x, y).

    The tracer follows its occupation value; its unwrapped displacement is
    advanced by the bond step (never by the wrapped coordinate difference).
    """
    _check_adjacent(cfg, x, y)
    out = cfg.copy()
    ix, iy = out._flat(x), out._flat(y)
    out.occ[ix], out.occ[iy] = out.occ[iy], out.occ[ix]
    if out.tracer is not None:
        t = out._flat(out.tracer)
        step = _bond_step(cfg, x, y)
        wrap = (lambda s: tuple(c % n for c, n in zip(s, cfg.dims))) \
            if cfg.boundary == TORUS else (lambda s: s)
        if t == ix:
            out.tracer = wrap(tuple(y))
            out.disp = out.disp + np.asarray(step, np.int64)
        elif t == iy:
            out.tracer = wrap(tuple(x))
            out.disp = out.disp - np.asarray(step, np.int64)
    return out


def _bond_step(cfg: Configuration, x: Site, y: Site) -> Site:
    """Unit step from x to y (resolving torus wrap to a unit vector)."""
    diff = sub(tuple(y), tuple(x))
    step = []
    for c, n in zip(diff, cfg.dims):
        if cfg.boundary == TORUS:
            c = (c + n // 2) % n - n // 2
        step.append(int(c))
    return tuple(step)


def translate(cfg: Configuration, x: Site) -> Configuration:
    """The shifted field: new(y) = old(x + y).  Torus domains only."""
    if cfg.boundary != TORUS:
        raise ValueError("translation on a fixed box without exterior convention rejected")
    if len(x) != cfg.d:
        raise ValueError("shift dimension mismatch")
    arr = cfg.as_array()
    shifted = np.roll(arr, shift=tuple(-c for c in x), axis=tuple(range(cfg.d)))
    tracer = None
    if cfg.tracer is not None:
        tracer = tuple((c - s) % n for c, s, n in zip(cfg.tracer, x, cfg.dims))
    return Configuration(cfg.dims, shifted.reshape(-1), cfg.boundary, None, tracer,
                         None if cfg.disp is None else cfg.disp.copy())


def box_swap(cfg: Configuration, x: Site, y: Site) -> Configuration:
    """Exchange the contents of the boxes x+{0,1}^d and y+{0,1}^d site-by-site."""
    d = cfg.d
    corners = list(itertools.product((0, 1), repeat=d))
    ax = [add(tuple(x), c) for c in corners]
    ay = [add(tuple(y), c) for c in corners]
    ix = {cfg._flat(s) for s in ax}
    iy = {cfg._flat(s) for s in ay}
    if ix & iy:
        raise ValueError("boxes overlap")
    out = cfg.copy()
    for sx, sy in zip(ax, ay):
        fx, fy = out._flat(sx), out._flat(sy)
        out.occ[fx], out.occ[fy] = out.occ[fy], out.occ[fx]
        if out.tracer is not None:
            t = cfg._flat(cfg.tracer)
            if t == fx:
                out.tracer = tuple(c % n for c, n in zip(sy, cfg.dims)) \
                    if cfg.boundary == TORUS else sy
            elif t == fy:
                out.tracer = tuple(c % n for c, n in zip(sx, cfg.dims)) \
                    if cfg.boundary == TORUS else sx
    return out
