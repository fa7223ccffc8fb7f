"""Spin-glass problem instances on chains, ladders and random regular graphs.

An :class:`Instance` is an immutable weighted graph with couplings ``J_ij``
and longitudinal fields ``h_i``.  The classical energy of a configuration
``s`` (entries +1/-1) is

    E(s) = -sum_(i,j) J_ij s_i s_j - sum_i h_i s_i

Generation is a pure function of ``(geometry, seed)``: the graph is built
first (consuming the random stream only for random regular graphs) and then
one coupling per edge is drawn uniformly from [-1, 1) in sorted edge order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence, Union

import numpy as np

FORMAT_HEADER = "# qwanneal-instance v1"
RANDOM_REGULAR_RETRIES = 10_000


class InstanceError(ValueError):
    """Invalid geometry, instance data or instance document."""


@dataclass(frozen=True)
class Chain:
    L: int

    def validate(self) -> None:
        if self.L < 2:
            raise InstanceError(f"Chain needs L >= 2, got L={self.L}")

    @property
    def n_sites(self) -> int:
        return self.L

    def tag(self) -> str:
        return f"chain {self.L}"


@dataclass(frozen=True)
class Ladder:
    """Rectangular L x w strip with open boundaries in both directions.

    Site ``(x, y)`` (column ``x`` along the length, leg ``y``) is stored at
    index ``x * w + y``, so every coupling spans at most ``w`` positions.
    """

    L: int
    w: int

    def validate(self) -> None:
        if self.L < 2:
            raise InstanceError(f"Ladder needs L >= 2, got L={self.L}")
        if self.w < 1:
            raise InstanceError(f"Ladder needs w >= 1, got w={self.w}")

    @property
    def n_sites(self) -> int:
        return self.L * self.w

    def tag(self) -> str:
        return f"ladder {self.L} {self.w}"


@dataclass(frozen=True)
class RandomRegular:
    N: int
    K: int

    def validate(self) -> None:
        if self.N < 2 or self.K < 1:
            raise InstanceError(f"RandomRegular needs N >= 2 and K >= 1, got N={self.N}, K={self.K}")
        if self.K >= self.N:
            raise InstanceError(f"no simple {self.K}-regular graph on {self.N} vertices (K must be < N)")
        if (self.N * self.K) % 2:
            raise InstanceError(f"N*K must be even, got N={self.N}, K={self.K}")

    @property
    def n_sites(self) -> int:
        return self.N

    def tag(self) -> str:
        return f"random_regular {self.N} {self.K}"


@dataclass(frozen=True)
class Custom:
    """Hand-built instance with no generator behind it."""

    n: int

    def validate(self) -> None:
        if self.n < 1:
            raise InstanceError(f"Custom needs n >= 1, got n={self.n}")

    @property
    def n_sites(self) -> int:
        return self.n

    def tag(self) -> str:
        return f"custom {self.n}"


Geometry = Union[Chain, Ladder, RandomRegular, Custom]


def parse_geometry(text: str) -> Geometry:
    """Parse ``"chain 20"``, ``"ladder 40 2"``, ``"random_regular 20 3"``."""
    parts = text.split()
    if not parts:
        raise InstanceError("empty geometry")
    kind, args = parts[0].lower(), parts[1:]
    try:
        nums = [int(a) for a in args]
    except ValueError as exc:
        raise InstanceError(f"geometry parameters must be integers: {text!r}") from exc
    table = {"chain": (Chain, 1), "ladder": (Ladder, 2), "random_regular": (RandomRegular, 2), "rg": (RandomRegular, 2), "custom": (Custom, 1)}
    if kind not in table:
        raise InstanceError(f"unknown geometry {kind!r}")
    cls, nargs = table[kind]
    if len(nums) != nargs:
        raise InstanceError(f"geometry {kind!r} takes {nargs} integer parameter(s), got {len(nums)}")
    geom = cls(*nums)
    geom.validate()
    return geom


@dataclass(frozen=True)
class Instance:
    n_sites: int
    edges: tuple[tuple[int, int, float], ...]
    fields_z: tuple[float, ...]
    geometry: Geometry
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise InstanceError("n_sites must be positive")
        if len(self.fields_z) != self.n_sites:
            raise InstanceError(f"expected {self.n_sites} fields, got {len(self.fields_z)}")
        if not 0 <= self.seed < 2**64:
            raise InstanceError("seed must be a 64-bit unsigned integer")
        seen = set()
        for i, j, J in self.edges:
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise InstanceError(f"edge ({i}, {j}) references a site outside 0..{self.n_sites - 1}")
            if i == j:
                raise InstanceError(f"self-loop on site {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InstanceError(f"duplicate edge {key}")
            seen.add(key)
            if not -1.0 <= J <= 1.0:
                raise InstanceError(f"coupling {J!r} on edge {key} outside [-1, 1]")

    @cached_property
    def edge_index(self) -> np.ndarray:
        return np.array([(i, j) for i, j, _ in self.edges], dtype=np.int64).reshape(-1, 2)

    @cached_property
    def couplings(self) -> np.ndarray:
        return np.array([J for _, _, J in self.edges], dtype=float)

    @cached_property
    def fields(self) -> np.ndarray:
        return np.array(self.fields_z, dtype=float)

    @property
    def has_fields(self) -> bool:
        return any(h != 0.0 for h in self.fields_z)

    def neighbors(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n_sites)]
        for i, j, J in self.edges:
            adj[i].append((j, J))
            adj[j].append((i, J))
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_sites, dtype=int)
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def is_connected(self) -> bool:
        adj = self.neighbors()
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n_sites

    def with_fields(self, fields: Sequence[float]) -> "Instance":
        """Copy of the instance with the longitudinal fields replaced."""
        return replace(self, fields_z=tuple(float(h) for h in fields))

    def with_field_at(self, site: int, h: float) -> "Instance":
        fields = [0.0] * self.n_sites
        fields[site] = float(h)
        return self.with_fields(fields)

    def coupling_matrix(self) -> np.ndarray:
        J = np.zeros((self.n_sites, self.n_sites))
        for i, j, c in self.edges:
            J[i, j] = J[j, i] = c
        return J


def _ladder_edges(L: int, w: int) -> list[tuple[int, int]]:
    pairs = []
    for x in range(L):
        for y in range(w):
            s = x * w + y
            if y + 1 < w:
                pairs.append((s, s + 1))
            if x + 1 < L:
                pairs.append((s, s + w))
    return pairs


def _random_regular_edges(N: int, K: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    # configuration model: pair stubs uniformly, reject self-loops, multi-edges and disconnected draws
    stubs = np.repeat(np.arange(N), K)
    for _ in range(RANDOM_REGULAR_RETRIES):
        perm = rng.permutation(stubs)
        a, b = perm[0::2], perm[1::2]
        if np.any(a == b):
            continue
        pairs = {(min(u, v), max(u, v)) for u, v in zip(a.tolist(), b.tolist())}
        if len(pairs) != len(a):
            continue
        probe = Instance(N, tuple((i, j, 0.0) for i, j in pairs), (0.0,) * N, Custom(N))
        if not probe.is_connected():
            continue
        return list(pairs)
    raise InstanceError(
        f"failed to draw a connected simple {K}-regular graph on {N} vertices "
        f"within the retry budget of {RANDOM_REGULAR_RETRIES}"
    )


def generate(geometry: Geometry, seed: int) -> Instance:
    """Draw a random instance with couplings uniform in [-1, 1] and zero fields."""
    geometry.validate()
    if not 0 <= seed < 2**64:
        raise InstanceError("seed must be a 64-bit unsigned integer")
    rng = np.random.Generator(np.random.PCG64(seed))
    if isinstance(geometry, Chain):
        pairs = [(i, i + 1) for i in range(geometry.L - 1)]
    elif isinstance(geometry, Ladder):
        pairs = _ladder_edges(geometry.L, geometry.w)
    elif isinstance(geometry, RandomRegular):
        pairs = _random_regular_edges(geometry.N, geometry.K, rng)
    else:
        raise InstanceError(f"cannot generate geometry {geometry!r}")
    pairs.sort()
    J = rng.uniform(-1.0, 1.0, size=len(pairs))
    edges = tuple((i, j, float(c)) for (i, j), c in zip(pairs, J))
    n = geometry.n_sites
    return Instance(n, edges, (0.0,) * n, geometry, seed)


def from_couplings(n_sites: int, edges: Sequence[tuple[int, int, float]], fields: Sequence[float] | None = None) -> Instance:
    """Build a :class:`Custom` instance from explicit couplings."""
    fields_z = tuple(float(h) for h in fields) if fields is not None else (0.0,) * n_sites
    return Instance(n_sites, tuple((int(i), int(j), float(J)) for i, j, J in edges), fields_z, Custom(n_sites))


def classical_energy(instance: Instance, config) -> float | np.ndarray:
    """Energy of one configuration, or of a batch with shape ``(k, n_sites)``."""
    s = np.asarray(config)
    if s.shape[-1] != instance.n_sites:
        raise InstanceError(f"configuration has {s.shape[-1]} spins, instance has {instance.n_sites}")
    s = s.astype(float)
    idx = instance.edge_index
    e = -(s[..., idx[:, 0]] * s[..., idx[:, 1]]) @ instance.couplings - s @ instance.fields
    if np.ndim(e) == 0:
        return float(e)
    return e


def serialize(instance: Instance) -> str:
    """Line-oriented text with exact float round-trip (``repr`` is shortest-exact)."""
    lines = [
        FORMAT_HEADER,
        f"geometry {instance.geometry.tag()}",
        f"seed {instance.seed}",
        f"n_sites {instance.n_sites}",
        f"n_edges {len(instance.edges)}",
    ]
    lines += [f"edge {i} {j} {J!r}" for i, j, J in instance.edges]
    lines += [f"field {k} {h!r}" for k, h in enumerate(instance.fields_z)]
    return "\n".join(lines) + "\n"


def parse(text: str) -> Instance:
    """Inverse of :func:`serialize`; errors name the offending line."""
    header: dict[str, str] = {}
    edges: list[tuple[int, int, float]] = []
    fields: dict[int, float] = {}
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise InstanceError(f"line 1: expected header {FORMAT_HEADER!r}")
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        try:
            if key in ("geometry", "seed", "n_sites", "n_edges"):
                if key in header:
                    raise InstanceError(f"repeated {key!r} record")
                header[key] = rest
            elif key == "edge":
                i, j, J = rest.split()
                edges.append((int(i), int(j), float(J)))
            elif key == "field":
                k, h = rest.split()
                if int(k) in fields:
                    raise InstanceError(f"repeated field for site {k}")
                fields[int(k)] = float(h)
            else:
                raise InstanceError(f"unknown record {key!r}")
        except InstanceError as exc:
            raise InstanceError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise InstanceError(f"line {lineno}: malformed {key!r} record: {exc}") from None
    for key in ("geometry", "seed", "n_sites"):
        if key not in header:
            raise InstanceError(f"missing {key!r} record")
    try:
        n = int(header["n_sites"])
        seed = int(header["seed"])
    except ValueError as exc:
        raise InstanceError(f"bad header value: {exc}") from None
    if "n_edges" in header and int(header["n_edges"]) != len(edges):
        raise InstanceError(f"n_edges says {header['n_edges']} but {len(edges)} edge records found")
    geom = parse_geometry(header["geometry"])
    if geom.n_sites != n:
        raise InstanceError(f"geometry {geom.tag()!r} implies {geom.n_sites} sites, header says {n}")
    bad = [k for k in fields if not 0 <= k < n]
    if bad:
        raise InstanceError(f"field record for site {bad[0]} outside 0..{n - 1}")
    return Instance(n, tuple(edges), tuple(fields.get(k, 0.0) for k in range(n)), geom, seed)


def load(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def save(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(instance))
