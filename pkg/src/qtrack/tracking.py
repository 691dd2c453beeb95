"""Hits, doublets and triplets, QUBO assembly, and doublet-level scoring.

Units are millimetres and radians. The signed curvature ``1/R`` of the
transverse circle through a triplet stands in for ``q/p_T``.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .qubo import QuboModel

_EXP_CLIP = 700.0
_COLLINEAR_EPS = 1e-12


@dataclass(frozen=True)
class Hit:
    id: int
    x: float
    y: float
    z: float
    layer: int
    truth_particle: int = 0

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def phi(self) -> float:
        return math.atan2(self.y, self.x)

    @property
    def is_noise(self) -> bool:
        return self.truth_particle == 0


@dataclass(frozen=True)
class Doublet:
    inner: Hit
    outer: Hit

    @property
    def ids(self) -> tuple[int, int]:
        return (self.inner.id, self.outer.id)

    @property
    def theta(self) -> float:
        return math.atan2(self.outer.r - self.inner.r, self.outer.z - self.inner.z)

    @property
    def phi(self) -> float:
        return math.atan2(self.outer.y - self.inner.y, self.outer.x - self.inner.x)

    @property
    def layer_gap(self) -> int:
        return self.outer.layer - self.inner.layer


@dataclass(frozen=True)
class Triplet:
    hits: tuple[Hit, Hit, Hit]
    curvature: float
    theta_inner: float
    theta_outer: float
    holes: int
    d0: float
    z0: float

    @property
    def delta_theta(self) -> float:
        return abs(self.theta_outer - self.theta_inner)

    @property
    def hit_ids(self) -> tuple[int, int, int]:
        return tuple(h.id for h in self.hits)


class ExponentSign(str, enum.Enum):
    AS_WRITTEN = "as_written"  # a_i = alpha (1 - exp(+|d0|/gamma)) + ...
    DAMPED = "damped"  # a_i = alpha (1 - exp(-|d0|/gamma)) + ...


@dataclass(frozen=True)
class QuboBuildConfig:
    """Bias-weight parameters plus candidate-generation windows.

    ``alpha``, ``beta``, ``gamma`` and ``lam`` are the bias-weight parameters;
    they are unrelated to the QAOA angles and the CVaR level.
    """

    alpha: float = 0.5
    beta: float = 0.2
    gamma: float = 1.0
    lam: float = 0.5
    conflict_penalty: float = 1.0
    exponent_sign: ExponentSign = ExponentSign.AS_WRITTEN
    # doublet windows
    max_layer_gap: int = 2
    phi_window: float = 0.2
    slope_window: float = 2.0
    doublet_z0_window: float = 200.0
    # triplet windows
    theta_window: float = 0.1
    curvature_max: float = 0.005
    d0_max: float = 3.0
    z0_max: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and self.lam > 0):
            raise ValueError("gamma and lambda must be positive")
        if self.max_layer_gap < 1:
            raise ValueError("max_layer_gap must be >= 1")
        object.__setattr__(self, "exponent_sign", ExponentSign(self.exponent_sign))


@dataclass(frozen=True)
class TrackingMetrics:
    tp: int
    fp: int
    fn: int
    efficiency: float
    purity: float
    efficiency_defined: bool
    purity_defined: bool

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "TrackingMetrics":
        eff_ok = tp + fn > 0
        pur_ok = tp + fp > 0
        return cls(
            tp,
            fp,
            fn,
            tp / (tp + fn) if eff_ok else 0.0,
            tp / (tp + fp) if pur_ok else 0.0,
            eff_ok,
            pur_ok,
        )


def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


def build_doublets(hits: Sequence[Hit], config: QuboBuildConfig | None = None) -> list[Doublet]:
    """Hit pairs on layers at most ``max_layer_gap`` apart passing the windows.

    Cuts: ``|dphi| <= phi_window``, ``|dz/dr| <= slope_window`` and the
    segment's z intercept at ``r = 0`` within ``doublet_z0_window``.
    """
    config = config or QuboBuildConfig()
    by_layer: dict[int, list[Hit]] = defaultdict(list)
    for h in hits:
        by_layer[h.layer].append(h)
    arrays = {}
    for layer, hs in by_layer.items():
        arrays[layer] = (
            np.array([h.r for h in hs]),
            np.array([h.phi for h in hs]),
            np.array([h.z for h in hs]),
        )
    out: list[Doublet] = []
    for li in sorted(by_layer):
        ri, pi, zi = arrays[li]
        for gap in range(1, config.max_layer_gap + 1):
            lo = li + gap
            if lo not in by_layer:
                continue
            ro, po, zo = arrays[lo]
            dr = ro[None, :] - ri[:, None]
            dz = zo[None, :] - zi[:, None]
            dphi = np.abs(_wrap(po[None, :] - pi[:, None]))
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = dz / dr
                z_icpt = zi[:, None] - ri[:, None] * slope
            ok = (
                (dr > 0)
                & (dphi <= config.phi_window)
                & (np.abs(slope) <= config.slope_window)
                & (np.abs(z_icpt) <= config.doublet_z0_window)
            )
            for a, b in zip(*np.nonzero(ok)):
                out.append(Doublet(by_layer[li][a], by_layer[lo][b]))
    out.sort(key=lambda d: d.ids)
    return out


def _circumcircle(p1, p2, p3) -> tuple[float, float, float] | None:
    ax, ay = p1
    bx, by = p2
    cx, cy = p3
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    scale = max(abs(bx - ax), abs(by - ay), abs(cx - bx), abs(cy - by), 1.0)
    if abs(d) <= _COLLINEAR_EPS * scale * scale:
        return None
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    return ux, uy, math.hypot(ax - ux, ay - uy)


def fit_circle_kinematics(h1: Hit, h2: Hit, h3: Hit) -> tuple[float, float, float, float, float]:
    """Return ``(curvature, d0, z0, theta_inner, theta_outer)`` for three hits.

    The curvature is ``1/R`` of the transverse circumcircle, positive when the
    path turns counter-clockwise. ``d0`` is the distance of closest approach of
    that circle to the beam line; ``z0`` is ``z`` extrapolated linearly in
    transverse path length to that point. Collinear hits fall back to a
    straight line.
    """
    pts = [(h.x, h.y) for h in (h1, h2, h3)]
    zs = np.array([h1.z, h2.z, h3.z])
    theta_inner = Doublet(h1, h2).theta
    theta_outer = Doublet(h2, h3).theta
    ux1, uy1 = pts[1][0] - pts[0][0], pts[1][1] - pts[0][1]
    ux2, uy2 = pts[2][0] - pts[1][0], pts[2][1] - pts[1][1]
    cross = ux1 * uy2 - uy1 * ux2
    circle = _circumcircle(*pts)
    if circle is None:
        # straight line through the hits
        length = math.hypot(pts[2][0] - pts[0][0], pts[2][1] - pts[0][1])
        if length == 0.0:
            raise ValueError("hits share a transverse position")
        dx, dy = (pts[2][0] - pts[0][0]) / length, (pts[2][1] - pts[0][1]) / length
        d0 = abs(pts[0][0] * dy - pts[0][1] * dx)
        s = np.array([(px * dx + py * dy) for px, py in pts])
        return 0.0, d0, _intercept(s, zs), theta_inner, theta_outer
    cx, cy, radius = circle
    sign = 1.0 if cross > 0 else -1.0
    dist = math.hypot(cx, cy)
    d0 = abs(dist - radius)
    if dist == 0.0:
        # beam line at the centre: every point is equally close, use the first hit
        start = math.atan2(pts[0][1] - cy, pts[0][0] - cx)
    else:
        start = math.atan2(-cy, -cx)
    s = np.array([sign * radius * _wrap(math.atan2(py - cy, px - cx) - start) for px, py in pts])
    return sign / radius, d0, _intercept(s, zs), theta_inner, theta_outer


def _intercept(s: np.ndarray, z: np.ndarray) -> float:
    """Least-squares line ``z = z0 + t * s`` evaluated at ``s = 0``."""
    sm, zm = s.mean(), z.mean()
    ds = s - sm
    var = float(ds @ ds)
    if var == 0.0:
        return float(zm)
    slope = float(ds @ (z - zm)) / var
    return float(zm - slope * sm)


def make_triplet(d1: Doublet, d2: Doublet) -> Triplet:
    if d1.outer.id != d2.inner.id:
        raise ValueError("doublets do not share a middle hit")
    h1, h2, h3 = d1.inner, d1.outer, d2.outer
    curvature, d0, z0, th_in, th_out = fit_circle_kinematics(h1, h2, h3)
    return Triplet((h1, h2, h3), curvature, th_in, th_out, h3.layer - h1.layer - 2, d0, z0)


def build_triplets(doublets: Sequence[Doublet], config: QuboBuildConfig | None = None) -> list[Triplet]:
    """Chain doublets sharing their middle hit and apply the triplet windows."""
    config = config or QuboBuildConfig()
    by_inner: dict[int, list[Doublet]] = defaultdict(list)
    for d in doublets:
        by_inner[d.inner.id].append(d)
    theta = {d.ids: d.theta for d in doublets}
    out: list[Triplet] = []
    for d1 in doublets:
        th1 = theta[d1.ids]
        for d2 in by_inner.get(d1.outer.id, ()):
            if abs(theta[d2.ids] - th1) > config.theta_window:
                continue
            t = make_triplet(d1, d2)
            if (
                abs(t.curvature) <= config.curvature_max
                and abs(t.d0) <= config.d0_max
                and abs(t.z0) <= config.z0_max
            ):
                out.append(t)
    out.sort(key=lambda t: t.hit_ids)
    return out


def compatibility_S(ti: Triplet, tj: Triplet) -> float:
    num = 1.0 - 0.5 * (abs(ti.curvature - tj.curvature) + max(ti.delta_theta, tj.delta_theta))
    return num / (1 + ti.holes + tj.holes) ** 2


def bias_weight(t: Triplet, config: QuboBuildConfig | None = None) -> float:
    config = config or QuboBuildConfig()
    sign = 1.0 if config.exponent_sign is ExponentSign.AS_WRITTEN else -1.0
    ed = min(sign * abs(t.d0) / config.gamma, _EXP_CLIP)
    ez = min(sign * abs(t.z0) / config.lam, _EXP_CLIP)
    return config.alpha * (1.0 - math.exp(ed)) + config.beta * (1.0 - math.exp(ez))


def is_chain(ti: Triplet, tj: Triplet) -> bool:
    """True when the two triplets overlap in two hits forming a 4-hit chain."""
    a, b = ti.hit_ids, tj.hit_ids
    return a[1:] == b[:2] or b[1:] == a[:2]


def is_continuation(ti: Triplet, tj: Triplet) -> bool:
    """True when one triplet starts on the hit where the other ends."""
    a, b = ti.hit_ids, tj.hit_ids
    return a[2] == b[0] or b[2] == a[0]


def pair_coefficient(ti: Triplet, tj: Triplet, config: QuboBuildConfig) -> float | None:
    """Quadratic coefficient for a triplet pair, ``None`` when there is no term.

    Two hits shared in a 4-hit chain couple with ``-S``; a one-hit
    continuation of the same path has no term; any other overlap conflicts.
    """
    shared = len(set(ti.hit_ids) & set(tj.hit_ids))
    if shared == 0:
        return None
    if shared == 1 and is_continuation(ti, tj):
        return None
    if shared == 2 and is_chain(ti, tj):
        return -compatibility_S(ti, tj)
    return config.conflict_penalty


def build_qubo(
    triplets: Sequence[Triplet], config: QuboBuildConfig | None = None
) -> tuple[QuboModel, list[Triplet]]:
    """Variable ``i`` selects ``triplets[i]``."""
    config = config or QuboBuildConfig()
    by_hit: dict[int, list[int]] = defaultdict(list)
    for idx, t in enumerate(triplets):
        for hid in t.hit_ids:
            by_hit[hid].append(idx)
    pairs: set[tuple[int, int]] = set()
    for members in by_hit.values():
        for i, j in combinations(members, 2):
            pairs.add((j, i) if j > i else (i, j))
    linear = {i: bias_weight(t, config) for i, t in enumerate(triplets)}
    quadratic = {}
    for i, j in sorted(pairs):
        c = pair_coefficient(triplets[i], triplets[j], config)
        if c is not None:
            quadratic[(i, j)] = c
    return QuboModel(len(triplets), linear, quadratic), list(triplets)


def assemble_tracks(selected: Iterable[Triplet]) -> list[list[Hit]]:
    """Merge chain-linked triplets into hit sequences ordered by layer."""
    selected = list(selected)
    parent = list(range(len(selected)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    first_two: dict[tuple[int, int], list[int]] = defaultdict(list)
    for k, t in enumerate(selected):
        first_two[t.hit_ids[:2]].append(k)
    for k, t in enumerate(selected):
        for other in first_two.get(t.hit_ids[1:], ()):
            parent[find(k)] = find(other)

    groups: dict[int, dict[int, Hit]] = defaultdict(dict)
    for k, t in enumerate(selected):
        for h in t.hits:
            groups[find(k)][h.id] = h
    tracks = [sorted(g.values(), key=lambda h: (h.layer, h.id)) for g in groups.values()]
    tracks.sort(key=lambda tr: [h.id for h in tr])
    return tracks


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def true_doublets(hits: Iterable[Hit]) -> set[tuple[int, int]]:
    by_particle: dict[int, list[Hit]] = defaultdict(list)
    for h in hits:
        if not h.is_noise:
            by_particle[h.truth_particle].append(h)
    out = set()
    for hs in by_particle.values():
        hs.sort(key=lambda h: (h.layer, h.id))
        out.update(_pair(a.id, b.id) for a, b in zip(hs, hs[1:]))
    return out


def reconstructed_doublets(tracks: Iterable[Sequence[Hit]]) -> set[tuple[int, int]]:
    out = set()
    for tr in tracks:
        out.update(_pair(a.id, b.id) for a, b in zip(tr, tr[1:]))
    return out


def score(tracks: Iterable[Sequence[Hit]], hits: Iterable[Hit]) -> TrackingMetrics:
    reco = reconstructed_doublets(tracks)
    truth = true_doublets(hits)
    tp = len(reco & truth)
    return TrackingMetrics.from_counts(tp, len(reco) - tp, len(truth) - tp)


def selected_triplets(bits, triplets: Sequence[Triplet]) -> list[Triplet]:
    bits = np.asarray(bits)
    if len(bits) != len(triplets):
        raise ValueError(f"solution has {len(bits)} bits for {len(triplets)} triplets")
    return [t for b, t in zip(bits, triplets) if b]


def triplets_from_ids(
    mapping: dict[int, tuple[int, int, int]], hits: Sequence[Hit]
) -> list[Triplet]:
    """Rebuild triplets (with kinematics) from a serialized index mapping."""
    by_id = {h.id: h for h in hits}
    out = []
    for idx in range(len(mapping)):
        if idx not in mapping:
            raise ValueError(f"triplet mapping misses index {idx}")
        try:
            h1, h2, h3 = (by_id[i] for i in mapping[idx])
        except KeyError as exc:
            raise ValueError(f"triplet {idx} refers to unknown hit {exc.args[0]}") from None
        out.append(make_triplet(Doublet(h1, h2), Doublet(h2, h3)))
    return out
