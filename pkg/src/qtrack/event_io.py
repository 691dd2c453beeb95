"""Event data boundary: synthetic barrel events, hit CSV files, SVG event
displays and line-delimited metrics records."""

from __future__ import annotations

import colorsys
import csv
import io
import json
import math
import os
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tracking import Hit

CSV_COLUMNS = ("hit_id", "x", "y", "z", "layer", "particle_id")
METRICS_SCHEMA = 1

DEFAULT_RADII = (32.0, 72.0, 116.0, 172.0, 260.0, 360.0, 500.0, 660.0, 820.0, 1020.0)


class HitsFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class DetectorGeometry:
    layer_radii: tuple[float, ...] = DEFAULT_RADII
    z_half_length: float = 1000.0
    hit_sigma: float = 0.1

    def __post_init__(self):
        radii = tuple(float(r) for r in self.layer_radii)
        if not radii or radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("layer radii must be positive and strictly ascending")
        if self.z_half_length <= 0 or self.hit_sigma < 0:
            raise ValueError("invalid geometry")
        object.__setattr__(self, "layer_radii", radii)

    @property
    def n_layers(self) -> int:
        return len(self.layer_radii)


@dataclass(frozen=True)
class GeneratorConfig:
    n_particles: int = 10
    noise_fraction: float = 0.0
    curvature_range: tuple[float, float] = (-0.0015, 0.0015)
    theta_range: tuple[float, float] = (0.85, math.pi - 0.85)
    phi_range: tuple[float, float] = (-math.pi, math.pi)
    inefficiency: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 0:
            raise ValueError("n_particles must be non-negative")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ValueError("noise_fraction must lie in [0, 1)")
        if not 0.0 <= self.inefficiency < 1.0:
            raise ValueError("inefficiency must lie in [0, 1)")
        lo, hi = self.theta_range
        if not (0.2 <= lo <= hi <= math.pi - 0.2):
            raise ValueError("theta range must stay within [0.2, pi - 0.2]")
        if self.curvature_range[0] > self.curvature_range[1]:
            raise ValueError("empty curvature range")


@dataclass
class GeneratorStats:
    particles_skipped: int = 0
    hits_outside_barrel: int = 0
    hits_dropped: int = 0


def _particle_hits(geometry, kappa, phi0, theta, rng):
    """Transverse circle through the origin, straight in z versus path length."""
    out = []
    cot = math.cos(theta) / math.sin(theta)
    for layer, r in enumerate(geometry.layer_radii):
        if kappa == 0.0:
            s = r
            phi = phi0
        else:
            arg = kappa * r / 2.0
            if abs(arg) > 1.0:
                break
            s = 2.0 * math.asin(arg) / kappa
            # chord direction from the origin turns by half the swept angle
            phi = phi0 + kappa * s / 2.0
        z = s * cot
        out.append((layer, r, phi, z))
    return out


def generate_event(
    geometry: DetectorGeometry, config: GeneratorConfig
) -> tuple[list[Hit], GeneratorStats]:
    """Helical particles from the origin plus uniform noise hits."""
    rng = np.random.default_rng(config.seed)
    stats = GeneratorStats()
    raw: list[tuple[int, float, float, float, int]] = []  # layer, r, phi, z, particle
    sigma = geometry.hit_sigma
    for pid in range(1, config.n_particles + 1):
        kappa = float(rng.uniform(*config.curvature_range))
        phi0 = float(rng.uniform(*config.phi_range))
        theta = float(rng.uniform(*config.theta_range))
        crossings = _particle_hits(geometry, kappa, phi0, theta, rng)
        kept = 0
        for layer, r, phi, z in crossings:
            if abs(z) > geometry.z_half_length:
                stats.hits_outside_barrel += 1
                continue
            if config.inefficiency > 0 and rng.random() < config.inefficiency:
                stats.hits_dropped += 1
                continue
            if sigma > 0:
                phi += rng.normal(0.0, sigma) / r
                z += rng.normal(0.0, sigma)
            raw.append((layer, r, phi, z, pid))
            kept += 1
        if kept == 0:
            stats.particles_skipped += 1
    n_true = len(raw)
    n_noise = int(round(config.noise_fraction / (1.0 - config.noise_fraction) * n_true))
    for _ in range(n_noise):
        layer = int(rng.integers(geometry.n_layers))
        r = geometry.layer_radii[layer]
        phi = float(rng.uniform(-math.pi, math.pi))
        z = float(rng.uniform(-geometry.z_half_length, geometry.z_half_length))
        raw.append((layer, r, phi, z, 0))
    ids = rng.permutation(len(raw)) + 1
    hits = [
        Hit(int(ids[k]), r * math.cos(phi), r * math.sin(phi), z, layer, pid)
        for k, (layer, r, phi, z, pid) in enumerate(raw)
    ]
    hits.sort(key=lambda h: h.id)
    return hits, stats


# ---------------------------------------------------------------------------
# CSV


def format_hits_csv(hits: Iterable[Hit]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for h in hits:
        writer.writerow([h.id, f"{h.x:.17g}", f"{h.y:.17g}", f"{h.z:.17g}", h.layer, h.truth_particle])
    return buf.getvalue()


def write_hits_csv(hits: Iterable[Hit], path) -> None:
    atomic_write(path, format_hits_csv(hits))


def parse_hits_csv(text: str) -> list[Hit]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise HitsFormatError("missing header", 1) from None
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise HitsFormatError(f"missing column(s): {', '.join(missing)}", 1)
    col = {name: header.index(name) for name in CSV_COLUMNS}
    hits: list[Hit] = []
    seen: set[int] = set()
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != len(header):
            raise HitsFormatError(f"expected {len(header)} cells, got {len(row)}", lineno)
        try:
            hid = int(row[col["hit_id"]])
            x, y, z = (float(row[col[c]]) for c in ("x", "y", "z"))
            layer = int(row[col["layer"]])
            pid = int(row[col["particle_id"]])
        except ValueError as exc:
            raise HitsFormatError(f"non-numeric cell ({exc})", lineno) from None
        if not all(math.isfinite(v) for v in (x, y, z)):
            raise HitsFormatError("non-finite coordinate", lineno)
        if hid in seen:
            raise HitsFormatError(f"duplicate hit_id {hid}", lineno)
        seen.add(hid)
        hits.append(Hit(hid, x, y, z, layer, pid))
    return hits


def load_hits_csv(path) -> list[Hit]:
    return parse_hits_csv(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# SVG

_SVG_NS = "http://www.w3.org/2000/svg"


def particle_color(pid: int) -> str:
    if pid == 0:
        return "#999999"
    hue = (pid * 0.618033988749895) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.75, 0.85)
    return "#{:02x}{:02x}{:02x}".format(int(r * 255), int(g * 255), int(b * 255))


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def render_event_svg(
    hits: Sequence[Hit],
    tracks: Sequence[Sequence[Hit]] = (),
    projection: str = "xy",
    geometry: DetectorGeometry | None = None,
    size: int = 800,
) -> str:
    """SVG text for a transverse (``xy``) or longitudinal (``rz``) view."""
    geometry = geometry or DetectorGeometry()
    if projection not in ("xy", "rz"):
        raise ValueError("projection must be 'xy' or 'rz'")
    rmax = geometry.layer_radii[-1] * 1.05
    zmax = geometry.z_half_length * 1.05
    margin = 10.0
    if projection == "xy":
        width = height = size
        scale = (size / 2 - margin) / rmax

        def project(h: Hit) -> tuple[float, float]:
            return size / 2 + h.x * scale, size / 2 - h.y * scale

    else:
        width, height = size, size // 2
        sx = (width / 2 - margin) / zmax
        sy = (height - 2 * margin) / rmax

        def project(h: Hit) -> tuple[float, float]:
            return width / 2 + h.z * sx, height - margin - h.r * sy

    svg = ET.Element(
        "svg",
        xmlns=_SVG_NS,
        version="1.1",
        width=str(width),
        height=str(height),
        viewBox=f"0 0 {width} {height}",
    )
    layers = ET.SubElement(svg, "g", id="layers", fill="none", stroke="#cccccc")
    layers.set("stroke-width", "1")
    for k, r in enumerate(geometry.layer_radii):
        if projection == "xy":
            ET.SubElement(layers, "circle", cx=_fmt(width / 2), cy=_fmt(height / 2), r=_fmt(r * scale))
        else:
            y = height - margin - r * sy
            ET.SubElement(
                layers,
                "line",
                x1=_fmt(width / 2 - geometry.z_half_length * sx),
                x2=_fmt(width / 2 + geometry.z_half_length * sx),
                y1=_fmt(y),
                y2=_fmt(y),
            )
    dots = ET.SubElement(svg, "g", id="hits")
    for h in sorted(hits, key=lambda h: h.id):
        x, y = project(h)
        ET.SubElement(dots, "circle", cx=_fmt(x), cy=_fmt(y), r="2", fill=particle_color(h.truth_particle))
    lines = ET.SubElement(svg, "g", id="tracks", fill="none", stroke="#d62728")
    lines.set("stroke-width", "1.2")
    for k, tr in enumerate(tracks):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in map(project, tr))
        ET.SubElement(lines, "polyline", points=pts, id=f"track-{k}")
    ET.indent(svg)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(svg, encoding="unicode") + "\n"


def write_event_svg(hits, tracks, path, projection: str = "xy", geometry=None) -> None:
    atomic_write(path, render_event_svg(hits, tracks, projection, geometry))


# ---------------------------------------------------------------------------
# metrics records


@dataclass
class MetricsRecord:
    run_id: str
    solver: str
    multiplicity: int | None = None
    layers: int | None = None
    loss: str | None = None
    n_instances: int | None = None
    n_extractions: int | None = None
    n_samples: int | None = None
    energy: float | None = None
    efficiency: float | None = None
    purity: float | None = None
    wall_time: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"schema": METRICS_SCHEMA}
        for k, v in self.__dict__.items():
            if k == "extra":
                continue
            d[k] = v
        d.update(self.extra)
        return d


def format_metrics(records: Iterable[MetricsRecord | dict]) -> str:
    lines = []
    for rec in records:
        d = rec.to_dict() if isinstance(rec, MetricsRecord) else {"schema": METRICS_SCHEMA, **rec}
        lines.append(json.dumps(d, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def write_metrics(records, path) -> None:
    atomic_write(path, format_metrics(records))


def read_metrics(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
