import json
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtrack.event_io import (
    DetectorGeometry,
    GeneratorConfig,
    HitsFormatError,
    MetricsRecord,
    format_hits_csv,
    generate_event,
    load_hits_csv,
    parse_hits_csv,
    read_metrics,
    render_event_svg,
    write_event_svg,
    write_hits_csv,
    write_metrics,
)
from qtrack.tracking import Hit

NS = {"svg": "http://www.w3.org/2000/svg"}
HEADER = "hit_id,x,y,z,layer,particle_id\n"


class TestGenerator:
    def test_straight_track_on_radial_line(self):
        geo = DetectorGeometry(hit_sigma=0.0)
        hits, stats = generate_event(geo, GeneratorConfig(n_particles=1, curvature_range=(0.0, 0.0), seed=3))
        assert len(hits) == geo.n_layers
        assert sorted(h.layer for h in hits) == list(range(geo.n_layers))
        phis = {round(h.phi, 12) for h in hits}
        assert len(phis) == 1
        # collinear with the origin in 3D as well: z / r is constant
        assert len({round(h.z / h.r, 12) for h in hits}) == 1
        assert stats.particles_skipped == 0

    def test_no_noise_means_all_truth(self):
        hits, _ = generate_event(DetectorGeometry(), GeneratorConfig(n_particles=30, seed=1))
        assert all(h.truth_particle != 0 for h in hits)

    def test_noise_count(self):
        hits, _ = generate_event(DetectorGeometry(), GeneratorConfig(n_particles=30, noise_fraction=0.2, seed=1))
        noise = sum(h.is_noise for h in hits)
        assert noise == round(0.25 * (len(hits) - noise))

    def test_deterministic_csv(self):
        cfg = GeneratorConfig(n_particles=100, noise_fraction=0.1, seed=8)
        a = format_hits_csv(generate_event(DetectorGeometry(), cfg)[0])
        b = format_hits_csv(generate_event(DetectorGeometry(), cfg)[0])
        assert a == b

    def test_one_hit_per_layer_and_unique_ids(self):
        hits, _ = generate_event(DetectorGeometry(), GeneratorConfig(n_particles=40, seed=2))
        per = {}
        for h in hits:
            per.setdefault(h.truth_particle, []).append(h.layer)
        assert all(len(ls) == len(set(ls)) for ls in per.values())
        assert len({h.id for h in hits}) == len(hits)

    def test_inefficiency_drops_hits(self):
        hits, stats = generate_event(DetectorGeometry(), GeneratorConfig(n_particles=40, inefficiency=0.3, seed=2))
        assert stats.hits_dropped > 0

    def test_sharp_curvature_skips_particle(self):
        geo = DetectorGeometry(layer_radii=(100.0, 200.0))
        _, stats = generate_event(geo, GeneratorConfig(n_particles=3, curvature_range=(0.05, 0.05)))
        assert stats.particles_skipped == 3

    @given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.0))
    @settings(max_examples=30)
    def test_radius_invariant(self, seed, sigma):
        geo = DetectorGeometry(hit_sigma=sigma)
        hits, _ = generate_event(geo, GeneratorConfig(n_particles=5, noise_fraction=0.2, seed=seed))
        for h in hits:
            assert abs(h.r - geo.layer_radii[h.layer]) <= 3 * sigma + 1e-9

    @pytest.mark.parametrize(
        "kwargs",
        [dict(n_particles=-1), dict(noise_fraction=1.0), dict(inefficiency=-0.1), dict(theta_range=(0.1, 1.0)), dict(curvature_range=(1.0, 0.0))],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            GeneratorConfig(**kwargs)

    @pytest.mark.parametrize("radii", [(), (10.0, 5.0), (-1.0, 2.0)])
    def test_geometry_validation(self, radii):
        with pytest.raises(ValueError):
            DetectorGeometry(layer_radii=radii)


class TestCsv:
    def test_header_only(self):
        assert parse_hits_csv(HEADER) == []

    def test_single_row(self):
        (h,) = parse_hits_csv(HEADER + "7,1.5,-2,3.25,4,9\n")
        assert h == Hit(7, 1.5, -2.0, 3.25, 4, 9)

    def test_columns_in_any_order(self):
        (h,) = parse_hits_csv("layer,particle_id,hit_id,z,y,x\n2,0,5,1,2,3\n")
        assert h == Hit(5, 3.0, 2.0, 1.0, 2, 0)

    def test_round_trip_large_event(self, tmp_path):
        hits, _ = generate_event(DetectorGeometry(), GeneratorConfig(n_particles=110, noise_fraction=0.1, seed=5))
        assert len(hits) >= 1000
        write_hits_csv(hits, tmp_path / "hits.csv")
        assert load_hits_csv(tmp_path / "hits.csv") == hits

    @given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False), st.integers(0, 20), st.integers(0, 50)), max_size=30))
    def test_round_trip_property(self, rows):
        hits = [Hit(k + 1, v, -v, v / 3, layer, pid) for k, (v, layer, pid) in enumerate(rows)]
        assert parse_hits_csv(format_hits_csv(hits)) == hits

    @pytest.mark.parametrize(
        "text, line",
        [
            ("", 1),
            ("hit_id,x,y,z,layer\n", 1),
            (HEADER + "1,0,0,0,0,1\n2,abc,0,0,0,1\n", 3),
            (HEADER + "1,0,0,0,0,1\n1,0,0,0,1,1\n", 3),
            (HEADER + "1,0,0\n", 2),
            (HEADER + "1,inf,0,0,0,1\n", 2),
        ],
    )
    def test_errors_carry_line_numbers(self, text, line):
        with pytest.raises(HitsFormatError) as err:
            parse_hits_csv(text)
        assert err.value.line == line


class TestSvg:
    def test_empty_event_draws_geometry(self):
        root = ET.fromstring(render_event_svg([]).split("\n", 1)[1])
        assert len(root.findall("svg:g[@id='layers']/svg:circle", NS)) == 10
        assert root.findall("svg:g[@id='hits']/svg:circle", NS) == []

    def test_single_track_vertices(self):
        hits = [Hit(i, 10.0 * i, 0.0, 0.0, i) for i in (1, 2, 3)]
        root = ET.fromstring(render_event_svg(hits, [hits], size=800).split("\n", 1)[1])
        (poly,) = root.findall(".//svg:polyline", NS)
        pts = [tuple(map(float, p.split(","))) for p in poly.get("points").split()]
        scale = 390 / (1020 * 1.05)
        assert pts == [pytest.approx((400 + 10 * i * scale, 400.0), abs=1e-3) for i in (1, 2, 3)]

    @pytest.mark.parametrize("projection", ["xy", "rz"])
    def test_large_event_parses_and_counts(self, projection, tmp_path):
        hits, _ = generate_event(DetectorGeometry(), GeneratorConfig(n_particles=100, noise_fraction=0.1, seed=1))
        by = {}
        for h in hits:
            if not h.is_noise:
                by.setdefault(h.truth_particle, []).append(h)
        tracks = [sorted(v, key=lambda h: h.layer) for _, v in sorted(by.items())]
        path = tmp_path / f"event.{projection}.svg"
        write_event_svg(hits, tracks, path, projection)
        root = ET.parse(path).getroot()
        polys = root.findall(".//svg:polyline", NS)
        assert [len(p.get("points").split()) for p in polys] == [len(t) for t in tracks]
        assert len(root.findall("svg:g[@id='hits']/svg:circle", NS)) == len(hits)
        noise_dots = [c for c in root.findall("svg:g[@id='hits']/svg:circle", NS) if c.get("fill") == "#999999"]
        assert len(noise_dots) == sum(h.is_noise for h in hits)

    def test_deterministic(self):
        hits, _ = generate_event(DetectorGeometry(), GeneratorConfig(n_particles=10, seed=1))
        assert render_event_svg(hits, [hits[:3]], "rz") == render_event_svg(hits, [hits[:3]], "rz")

    def test_bad_projection(self):
        with pytest.raises(ValueError):
            render_event_svg([], projection="yz")


class TestMetrics:
    def test_schema_and_fields(self, tmp_path):
        rec = MetricsRecord("r1", "subqubo", multiplicity=20, energy=-3.5, efficiency=0.95, purity=1.0, wall_time=0.1, extra={"seed": 4})
        write_metrics([rec, {"solver": "sa", "energy": -3.0}], tmp_path / "m.jsonl")
        lines = (tmp_path / "m.jsonl").read_text().splitlines()
        assert len(lines) == 2
        first, second = (json.loads(line) for line in lines)
        assert first["schema"] == second["schema"] == 1
        for key in ("run_id", "solver", "multiplicity", "layers", "loss", "n_instances", "n_extractions", "n_samples", "energy", "efficiency", "purity", "wall_time"):
            assert key in first
        assert first["seed"] == 4
        assert read_metrics(tmp_path / "m.jsonl") == [first, second]
