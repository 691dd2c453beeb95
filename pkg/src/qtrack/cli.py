"""Command-line entry point: ``qtrack <verb> [options]``.

Configuration is a flat ``section.key = value`` file (``--config``) merged
with ``--section.key value`` overrides. Every run writes the fully resolved
configuration next to its primary output, and re-running with that file
reproduces the output.

Exit codes: 0 success, 1 solver or numeric failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import anneal as _anneal
from . import experiments
from . import optim
from . import qaoa as _qaoa
from . import subqubo as _subqubo
from . import tracking as _tracking
from .event_io import (
    DetectorGeometry,
    GeneratorConfig,
    HitsFormatError,
    MetricsRecord,
    atomic_write,
    format_hits_csv,
    format_metrics,
    generate_event,
    load_hits_csv,
    render_event_svg,
)
from .qubo import (
    MAX_BRUTE_FORCE_VARS,
    BitSolution,
    CapacityError,
    QuboFormatError,
    QuboModel,
    brute_force,
    format_qubo,
    read_qubo,
    str_to_bits,
    to_ising,
)

log = logging.getLogger("qtrack")

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad arguments, bad config or a malformed input file."""


# ---------------------------------------------------------------------------
# configuration


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def inner(text: str):
        return None if text.strip().lower() in ("", "auto", "none") else parse(text)

    return inner


def _boolean(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def inner(text: str) -> str:
        value = text.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {text!r}")
        return value

    return inner


def _shots(text: str):
    return _qaoa.EXACT if text.strip().lower() == _qaoa.EXACT else int(text)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any


_BUILD = _tracking.QuboBuildConfig()
_GEOM = DetectorGeometry()
_GEN = GeneratorConfig()
_QAOA = _qaoa.QaoaConfig()
_SUB = _subqubo.SubQuboParams()

SCHEMA: dict[str, dict[str, Key]] = {
    "run": {"seed": Key(int, 0)},
    "geometry": {
        "layer_radii": Key(_float_list, _GEOM.layer_radii),
        "z_half_length": Key(float, _GEOM.z_half_length),
        "hit_sigma": Key(float, _GEOM.hit_sigma),
    },
    "generator": {
        "particles": Key(int, 100),
        "noise": Key(float, 0.1),
        "curvature_min": Key(float, _GEN.curvature_range[0]),
        "curvature_max": Key(float, _GEN.curvature_range[1]),
        "theta_min": Key(float, _GEN.theta_range[0]),
        "theta_max": Key(float, _GEN.theta_range[1]),
        "inefficiency": Key(float, _GEN.inefficiency),
    },
    "build": {
        "alpha": Key(float, _BUILD.alpha),
        "beta": Key(float, _BUILD.beta),
        "gamma": Key(float, _BUILD.gamma),
        "lambda": Key(float, _BUILD.lam),
        "conflict_penalty": Key(float, _BUILD.conflict_penalty),
        "exponent_sign": Key(_choice("as_written", "damped"), "as_written"),
        "max_layer_gap": Key(int, _BUILD.max_layer_gap),
        "phi_window": Key(float, _BUILD.phi_window),
        "slope_window": Key(float, _BUILD.slope_window),
        "doublet_z0_window": Key(float, _BUILD.doublet_z0_window),
        "theta_window": Key(float, _BUILD.theta_window),
        "curvature_max": Key(float, _BUILD.curvature_max),
        "d0_max": Key(float, _BUILD.d0_max),
        "z0_max": Key(float, _BUILD.z0_max),
    },
    "solve": {"solver": Key(_choice("exact", "sa", "qaoa", "subqubo"), "subqubo")},
    "qaoa": {
        "layers": Key(int, _QAOA.layers),
        "shots": Key(_shots, _QAOA.shots),
        "loss": Key(_choice("cvar", "gibbs"), "cvar"),
        "cvar_alpha": Key(float, _QAOA.loss.alpha),
        "gibbs_eta": Key(float, 1.0),
        "optimizer": Key(_choice(*(m.value for m in optim.Method)), _QAOA.optimizer.value),
        "restarts": Key(int, _QAOA.restarts),
        "final_shots": Key(int, _QAOA.final_shots),
        "f_tol": Key(float, _QAOA.tolerances.f_tol),
        "g_tol": Key(float, _QAOA.tolerances.g_tol),
        "max_evals": Key(_optional(int), None),
    },
    "sa": {
        "sweeps": Key(_optional(int), None),
        "t_start": Key(_optional(float), None),
        "t_end": Key(_optional(float), None),
        "restarts": Key(int, 1),
    },
    "subqubo": {
        "n_instances": Key(int, _SUB.n_instances),
        "n_extractions": Key(int, _SUB.n_extractions),
        "n_samples": Key(int, _SUB.n_samples),
        "sub_size": Key(int, _SUB.sub_size),
        "outer_rounds": Key(int, _SUB.outer_rounds),
        "subsolver": Key(_choice("qaoa", "sa", "exact"), "qaoa"),
        "clamp_source": Key(_choice("best", "random"), _SUB.clamp_source),
    },
    "eval": {
        "svg": Key(_boolean, False),
        "projection": Key(_choice("xy", "rz"), "xy"),
    },
    "sweep": {
        "max_layers": Key(int, 8),
        "jobs_per_layer": Key(int, 20),
        "multiplicities": Key(_int_list, (20, 50, 100)),
        "events": Key(int, 1),
    },
}


def format_value(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    return str(value)


class RunConfig:
    """Resolved ``section -> key -> value`` mapping."""

    def __init__(self, values: dict[str, dict[str, Any]]):
        self.values = values

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({s: {k: key.default for k, key in keys.items()} for s, keys in SCHEMA.items()})

    def set(self, dotted: str, text: str, where: str = "") -> None:
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise UsageError(f"{where}unknown config key {dotted!r}")
        try:
            self.values[section][key] = SCHEMA[section][key].parse(text)
        except ValueError as exc:
            raise UsageError(f"{where}bad value for {dotted}: {exc}") from None

    def __getitem__(self, dotted: str) -> Any:
        section, _, key = dotted.partition(".")
        return self.values[section][key]

    def load_file(self, path: Path) -> None:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            dotted, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'section.key = value'")
            self.set(dotted.strip(), value.strip(), f"{path}:{lineno}: ")

    def validate(self) -> None:
        """Build every typed view once so bad combinations fail before any work."""
        self.geometry()
        self.generator(0)
        self.build()
        self.subqubo()

    def render(self) -> str:
        lines = []
        for section in SCHEMA:
            for key in SCHEMA[section]:
                lines.append(f"{section}.{key} = {format_value(self.values[section][key])}")
        return "\n".join(lines) + "\n"

    # typed views -----------------------------------------------------------

    @property
    def seed(self) -> int:
        return self["run.seed"]

    def geometry(self) -> DetectorGeometry:
        v = self.values["geometry"]
        return DetectorGeometry(v["layer_radii"], v["z_half_length"], v["hit_sigma"])

    def generator(self, seed: int) -> GeneratorConfig:
        v = self.values["generator"]
        return GeneratorConfig(
            n_particles=v["particles"],
            noise_fraction=v["noise"],
            curvature_range=(v["curvature_min"], v["curvature_max"]),
            theta_range=(v["theta_min"], v["theta_max"]),
            inefficiency=v["inefficiency"],
            seed=seed,
        )

    def build(self) -> _tracking.QuboBuildConfig:
        v = self.values["build"]
        sign = _tracking.ExponentSign.DAMPED if v["exponent_sign"] == "damped" else _tracking.ExponentSign.AS_WRITTEN
        return _tracking.QuboBuildConfig(
            alpha=v["alpha"],
            beta=v["beta"],
            gamma=v["gamma"],
            lam=v["lambda"],
            conflict_penalty=v["conflict_penalty"],
            exponent_sign=sign,
            max_layer_gap=v["max_layer_gap"],
            phi_window=v["phi_window"],
            slope_window=v["slope_window"],
            doublet_z0_window=v["doublet_z0_window"],
            theta_window=v["theta_window"],
            curvature_max=v["curvature_max"],
            d0_max=v["d0_max"],
            z0_max=v["z0_max"],
        )

    def qaoa(self, seed: int = 0) -> _qaoa.QaoaConfig:
        v = self.values["qaoa"]
        loss = _qaoa.CVaR(v["cvar_alpha"]) if v["loss"] == "cvar" else _qaoa.Gibbs(v["gibbs_eta"])
        return _qaoa.QaoaConfig(
            layers=v["layers"],
            shots=v["shots"],
            loss=loss,
            optimizer=v["optimizer"],
            restarts=v["restarts"],
            seed=seed,
            final_shots=v["final_shots"],
            tolerances=optim.Tolerances(v["f_tol"], v["g_tol"], v["max_evals"]),
        )

    def sa(self, seed: int = 0) -> _anneal.SaConfig:
        v = self.values["sa"]
        return _anneal.SaConfig(
            sweeps=v["sweeps"], t_start=v["t_start"], t_end=v["t_end"], seed=seed, restarts=v["restarts"]
        )

    def subqubo(self) -> _subqubo.SubQuboParams:
        v = self.values["subqubo"]
        sub = {"qaoa": self.qaoa(), "sa": self.sa(), "exact": _subqubo.Exact()}[v["subsolver"]]
        return _subqubo.SubQuboParams(
            n_instances=v["n_instances"],
            n_extractions=v["n_extractions"],
            n_samples=v["n_samples"],
            sub_size=v["sub_size"],
            outer_rounds=v["outer_rounds"],
            subsolver=sub,
            pool_config=self.sa(),
            clamp_source=v["clamp_source"],
        )


# ---------------------------------------------------------------------------
# argument parsing

# verb-specific shorthands for common keys
_ALIASES = {
    "--particles": "generator.particles",
    "--noise": "generator.noise",
    "--solver": "solve.solver",
    "--layers": "qaoa.layers",
    "--svg": "eval.svg",
    "--projection": "eval.projection",
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (run.seed)")
    common.add_argument("--config", type=Path, help="flat 'section.key = value' config file")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("-o", "--out-dir", type=Path, default=Path("."), help="output directory or file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="qtrack",
        description="Track reconstruction as QUBO: generate, build, solve, evaluate and sweep.",
        epilog="Any config key can be overridden as --section.key VALUE.",
    )
    verbs = parser.add_subparsers(dest="verb", required=True)
    verbs.add_parser("gen", parents=[common], help="generate a synthetic event (hits CSV)")
    p = verbs.add_parser("build", parents=[common], help="build the triplet QUBO of an event")
    p.add_argument("hits", type=Path)
    p = verbs.add_parser("solve", parents=[common], help="solve a QUBO file")
    p.add_argument("qubo", type=Path)
    p = verbs.add_parser("eval", parents=[common], help="score a solution against the truth")
    p.add_argument("hits", type=Path)
    p.add_argument("solution", type=Path)
    p.add_argument("mapping", type=Path, help="QUBO file carrying the triplet mapping")
    p = verbs.add_parser("display", parents=[common], help="render an event (and tracks) as SVG")
    p.add_argument("hits", type=Path)
    p.add_argument("solution", type=Path, nargs="?")
    p.add_argument("mapping", type=Path, nargs="?")
    p = verbs.add_parser("sweep-layers", parents=[common], help="QAOA accuracy versus depth")
    p.add_argument("--qubo", type=Path, help="6-variable QUBO (default: built-in reference)")
    verbs.add_parser("sweep-multiplicity", parents=[common], help="tracking quality versus event size")
    return parser


def _split_overrides(argv: list[str]) -> tuple[list[str], list[tuple[str, str]]]:
    """Pull ``--section.key value`` and alias flags out of ``argv``."""
    rest: list[str] = []
    overrides: list[tuple[str, str]] = []
    k = 0
    while k < len(argv):
        arg = argv[k]
        name, eq, inline = arg.partition("=")
        dotted = _ALIASES.get(name) or (name[2:] if name.startswith("--") and "." in name else None)
        if dotted is None:
            rest.append(arg)
            k += 1
            continue
        if eq:
            overrides.append((dotted, inline))
            k += 1
        elif k + 1 < len(argv):
            overrides.append((dotted, argv[k + 1]))
            k += 2
        else:
            raise UsageError(f"{name} expects a value")
    return rest, overrides


def resolve_config(args: argparse.Namespace, overrides: list[tuple[str, str]]) -> RunConfig:
    config = RunConfig.defaults()
    if args.config is not None:
        config.load_file(args.config)
    for dotted, value in overrides:
        config.set(dotted, value, "command line: ")
    if args.seed is not None:
        config.values["run"]["seed"] = args.seed
    return config


# ---------------------------------------------------------------------------
# outputs


def _output_path(out: Path, default_name: str) -> Path:
    """``out`` is a directory unless it carries a file suffix."""
    return out if out.suffix else out / default_name


def _write_outputs(primary: Path, text: str, config: RunConfig) -> None:
    atomic_write(primary, text)
    atomic_write(primary.with_name(primary.stem + ".cfg"), config.render())


@contextmanager
def _executor(jobs: int):
    if jobs <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool


def _read_hits(path: Path):
    try:
        return load_hits_csv(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _read_qubo_file(path: Path):
    try:
        return read_qubo(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _read_solution(path: Path, n: int) -> tuple[np.ndarray, str]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        bits = str_to_bits(data["bits"])
        solver = str(data.get("solver", "unknown"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: not a solution file ({exc})") from None
    if len(bits) != n:
        raise UsageError(f"{path}: solution has {len(bits)} bits, mapping has {n} triplets")
    return bits, solver


def _triplets(mapping_path: Path, hits) -> list[_tracking.Triplet]:
    qfile = _read_qubo_file(mapping_path)
    if len(qfile.triplets) != qfile.model.n:
        raise UsageError(f"{mapping_path}: carries {len(qfile.triplets)} triplet lines for {qfile.model.n} variables")
    try:
        return _tracking.triplets_from_ids(qfile.triplets, hits)
    except ValueError as exc:
        raise UsageError(f"{mapping_path}: {exc}") from None


# ---------------------------------------------------------------------------
# verbs


def cmd_gen(args, config: RunConfig) -> int:
    hits, stats = generate_event(config.geometry(), config.generator(config.seed))
    _write_outputs(_output_path(args.out_dir, "hits.csv"), format_hits_csv(hits), config)
    log.info("%d hits (%d particles skipped)", len(hits), stats.particles_skipped)
    return EXIT_OK


def cmd_build(args, config: RunConfig) -> int:
    hits = _read_hits(args.hits)
    model, triplets = experiments.event_qubo(hits, config.build())
    mapping = {k: t.hit_ids for k, t in enumerate(triplets)}
    _write_outputs(_output_path(args.out_dir, "qubo.txt"), format_qubo(model, mapping), config)
    pairs = model.n * (model.n - 1) // 2
    conflicts = sum(1 for v in model.quadratic.values() if v > 0)
    density = len(model.quadratic) / pairs if pairs else 0.0
    print(
        f"triplets={model.n} quadratic_terms={len(model.quadratic)} "
        f"nonzero_pair_fraction={density:.6g} conflict_terms={conflicts} "
        f"chain_terms={len(model.quadratic) - conflicts}"
    )
    return EXIT_OK


def _solve_model(model: QuboModel, solver: str, config: RunConfig, jobs: int):
    seed = config.seed
    diagnostics: list[dict] = []
    if solver == "exact":
        if model.n > MAX_BRUTE_FORCE_VARS:
            raise CapacityError(f"exact solver refuses n={model.n} > {MAX_BRUTE_FORCE_VARS}")
        best = brute_force(model, keep=1)[0]
    elif solver == "sa":
        best = _anneal.anneal(model, config.sa(seed))
    elif solver == "qaoa":
        outcome = _qaoa.run_qaoa(to_ising(model), config.qaoa(seed))
        best = BitSolution.evaluate(model, outcome.modal_bits)
        diagnostics.append(
            dict(
                kind="qaoa",
                modal_probability=outcome.modal_probability,
                final_loss=outcome.final_loss,
                params=[float(v) for v in outcome.best_params],
                converged=outcome.converged,
            )
        )
    else:
        params = config.subqubo()
        if model.n < params.sub_size:
            best = brute_force(model, keep=1)[0]
        else:
            with _executor(jobs) as pool:
                best, _, diag = _subqubo.solve(model, params, seed=seed, on_record=diagnostics.append, executor=pool)
            diagnostics.append(dict(kind="pool", best_history=diag.best_history, skipped=diag.skipped))
    return best, diagnostics


def cmd_solve(args, config: RunConfig) -> int:
    model = _read_qubo_file(args.qubo).model
    solver = config["solve.solver"]
    best, diagnostics = _solve_model(model, solver, config, args.jobs)
    record = {"bits": best.bitstring, "energy": best.energy, "n": model.n, "solver": solver}
    primary = _output_path(args.out_dir, "solution.json")
    _write_outputs(primary, json.dumps(record, sort_keys=True) + "\n", config)
    atomic_write(primary.with_name(primary.stem + ".diag.jsonl"), format_metrics(diagnostics))
    print(f"solver={solver} n={model.n} energy={best.energy:.12g}")
    return EXIT_OK


def cmd_eval(args, config: RunConfig) -> int:
    hits = _read_hits(args.hits)
    triplets = _triplets(args.mapping, hits)
    bits, solver = _read_solution(args.solution, len(triplets))
    tracks = _tracking.assemble_tracks(_tracking.selected_triplets(bits, triplets))
    metrics = _tracking.score(tracks, hits)
    record = MetricsRecord(
        run_id=f"eval-{config.seed}",
        solver=solver,
        multiplicity=len({h.truth_particle for h in hits if not h.is_noise}),
        efficiency=metrics.efficiency,
        purity=metrics.purity,
        extra=dict(
            kind="eval",
            tp=metrics.tp,
            fp=metrics.fp,
            fn=metrics.fn,
            efficiency_defined=metrics.efficiency_defined,
            purity_defined=metrics.purity_defined,
            tracks=len(tracks),
        ),
    )
    primary = _output_path(args.out_dir, "metrics.jsonl")
    _write_outputs(primary, format_metrics([record]), config)
    if config["eval.svg"]:
        projection = config["eval.projection"]
        svg = render_event_svg(hits, tracks, projection, config.geometry())
        atomic_write(primary.with_name(f"{primary.stem}.{projection}.svg"), svg)
    print(f"efficiency={metrics.efficiency:.6g} purity={metrics.purity:.6g} tp={metrics.tp} fp={metrics.fp} fn={metrics.fn}")
    return EXIT_OK


def cmd_display(args, config: RunConfig) -> int:
    hits = _read_hits(args.hits)
    tracks = []
    if (args.solution is None) != (args.mapping is None):
        raise UsageError("display needs both a solution and a mapping, or neither")
    if args.solution is not None:
        triplets = _triplets(args.mapping, hits)
        bits, _ = _read_solution(args.solution, len(triplets))
        tracks = _tracking.assemble_tracks(_tracking.selected_triplets(bits, triplets))
    projection = config["eval.projection"]
    svg = render_event_svg(hits, tracks, projection, config.geometry())
    _write_outputs(_output_path(args.out_dir, f"event.{projection}.svg"), svg, config)
    return EXIT_OK


def cmd_sweep_layers(args, config: RunConfig) -> int:
    if args.qubo is not None:
        model = _read_qubo_file(args.qubo).model
    else:
        model = experiments.reference_instance()
    if model.n > _qaoa.MAX_QUBITS:
        raise CapacityError(f"sweep instance has {model.n} variables; the simulator holds {_qaoa.MAX_QUBITS}")
    with _executor(args.jobs) as pool:
        records = experiments.layer_sweep(
            model,
            config["sweep.max_layers"],
            config["sweep.jobs_per_layer"],
            config.qaoa(),
            seed=config.seed,
            executor=pool,
        )
    for r in records:
        r["run_id"] = f"sweep-layers-{config.seed}"
        print(
            f"p={r['layers']} accuracy={r['accuracy']:.3f}+-{r['accuracy_err']:.3f} "
            f"mean_probability={r['mean_probability']:.3f}+-{r['probability_err']:.3f}"
        )
    _write_outputs(_output_path(args.out_dir, "sweep_layers.jsonl"), format_metrics(records), config)
    return EXIT_OK


def cmd_sweep_multiplicity(args, config: RunConfig) -> int:
    with _executor(args.jobs) as pool:
        records = experiments.multiplicity_sweep(
            config["sweep.multiplicities"],
            events=config["sweep.events"],
            seed=config.seed,
            geometry=config.geometry(),
            generator=config.generator(0),
            build=config.build(),
            subqubo=config.subqubo(),
            anneal=config.sa(),
            executor=pool,
        )
    for r in records:
        r["run_id"] = f"sweep-multiplicity-{config.seed}"
        print(
            f"m={r['multiplicity']} event={r['event']} solver={r['solver']} "
            f"energy={r['energy']:.6g} efficiency={r['efficiency']:.3f} purity={r['purity']:.3f}"
        )
    _write_outputs(_output_path(args.out_dir, "sweep_multiplicity.jsonl"), format_metrics(records), config)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "build": cmd_build,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "display": cmd_display,
    "sweep-layers": cmd_sweep_layers,
    "sweep-multiplicity": cmd_sweep_multiplicity,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        rest, overrides = _split_overrides(argv)
    except UsageError as exc:
        print(f"qtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        config = resolve_config(args, overrides)
        config.validate()
    except (UsageError, ValueError) as exc:
        print(f"qtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.verb](args, config)
    except (UsageError, QuboFormatError, HitsFormatError) as exc:
        print(f"qtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CapacityError, optim.OptimizationError, ArithmeticError, ValueError) as exc:
        print(f"qtrack: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
