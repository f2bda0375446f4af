"""Experiment orchestration: config ingestion, studies, sweeps, reports.

The config is a single JSON document. Units may be declared through key
suffixes (``extents_mm``, ``young_modulus_gpa``); everything is converted
to SI on load. Exit codes: 0 ok, 1 config error, 2 internal error.
"""
from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field

import click
import numpy as np

from . import __version__, analysis, fem, integrator, scaling
from .errors import ConfigError, MasscaleError
from .linalg import MatrixPair

DEFAULT_SEED = 42

STUDY_NAMES = ("element_spectrum", "spectrum", "bounds", "sweep", "integrate")


@dataclass
class ExperimentConfig:
    material: fem.Material
    seed: int = DEFAULT_SEED
    output_dir: str = "out"
    threads: int = 1
    mesh_counts: tuple | None = None
    mesh_extents: tuple | None = None  # meters
    element_size: tuple | None = None  # meters
    scalings: list = field(default_factory=list)
    sweep: dict | None = None
    studies: dict = field(default_factory=dict)
    echo: dict = field(default_factory=dict)  # resolved config for the manifest

    def mesh(self):
        if self.mesh_counts is None:
            raise ConfigError("geometry.mesh: required for mesh-level studies")
        return fem.build_structured_mesh(self.mesh_counts, self.mesh_extents)

    def element_geometry_size(self):
        if self.element_size is not None:
            return self.element_size
        if self.mesh_counts is not None:
            return tuple(
                ext / (cnt - 1) for ext, cnt in zip(self.mesh_extents, self.mesh_counts)
            )
        raise ConfigError("geometry: one of 'element' or 'mesh' is required")


def _length_triplet(obj, key):
    """Read a 3-vector with unit suffix _m or _mm; returns meters."""
    if f"{key}_m" in obj:
        vals = obj[f"{key}_m"]
    elif f"{key}_mm" in obj:
        vals = [v * 1e-3 for v in obj[f"{key}_mm"]]
    else:
        raise ConfigError(f"{key}: expected '{key}_m' or '{key}_mm'")
    if len(vals) != 3:
        raise ConfigError(f"{key}: expected 3 values")
    return tuple(float(v) for v in vals)


def _parse_material(obj):
    if "young_modulus_gpa" in obj:
        e = float(obj["young_modulus_gpa"]) * 1e9
    elif "young_modulus" in obj:
        e = float(obj["young_modulus"])
    else:
        raise ConfigError("material.young_modulus: missing")
    try:
        return fem.Material(e, float(obj["poisson_ratio"]), float(obj["density"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"material: {exc}") from exc


def parse_scaling(obj):
    """Build a ScalingSpec from a config mapping (kind + named parameters)."""
    obj = dict(obj)
    kind = obj.pop("kind", None)
    if kind is None:
        raise ConfigError("scaling.kind: missing")
    aliases = {"r": "rank", "eps": "epsilon"}
    kwargs = {}
    for key, value in obj.items():
        key = aliases.get(key, key)
        if key == "selector":
            value = tuple(int(v) for v in value)
        elif key == "w":
            value = tuple(float(v) for v in value)
        kwargs[key] = value
    try:
        return scaling.ScalingSpec(kind, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scaling[{kind}]: {exc}") from exc


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: {exc}") from exc

    geometry = raw.get("geometry", {})
    has_mesh = "mesh" in geometry
    has_element = "element" in geometry
    if has_mesh == has_element:
        raise ConfigError("geometry: exactly one of 'mesh' or 'element' is required")

    cfg = ExperimentConfig(material=_parse_material(raw.get("material", {})))
    cfg.seed = int(raw.get("seed", DEFAULT_SEED))
    cfg.output_dir = raw.get("output_dir", "out")
    cfg.threads = int(raw.get("threads", 1))
    if has_mesh:
        mesh_obj = geometry["mesh"]
        counts = mesh_obj.get("node_counts")
        if not counts or len(counts) != 3:
            raise ConfigError("geometry.mesh.node_counts: expected 3 values")
        cfg.mesh_counts = tuple(int(c) for c in counts)
        cfg.mesh_extents = _length_triplet(mesh_obj, "extents")
    else:
        cfg.element_size = _length_triplet(geometry["element"], "size")

    cfg.scalings = [parse_scaling(s) for s in raw.get("scalings", [])]
    cfg.sweep = raw.get("sweep")
    if cfg.sweep is not None:
        values = cfg.sweep.get("values")
        if not values:
            raise ConfigError("sweep.values: grid must be non-empty")
        if "kind" not in cfg.sweep or "parameter" not in cfg.sweep:
            raise ConfigError("sweep: requires 'kind' and 'parameter'")
    cfg.studies = {name: bool(raw.get("studies", {}).get(name, False)) for name in STUDY_NAMES}
    cfg.echo = raw
    return cfg


class Emitter:
    """Serializes writes into the output directory and records the manifest."""

    def __init__(self, out_dir):
        import os

        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.files = []

    def path(self, name):
        import os

        p = os.path.join(self.out_dir, name)
        self.files.append(p)
        return p

    def write_json(self, name, payload):
        with open(self.path(name), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, name, columns):
        analysis.write_curve_csv(self.path(name), columns)


def _single_element_blocks(cfg):
    lx, ly, lz = cfg.element_geometry_size()
    mesh = fem.build_structured_mesh((2, 2, 2), (lx, ly, lz))
    return mesh, fem.element_blocks(mesh, cfg.material)


def _spec_label(spec):
    parts = [spec.kind]
    for name in ("beta", "alpha", "mu", "c", "rank", "epsilon"):
        value = getattr(spec, name)
        if value is not None:
            parts.append(f"{name}{value:g}" if isinstance(value, float) else f"{name}{value}")
    if spec.mode:
        parts.append(spec.mode)
    return "_".join(parts)


def study_element_spectrum(cfg, emitter):
    """Per-element spectra and Rayleigh tables for each configured scaling."""
    mesh, blocks = _single_element_blocks(cfg)
    block = blocks[0]
    for spec in cfg.scalings or [scaling.ScalingSpec("none")]:
        if spec.kind == "none":
            mbar_e = np.diag(block.lumped_mass)
        else:
            scaled = scaling.apply_spec(
                spec,
                blocks,
                mesh.dof_count,
                pair=MatrixPair(
                    fem.assemble(blocks, "stiffness", mesh.dof_count),
                    fem.assemble(blocks, "lumped", mesh.dof_count),
                ),
            )
            mbar_e = (
                scaled.element_mbar[0]
                if scaled.element_mbar is not None
                else scaled.mbar_dense()
            )
        rows, ordering = analysis.element_rayleigh_report(block, mbar_e)
        emitter.write_csv(
            f"element_{_spec_label(spec)}.csv",
            {
                "mode": [r.mode for r in rows],
                "original": [r.original for r in rows],
                "rayleigh": [r.rayleigh for r in rows],
                "scaled": [r.scaled for r in rows],
            },
        )
        emitter.write_json(
            f"element_{_spec_label(spec)}.json",
            {"kind": spec.kind, "ordering_preserved": ordering},
        )


def _mesh_system(cfg):
    mesh = cfg.mesh()
    blocks = fem.element_blocks(mesh, cfg.material)
    k = fem.assemble(blocks, "stiffness", mesh.dof_count)
    m = fem.assemble(blocks, "lumped", mesh.dof_count)
    return mesh, blocks, MatrixPair(k, m)


def study_spectrum(cfg, emitter):
    """Full spectral reports (original vs scaled) on the configured mesh."""
    mesh, blocks, pair = _mesh_system(cfg)
    for spec in cfg.scalings or [scaling.ScalingSpec("none")]:
        scaled = scaling.apply_spec(spec, blocks, mesh.dof_count, pair=pair, k_global=pair.a)
        report = analysis.spectral_report(pair, scaled, blocks=blocks)
        label = _spec_label(spec)
        analysis.report_to_json(report, emitter.path(f"spectrum_{label}.json"))
        emitter.write_csv(
            f"ratio_{label}.csv",
            {
                "mode": list(range(len(report.ratio_curve))),
                "ratio": report.ratio_curve.tolist(),
            },
        )


def study_bounds(cfg, emitter):
    """Sandwich and condition bounds for each configured scaling."""
    mesh, blocks, pair = _mesh_system(cfg)
    masses = [b.element_mass for b in blocks]
    for spec in cfg.scalings or [scaling.ScalingSpec("none")]:
        scaled = scaling.apply_spec(spec, blocks, mesh.dof_count, pair=pair, k_global=pair.a)
        mbar = scaled.mbar_dense()
        sandwich = analysis.sandwich_bounds(pair.a, pair.b, mbar)
        cond = analysis.condition_report(
            pair.b, mbar, mesh.p_max, masses, spec=spec, element_mbar=scaled.element_mbar
        )
        payload = {}
        for bound_set in (sandwich, cond):
            for name, rec in bound_set.records.items():
                payload[name] = {
                    "value": rec.value,
                    "lower": rec.lower,
                    "upper": rec.upper,
                    "holds": rec.holds(),
                }
        emitter.write_json(f"bounds_{_spec_label(spec)}.json", payload)


def study_sweep(cfg, emitter):
    """Parameter sweep: step ratio, corollary bound, condition ratio per point."""
    if cfg.sweep is None:
        raise ConfigError("sweep: section missing")
    mesh, blocks, pair = _mesh_system(cfg)
    dec = analysis.generalized_eig(pair)
    dt0 = analysis.critical_dt(dec.values[-1])
    kappa_m = analysis.sym_eig(pair.b)
    kappa_m = float(kappa_m.values[-1] / kappa_m.values[0])

    kind = cfg.sweep["kind"]
    parameter = cfg.sweep["parameter"]
    base = {k: v for k, v in cfg.sweep.items() if k not in ("kind", "parameter", "values")}
    rows = {"value": [], "dt_ratio": [], "bound": [], "kappa_ratio": []}
    for value in cfg.sweep["values"]:
        spec = parse_scaling({"kind": kind, parameter: value, **base})
        scaled = scaling.apply_spec(spec, blocks, mesh.dof_count, pair=pair, k_global=pair.a)
        mbar = scaled.mbar_dense()
        dec_s = analysis.generalized_eig(MatrixPair(scaled.kbar, mbar))
        dt_ratio = analysis.critical_dt(dec_s.values[-1]) / dt0
        try:
            bound = analysis.corollary_bound(spec, blocks)
        except MasscaleError:
            bound = float("nan")
        kappa_s = analysis.sym_eig(mbar)
        kappa_ratio = float(kappa_s.values[-1] / kappa_s.values[0]) / kappa_m
        rows["value"].append(float(value))
        rows["dt_ratio"].append(float(dt_ratio))
        rows["bound"].append(float(bound))
        rows["kappa_ratio"].append(kappa_ratio)
    emitter.write_csv(f"sweep_{kind}_{parameter}.csv", rows)


def study_integrate(cfg, emitter):
    """Stability brackets around the computed critical step for each scaling."""
    mesh, blocks, pair = _mesh_system(cfg)
    results = {}
    for spec in cfg.scalings or [scaling.ScalingSpec("none")]:
        scaled = scaling.apply_spec(spec, blocks, mesh.dof_count, pair=pair, k_global=pair.a)
        mbar = scaled.mbar_dense()
        dec_s = analysis.generalized_eig(MatrixPair(scaled.kbar, mbar))
        dt_c = analysis.critical_dt(dec_s.values[-1])
        highest = dec_s.vectors[:, -1]
        verdicts = integrator.stability_bracket(
            scaled.kbar, mbar, dt_c, seed=cfg.seed, highest_mode=highest
        )
        results[_spec_label(spec)] = [
            {
                "classification": v.classification,
                "growth_factor": v.growth_factor,
                "steps_run": v.steps_run,
                "dt": v.dt,
            }
            for v in verdicts
        ]
    emitter.write_json("stability_brackets.json", results)


_STUDIES = {
    "element_spectrum": study_element_spectrum,
    "spectrum": study_spectrum,
    "bounds": study_bounds,
    "sweep": study_sweep,
    "integrate": study_integrate,
}


def execute(cfg, studies):
    emitter = Emitter(cfg.output_dir)
    timings = {}
    for name in studies:
        start = time.perf_counter()
        _STUDIES[name](cfg, emitter)
        timings[name] = time.perf_counter() - start
    manifest = {
        "config": cfg.echo,
        "seed": cfg.seed,
        "versions": {
            "masscale": __version__,
            "numpy": np.__version__,
        },
        "wall_clock_s": timings,
        "outputs": emitter.files,
    }
    import os

    with open(os.path.join(cfg.output_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _run(config, out, seed, threads, studies):
    try:
        cfg = load_config(config)
        if out is not None:
            cfg.output_dir = out
        if seed is not None:
            cfg.seed = int(seed)
        if threads is not None:
            cfg.threads = int(threads)
        if studies is None:
            studies = [n for n in STUDY_NAMES if cfg.studies.get(n)]
            if not studies:
                raise ConfigError("studies: no study enabled")
        execute(cfg, studies)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    except MasscaleError as exc:
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


_common = [
    click.option("--config", required=True, type=click.Path(exists=False)),
    click.option("--out", default=None, help="output directory (overrides config)"),
    click.option("--seed", default=None, type=int),
    click.option("--threads", default=None, type=int),
]


def _with_common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Mass scaling laboratory."""


@main.command()
@_with_common
def run(config, out, seed, threads):
    """Run every study enabled in the config."""
    _run(config, out, seed, threads, None)


def _make_single(study, cli_name):
    @main.command(name=cli_name)
    @_with_common
    def _cmd(config, out, seed, threads):
        _run(config, out, seed, threads, [study])

    _cmd.__doc__ = f"Run only the {study} study."
    return _cmd


_make_single("element_spectrum", "element-spectrum")
_make_single("spectrum", "spectrum")
_make_single("bounds", "bounds")
_make_single("sweep", "sweep")
_make_single("integrate", "integrate")


if __name__ == "__main__":
    main()
