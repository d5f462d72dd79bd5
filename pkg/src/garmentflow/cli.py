"""Command-line surface covering every pipeline stage.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
GP_DATA_DIR sets the default storage root.
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import storage, synthetic
from .construction import PackingConfig, build_particles, pack_panels
from .dps import DpsConfig, EditRequest, dps_sample
from .flow import FlowConfig, FlowModel, TrainConfig, grad_check, sample, train
from .interpolation import build_path, interpolate
from .metrics import evaluate_sets
from .particles import Camera, project_image
from .pattern_models import (
    PatternFlowModel,
    PatternModelBase,
    PatternModelConfig,
    PatternRegressionModel,
    PatternTrainConfig,
)
from .recovery import infer_stitches, recover_delaunay


@click.group()
@click.option("--seed", type=int, default=0, help="Default seed for subcommands.")
@click.option("--config", "config_file", type=click.Path(exists=True), default=None,
              help="JSON config file with defaults.")
@click.option("--out", "out_default", type=click.Path(), default=None,
              help="Default output path.")
@click.pass_context
def cli(ctx, seed, config_file, out_default):
    """Garment particle toolkit: datasets, training, guided editing, recovery."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["out"] = out_default
    ctx.obj["config"] = {}
    if config_file:
        ctx.obj["config"] = json.loads(Path(config_file).read_text())


@cli.group()
def dataset():
    """Synthetic dataset commands."""


@dataset.command("gen")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--n", "n_garments", type=int, required=True)
@click.option("--seed", type=int, default=None)
@click.option("--area-per-point", type=float, default=synthetic.DEFAULT_AREA_PER_POINT)
@click.option("--families", type=str, default=None,
              help="Comma list like tube_skirt=0.5,a_line_skirt=0.5 (default uniform).")
@click.pass_context
def dataset_gen(ctx, out_dir, n_garments, seed, area_per_point, families):
    """Generate garments, pack, build particles and ground-truth patterns."""
    mix = None
    if families:
        mix = {}
        for part in families.split(","):
            name, _, weight = part.partition("=")
            mix[name.strip()] = float(weight) if weight else 1.0
        total = sum(mix.values())
        mix = {k: v / total for k, v in mix.items()}
    spec = synthetic.DatasetSpec(
        n_garments=n_garments,
        family_mix=mix,
        seed=seed if seed is not None else ctx.obj["seed"],
        area_per_point=area_per_point,
    )
    manifest = synthetic.generate_dataset(spec, out_dir)
    kept = sum(1 for r in manifest["samples"] if not r.get("filtered"))
    click.echo(f"wrote {kept}/{n_garments} samples to {out_dir}")


@cli.command()
@click.option("--in", "in_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--area-per-point", type=float, default=synthetic.DEFAULT_AREA_PER_POINT)
@click.option("--seed", type=int, default=None)
@click.pass_context
def build(ctx, in_dir, out_dir, area_per_point, seed):
    """Build particles for every garment JSON in a directory."""
    seed = seed if seed is not None else ctx.obj["seed"]
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    built = skipped = 0
    for path in sorted(in_dir.glob("*.json")):
        meta = json.loads(path.read_text())
        garment = synthetic.garment_from_meta(meta)
        if not meta.get("packed", False):
            garment, result = synthetic.pack_garment(garment)
            if not result.converged:
                click.echo(f"{path.name}: packing failed, skipped", err=True)
                skipped += 1
                continue
        try:
            particles = build_particles(garment, area_per_point, seed=seed)
        except ValueError as exc:
            click.echo(f"{path.name}: {exc}", err=True)
            skipped += 1
            continue
        storage.save_particles(out_dir / f"{path.stem}.particles.json", particles)
        built += 1
    click.echo(f"built {built} particle files ({skipped} skipped)")


def _load_training_pairs(dataset_dir):
    pairs = storage.load_dataset(dataset_dir)
    if not pairs:
        raise click.UsageError(f"dataset {dataset_dir} has no usable samples")
    return pairs


@cli.command("train")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--kind", type=click.Choice(["flow", "pattern-flow", "pattern-regression"]),
              default="flow")
@click.option("--iters", type=int, default=1500)
@click.option("--batch", type=int, default=8)
@click.option("--lr", type=float, default=1e-3)
@click.option("--width", type=int, default=96)
@click.option("--depth", type=int, default=3)
@click.option("--seed", type=int, default=None)
@click.pass_context
def train_cmd(ctx, dataset_dir, out_path, kind, iters, batch, lr, width, depth, seed):
    """Train the particle flow or a particles-to-pattern model."""
    seed = seed if seed is not None else ctx.obj["seed"]
    pairs = _load_training_pairs(dataset_dir)
    if kind == "flow":
        data = [
            (particles.channels(), np.asarray(meta["label_tokens"], dtype=np.int64))
            for particles, _, meta in pairs
        ]
        model = FlowModel(FlowConfig(width=width, depth=depth), seed=seed)
        losses = train(model, data, TrainConfig(iters=iters, batch=batch, lr=lr, seed=seed))
        model.save(out_path)
    else:
        data = [(particles, pattern) for particles, pattern, _ in pairs]
        cls = PatternFlowModel if kind == "pattern-flow" else PatternRegressionModel
        model = cls(PatternModelConfig(width=width, depth=depth), seed=seed)
        losses = model.train_model(
            data, PatternTrainConfig(iters=iters, batch=batch, lr=lr, seed=seed))
        model.save(out_path)
    click.echo(
        f"trained {kind} ({model.param_count()} params): "
        f"loss {losses[0]:.4f} -> {np.mean(losses[-20:]):.4f}; saved {out_path}")


def _parse_cond(cond):
    if cond is None:
        return None
    if cond in synthetic.FAMILIES:
        return synthetic.family_label_tokens(cond)
    return np.asarray([int(x) for x in cond.split(",")], dtype=np.int64)


@cli.command("sample")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--n", type=int, required=True)
@click.option("--cond", type=str, default=None,
              help="Family name or comma-separated label tokens.")
@click.option("--steps", type=int, default=100)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def sample_cmd(ctx, model_path, n, cond, steps, seed, out_path):
    """Generate one particle set and write it as JSON."""
    seed = seed if seed is not None else ctx.obj["seed"]
    out_path = out_path or ctx.obj["out"]
    if out_path is None:
        raise click.UsageError("--out is required")
    model = FlowModel.load(model_path)
    particles = sample(model, n, cond=_parse_cond(cond), steps=steps, seed=seed)
    storage.save_particles(out_path, particles)
    click.echo(f"sampled {particles.count} particles -> {out_path}")


def _parse_camera(text):
    if text is None:
        return None
    if text.startswith("azimuth:"):
        return Camera.preset("azimuth", azimuth_deg=float(text.split(":", 1)[1]))
    if text in ("front", "side", "top"):
        return Camera.preset(text)
    return storage.camera_from_json(json.loads(Path(text).read_text()))


@cli.command("dps")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--task", type=click.Choice(
    ["pointcloud_condition", "completion", "pattern_edit", "pattern_completion",
     "silhouette"]), required=True)
@click.option("--observation", "obs_path", type=click.Path(exists=True), required=True,
              help="Point-set JSON file.")
@click.option("--camera", "camera_text", type=str, default=None,
              help="front|side|top|azimuth:DEG or a camera JSON file.")
@click.option("--cond", type=str, default=None)
@click.option("--steps", type=int, default=500)
@click.option("--stop-t", type=float, default=0.6)
@click.option("--eta", type=float, default=None)
@click.option("--opt-n", type=int, default=None)
@click.option("--n", "n_points", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--trace-out", type=click.Path(), default=None)
@click.pass_context
def dps_cmd(ctx, model_path, task, obs_path, camera_text, cond, steps, stop_t,
            eta, opt_n, n_points, seed, out_path, trace_out):
    """Objective-guided generation against an observation."""
    seed = seed if seed is not None else ctx.obj["seed"]
    out_path = out_path or ctx.obj["out"]
    if out_path is None:
        raise click.UsageError("--out is required")
    camera = _parse_camera(camera_text)
    if task == "silhouette" and camera is None:
        raise click.UsageError("silhouette task requires --camera")
    model = FlowModel.load(model_path)
    request = EditRequest(
        task=task,
        observation=storage.load_point_set(obs_path),
        camera=camera,
        cond=_parse_cond(cond),
        config=DpsConfig(steps=steps, stop_t=stop_t, eta=eta, opt_n=opt_n,
                         n_points=n_points, seed=seed),
    )
    particles, trace = dps_sample(model, request)
    storage.save_particles(out_path, particles)
    if trace_out:
        Path(trace_out).write_text("\n".join(json.dumps(e) for e in trace))
    guided = [e["objective"] for e in trace if e["objective"] is not None]
    tail = f", final objective {guided[-1]:.4f}" if guided else ""
    click.echo(f"edited {particles.count} particles -> {out_path}{tail}")


@cli.command("recover")
@click.option("--particles", "particles_path", type=click.Path(exists=True), required=True)
@click.option("--variant", type=click.Choice(["delaunay", "flow", "regression"]),
              default="delaunay")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def recover_cmd(ctx, particles_path, variant, model_path, seed, out_path):
    """Recover a sewing pattern from particles."""
    seed = seed if seed is not None else ctx.obj["seed"]
    out_path = out_path or ctx.obj["out"]
    if out_path is None:
        raise click.UsageError("--out is required")
    particles = storage.load_particles(particles_path)
    if variant == "delaunay":
        pattern = recover_delaunay(particles)
        pattern.stitches = infer_stitches(pattern, particles)
    else:
        if model_path is None:
            raise click.UsageError(f"variant {variant!r} requires --model")
        model = PatternModelBase.load(model_path)
        pattern = model.recover(particles, seed=seed)
    storage.save_pattern(out_path, pattern)
    click.echo(f"recovered {pattern.panel_count} panels, "
               f"{len(pattern.stitches)} stitches -> {out_path}")


@cli.command("interpolate")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--a", "seed_a", type=int, required=True)
@click.option("--b", "seed_b", type=int, required=True)
@click.option("--n-a", type=int, default=64)
@click.option("--n-b", type=int, default=64)
@click.option("--steps", type=int, default=11, help="Number of blend positions.")
@click.option("--ode-steps", type=int, default=64)
@click.option("--cond", type=str, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def interpolate_cmd(ctx, model_path, seed_a, seed_b, n_a, n_b, steps, ode_steps,
                    cond, out_dir):
    """Blend two seeds and write one particle file per position."""
    out_dir = out_dir or ctx.obj["out"]
    if out_dir is None:
        raise click.UsageError("--out is required")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = FlowModel.load(model_path)
    path = build_path(model, seed_a, seed_b, n_a, n_b, cond=_parse_cond(cond),
                      steps=ode_steps)
    for i, s in enumerate(np.linspace(0.0, 1.0, steps)):
        particles = interpolate(model, path, float(s))
        storage.save_particles(out_dir / f"blend_{i:03d}.json", particles)
    click.echo(f"wrote {steps} interpolants to {out_dir}")


@cli.command("evaluate")
@click.option("--generated", "generated_dir", type=click.Path(exists=True), required=True)
@click.option("--reference", "reference_dir", type=click.Path(exists=True), required=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
def evaluate_cmd(generated_dir, reference_dir, report_path):
    """Set-level metrics between generated particle files and a dataset."""
    gen_clouds = _clouds_from_dir(Path(generated_dir))
    ref_clouds = _clouds_from_dir(Path(reference_dir))
    if len(gen_clouds) < 2 or len(ref_clouds) < 2:
        raise click.UsageError("need at least two clouds on each side")
    report = evaluate_sets(gen_clouds, ref_clouds)
    Path(report_path).write_text(json.dumps(report.to_json_dict(), indent=1))
    click.echo(json.dumps(report.to_json_dict()))


def _clouds_from_dir(root: Path):
    if (root / "manifest.json").exists():
        return [project_image(p) for p, _, _ in storage.load_dataset(root)]
    clouds = []
    for path in sorted(root.glob("**/*.json")):
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError:
            continue
        if isinstance(data, dict) and "points" in data and "flags" in data:
            clouds.append(project_image(storage.load_particles(path)))
    return clouds


@cli.command("gradcheck")
@click.option("--width", type=int, default=24)
@click.option("--depth", type=int, default=2)
@click.option("--points", type=int, default=10)
@click.option("--seed", type=int, default=None)
@click.pass_context
def gradcheck_cmd(ctx, width, depth, points, seed):
    """Finite-difference check of the training gradients (tiny model)."""
    seed = seed if seed is not None else ctx.obj["seed"]
    model = FlowModel(FlowConfig(width=width, depth=depth, heads=2), seed=seed)
    report = grad_check(model, n_points=points, seed=seed)
    click.echo(report.summary())
    if report.max_rel_err > 1e-4:
        raise click.ClickException("gradient check failed")


@cli.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8040)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve_cmd(host, port, config_path):
    """Run the HTTP job service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_file(config_path) if config_path else ServiceConfig()
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:  # runtime failure
        click.echo(f"runtime failure: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
