"""Command-line interface for structured-light-sdf"""

import functools
import logging
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import yaml

from .config import DEFAULTS, ExperimentConfig, load_config, resolve_output_dir, write_resolved
from .decoders import correspondence_to_depth, get_decoder
from .depth import depth_to_points, mean_l1
from .errors import ConfigError, DomainError, NumericalError, StructuredLightError
from .exporters import get_exporter, save_checkpoint, write_float_map
from .models import CaptureSet, DepthSource, PatternKind, PatternSet
from .parsers import get_parser, read_checkpoint, read_float_map
from .training import Trainer
from . import experiments

logger = logging.getLogger(__name__)

EXIT_INPUT = 2
EXIT_NUMERICAL = 3

DEPTH_TRUTH = "depth_gt.sldm"


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def reports_errors(command):
    """Echo failures to stderr and map them to exit codes 2 (input) and 3 (numerical)"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        verbose = kwargs.get("verbose", False)
        setup_logging(verbose)
        try:
            return command(*args, **kwargs)
        except NumericalError as e:
            click.echo(f"Numerical failure: {e}", err=True)
            if verbose:
                traceback.print_exc()
            sys.exit(EXIT_NUMERICAL)
        except (ConfigError, DomainError, FileNotFoundError, StructuredLightError, ValueError) as e:
            click.echo(f"Error: {e}", err=True)
            if verbose:
                traceback.print_exc()
            sys.exit(EXIT_INPUT)

    return wrapper


def common_options(command):
    """Flags every experiment command accepts"""
    options = [
        click.option('--config', '-c', type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     help='Experiment configuration file'),
        click.option('--preset', type=click.Choice(['desk', 'full']), default='desk',
                     help='Built-in parameter preset (default: desk)'),
        click.option('--seed', type=click.IntRange(min=0), help='Seed for every random stream'),
        click.option('--out', '-o', type=click.Path(file_okay=False, path_type=Path),
                     help='Output directory'),
        click.option('--workers', type=click.IntRange(min=1), help='Worker threads'),
        click.option('--weight-mode', type=click.Choice(['eq3', 'alpha']),
                     help='Rendering weight discretization'),
        click.option('--patterns', '-n', 'num_patterns', type=click.IntRange(min=1),
                     help='Number of training patterns'),
        click.option('--verbose', '-v', is_flag=True, help='Verbose output'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def prepare(command: str, options: Dict[str, Any],
            extra: Optional[Dict[str, Any]] = None) -> Tuple[ExperimentConfig, Path]:
    """Merge the configuration, resolve the output directory and write the snapshot"""
    overrides: Dict[str, Any] = {}
    if options.get("seed") is not None:
        overrides["seed"] = options["seed"]
    if options.get("workers") is not None:
        overrides["workers"] = options["workers"]
    if options.get("weight_mode"):
        overrides["train"] = {"weight_mode": options["weight_mode"]}
    if options.get("num_patterns") is not None:
        overrides["patterns"] = {"count": options["num_patterns"]}
    data = load_config(options.get("config"), options.get("preset", "desk"), overrides)
    for section, values in (extra or {}).items():
        data.setdefault(section, {}).update(values)
    iterations = options.get("iterations")
    if iterations is not None:
        train = data["train"]
        # keep the phase split proportional
        train["phase1_iterations"] = round(train["phase1_iterations"] * iterations / train["iterations"])
        train["iterations"] = iterations
    out_dir = resolve_output_dir(options.get("out"), data, command)
    data["output_dir"] = str(out_dir)
    cfg = ExperimentConfig.from_dict(data)
    write_resolved(data, out_dir)
    return cfg, out_dir


def write_summary(rows: List[Dict[str, Any]], out_dir: Path, name: str = "summary.csv") -> Path:
    return get_exporter("csv").export(rows, out_dir / name)


def load_set(data_dir: Path, which: str) -> Tuple[PatternSet, CaptureSet]:
    prefix = "gt_" if which == "gt" else ""
    patterns_dir = data_dir / f"{prefix}patterns"
    captures_dir = data_dir / f"{prefix}captures"
    for directory in (patterns_dir, captures_dir):
        if not (directory / "manifest.yaml").is_file():
            raise ConfigError(f"{directory} has no manifest.yaml; run simulate first")
    return get_parser("patterns").parse(patterns_dir), get_parser("captures").parse(captures_dir)


def select_kinds(patterns: PatternSet, captures: CaptureSet,
                 kinds: Tuple[PatternKind, ...]) -> Tuple[PatternSet, CaptureSet]:
    keep = [i for i, p in enumerate(patterns) if p.kind in kinds]
    if not keep:
        raise ConfigError(f"no patterns of kind {[k.value for k in kinds]} in the set")
    images = captures.images[keep]
    return PatternSet([patterns[i] for i in keep]), CaptureSet(images, captures.a_map, captures.b_map,
                                                               captures.noise_sigma)


def score_against_truth(depth, data_dir: Path, row: Dict[str, Any]) -> None:
    truth_path = data_dir / DEPTH_TRUTH
    if truth_path.is_file():
        metrics = mean_l1(depth, read_float_map(truth_path).to_depth_map())
        row.update(mean_l1=metrics.mean_l1, coverage=metrics.coverage)
        click.echo(f"Mean L1 vs simulator truth: {metrics.mean_l1:.6f} m "
                   f"(coverage {metrics.coverage:.3f})")


@click.group()
@click.version_option()
def cli():
    """structured-light-sdf - Neural SDF depth reconstruction for camera-projector rigs"""
    pass


@cli.command()
@common_options
@click.option('--ground-truth', is_flag=True, help='Also write the Gray + phase-shift set')
@reports_errors
def gen_patterns(ground_truth, **options):
    """Generate the training pattern set"""
    cfg, out_dir = prepare("gen-patterns", options)
    patterns = experiments.training_patterns(cfg)
    exporter = get_exporter("patterns")
    exporter.export(patterns, out_dir / "patterns")
    click.echo(f"✓ Wrote {len(patterns)} patterns to {out_dir / 'patterns'}")
    rows = [{"set": "train", "count": len(patterns), "seed": cfg.seed}]
    if ground_truth:
        gt = experiments.ground_truth_patterns(cfg)
        exporter.export(gt, out_dir / "gt_patterns")
        click.echo(f"✓ Wrote {len(gt)} ground-truth patterns to {out_dir / 'gt_patterns'}")
        rows.append({"set": "gt", "count": len(gt), "seed": cfg.seed})
    write_summary(rows, out_dir)


@cli.command()
@common_options
@click.option('--pattern-dir', type=click.Path(exists=True, file_okay=False, path_type=Path),
              help='Use an exported pattern set instead of generating one')
@click.option('--no-ground-truth', is_flag=True, help='Skip the Gray + phase-shift captures')
@reports_errors
def simulate(pattern_dir, no_ground_truth, **options):
    """Render captured images and the ground-truth depth of the configured scene"""
    cfg, out_dir = prepare("simulate", options)
    if pattern_dir is not None:
        patterns = get_parser("patterns").parse(pattern_dir)
    else:
        patterns = experiments.training_patterns(cfg)

    click.echo(f"Simulating {len(patterns)} captures...")
    sim = experiments.simulate(cfg, patterns)
    get_exporter("patterns").export(sim.patterns, out_dir / "patterns")
    get_exporter("captures").export(sim.captures, out_dir / "captures")
    get_exporter("depth").export(sim.truth, out_dir / DEPTH_TRUTH)
    row = {"set": "train", "images": len(sim.captures),
           "hit_pixels": int(sim.observation.hit.sum()),
           "valid_pixels": int(sim.truth.valid.sum()), "noise_sigma": sim.captures.noise_sigma}
    rows = [row]

    if not no_ground_truth:
        click.echo("Simulating ground-truth captures...")
        gt = experiments.simulate_ground_truth(cfg, sim.observation)
        get_exporter("patterns").export(gt.patterns, out_dir / "gt_patterns")
        get_exporter("captures").export(gt.captures, out_dir / "gt_captures")
        rows.append({"set": "gt", "images": len(gt.captures), "hit_pixels": row["hit_pixels"],
                     "valid_pixels": row["valid_pixels"], "noise_sigma": gt.captures.noise_sigma})
    write_summary(rows, out_dir)
    click.echo(f"✓ Simulation written to {out_dir}")


@cli.command()
@common_options
@click.option('--data', '-d', 'data_dir', required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help='Output directory of a simulate run')
@click.option('--iterations', type=click.IntRange(min=1), help='Override the iteration count')
@click.option('--resume', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Checkpoint to continue from')
@reports_errors
def train(data_dir, resume, **options):
    """Fit the network to captured images"""
    cfg, out_dir = prepare("train", options)
    patterns, captures = load_set(data_dir, "train")
    if options.get("num_patterns") is not None:
        patterns, captures = patterns.subset(options["num_patterns"]), captures.subset(options["num_patterns"])
    checkpoint = read_checkpoint(resume) if resume is not None else None
    state = experiments.new_state(cfg, patterns, captures, resume=checkpoint)

    click.echo(f"Training on {len(patterns)} patterns from iteration {state.iteration} "
               f"to {cfg.train.iterations}...")
    log_path = out_dir / "train_log.csv"
    if checkpoint is None and log_path.exists():
        log_path.unlink()
    trainer = Trainer(state, cfg.train, log_path=log_path, checkpoint_dir=out_dir / "checkpoints",
                      progress=options.get("verbose", False))
    try:
        reports = trainer.fit()
    except NumericalError as e:
        logger.error("training diverged at iteration %s", e.iteration)
        raise
    model_path = save_checkpoint(out_dir / "model.slsdf", state.net, state.box, state.optimizer,
                                 state.iteration)
    last = reports[-1] if reports else None
    write_summary([{
        "iteration": state.iteration,
        "patterns": len(patterns),
        "total": last.total if last else float("nan"),
        "inv_s": state.net.inv_s,
        "checkpoint": model_path.name,
    }], out_dir)
    click.echo(f"✓ Model saved to {model_path}")


@cli.command()
@common_options
@click.option('--checkpoint', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Trained network')
@click.option('--method', type=click.Choice(['root', 'expected']), help='Depth extraction method')
@click.option('--xyz', is_flag=True, help='Also write a camera-frame point dump')
@reports_errors
def extract(checkpoint, method, xyz, **options):
    """Extract a depth map from a trained network"""
    cfg, out_dir = prepare("extract", options)
    loaded = read_checkpoint(checkpoint)
    depth = experiments.extract(cfg, loaded.net, loaded.box, method, options.get("verbose", False))
    path = get_exporter("depth").export(depth, out_dir / "depth.sldm")
    click.echo(f"✓ Depth map written to {path} ({int(depth.valid.sum())} valid pixels)")
    if xyz:
        points = depth_to_points(depth, cfg.rig.camera)
        click.echo(f"✓ Points written to {get_exporter('xyz').export(points, out_dir / 'points.xyz')}")
    write_summary([{"method": method or cfg.raw["extract"]["method"],
                    "valid_pixels": int(depth.valid.sum()), "iteration": loaded.iteration}], out_dir)


@cli.command(name="eval")
@click.option('--estimate', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Depth map to score')
@click.option('--truth', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Reference depth map')
@click.option('--out', '-o', type=click.Path(file_okay=False, path_type=Path), help='Output directory')
@click.option('--config', '-c', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Experiment configuration file')
@click.option('--verbose', '-v', is_flag=True, help='Verbose output')
@reports_errors
def evaluate(estimate, truth, out, config, verbose):
    """Mean absolute depth error over pixels valid in both maps"""
    _, out_dir = prepare("eval", {"out": out, "config": config})
    estimate_map = read_float_map(estimate).to_depth_map()
    truth_map = read_float_map(truth).to_depth_map()
    metrics = mean_l1(estimate_map, truth_map)
    write_float_map(out_dir / "error.sldm", metrics.error_map, "error", truth_map.t_near, truth_map.t_far)
    write_summary([{"estimate": str(estimate), "truth": str(truth), "mean_l1": metrics.mean_l1,
                    "coverage": metrics.coverage, "both_valid": metrics.both_valid}],
                  out_dir, "metrics.csv")
    click.echo(f"Mean L1: {metrics.mean_l1:.6f} m")
    click.echo(f"Coverage: {metrics.coverage:.4f} ({metrics.both_valid} pixels)")


@cli.command()
@common_options
@click.option('--data', '-d', 'data_dir', required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help='Output directory of a simulate run')
@click.option('--set', 'which', type=click.Choice(['gt', 'train']), default='gt',
              help='Which captured set to decode (default: gt)')
@click.option('--inverse', is_flag=True, help='Decide bits against the inverse patterns')
@reports_errors
def decode_gc(data_dir, which, inverse, **options):
    """Gray code baseline depth"""
    cfg, out_dir = prepare("decode-gc", options)
    patterns, captures = load_set(data_dir, which)
    kinds = (PatternKind.GRAY_CODE, PatternKind.GRAY_CODE_INVERSE) if inverse else (PatternKind.GRAY_CODE,)
    patterns, captures = select_kinds(patterns, captures, kinds)
    name = "gray-inverse" if inverse else "gray-fixed"
    corr = get_decoder(name).decode(captures, patterns, {"b_floor": cfg.train.b_floor})
    depth = correspondence_to_depth(corr, cfg.rig.camera, cfg.rig.projector, DepthSource.GRAY_CODE,
                                    cfg.bounds)
    get_exporter("depth").export(depth, out_dir / "depth_gc.sldm")
    write_float_map(out_dir / "correspondence.sldm", corr.column, "correspondence", *cfg.bounds)
    row = {"decoder": name, "patterns": len(patterns), "valid_pixels": int(depth.valid.sum())}
    score_against_truth(depth, data_dir, row)
    write_summary([row], out_dir)
    click.echo(f"✓ Gray code depth written to {out_dir / 'depth_gc.sldm'}")


@cli.command()
@common_options
@click.option('--data', '-d', 'data_dir', required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help='Output directory of a simulate run')
@click.option('--no-outliers', is_flag=True, help='Skip the median outlier pass')
@reports_errors
def decode_ps(data_dir, no_outliers, **options):
    """Phase-shift ground-truth depth, unwrapped with Gray code"""
    cfg, out_dir = prepare("decode-ps", options)
    patterns, captures = load_set(data_dir, "gt")
    corr = get_decoder("phase-gray").decode(captures, patterns,
                                            {"b_floor": cfg.train.b_floor, "outliers": not no_outliers})
    depth = correspondence_to_depth(corr, cfg.rig.camera, cfg.rig.projector, DepthSource.PHASE_GT,
                                    cfg.bounds)
    get_exporter("depth").export(depth, out_dir / "depth_ps.sldm")
    write_float_map(out_dir / "correspondence.sldm", corr.column, "correspondence", *cfg.bounds)
    row = {"decoder": "phase-gray", "patterns": len(patterns), "valid_pixels": int(depth.valid.sum())}
    score_against_truth(depth, data_dir, row)
    write_summary([row], out_dir)
    click.echo(f"✓ Phase-shift depth written to {out_dir / 'depth_ps.sldm'}")


@cli.command()
@common_options
@click.option('--source', type=click.Choice(['gray', 'random']), help='Pattern family the network sees')
@click.option('--iterations', type=click.IntRange(min=1), help='Override the iteration count')
@click.option('--min-patterns', type=click.IntRange(min=1), help='Smallest pattern count')
@reports_errors
def sweep(source, min_patterns, **options):
    """Depth error against pattern count, network vs fixed-threshold Gray code"""
    extra: Dict[str, Any] = {"sweep": {}}
    if source:
        extra["sweep"]["source"] = source
    if min_patterns is not None:
        extra["sweep"]["min_patterns"] = min_patterns
    if options.get("num_patterns") is not None:
        extra["sweep"]["max_patterns"] = options.pop("num_patterns")
    cfg, out_dir = prepare("sweep", options, extra)
    rows = experiments.run_sweep(cfg, progress=options.get("verbose", False))
    path = write_summary(rows, out_dir, "sweep.csv")

    click.echo(f"\n{'Patterns':<10} {'Neural L1':<14} {'Gray L1':<14}")
    click.echo("-" * 38)
    for row in rows:
        click.echo(f"{row['patterns']:<10} {row['neural_mean_l1']:<14.6f} {row['gray_mean_l1']:<14.6f}")
    click.echo(f"✓ Sweep table written to {path}")


@cli.command()
@common_options
@click.option('--iterations', type=click.IntRange(min=1), help='Override the iteration count')
@click.option('--interval', type=click.IntRange(min=1), help='Iterations between pattern additions')
@click.option('--compare-batch', is_flag=True, help='Also train on all patterns from the start')
@reports_errors
def incremental(interval, compare_batch, **options):
    """Staged training that adds one pattern per interval"""
    extra: Dict[str, Any] = {"incremental": {}}
    if interval is not None:
        extra["incremental"]["interval"] = interval
    if options.get("num_patterns") is not None:
        extra["incremental"]["max_patterns"] = options.pop("num_patterns")
    cfg, out_dir = prepare("incremental", options, extra)
    progress = options.get("verbose", False)
    log_path = out_dir / "train_log.csv"
    if log_path.exists():
        log_path.unlink()
    state, rows = experiments.run_incremental(cfg, progress, log_path)
    save_checkpoint(out_dir / "model.slsdf", state.net, state.box, state.optimizer, state.iteration)

    if compare_batch:
        final = int(cfg.raw["incremental"]["max_patterns"])
        sim = experiments.simulate(cfg, experiments.training_patterns(cfg, final))
        _, metrics = experiments.train_and_score(cfg, sim.patterns, sim.captures, sim.truth,
                                                 progress=progress)
        rows.append({"stage": "batch", "patterns": final, "iteration": cfg.train.iterations,
                     "mean_l1": metrics.mean_l1, "coverage": metrics.coverage})
    path = write_summary(rows, out_dir, "incremental.csv")
    for row in rows:
        click.echo(f"Stage {row['stage']}: {row['patterns']} patterns, "
                   f"iteration {row['iteration']}, mean L1 {row['mean_l1']:.6f}")
    click.echo(f"✓ Stage table written to {path}")


@cli.command()
@common_options
@click.option('--iterations', type=click.IntRange(min=1), help='Override the iteration count')
@click.option('--variant', 'variants', multiple=True,
              type=click.Choice(sorted(experiments.ABLATION_VARIANTS)),
              help='Loss combination to run (repeatable, default: all)')
@reports_errors
def ablation(variants, **options):
    """Train one network per loss combination on the same captures"""
    cfg, out_dir = prepare("ablation", options)

    def report(row):
        status = f"{row['mean_l1']:.6f}" if row["status"] == "ok" else row["status"]
        click.echo(f"  {row['variant']:<8} {status}")

    click.echo("Variant  mean L1")
    rows = experiments.run_ablation(cfg, list(variants) or None, options.get("verbose", False), report)
    path = write_summary(rows, out_dir, "ablation.csv")
    click.echo(f"✓ Ablation table written to {path}")


SECTION_COMMENTS = {
    "seed": "Seed for pattern generation, capture noise and ray batches",
    "workers": "Worker threads for chunked training steps; results do not depend on it",
    "output_dir": "Output directory (default: $STRUCTURED_LIGHT_SDF_OUTPUT/<command> or runs/<command>)",
    "bounds": "Ray distance bounds t_near, t_far in metres",
    "scene": "Scene: inline mapping or path to a scene file",
    "calibration": "Camera and projector: inline mapping or path to a calibration file",
    "patterns": "Training patterns projected onto the scene",
    "ground_truth": "Gray code with inverses plus phase shifting for the reference depth",
    "network": "SDF network architecture and geometric initialization",
    "scene_box": "Cube the network sees as [-1, 1]^3",
    "train": "Optimization schedule, sampling and loss weights",
    "extract": "Depth extraction from a trained network",
    "sweep": "Pattern-count sweep",
    "incremental": "Staged training that adds one pattern per interval",
    "ablation": "Loss combinations for the ablation command",
}


def commented_config() -> str:
    parts = ["# structured-light-sdf experiment configuration", ""]
    for key, value in DEFAULTS.items():
        parts.append(f"# {SECTION_COMMENTS.get(key, key)}")
        parts.append(yaml.safe_dump({key: value}, default_flow_style=False, sort_keys=False).rstrip())
        parts.append("")
    return "\n".join(parts)


@cli.command()
@click.option('--output', '-o', type=click.Path(path_type=Path), default='config.yaml',
              help='Output path for config file')
def init_config(output):
    """Create a default configuration file"""

    if output.exists():
        if not click.confirm(f"{output} already exists. Overwrite?"):
            return

    with open(output, 'w', encoding='utf-8') as f:
        f.write(commented_config())

    click.echo(f"Created configuration file: {output}")


if __name__ == '__main__':
    cli()
