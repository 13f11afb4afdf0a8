"""
Command line interface for pyxcal.
"""

import sys
from pathlib import Path

import click

import pyxcal
from pyxcal.errors import XcalError
from pyxcal.util import configure_logging

CONTEXT_SETTINGS = dict(help_option_names=["-h", "--help"])


def fail(error: XcalError):
    click.echo(f"error: {error}", err=True)
    sys.exit(error.exit_code)


@click.group(context_settings=CONTEXT_SETTINGS)
@click.version_option(version=pyxcal.__version__)
def cli():
    """
    pyxcal utilities.
    """
    configure_logging()


@cli.command("simulate")
@click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(),
    required=False,
    help="scene configuration (JSON); defaults are used when omitted"
)
@click.option(
    "-o",
    "--out",
    "out_path",
    type=click.Path(),
    required=True,
    help="directory to write the dataset to"
)
@click.option(
    "--seed",
    "seed",
    type=click.INT,
    required=False,
    help="override the scene seed"
)
def simulate(config_path: Path, out_path: Path, seed: int):
    """Generate a synthetic dataset with its ground truth."""
    from pyxcal.datasets import SceneConfig, generate_dataset, write_dataset
    try:
        config = SceneConfig.from_file(Path(config_path)) if config_path else SceneConfig()
        if seed is not None:
            config.seed = seed
        dataset, truth = generate_dataset(config)
        write_dataset(dataset, truth, config, Path(out_path))
    except XcalError as e:
        fail(e)
    click.echo(f"wrote {len(dataset.views)} views of {len(dataset.boards)} boards "
               f"in {len(dataset.rig_ids)} rigs to {out_path}")


@cli.command("calibrate")
@click.option(
    "-d",
    "--dataset",
    "dataset_path",
    type=click.Path(),
    required=True,
    help="dataset directory"
)
@click.option(
    "-o",
    "--out",
    "out_path",
    type=click.Path(),
    required=True,
    help="file to write the calibration bundle to"
)
@click.option(
    "--mode",
    "mode",
    type=click.Choice(["dlt-only", "joint", "separate", "similarity"]),
    required=False,
    help="refinement of the range-to-stereo alignment"
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(),
    required=False,
    help="pipeline configuration (JSON)"
)
@click.option("--seed", "seed", type=click.INT, required=False, help="RANSAC seed")
@click.option("--ransac-threshold-mm", "threshold_mm", type=click.FLOAT, required=False,
              help="plane fitting inlier threshold (mm)")
@click.option("--ransac-threshold-px", "threshold_px", type=click.FLOAT, required=False,
              help="fundamental matrix inlier threshold (px)")
@click.option("--max-iters", "max_iters", type=click.INT, required=False,
              help="Levenberg-Marquardt iteration limit")
@click.option("--reference-rig", "reference_rig", type=click.INT, required=False,
              help="rig whose frame is the world frame")
def calibrate(dataset_path: Path, out_path: Path, mode: str, config_path: Path, seed: int,
              threshold_mm: float, threshold_px: float, max_iters: int, reference_rig: int):
    """Calibrate every rig of a dataset and the network relating them."""
    from pyxcal.datasets import BoardDataset
    from pyxcal.experiments import CalibrationExperiment, PipelineConfig
    from pyxcal.util import content_hash
    try:
        config = PipelineConfig.from_file(Path(config_path)) if config_path else PipelineConfig()
        config = config.with_overrides(mode=mode, reference_rig=reference_rig, threshold_mm=threshold_mm,
                                       threshold_px=threshold_px, seed=seed)
        if max_iters is not None:
            config.lm.max_iters = max_iters
        config.validate()
        dataset = BoardDataset.from_dir(Path(dataset_path))
        experiment = CalibrationExperiment(dataset, config, input_hash=content_hash(Path(dataset_path)))
        bundle = experiment.bundle
        bundle.save(Path(out_path))
    except XcalError as e:
        fail(e)
    click.echo(f"{'rig':>4} {'mode':>10} {'iters':>6} {'initial px':>12} {'final px':>12}")
    for rig in bundle.rigs:
        click.echo(f"{rig.id:>4} {rig.mode:>10} {rig.iterations:>6} {rig.initial_error:>12.4g} {rig.final_error:>12.4g}")
    for edge in bundle.edges:
        click.echo(f"G_{edge.i}{edge.j}: {edge.kind}, {edge.provenance}" +
                   (f" over {edge.boards} boards" if edge.provenance == "direct" else ""))


@cli.command("evaluate")
@click.option(
    "-d",
    "--dataset",
    "dataset_path",
    type=click.Path(),
    required=True,
    help="dataset directory"
)
@click.option(
    "-b",
    "--bundle",
    "bundle_path",
    type=click.Path(),
    required=True,
    help="calibration bundle written by calibrate"
)
@click.option(
    "-o",
    "--out",
    "out_path",
    type=click.Path(),
    required=True,
    help="directory to write the reports to"
)
@click.option(
    "--pairs",
    "pairs",
    type=click.STRING,
    required=False,
    help="rig pairs to evaluate, e.g. 0:0,0:1 (all pairs by default)"
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(),
    required=False,
    help="pipeline configuration (JSON); defaults to the one in the bundle"
)
def evaluate(dataset_path: Path, bundle_path: Path, out_path: Path, pairs: str, config_path: Path):
    """Calibration and total errors on the boards held out of the calibration."""
    import pandas as pd
    from pyxcal.datasets import BoardDataset
    from pyxcal.experiments import CalibrationBundle, EvaluationExperiment, PipelineConfig
    from pyxcal.experiments.config import parse_pairs
    from pyxcal.util import content_hash
    try:
        bundle = CalibrationBundle.load(Path(bundle_path))
        config = PipelineConfig.from_file(Path(config_path)) if config_path else bundle.config
        config = config.with_overrides(pairs=parse_pairs(pairs) or None)
        dataset = BoardDataset.from_dir(Path(dataset_path))
        input_hash = content_hash(Path(dataset_path))
        if bundle.input_hash and bundle.input_hash != input_hash:
            click.echo("warning: the dataset differs from the one the bundle was calibrated on", err=True)
        experiment = EvaluationExperiment(dataset, bundle, config)
        summary = experiment.write(Path(out_path), input_hash=input_hash)
    except XcalError as e:
        fail(e)
    with pd.option_context("display.max_rows", None, "display.width", 120):
        click.echo(summary.to_string(index=False, na_rep="-"))


if __name__ == '__main__':
    cli()
