"""
CLI main entry point for the low-order model.

The CLI supports:
- Reproducing the real-time MNIST learning curve
- Online training over a slice of the training set
- Scoring a checkpoint on the test set
- Printing the dendritic code of a bit string
- Inspecting what each processing unit of a checkpoint has stored

Usage Examples:
    # Full 30-bin experiment with the documented defaults
    lom experiment --config configs/experiment.yml

    # Same run with another seed and output directory
    lom experiment --seed 7 --out runs/seed7

    # Score a checkpoint
    lom eval runs/default/checkpoint.lom

    # Dendritic code of a bit string
    lom encode 101

Functions:
    main: CLI group with verbosity and version flags
    experiment: Train bin by bin and record the test error after each bin
    train: Train on a slice of the training images and write a checkpoint
    eval: Print the test error rate of a checkpoint
    encode: Print the dendritic code of a bit string
    inspect: Show per-unit storage statistics of a checkpoint
    setup_logging: Configure loguru logging based on verbosity
"""

import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, NoReturn

import click
import numpy as np
from loguru import logger
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from ..config import CapacityError, ConfigurationError, settings
from ..core.dendritic_code import BinaryVector, encode as encode_bits
from ..core.mnist_pipeline import (
    DatasetError,
    check_geometry,
    load_split,
    run_experiment,
    train_images,
    window_patterns,
)
from ..core.network import Network
from ..models.config import RunConfig
from ..utils.checkpoint import CheckpointError, CheckpointVersionError, load_network, save_network
from ..utils.config_loader import cli_overrides, load_run_config
from ..utils.idx_reader import IdxFormatError

METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "checkpoint.lom"


def setup_logging(verbose: bool = False) -> None:
    """
    Configure loguru logging based on verbosity level.

    Args:
        verbose: If True, enables DEBUG level logging with detailed format.
                If False, uses ``settings.log_level`` with a simple format.
    """
    logger.remove()

    if verbose or settings.verbose:
        verbose_format = (
            "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
            "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
        )
        logger.add(sys.stderr, format=verbose_format, level="DEBUG")
    else:
        logger.add(sys.stderr, format="<level>{level}</level>: {message}", level=settings.log_level)


class CLIContext:
    """
    Context object to hold CLI state.

    Attributes:
        verbose (bool): Whether verbose logging is enabled
        console (Console): Rich console on stderr for human-facing output
    """

    def __init__(self, verbose: bool = False):
        self.verbose = verbose
        self.console = Console(stderr=True)
        setup_logging(verbose)


def config_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Options shared by commands that build a run configuration."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="YAML run configuration (default: configs/experiment.yml when present)",
        ),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Override the 64-bit seed"),
        click.option("--out", "output_dir", type=click.Path(file_okay=False, path_type=Path), help="Output directory"),
        click.option("--threshold", type=click.FloatRange(0.0, 1.0), help="Override the layer-2 vote threshold"),
        click.option("--max-tier", type=click.IntRange(min=0), help="Override the generalization depth of both layers"),
        click.option(
            "--dataset", "dataset_dir", type=click.Path(file_okay=False, path_type=Path), help="MNIST IDX directory"
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _build_config(
    console: Console,
    config_path: Path | None,
    seed: int | None,
    output_dir: Path | None,
    threshold: float | None,
    max_tier: int | None,
    dataset_dir: Path | None,
) -> RunConfig:
    overrides = cli_overrides(seed, output_dir, threshold, max_tier, dataset_dir)
    try:
        cfg = load_run_config(config_path, overrides)
        check_geometry(cfg)
    except ConfigurationError as e:
        _configuration_failure(console, e)
    logger.debug(f"Run configuration fingerprint {cfg.fingerprint()}")
    return cfg


def _configuration_failure(console: Console, error: ConfigurationError) -> NoReturn:
    console.print(f"[red]❌ Configuration error:[/red] {error}")
    console.print("\n[yellow]💡 How to fix this:[/yellow]")
    console.print("• Compare your file with configs/experiment.yml and configs/README.md")
    console.print("• Window geometry must yield the layer-1 grid; offsets must match layer-1 input bits")
    sys.exit(1)


def _dataset_failure(console: Console, error: Exception, cfg: RunConfig) -> NoReturn:
    console.print(f"[red]❌ Dataset error:[/red] {error}")
    console.print("\n[yellow]💡 How to fix this:[/yellow]")
    console.print(f"• Place the four MNIST IDX files in {cfg.dataset.dir} (plain or .gz)")
    console.print("• Or point to them with --dataset, dataset.dir in the config, or LOM_DATASET_DIR")
    sys.exit(1)


def _progress(console: Console) -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeElapsedColumn(),
        console=console,
    )


def _open_checkpoint(console: Console, checkpoint: Path) -> Network:
    try:
        return load_network(checkpoint)
    except CheckpointVersionError as e:
        console.print(f"[red]❌ Unsupported checkpoint:[/red] {e}")
        console.print("\n[yellow]💡 Checkpoints are written by 'lom experiment' or 'lom train'.[/yellow]")
        sys.exit(1)
    except CheckpointError as e:
        console.print(f"[red]❌ Unreadable checkpoint:[/red] {e}")
        sys.exit(1)


@click.group(invoke_without_command=True)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging output")
@click.option("--version", is_flag=True, help="Show version information")
@click.pass_context
def main(ctx: click.Context, verbose: bool, version: bool) -> None:
    """
    Low-order model - online associative learning with dendritic codes.

    Progress and diagnostics go to standard error; results (metrics files,
    error rates, codes) go to files or standard output.
    """
    if version:
        from .. import __version__

        click.echo(f"low-order-model v{__version__}")
        return

    ctx.obj = CLIContext(verbose=verbose)

    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@main.command()
@config_options
@click.pass_obj
def experiment(
    cli_ctx: CLIContext,
    config_path: Path | None,
    seed: int | None,
    output_dir: Path | None,
    threshold: float | None,
    max_tier: int | None,
    dataset_dir: Path | None,
) -> None:
    """
    Reproduce the real-time learning curve.

    Trains on consecutive bins of training images in file order and scores
    the test set after each bin. Writes metrics.csv (rewritten after every
    bin) and checkpoint.lom to the output directory.
    """
    console = cli_ctx.console
    cfg = _build_config(console, config_path, seed, output_dir, threshold, max_tier, dataset_dir)
    metrics_path = cfg.output_dir / METRICS_FILE
    console.print(f"[bold blue]Output:[/bold blue] {cfg.output_dir}")

    try:
        with _progress(console) as progress:
            task = progress.add_task("Learning bins...", total=None)
            result, network = run_experiment(cfg, metrics_path=metrics_path, progress=progress, task_id=task)
        save_network(network, cfg.output_dir / CHECKPOINT_FILE)
    except (DatasetError, IdxFormatError) as e:
        _dataset_failure(console, e, cfg)
    except ConfigurationError as e:
        _configuration_failure(console, e)
    except (CheckpointError, OSError) as e:
        console.print(f"[red]❌ Cannot write results:[/red] {e}")
        console.print("• Check that the output directory is writable")
        sys.exit(1)
    except KeyboardInterrupt:
        console.print("\n[yellow]⏹️  Experiment cancelled; metrics up to the last finished bin are kept.[/yellow]")
        sys.exit(1)

    table = Table(title="Learning curve")
    table.add_column("Bin", justify="right")
    table.add_column("Images seen", justify="right")
    table.add_column("Error rate", justify="right")
    table.add_column("Fallback votes", justify="right")
    for record in result.records:
        table.add_row(
            str(record.bin_index), str(record.images_seen), f"{record.error_rate:.4f}", str(record.fallback_count)
        )
    console.print(table)
    console.print(f"[green]✓[/green] Final error rate {result.final_error:.4f}; metrics in {metrics_path}")


@main.command()
@config_options
@click.option("--images", type=click.IntRange(min=1), help="Number of training images (default: all protocol bins)")
@click.option("--start", type=click.IntRange(min=0), default=0, show_default=True, help="First training image")
@click.option(
    "--resume",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Continue training a checkpoint instead of a fresh network",
)
@click.pass_obj
def train(
    cli_ctx: CLIContext,
    config_path: Path | None,
    seed: int | None,
    output_dir: Path | None,
    threshold: float | None,
    max_tier: int | None,
    dataset_dir: Path | None,
    images: int | None,
    start: int,
    resume: Path | None,
) -> None:
    """
    Train online over a slice of the training set and write a checkpoint.

    No test pass is run; use 'lom eval' on the checkpoint afterwards.
    """
    console = cli_ctx.console
    if resume is not None:
        ignored = [
            flag
            for flag, value in (
                ("--config", config_path),
                ("--seed", seed),
                ("--threshold", threshold),
                ("--max-tier", max_tier),
            )
            if value is not None
        ]
        if ignored:
            raise click.UsageError(
                f"{', '.join(ignored)} cannot be combined with --resume; the checkpoint's configuration is used"
            )
        network = _open_checkpoint(console, resume)
        cfg = network.cfg
        if output_dir is not None:
            cfg = cfg.model_copy(update={"output_dir": output_dir})
        if dataset_dir is not None:
            cfg = cfg.model_copy(update={"dataset": cfg.dataset.model_copy(update={"dir": dataset_dir})})
    else:
        cfg = _build_config(console, config_path, seed, output_dir, threshold, max_tier, dataset_dir)
        network = Network(cfg)

    count = images or cfg.protocol.bins * cfg.protocol.bin_size
    try:
        split = load_split(cfg.dataset, "train", limit=start + count)
        if len(split) < start + count:
            raise DatasetError(f"Requested images {start}..{start + count - 1} but the training set has {len(split)}")
        patterns = window_patterns(split.images[start:], cfg.selection)
        with _progress(console) as progress:
            task = progress.add_task("Training...", total=count)
            stored = train_images(network, patterns, split.labels[start:], progress, task)
        checkpoint = save_network(network, cfg.output_dir / CHECKPOINT_FILE)
    except (DatasetError, IdxFormatError) as e:
        _dataset_failure(console, e, cfg)
    except ConfigurationError as e:
        _configuration_failure(console, e)
    except (CheckpointError, OSError) as e:
        console.print(f"[red]❌ Cannot write checkpoint:[/red] {e}")
        sys.exit(1)

    console.print(f"[green]✓[/green] Trained on {count} images ({stored} new layer-1 patterns); wrote {checkpoint}")


@main.command(name="eval")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--dataset", "dataset_dir", type=click.Path(file_okay=False, path_type=Path), help="MNIST IDX directory override"
)
@click.option("--limit", type=click.IntRange(min=1), help="Score only the first N test images")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Spike seed for evaluation (default: run seed)")
@click.pass_obj
def evaluate(
    cli_ctx: CLIContext, checkpoint: Path, dataset_dir: Path | None, limit: int | None, seed: int | None
) -> None:
    """
    Print the test error rate of CHECKPOINT with four decimals.

    The checkpoint is only read. With the default seed the value equals the
    last metrics row of the run that wrote it.
    """
    console = cli_ctx.console
    network = _open_checkpoint(console, checkpoint)
    cfg = network.cfg
    dataset = cfg.dataset if dataset_dir is None else cfg.dataset.model_copy(update={"dir": dataset_dir})
    try:
        test = load_split(dataset, "test", limit=limit or cfg.protocol.test_limit)
    except (DatasetError, IdxFormatError) as e:
        _dataset_failure(console, e, cfg)

    with console.status("Scoring test images..."):
        result = network.evaluate(window_patterns(test.images, cfg.selection), test.labels, seed=seed)
    logger.info(
        f"{result.images} images, {result.fallback_count} fallback votes, {result.mean_voters:.1f} voters per image"
    )
    click.echo(f"{result.error_rate:.4f}")


@main.command(name="encode")
@click.argument("bits")
@click.pass_obj
def encode_command(cli_ctx: CLIContext, bits: str) -> None:
    """
    Print the dendritic code of BITS, a string of 0s and 1s.

    Example: 'lom encode 101' prints 01011010.
    """
    if not bits or set(bits) - {"0", "1"}:
        raise click.BadParameter(f"'{bits}' must be a non-empty string of 0s and 1s", param_hint="BITS")
    try:
        code = encode_bits(BinaryVector.from_string(bits))
    except CapacityError as e:
        cli_ctx.console.print(f"[red]❌ Input too long:[/red] {e}")
        cli_ctx.console.print("• Raise LOM_MAX_CODE_BITS to allow longer inputs")
        sys.exit(1)
    click.echo("".join(str(int(bit)) for bit in code.components))


@main.command()
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--units", is_flag=True, help="List every processing unit instead of per-layer summaries")
@click.pass_obj
def inspect(cli_ctx: CLIContext, checkpoint: Path, units: bool) -> None:
    """
    Show what the processing units of CHECKPOINT have stored.

    Reports stored pattern counts, mean label entropy (bits) and learn counts.
    """
    console = cli_ctx.console
    network = _open_checkpoint(console, checkpoint)
    stats = network.stats()

    console.print(f"[bold blue]Checkpoint:[/bold blue] {checkpoint}")
    console.print(f"[bold blue]Training images seen:[/bold blue] {network.examples_seen}")
    console.print(f"[bold blue]Config fingerprint:[/bold blue] {network.cfg.fingerprint()}")

    if units:
        table = Table(title="Processing units")
        table.add_column("Unit")
        table.add_column("Patterns", justify="right")
        table.add_column("Mean entropy", justify="right")
        table.add_column("Learn count", justify="right")
        for row in stats:
            table.add_row(
                str(row["pu_id"]), str(row["patterns"]), f"{row['mean_entropy']:.3f}", str(row["learn_count"])
            )
        console.print(table)
        return

    table = Table(title="Layers")
    table.add_column("Layer")
    table.add_column("Units", justify="right")
    table.add_column("Patterns (mean)", justify="right")
    table.add_column("Patterns (max)", justify="right")
    table.add_column("Mean entropy", justify="right")
    for prefix, name in (("l1:", "Layer 1"), ("l2:", "Layer 2")):
        rows = [row for row in stats if str(row["pu_id"]).startswith(prefix)]
        patterns = np.array([row["patterns"] for row in rows], dtype=np.float64)
        entropy = np.array([row["mean_entropy"] for row in rows], dtype=np.float64)
        table.add_row(
            name,
            str(len(rows)),
            f"{patterns.mean():.1f}" if rows else "0",
            f"{int(patterns.max())}" if rows else "0",
            f"{entropy.mean():.3f}" if rows else "0.000",
        )
    console.print(table)


if __name__ == "__main__":
    main()
