"""``s2spm`` command line: ingest, synth, train, eval, bnmi, enrich, viz.

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.
"""
import functools
import json
from pathlib import Path
from typing import Any, Dict, List

import click

from . import pipeline
from .config import ALL_DEFAULTS, load_config, resolve
from .errors import S2SPMError
from .logs import configure_logging, get_logger

logger = get_logger("PIPELINE")

SIGNOR_COLUMNS = {"source": "ENTITYA", "target": "ENTITYB", "sign": "EFFECT"}


def parse_int_list(text: str, minimum: int = 0) -> List[int]:
    """``"3..8"`` (inclusive range) or ``"3,5,8"``; both forms may be mixed."""
    values: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            values.extend(range(int(lo), int(hi) + 1))
        elif part:
            values.append(int(part))
    if not values or min(values) < minimum:
        raise click.BadParameter(f"invalid integer list {text!r}")
    return values


def parse_k_list(text: str) -> List[int]:
    return parse_int_list(text, minimum=1)


def _column(value: str):
    return int(value) if value.isdigit() else value


def _settings(ctx: click.Context, **flags) -> Dict[str, Any]:
    return resolve(ALL_DEFAULTS, ctx.obj["file_config"], flags)


def _report(summary: Dict[str, Any]) -> None:
    click.echo(json.dumps(summary, indent=2, default=str))


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except S2SPMError as e:
            logger.error(str(e))
            raise click.exceptions.Exit(e.exit_code)
        except FileNotFoundError as e:
            logger.error(str(e))
            raise click.exceptions.Exit(2)
    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path),
              help="Flat TOML file of settings; flags override it.")
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.pass_context
@handle_errors
def main(ctx: click.Context, config_path, log_level):
    """Signed two-space proximity model for signed protein interaction networks."""
    configure_logging(log_level)
    if config_path is not None and not config_path.exists():
        raise FileNotFoundError(f"config file not found: {config_path}")
    ctx.ensure_object(dict)
    ctx.obj["file_config"] = load_config(config_path)


@main.command()
@click.argument("edge_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--aggregation", type=click.Choice(["net", "sign"]), default="net", show_default=True)
@click.option("--source", default="0", help="Source column name or position.")
@click.option("--target", default="1", help="Target column name or position.")
@click.option("--sign", default="2", help="Sign/effect column name or position.")
@click.option("--signor", is_flag=True, help="Read a raw SIGNOR export (ENTITYA/ENTITYB/EFFECT).")
@click.option("--skip-unknown", is_flag=True, help="Skip rows whose effect carries no sign.")
@click.option("--no-lcc", is_flag=True, help="Keep every component.")
@handle_errors
def ingest(edge_file, out_dir, aggregation, source, target, sign, signor, skip_unknown, no_lcc):
    """Parse an edge list, keep its largest component and write a graph bundle."""
    columns = dict(SIGNOR_COLUMNS) if signor else {"source": _column(source), "target": _column(target),
                                                   "sign": _column(sign)}
    _report(pipeline.run_ingest(edge_file, out_dir, aggregation, skip_unknown=skip_unknown or signor,
                                lcc=not no_lcc, **columns))


@main.command()
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--nodes", "n", type=int, default=300, show_default=True)
@click.option("--k", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--bias", type=float, default=0.5, show_default=True)
@click.option("--spread", type=float, default=4.0, show_default=True)
@handle_errors
def synth(out_dir, n, k, seed, bias, spread):
    """Generate a planted two-space graph bundle with its true memberships."""
    _report(pipeline.run_synth(out_dir, n, k, seed, bias, spread))


@main.command()
@click.argument("graph_dir", type=click.Path(file_okay=False, path_type=Path))
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--k-pos", type=int)
@click.option("--k-neg", type=int)
@click.option("--lr", type=float)
@click.option("--iterations", type=int)
@click.option("--seed", type=int)
@click.option("--sampling", type=click.Choice(["auto", "full", "sampled"]))
@click.option("--shared-space", is_flag=True, help="Single-space ablation.")
@click.option("--runs", type=int, default=1, show_default=True)
@click.option("--split", "with_split", is_flag=True, help="Hold out a connectivity-preserving test split.")
@click.option("--fraction", type=float)
@click.option("--keep-checkpoints", is_flag=True)
@click.pass_context
@handle_errors
def train(ctx, graph_dir, out_dir, k_pos, k_neg, lr, iterations, seed, sampling, shared_space, runs,
          with_split, fraction, keep_checkpoints):
    """Fit one or more seeded runs and write snapshots."""
    settings = _settings(ctx, k_pos=k_pos, k_neg=k_neg, lr=lr, iterations=iterations, seed=seed,
                         sampling=sampling, shared_space=True if shared_space else None, fraction=fraction)
    _report(pipeline.run_train(graph_dir, out_dir, settings, runs=runs, split=with_split,
                               keep_checkpoints=keep_checkpoints))


@main.command("eval")
@click.argument("train_dir", type=click.Path(file_okay=False, path_type=Path))
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--seeds", default="0", show_default=True, help="Classifier seeds, e.g. 0..4.")
@click.option("--l2", type=float)
@click.option("--no-binary", is_flag=True, help="Skip the p@n, p@z and n@z tasks.")
@click.pass_context
@handle_errors
def evaluate(ctx, train_dir, out_dir, seeds, l2, no_binary):
    """Three-class and binary sign prediction on the held-out split."""
    seed_list = parse_int_list(seeds)
    settings = _settings(ctx, l2=l2)
    _report(pipeline.run_eval(train_dir, out_dir, settings, seeds=seed_list, binary=not no_binary))


@main.command()
@click.argument("graph_dir", type=click.Path(file_okay=False, path_type=Path))
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--k", "k_values", default="3..8", show_default=True, help="Archetype counts, e.g. 3..64.")
@click.option("--runs", type=int)
@click.option("--perm", "n_perm", type=int)
@click.option("--iterations", type=int)
@click.option("--seed", type=int)
@click.pass_context
@handle_errors
def bnmi(ctx, graph_dir, out_dir, k_values, runs, n_perm, iterations, seed):
    """Consistency curve (BNMI and its permutation null) over a list of K."""
    settings = _settings(ctx, runs=runs, n_perm=n_perm, iterations=iterations, seed=seed)
    _report(pipeline.run_bnmi(graph_dir, out_dir, settings, parse_k_list(k_values)))


@main.command()
@click.argument("graph_dir", type=click.Path(file_okay=False, path_type=Path))
@click.argument("snapshot", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("annotations", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--space", "spaces", multiple=True, type=click.Choice(["pos", "neg"]))
@click.option("--min-proteins", type=int)
@click.option("--p-threshold", type=float)
@click.option("--alpha", type=float)
@click.option("--p-max-threshold", type=float)
@click.option("--sar-threshold", type=float)
@click.option("--n-boot", type=int)
@click.option("--seed", type=int)
@click.pass_context
@handle_errors
def enrich(ctx, graph_dir, snapshot, annotations, out_dir, spaces, min_proteins, p_threshold, alpha,
           p_max_threshold, sar_threshold, n_boot, seed):
    """GO-term enrichment for every archetype of the chosen spaces."""
    settings = _settings(ctx, min_proteins=min_proteins, p_threshold=p_threshold, alpha=alpha,
                         p_max_threshold=p_max_threshold, sar_threshold=sar_threshold, n_boot=n_boot,
                         seed=seed)
    _report(pipeline.run_enrich(graph_dir, snapshot, annotations, out_dir, settings, spaces or None))


@main.command()
@click.argument("graph_dir", type=click.Path(file_okay=False, path_type=Path))
@click.argument("snapshot", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@handle_errors
def viz(graph_dir, snapshot, out_dir):
    """Circular, ordered-adjacency and PCA figures with their plot data."""
    _report(pipeline.run_viz(graph_dir, snapshot, out_dir))


if __name__ == "__main__":
    main()
