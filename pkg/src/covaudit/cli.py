"""Command-line interface.

Three subcommands:

* ``validate`` checks a config file and prints the effective settings.
* ``run`` executes the full pipeline (retrieve, match, report).
* ``report`` rebuilds the report bundle from an archived raw directory
  without re-querying anything.

Exit codes: 0 success, 2 configuration or input problems, 3 fatal
transport failure (checkpoint retained, rerun with --resume), 4 internal
error.
"""
from __future__ import annotations

import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import click

from .client import FatalTransportError
from .config import ConfigError, validate_config
from .corpus import CorpusError
from .pipeline import PipelineError, recompute_reports, run_pipeline
from .queries import RetrievalMode

EXIT_CONFIG = 2
EXIT_TRANSPORT = 3
EXIT_INTERNAL = 4


def _read_id_file(path: Optional[str]) -> Optional[list[str]]:
    if path is None:
        return None
    ids = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line and not line.startswith("#"):
                ids.append(line)
    return ids


def _fail(code: int, header: str, problems) -> None:
    click.echo(header, err=True)
    for problem in problems:
        click.echo(f"  - {problem}", err=True)
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Audit a scholarly database's coverage of a local publication list."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.option("-c", "--config", "config_path", required=True,
              type=click.Path(exists=False), help="Path to the JSON config file.")
def validate(config_path: str) -> None:
    """Validate a config file; exit 0 when usable."""
    try:
        config = validate_config(config_path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, "configuration problems:", exc.problems)
        return
    click.echo("configuration ok")
    click.echo(f"  corpus: {config.corpus_path} ({config.corpus_format})")
    click.echo(f"  transport: {config.transport.type}")
    click.echo(f"  modes: {', '.join(m.value for m in config.modes)}")
    click.echo(
        "  request: count=%d model=%s offset=%d"
        % (config.request.count, config.request.model, config.request.offset)
    )
    click.echo(f"  output: {config.output_dir}")


@main.command()
@click.option("-c", "--config", "config_path", required=True,
              type=click.Path(exists=False), help="Path to the JSON config file.")
@click.option("-o", "--output", "output_dir", type=click.Path(), default=None,
              help="Override the configured output directory.")
@click.option("--ids", "id_file", type=click.Path(exists=True), default=None,
              help="File with one record id per line; restricts the run.")
@click.option("--mode", "modes", multiple=True,
              type=click.Choice(["title_exact", "title_words"]),
              help="Run only the given mode(s); default: all configured.")
@click.option("--resume", is_flag=True,
              help="Continue from the checkpoint of an interrupted run.")
def run(config_path, output_dir, id_file, modes, resume) -> None:
    """Query the corpus, link the results and write all reports."""
    try:
        config = validate_config(config_path)
        if modes:
            config = replace(
                config, modes=tuple(RetrievalMode(m) for m in modes)
            )
        out = run_pipeline(
            config,
            id_filter=_read_id_file(id_file),
            resume=resume,
            output_dir=Path(output_dir) if output_dir else None,
        )
    except ConfigError as exc:
        _fail(EXIT_CONFIG, "configuration problems:", exc.problems)
        return
    except CorpusError as exc:
        _fail(EXIT_CONFIG, "corpus problems:", [str(exc)])
        return
    except FatalTransportError as exc:
        click.echo(f"transport failure: {exc}", err=True)
        click.echo("the checkpoint was kept; rerun with --resume to continue",
                   err=True)
        sys.exit(EXIT_TRANSPORT)
    except PipelineError as exc:
        _fail(EXIT_INTERNAL, "pipeline error:", [str(exc)])
        return
    click.echo(f"report bundle written under {out}")


@main.command()
@click.option("-c", "--config", "config_path", required=True,
              type=click.Path(exists=False), help="Path to the JSON config file.")
@click.option("--archive", "archive_dir", type=click.Path(exists=True), default=None,
              help="Raw archive to analyze; default: <output>/raw.")
@click.option("-o", "--output", "output_dir", type=click.Path(), default=None,
              help="Override the configured output directory.")
@click.option("--ids", "id_file", type=click.Path(exists=True), default=None,
              help="File with one record id per line; restricts the reports.")
def report(config_path, archive_dir, output_dir, id_file) -> None:
    """Recompute reports from archived raw responses (no querying)."""
    try:
        config = validate_config(config_path)
        out = recompute_reports(
            config,
            archive_dir=Path(archive_dir) if archive_dir else None,
            output_dir=Path(output_dir) if output_dir else None,
            id_filter=_read_id_file(id_file),
        )
    except ConfigError as exc:
        _fail(EXIT_CONFIG, "configuration problems:", exc.problems)
        return
    except CorpusError as exc:
        _fail(EXIT_CONFIG, "corpus problems:", [str(exc)])
        return
    except PipelineError as exc:
        _fail(EXIT_CONFIG, "report error:", [str(exc)])
        return
    click.echo(f"report bundle written under {out}")


if __name__ == "__main__":
    main()
