"""Command-line interface.

Every option can also come from the environment with the DISASTERMON_
prefix (e.g. DISASTERMON_RUN_PORT=9000) or from a JSON config file passed
via --config; explicit flags win.
"""

from __future__ import annotations

import logging
import math
import sys

import click

from .articles import ArticleKey
from .config import ServiceConfig, load_config
from .engine import MonitorEngine
from .httpapi import serve_in_background
from .runner import (
    bootstrap_engine,
    build_wiki_client,
    run_live,
    run_replay,
    start_refresh_thread,
)
from .wikigraph import MonitoringListBuilder, serialize_monitoring_list

CONTEXT_SETTINGS = {"auto_envvar_prefix": "DISASTERMON"}


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


common_options = [
    click.option("--config", "config_path", type=click.Path(exists=True),
                 default=None, help="JSON config file."),
    click.option("--data-dir", default=None, help="State directory (journal, snapshots)."),
    click.option("--verbose", is_flag=True, default=False, help="Debug logging."),
]


def with_common(command):
    for option in reversed(common_options):
        command = option(command)
    return command


@click.group(context_settings=CONTEXT_SETTINGS)
def main() -> None:
    """Wikipedia-based disaster detection and monitoring service."""


@main.command("build-list")
@with_common
@click.option("--seed", default=None, help='Seed article, e.g. "en:Natural_disaster".')
@click.option("--fixture-dir", default=None,
              help="Serve Wikipedia lookups from this fixture directory.")
@click.option("--wiki-api-template", default=None,
              help="MediaWiki API endpoint template with {language}.")
def build_list(config_path, data_dir, verbose, seed, fixture_dir, wiki_api_template) -> None:
    """Build the monitoring list once and write .json/.tsv/.txt files."""
    _configure_logging(verbose)
    config = load_config(config_path, {
        "data_dir": data_dir, "seed": seed,
        "fixture_wiki_dir": fixture_dir, "wiki_api_template": wiki_api_template,
    })
    client = build_wiki_client(config)
    builder = MonitoringListBuilder(client, ArticleKey.parse(config.seed))
    monitoring, clusters, report = builder.build()
    out = config.ensure_data_dir()
    for fmt in ("json", "tsv", "txt"):
        path = out / f"monitoring-list.{fmt}"
        path.write_bytes(serialize_monitoring_list(monitoring, fmt))
        click.echo(f"wrote {path}")
    click.echo(f"monitoring {len(monitoring)} articles "
               f"({len(clusters.groups())} language clusters)")
    if not report.ok:
        click.echo(f"skipped {len(report.skipped)} articles; see the log for details",
                   err=True)


def _serve_until_interrupt(engine: MonitorEngine, config: ServiceConfig) -> None:
    server = serve_in_background(engine, config.host, config.port)
    host, port = server.server_address[:2]
    click.echo(f"listening on http://{host}:{port}")
    try:
        engine.closed.wait()
    except KeyboardInterrupt:
        click.echo("shutting down")
    finally:
        engine.close()
        server.shutdown()


@main.command()
@with_common
@click.option("--stream-url", default=None, help="Live SSE endpoint for edit events.")
@click.option("--replay", "replay_path", default=None, type=click.Path(exists=True),
              help="Replay this recorded stream instead of going live.")
@click.option("--replay-speed", default=None, type=float,
              help="Replay speed factor (omit for as-fast-as-possible).")
@click.option("--fixture-dir", default=None,
              help="Serve Wikipedia lookups from this fixture directory.")
@click.option("--providers", "provider_config", default=None, type=click.Path(exists=True),
              help="Provider config file for media search.")
@click.option("--seed", default=None)
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--refresh-interval", "refresh_interval_s", default=None, type=int)
def run(config_path, data_dir, verbose, stream_url, replay_path, replay_speed,
        fixture_dir, provider_config, seed, host, port, refresh_interval_s) -> None:
    """Run the monitoring service (live stream or replay) with the HTTP API."""
    _configure_logging(verbose)
    config = load_config(config_path, {
        "data_dir": data_dir, "stream_url": stream_url, "replay_path": replay_path,
        "replay_speed": replay_speed, "fixture_wiki_dir": fixture_dir,
        "provider_config": provider_config, "seed": seed, "host": host, "port": port,
        "refresh_interval_s": refresh_interval_s,
    })
    if config.replay_path:
        engine, _ = run_replay(config)
        _serve_until_interrupt(engine, config)
        return
    engine = bootstrap_engine(config)
    engine.refresh_monitoring_list()
    start_refresh_thread(engine, config.refresh_interval_s)
    serve_in_background(engine, config.host, config.port)
    click.echo(f"listening on http://{config.host}:{config.port}")
    try:
        run_live(config, engine)
    except KeyboardInterrupt:
        click.echo("shutting down")
    finally:
        engine.close()


@main.command()
@with_common
@click.argument("replay_file", type=click.Path(exists=True))
@click.option("--speed", default=None, type=float,
              help="Speed factor; omit for as-fast-as-possible.")
@click.option("--fixture-dir", default=None)
@click.option("--providers", "provider_config", default=None, type=click.Path(exists=True))
@click.option("--seed", default=None)
@click.option("--serve", is_flag=True, default=False,
              help="Keep serving the HTTP API after the replay finishes.")
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
def replay(config_path, data_dir, verbose, replay_file, speed, fixture_dir,
           provider_config, seed, serve, host, port) -> None:
    """Replay a recorded edit stream and write the resulting journal."""
    _configure_logging(verbose)
    config = load_config(config_path, {
        "data_dir": data_dir, "replay_path": replay_file,
        "replay_speed": speed if speed is not None else math.inf,
        "fixture_wiki_dir": fixture_dir, "provider_config": provider_config,
        "seed": seed, "host": host, "port": port,
    })
    engine, stats = run_replay(config)
    click.echo(
        f"replayed {stats.events_out} events ({stats.events_dropped} dropped); "
        f"{len(engine.store.all())} candidates"
    )
    if serve:
        _serve_until_interrupt(engine, config)
    else:
        engine.close()


@main.command("render-cap")
@with_common
@click.argument("candidate_id", type=int)
def render_cap_command(config_path, data_dir, verbose, candidate_id) -> None:
    """Print the CAP XML of a confirmed alert from the journal."""
    _configure_logging(verbose)
    config = load_config(config_path, {"data_dir": data_dir})
    engine = bootstrap_engine(config)
    xml = engine.cap_xml(candidate_id)
    if xml is None:
        click.echo(f"no CAP document for candidate {candidate_id}", err=True)
        sys.exit(1)
    sys.stdout.buffer.write(xml + b"\n")


if __name__ == "__main__":
    main()
