"""Operator command line: serve, simulate, batch-analyze, pool, metrics.

Exit codes: 0 on success, 1 on a domain error (bad data, unreachable
backend), 2 on usage errors (unknown command, bad flags).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .analytics import (
    load_events,
    outcomes_report_from_log,
    render_report_table,
    repeat_report_from_log,
    report_records,
)
from .config import build_components, load_config
from .gateway import GatewayError
from .model import DraftImage, StudentSubmission
from .pipeline import UnknownProblem
from .pool import ErrorPool
from .simulate import SimConfig, render_savings_table, run_cost_sim


@click.group()
def main() -> None:
    """Tutoring service operations."""


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="YAML config file; defaults apply when omitted.",
)
def serve(config_path: str | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        config = load_config(config_path)
        components = build_components(config)
        app = create_app(components)
    except (ValueError, RuntimeError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    host, port = config.server.host_port()
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--problems", "n_problems", type=int, required=True)
@click.option("--distinct", type=int, required=True)
@click.option("--zipf", type=float, default=1.1, show_default=True)
@click.option("--submissions", type=int, required=True)
@click.option("--quality-pass", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--concurrency", type=int, default=1, show_default=True)
def simulate(
    n_problems: int,
    distinct: int,
    zipf: float,
    submissions: int,
    quality_pass: float,
    seed: int,
    concurrency: int,
) -> None:
    """Replay a synthetic long-tail workload and report cache savings."""
    try:
        cfg = SimConfig(
            n_problems=n_problems,
            distinct_answers_per_problem=distinct,
            zipf_exponent=zipf,
            n_submissions=submissions,
            quality_pass_prob=quality_pass,
            seed=seed,
        )
        report = run_cost_sim(cfg, concurrency=concurrency)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(render_savings_table(cfg, report))
    click.echo()
    click.echo(
        json.dumps(
            {
                "backend_calls": report.backend_calls,
                "cache_hits": report.cache_hits,
                "hit_rate": report.hit_rate,
                "per_problem_distinct_seen": list(report.per_problem_distinct_seen),
                "bound_nk": report.bound_nk,
                "top40_coverage": report.top40_coverage,
            }
        )
    )


def _load_batch_draft(record: dict, base_dir: Path) -> DraftImage | None:
    draft_path = record.get("draft_path")
    if draft_path is None:
        return None
    path = Path(draft_path)
    if not path.is_absolute():
        path = base_dir / path
    return DraftImage(
        data=path.read_bytes(),
        media_type=record.get("media_type", "image/png"),
    )


@main.command()
@click.option(
    "--batch",
    "batch_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Line-delimited submission records.",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
)
@click.option(
    "--problems",
    "problems_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Problem set to load; overrides the config's problems.path.",
)
def analyze(
    batch_path: str, config_path: str | None, problems_path: str | None
) -> None:
    """Replay recorded submissions through the pipeline, one per line."""
    try:
        config = load_config(config_path)
        repo = None
        if problems_path is not None:
            from .pipeline import ProblemRepository

            repo = ProblemRepository.from_ndjson(problems_path)
        components = build_components(config, problems=repo)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc

    base_dir = Path(batch_path).parent
    successes = 0
    failures = 0
    with open(batch_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                sub = StudentSubmission(
                    submission_id=record.get("submission_id", f"batch-{lineno}"),
                    student_id=record["student_id"],
                    problem_id=record["problem_id"],
                    raw_answer=record["answer"],
                    draft=_load_batch_draft(record, base_dir),
                )
                outcome = components.pipeline.handle_submission(sub)
            except (
                KeyError,
                ValueError,
                OSError,
                UnknownProblem,
                GatewayError,
                json.JSONDecodeError,
            ) as exc:
                failures += 1
                click.echo(json.dumps({"line": lineno, "error": str(exc)}))
                continue
            successes += 1
            out: dict = {"line": lineno, "verdict": outcome.verdict.value}
            if outcome.redo_reason is not None:
                out["redo_reason"] = outcome.redo_reason
            if outcome.analysis is not None:
                out["analysis"] = {
                    "cause": outcome.analysis.cause,
                    "suggestion": outcome.analysis.suggestion,
                    "source": outcome.analysis.source.value,
                }
                out["session_id"] = outcome.session_id
            click.echo(json.dumps(out))
    if failures and not successes:
        raise click.ClickException("every batch line failed")


@main.group()
def pool() -> None:
    """Inspect or export a pool append log."""


def _pool_from_log(log_path: str) -> ErrorPool:
    try:
        return ErrorPool(log_path=log_path)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc


@pool.command()
@click.option("--log", "log_path", type=click.Path(exists=True, dir_okay=False), required=True)
def inspect(log_path: str) -> None:
    """Summarize a pool log: entry counts per problem."""
    replayed = _pool_from_log(log_path)
    stats = replayed.stats()
    click.echo(f"entries: {len(replayed)}")
    for problem_id, count in sorted(stats.per_problem_counts.items()):
        click.echo(f"  {problem_id}: {count}")


@pool.command()
@click.option("--log", "log_path", type=click.Path(exists=True, dir_okay=False), required=True)
def export(log_path: str) -> None:
    """Re-emit a pool log as clean line-delimited records."""
    replayed = _pool_from_log(log_path)
    for record in replayed.export_records():
        click.echo(json.dumps(record, sort_keys=True))


@main.group()
def metrics() -> None:
    """Learning-outcome reports from event files."""


@metrics.command()
@click.option(
    "--events",
    "events_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option(
    "--report",
    "report_kind",
    type=click.Choice(["outcomes", "repeat"]),
    default="outcomes",
    show_default=True,
)
def compute(events_path: str, report_kind: str) -> None:
    """Aggregate an event file into the requested report."""
    try:
        log = load_events(events_path)
        if report_kind == "outcomes":
            report = outcomes_report_from_log(log)
        else:
            report = repeat_report_from_log(log)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(render_report_table(report))
    click.echo()
    for record in report_records(report):
        click.echo(json.dumps(record, sort_keys=True))


if __name__ == "__main__":
    sys.exit(main())
