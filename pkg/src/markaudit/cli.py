"""Command-line interface: table simulation, single audits, competitive audits,
and the live session service.

Exit status: 0 on success (audit Consistent / competitive winner), 1 when an
audit concludes Inconclusive, 2 on usage errors.  All outputs are
deterministic functions of the flags (fixed seed => byte-identical files).
"""
from __future__ import annotations

import pathlib
import sys

import click

from .competitive import JudgeConfig, adjudicate
from .cvr import (
    BayesianCvr,
    ConservativeCvr,
    read_cvr,
    read_election,
)
from .engine import (
    CONSISTENT,
    TestSettings,
    make_environment,
    run_bayesian_audit,
    run_conservative_audit,
)
from .simkit import APPROACHES, run_table, table_csv


@click.group()
def main() -> None:
    """Marginal-mark-aware election auditing toolkit."""


@main.command()
@click.option("--table", type=click.IntRange(1, 3), required=True, help="Published table to reproduce.")
@click.option("--trials", type=click.IntRange(min=1), default=5000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--gamma", type=float, default=1.1, show_default=True)
@click.option(
    "--approaches",
    type=click.Choice(APPROACHES),
    multiple=True,
    help="Subset of approaches (default: all three).",
)
@click.option("--out", type=click.Path(dir_okay=False, path_type=pathlib.Path), required=True)
def simulate(table, trials, seed, alpha, gamma, approaches, out) -> None:
    """Monte Carlo sample-size table, written as CSV."""
    settings = TestSettings(alpha=alpha, gamma=gamma)
    chosen = approaches or APPROACHES
    cells = run_table(table, trials, seed, settings, chosen)
    out.write_text(table_csv(table, cells, trials, seed, settings), encoding="utf-8")
    click.echo(f"table {table}: {len(cells)} cells -> {out}")


@main.command()
@click.option("--election", "election_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--cvr", "cvr_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mode", type=click.Choice(["bayesian", "conservative"]), required=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--gamma", type=float, default=1.1, show_default=True)
@click.option("--max-draws", type=int, default=None, help="Defaults to the election size.")
@click.option("--env", "env_kind", type=click.Choice(["honest", "suppress", "mislabel", "worst"]), default="honest", show_default=True)
@click.option("--suppress-rate", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=pathlib.Path), default=None, help="Transcript JSON destination.")
def audit(election_path, cvr_path, mode, alpha, gamma, max_draws, env_kind, suppress_rate, seed, out) -> None:
    """Run one comparison audit of a CVR against a ground-truth election."""
    election = read_election(election_path)
    table = read_cvr(cvr_path)
    settings = TestSettings(alpha=alpha, gamma=gamma, max_draws=max_draws)
    params = {}
    if env_kind == "suppress" and suppress_rate is not None:
        params["rate"] = suppress_rate
    if env_kind == "worst":
        if not isinstance(table, ConservativeCvr):
            raise click.UsageError("--env worst needs a conservative CVR")
        params["cvr"] = table
    env = make_environment(env_kind, election, **params)
    if mode == "bayesian":
        if not isinstance(table, BayesianCvr):
            raise click.UsageError("--mode bayesian needs a bayesian CVR file")
        transcript = run_bayesian_audit(election, table, env, settings, seed)
    else:
        if not isinstance(table, ConservativeCvr):
            raise click.UsageError("--mode conservative needs a conservative CVR file")
        transcript = run_conservative_audit(election, table, env, settings, seed)
    if out is not None:
        out.write_text(transcript.to_json(), encoding="utf-8")
    click.echo(
        f"verdict: {transcript.verdict} after {transcript.draws} draws "
        f"(final risk {transcript.final_risk!r})"
    )
    if transcript.verdict != CONSISTENT:
        sys.exit(1)


@main.command()
@click.option("--cvrs", "cvr_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Election manifest with ground truth (the environment's ballots).")
@click.option("--t", "t_param", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--env", "env_kind", type=click.Choice(["honest", "suppress", "mislabel"]), default="honest", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=pathlib.Path), default=None)
def compete(cvr_paths, manifest_path, t_param, env_kind, seed, out) -> None:
    """Adjudicate rival conservative CVRs with the constant-sample audit."""
    election = read_election(manifest_path)
    labeled = []
    for path in cvr_paths:
        table = read_cvr(path)
        if not isinstance(table, ConservativeCvr):
            raise click.UsageError(f"{path}: competitive audits need conservative CVRs")
        labeled.append((pathlib.Path(path).stem, table))
    env = make_environment(env_kind, election)
    verdict = adjudicate(
        JudgeConfig(t=t_param, seed=seed),
        election.candidates,
        election.size,
        labeled,
        env,
    )
    if out is not None:
        out.write_text(verdict.to_json(), encoding="utf-8")
    for record in verdict.pair_records:
        click.echo(
            f"pair {record.by} vs {record.against}: {record.votes}/{len(record.requested)} "
            f"votes{' -> disqualified' if record.disqualified else ''}"
        )
    if verdict.outcome == "winner":
        click.echo(f"winner: {verdict.winner} ({verdict.ballots_requested} ballots requested)")
    else:
        click.echo(f"inconclusive ({verdict.ballots_requested} ballots requested)")
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--data-dir", type=click.Path(file_okay=False, path_type=pathlib.Path), default=pathlib.Path("./audit-sessions"), show_default=True)
def serve(host, port, data_dir) -> None:
    """Start the live audit-session HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
