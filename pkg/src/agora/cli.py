"""Operator and research command line.

Provisions an experiment workspace, runs synthetic populations through
all four treatment conditions against the same event-sourced core the
HTTP gateway serves, and exports the summary tables. A typical desk run:

    agora init --out ws --seed 7 --n 8
    agora mint --config ws/config.json
    agora open --config ws/config.json
    agora simulate --config ws/config.json
    agora close --config ws/config.json
    agora report --config ws/config.json --out ws/out
    agora verify-chain --config ws/config.json

Every step loads the chain, replays it, appends its own events, and
leaves a log that `verify-chain` (or any reader) can check end to end.
"""

from __future__ import annotations

import csv
import functools
import json
import random
import sys
from pathlib import Path

import click

from .chain import import_jsonl
from .deliberation import SessionEvent
from .errors import AgoraError, ChainBroken
from .experiment import (
    CONDITION_BY_KEY,
    CONDITIONS,
    Condition,
    SurveyResponse,
    VDEM_DIMENSIONS,
    assign,
    condition_summary,
    likert_summary,
    ols_fit,
    vdem_aggregate,
)
from .gateway import ApiConfig, space_from_config
from .platform import Platform
from .simulate import (
    DEFAULT_ARCHETYPES,
    Archetype,
    PopulationSpec,
    SimClock,
    STUDY_OPTIONS,
    archetype_labels,
    ballot_for,
    compare_methods,
    deliberate_cohort,
    operator_identity,
    population_identities,
    space_for_condition,
)
from .tally import RejectionReason


def fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def handle_errors(command):
    """Map platform errors to clean exit-1 messages instead of tracebacks."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ChainBroken as exc:
            fail(f"chain broken at seq {exc.broken_at}")
        except AgoraError as exc:
            fail(str(exc))

    return wrapper


class Workspace:
    """A CLI experiment directory: config, chain file, derived identities."""

    def __init__(self, config_path: Path):
        self.config_path = config_path
        self.root = config_path.parent
        doc = json.loads(config_path.read_text())
        self.doc = doc
        self.api = ApiConfig.load(config_path)
        self.population = PopulationSpec.from_dict(doc["population"])
        self.operator = operator_identity(self.population.seed)
        self.voters = population_identities(self.population)
        self.plan = assign([v.address for v in self.voters], self.population.seed)
        self.events_path = self.api.data_dir / "events.jsonl"

    def members(self, condition: Condition) -> list:
        return [v for v in self.voters if self.plan.assignment[v.address] == condition]

    def open_platform(self) -> Platform:
        if not self.events_path.exists():
            fail(f"no chain at {self.events_path}; run `agora init` first")
        with self.events_path.open() as fh:
            try:
                chain = import_jsonl(fh)
            except ChainBroken as exc:
                fail(f"chain is broken at seq {exc.broken_at}")
        last_ts = chain.events[-1].timestamp if len(chain) else 0
        clock = SimClock(start_ms=max(last_ts, SimClock().now_ms))
        platform = Platform.replay(
            chain, clock=clock, seed_case=self.api.load_seed_case(),
            room_capacity=self.api.room_capacity,
            min_user_turns=self.api.ai_min_turns,
            min_room_dwell_ms=self.api.room_dwell_ms,
        )
        platform.sink = self.events_path.open("a")
        platform.register_key(self.operator.public_key)
        for voter in self.voters:
            platform.register_key(voter.public_key)
            platform.condition_keys[voter.address] = \
                self.plan.assignment[voter.address].key
        return platform


def parse_conditions(flag: str) -> list[Condition]:
    if flag == "all":
        return list(CONDITIONS)
    if flag not in CONDITION_BY_KEY:
        fail(f"unknown condition {flag!r}; expected one of qe, qp, we, wp, all")
    return [CONDITION_BY_KEY[flag]]


condition_option = click.option(
    "--condition", default="all", show_default=True,
    help="Treatment condition: qe, qp, we, wp, or all.",
)
config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, path_type=Path),
    required=True, help="Workspace config file from `agora init`.",
)


@click.group()
def main():
    """Deliberation-and-voting governance platform tools."""


@main.command()
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True,
              help="Workspace directory to create.")
@click.option("--seed", default=7, show_default=True, help="Master RNG seed.")
@click.option("--n", "population_n", default=8, show_default=True,
              help="Synthetic population size.")
@click.option("--tokens-per-head", default=100, show_default=True)
@handle_errors
def init(out_dir: Path, seed: int, population_n: int, tokens_per_head: int):
    """Create a workspace: config, seed case, genesis chain, four spaces."""
    out_dir.mkdir(parents=True, exist_ok=True)
    data_dir = out_dir / "data"
    data_dir.mkdir(exist_ok=True)
    events_path = data_dir / "events.jsonl"
    if events_path.exists():
        fail(f"{events_path} already exists; refusing to reinitialize")

    seed_case_path = out_dir / "seedcase.json"
    seed_case_path.write_text(json.dumps({
        "interpretation_text": (
            "The assistant's summary of the debate clip: two candidates "
            "argue over healthcare policy; frequent interruptions; the "
            "moderator struggles to keep time."
        ),
        "value_question": "Do you find the interpretation useful?",
        "branch_seeds": {
            "yes": "You found it useful. Which part captured the clip best?",
            "no": "You did not find it useful. What did it miss?",
            "maybe": "You are on the fence. What would make it clearly useful?",
        },
        "suggested_topics": [
            "tone and emotion of the speakers",
            "factual accuracy of the summary",
            "what context was missing",
        ],
    }, indent=2))

    operator = operator_identity(seed)
    population = PopulationSpec(
        n=population_n,
        archetypes=tuple(
            Archetype(name=a["name"], weights=tuple(a["weights"]), mix=a["mix"])
            for a in DEFAULT_ARCHETYPES
        ),
        seed=seed,
        tokens_per_head=tokens_per_head,
    )
    plan = assign([v.address for v in population_identities(population)], seed)

    spaces = []
    for condition in CONDITIONS:
        count = plan.counts[condition]
        space = space_for_condition(condition, operator.address, count,
                                    tokens_per_head, seed)
        spaces.append({
            "id": space.id,
            "voting_method": space.voting_method.value,
            "power_policy": {
                "kind": space.power_policy.kind.value,
                "total_supply": space.power_policy.total_supply,
                "rng_seed": space.power_policy.rng_seed,
            },
            "admins": [operator.address],
            "vote_duration_ms": space.vote_duration,
            "success_threshold": str(space.success_threshold),
        })

    config_path = out_dir / "config.json"
    config_path.write_text(json.dumps({
        "host": "127.0.0.1",
        "port": 8400,
        "data_dir": str(data_dir),
        "seed_case_path": str(seed_case_path),
        "room_capacity": 10,
        "rng_seed": seed,
        "ai_min_turns": 3,
        "room_dwell_ms": 5 * 60 * 1000,
        "responder": {"kind": "stub", "timeout_s": 15},
        "population": {
            "n": population_n,
            "seed": seed,
            "tokens_per_head": tokens_per_head,
            "archetypes": list(DEFAULT_ARCHETYPES),
            "options": list(STUDY_OPTIONS),
        },
        "spaces": spaces,
    }, indent=2))

    events_path.touch()
    workspace = Workspace(config_path)
    platform = workspace.open_platform()
    for doc in workspace.api.spaces:
        platform.create_space(space_from_config(doc), operator.address)
    click.echo(f"workspace ready: {config_path}")
    click.echo(f"operator address: {operator.address}")
    for condition in CONDITIONS:
        click.echo(f"  {condition.key}: space sim-{condition.key}, "
                   f"{plan.counts[condition]} participants")


@main.command()
@config_option
@condition_option
@handle_errors
def mint(config_path: Path, condition: str):
    """Mint each condition's token supply to its participants."""
    workspace = Workspace(config_path)
    platform = workspace.open_platform()
    for cond in parse_conditions(condition):
        members = workspace.members(cond)
        grants = platform.mint(f"sim-{cond.key}", [m.address for m in members],
                               workspace.operator.address)
        click.echo(f"{cond.key}: minted {sum(grants.values())} tokens "
                   f"to {len(grants)} participants")


@main.command(name="open")
@config_option
@condition_option
@handle_errors
def open_cmd(config_path: Path, condition: str):
    """Open the study proposal in each condition's space."""
    workspace = Workspace(config_path)
    platform = workspace.open_platform()
    options = list(workspace.population.options)
    for cond in parse_conditions(condition):
        proposal = platform.open_proposal(
            f"sim-{cond.key}", f"prop-{cond.key}", options,
            workspace.operator.address,
        )
        click.echo(f"{cond.key}: proposal {proposal.id} open until {proposal.close_at}")


@main.command()
@config_option
@condition_option
@handle_errors
def simulate(config_path: Path, condition: str):
    """Deliberate and cast signed ballots for the synthetic population."""
    workspace = Workspace(config_path)
    platform = workspace.open_platform()
    spec = workspace.population
    labels = archetype_labels(spec)
    index_of = {v.address: i for i, v in enumerate(workspace.voters)}
    surveys_path = workspace.root / "surveys.json"
    surveys = json.loads(surveys_path.read_text()) if surveys_path.exists() else {}

    for cond in parse_conditions(condition):
        members = workspace.members(cond)
        rng = random.Random(spec.seed * 7919 + CONDITIONS.index(cond))
        deliberate_cohort(platform, members, rng)
        proposal = platform.proposal(f"prop-{cond.key}")
        snapshot = platform.snapshots[proposal.id]
        accepted = 0
        for voter in members:
            archetype = spec.archetypes[labels[index_of[voter.address]]]
            ballot = ballot_for(
                voter, proposal.id, snapshot.balances[voter.address],
                archetype.weights, platform.clock(),
            )
            outcome = platform.cast_ballot(ballot)
            if isinstance(outcome, RejectionReason):
                fail(f"{cond.key}: ballot from {voter.address} rejected: {outcome.value}")
            platform.advance_session(voter.address, SessionEvent.BALLOT_ACCEPTED)
            accepted += 1
        survey_rng = random.Random(spec.seed * 31 + CONDITIONS.index(cond))
        surveys[cond.key] = [
            {
                "participant": v.address,
                "likert": {"satisfaction": survey_rng.randint(3, 5)},
                "vdem": {dim: survey_rng.randint(1, 5) for dim in VDEM_DIMENSIONS},
            }
            for v in members
        ]
        click.echo(f"{cond.key}: {accepted} ballots accepted")
    surveys_path.write_text(json.dumps(surveys, indent=2))


@main.command()
@config_option
@condition_option
@click.option("--force", is_flag=True, help="Admin force-close before the deadline.")
@handle_errors
def close(config_path: Path, condition: str, force: bool):
    """Close each condition's proposal (at its deadline, or forced)."""
    workspace = Workspace(config_path)
    platform = workspace.open_platform()
    for cond in parse_conditions(condition):
        proposal = platform.proposal(f"prop-{cond.key}")
        now = None if force else proposal.close_at
        closed = platform.close(proposal.id, workspace.operator.address,
                                now=now, force=force)
        click.echo(f"{cond.key}: proposal {closed.id} closed")


@main.command()
@config_option
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Report directory (defaults to <workspace>/out).")
@handle_errors
def report(config_path: Path, out_dir: Path | None):
    """Publish results and export the summary and regression tables."""
    workspace = Workspace(config_path)
    platform = workspace.open_platform()
    out = out_dir or (workspace.root / "out")
    out.mkdir(parents=True, exist_ok=True)

    ballots_by_condition = {}
    results = {}
    for cond in CONDITIONS:
        pid = f"prop-{cond.key}"
        if pid not in platform.proposals:
            fail(f"{cond.key}: proposal missing; run the pipeline first")
        ballots = platform.ballots.get(pid, [])
        if not ballots:
            fail(f"{cond.key}: EMPTY — no accepted ballots to report")
        ballots_by_condition[cond] = ballots
        proposal = platform.proposal(pid)
        if proposal.status.value != "PUBLISHED":
            results[cond.key] = platform.publish(pid, workspace.operator.address)
        else:
            results[cond.key] = platform.results[pid]

    # Table-3-shaped per-condition ratio summary
    cells = condition_summary(ballots_by_condition)
    with (out / "summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "choice", "mean", "std", "n"])
        for cell in cells:
            writer.writerow([
                cell.condition.key, cell.choice + 1,
                f"{cell.mean:.6f}", f"{cell.std:.6f}", cell.n,
            ])

    # surveys: likert/vdem summaries and the interaction regression
    surveys_path = workspace.root / "surveys.json"
    if surveys_path.exists():
        raw = json.loads(surveys_path.read_text())
        responses = {
            CONDITION_BY_KEY[key]: [
                SurveyResponse(participant=r["participant"],
                               likert_items=r["likert"], vdem_items=r["vdem"])
                for r in rows
            ]
            for key, rows in raw.items()
        }
        with (out / "likert.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["condition", "mean_satisfaction", "n"])
            for cond, mean in likert_summary(responses).items():
                writer.writerow([cond.key, f"{mean:.6f}", len(responses[cond])])
        with (out / "vdem.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dimension", "condition", "mean", "n"])
            for cell in vdem_aggregate(responses):
                writer.writerow([cell.dimension, cell.condition.key,
                                 f"{cell.mean:.6f}", cell.n])

        # satisfaction ~ quadratic + equal-power + their interaction
        X, y = [], []
        for cond, rows in responses.items():
            is_quadratic = 1.0 if cond.key.startswith("q") else 0.0
            is_same = 1.0 if cond.key.endswith("e") else 0.0
            for response in rows:
                X.append([1.0, is_quadratic, is_same, is_quadratic * is_same])
                y.append(float(response.likert_items["satisfaction"]))
        fit = ols_fit(X, y)
        terms = ["intercept", "quadratic", "same", "quadratic_x_same"]
        with (out / "regression.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["term", "coef", "se", "t", "p"])
            for term, coef, se, t, p in zip(terms, fit.coefficients,
                                            fit.standard_errors, fit.t_stats,
                                            fit.p_values):
                writer.writerow([term, f"{coef:.6f}", f"{se:.6f}",
                                 f"{t:.6f}", f"{p:.6f}"])

    with (out / "results.json").open("w") as fh:
        json.dump({
            key: {
                "scores": list(r.scores),
                "turnout": r.turnout,
                "winners": list(r.winners),
                "is_tie": r.is_tie,
                "succeeded": list(r.succeeded),
            } for key, r in results.items()
        }, fh, indent=2)

    for key, r in results.items():
        label = "TIE " + str(list(r.winners)) if r.is_tie else f"option {r.winners[0] + 1}"
        click.echo(f"{key}: winner {label}, turnout {r.turnout}")
    click.echo(f"reports written to {out}")


@main.command(name="verify-chain")
@config_option
def verify_chain_cmd(config_path: Path):
    """Verify the workspace event log end to end; exit 1 when broken."""
    workspace = Workspace(config_path)
    if not workspace.events_path.exists():
        fail(f"no chain at {workspace.events_path}")
    with workspace.events_path.open() as fh:
        try:
            chain = import_jsonl(fh)
        except ChainBroken as exc:
            fail(f"chain broken at seq {exc.broken_at}")
        except AgoraError as exc:
            fail(str(exc))
    click.echo(f"chain OK: {len(chain)} events, head {chain.head_hash().hex()[:16]}…")


@main.command()
@config_option
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
@handle_errors
def compare(config_path: Path, out_dir: Path | None):
    """Compare weighted vs quadratic outcomes on the same population."""
    workspace = Workspace(config_path)
    comparison = compare_methods(workspace.population)
    doc = {
        "winner_agreement_rate": comparison.agreement_rate,
        "score_share_deltas": {k: list(v) for k, v in comparison.score_share_deltas.items()},
        "whale_influence": dict(comparison.whale_influence),
    }
    click.echo(json.dumps(doc, indent=2))
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "compare.json").write_text(json.dumps(doc, indent=2))


@main.command()
@config_option
def serve(config_path: Path):
    """Run the HTTP gateway on this workspace."""
    from .gateway import serve as serve_gateway

    try:
        serve_gateway(ApiConfig.load(config_path))
    except ChainBroken as exc:
        fail(f"refusing to start: chain broken at seq {exc.broken_at}")


if __name__ == "__main__":
    main()
