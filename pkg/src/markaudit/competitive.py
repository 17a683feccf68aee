"""Competitive audits: adjudicating rival cast-vote record tables.

Each advocate submits a set-valued CVR advancing a claim about the election.
The judge settles contradictions by sampling a fixed number of ballots from
the identifiers the two tables disagree on, collecting disqualification
votes.  Delivered ballots can disqualify a table; withheld ballots never do
(negative evidence is worthless against a suppressing adversary).

The total number of ballot requests is at most t * k * (k - 1) regardless of
margins, sizes, or environment behavior.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .cvr import ConservativeCvr, conservative_declared_outcome, contradictory
from .engine import Environment, EnvResponse
from .model import Interpretation


@dataclass(frozen=True)
class DisagreementAnalysis:
    """Identifiers on which an ordered pair of tables make incompatible claims."""

    omission: frozenset[str]  # declared by the first, absent from the second
    conflict: frozenset[str]  # shared ids with disjoint interpretation sets

    @property
    def disagree(self) -> frozenset[str]:
        return self.omission | self.conflict


@lru_cache(maxsize=2048)
def disagreement(
    cvr_a: ConservativeCvr, cvr_b: ConservativeCvr
) -> DisagreementAnalysis:
    if cvr_a.candidates != cvr_b.candidates:
        raise ValueError("CVRs declare different candidate sets")
    idents_a, idents_b = cvr_a.idents, cvr_b.idents
    omission = idents_a - idents_b
    rows_b = dict(cvr_b.rows)
    conflict = frozenset(
        ident
        for ident, interps in cvr_a.rows
        if ident in rows_b and not (interps & rows_b[ident])
    )
    return DisagreementAnalysis(omission=frozenset(omission), conflict=conflict)


def disqualification_vote(
    ident: str,
    realized: Optional[Interpretation],
    cvr: ConservativeCvr,
) -> int:
    """1 iff a real ballot arrived and its reading is outside the table's claim
    for that identifier (or the identifier is missing from the table)."""
    if realized is None:
        return 0
    rows = dict(cvr.rows)
    declared = rows.get(ident)
    if declared is None or realized not in declared:
        return 1
    return 0


@dataclass(frozen=True)
class PairRecord:
    """One contradictory ordered pair's sampling round (votes tally against
    the second table of the pair)."""

    against: str
    by: str
    requested: tuple[str, ...]
    responses: tuple[Optional[str], ...]  # interpretation strings, None = no ballot
    votes: int
    disqualified: bool


@dataclass(frozen=True)
class CompetitiveVerdict:
    outcome: str  # "winner" | "inconclusive"
    winner: Optional[str]
    disqualified: frozenset[str]
    pair_records: tuple[PairRecord, ...]
    ballots_requested: int
    dropped_malformed: frozenset[str] = field(default_factory=frozenset)
    guard_failure: Optional[str] = None

    def to_json(self) -> str:
        doc = {
            "schema_version": "1",
            "outcome": self.outcome,
            "winner": self.winner,
            "disqualified": sorted(self.disqualified),
            "dropped_malformed": sorted(self.dropped_malformed),
            "guard_failure": self.guard_failure,
            "ballots_requested": self.ballots_requested,
            "pairs": [
                {
                    "by": p.by,
                    "against": p.against,
                    "requested": list(p.requested),
                    "responses": list(p.responses),
                    "votes": p.votes,
                    "disqualified": p.disqualified,
                }
                for p in self.pair_records
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


@dataclass(frozen=True)
class JudgeConfig:
    """t calibrates robustness to advocacy errors; odd values avoid the
    even-split tie, which never disqualifies."""

    t: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError("t must be a positive integer")


class CompetitiveJudgeMachine:
    """The constant-sample adjudicator as a request/response state machine.

    The whole request schedule is fixed up front: contradictory pairs among
    the size-surviving tables are processed in label order, and
    disqualification is judged against that same starting set, so later
    removals never change which ballots get requested.
    """

    def __init__(
        self,
        config: JudgeConfig,
        candidates: Sequence[str],
        manifest_size: int,
        cvrs: Sequence[tuple[str, ConservativeCvr]],
        rng: Optional[np.random.Generator] = None,
    ):
        if not cvrs:
            raise ValueError("at least one CVR required")
        labels = [label for label, _ in cvrs]
        if len(set(labels)) != len(labels):
            raise ValueError("CVR labels must be distinct")
        expected = tuple(sorted(set(candidates)))
        for label, table in cvrs:
            if table.candidates != expected:
                raise ValueError(f"CVR {label!r} declares a different candidate set")
        self.config = config
        self.candidates = expected
        self.labels = tuple(labels)
        self.tables = dict(cvrs)
        self._rows_by_label = {
            label: dict(table.rows) for label, table in self.tables.items()
        }
        self.k = len(cvrs)
        self.manifest_size = manifest_size
        self.verdict: Optional[CompetitiveVerdict] = None
        self._records: list[PairRecord] = []
        self._requests: list[tuple[str, str, str]] = []  # (by, against, ident)
        self._responses: list[Optional[Interpretation]] = []
        self._cursor = 0
        self._dropped: frozenset[str] = frozenset()
        ids_child, self._env_ss = np.random.SeedSequence(config.seed).spawn(2)

        if any(c.duplicate_labels_announced for c in self.tables.values()):
            self._conclude_inconclusive("duplicate labels announced")
            return

        # wrong-size tables are out; so are ones with repeated identifiers,
        # which are malformed as CVRs (rows must carry distinct labels)
        survivors = [
            label
            for label in self.labels
            if self.tables[label].size == manifest_size
            and not self.tables[label].has_repeated_idents
        ]
        self._dropped = frozenset(self.labels) - frozenset(survivors)
        self._survivors_at_entry = tuple(survivors)

        rng = rng or np.random.Generator(np.random.PCG64(ids_child))
        for by, against in itertools.permutations(sorted(survivors), 2):
            if not contradictory(self.tables[by], self.tables[against]):
                continue
            pool = sorted(disagreement(self.tables[by], self.tables[against]).disagree)
            if not pool:
                raise AssertionError(
                    f"contradictory same-size tables {by!r}/{against!r} with an "
                    f"empty disagreement set"
                )
            for _ in range(config.t):
                ident = pool[int(rng.integers(0, len(pool)))]
                self._requests.append((by, against, ident))
        assert len(self._requests) <= config.t * self.k * (self.k - 1)
        if not self._requests:
            self._finish()

    # -- driving ---------------------------------------------------------------

    @property
    def concluded(self) -> bool:
        return self.verdict is not None

    @property
    def requested_id(self) -> Optional[str]:
        if self.concluded or self._cursor >= len(self._requests):
            return None
        return self._requests[self._cursor][2]

    @property
    def current_pair(self) -> Optional[tuple[str, str]]:
        if self.concluded or self._cursor >= len(self._requests):
            return None
        by, against, _ = self._requests[self._cursor]
        return by, against

    @property
    def request_index(self) -> int:
        return self._cursor

    def submit(self, realized: Optional[Interpretation]) -> None:
        """Record the environment's answer to the outstanding request."""
        if self.concluded:
            raise RuntimeError("audit already concluded")
        self._responses.append(realized)
        self._cursor += 1
        if self._cursor == len(self._requests):
            self._finish()

    def env_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._env_ss))

    def pair_tallies(self) -> list[PairRecord]:
        """Per-pair tallies over the responses received so far."""
        records: list[PairRecord] = []
        i = 0
        t = self.config.t
        while i < len(self._requests):
            by, against, _ = self._requests[i]
            chunk = self._requests[i : i + t]
            answered = self._responses[i : i + t]
            rows_against = self._rows_by_label[against]
            votes = 0
            for (_, _, ident), realized in zip(chunk, answered):
                if realized is None:
                    continue
                declared = rows_against.get(ident)
                if declared is None or realized not in declared:
                    votes += 1
            records.append(
                PairRecord(
                    against=against,
                    by=by,
                    requested=tuple(ident for _, _, ident in chunk),
                    responses=tuple(
                        r.as_string() if r is not None else None for r in answered
                    ),
                    votes=votes,
                    disqualified=votes > t / 2,
                )
            )
            i += t
        return records

    def _conclude_inconclusive(self, reason: str) -> None:
        self.verdict = CompetitiveVerdict(
            outcome="inconclusive",
            winner=None,
            disqualified=frozenset(),
            pair_records=tuple(self._records),
            ballots_requested=0,
            dropped_malformed=self._dropped,
            guard_failure=reason,
        )

    def _finish(self) -> None:
        records = self.pair_tallies()
        disqualified = frozenset(r.against for r in records if r.disqualified)
        remaining = [s for s in self._survivors_at_entry if s not in disqualified]
        winner = self._extract_winner(remaining)
        self.verdict = CompetitiveVerdict(
            outcome="inconclusive" if winner is None else "winner",
            winner=winner,
            disqualified=disqualified,
            pair_records=tuple(records),
            ballots_requested=len(self._responses),
            dropped_malformed=self._dropped,
        )

    def _extract_winner(self, remaining: list[str]) -> Optional[str]:
        for a, b in itertools.combinations(remaining, 2):
            if contradictory(self.tables[a], self.tables[b]):
                return None
        declared = {
            label: conservative_declared_outcome(self.tables[label]).winner
            for label in remaining
        }
        victors = {w for w in declared.values() if w is not None}
        if not victors:
            return None
        # distinct declared winners would contradict each other, so at most one
        assert len(victors) == 1, f"multiple uncontradicted winners: {victors}"
        return next(iter(victors))


def adjudicate(
    config: JudgeConfig,
    candidates: Sequence[str],
    manifest_size: int,
    cvrs: Sequence[tuple[str, ConservativeCvr]],
    env: Environment,
) -> CompetitiveVerdict:
    """Run the full competitive audit against an in-process environment."""
    machine = CompetitiveJudgeMachine(config, candidates, manifest_size, cvrs)
    rng = machine.env_rng()
    while not machine.concluded:
        response: EnvResponse = env.respond(machine.requested_id, rng)
        if (
            not response.delivered
            or response.found_id != machine.requested_id
            or response.interpretation is None
            or response.interpretation not in response.ballot.support()
        ):
            machine.submit(None)
        else:
            machine.submit(response.interpretation)
    return machine.verdict


class ColludingEnvironment:
    """The strongest legal ally of one submitted table: suppresses every
    ballot whose possible readings would all vote against it, and otherwise
    returns a reading the favored table declared."""

    def __init__(self, election, favored: ConservativeCvr):
        self._by_id = {b.id: b for b in election.ballots}
        self._declared = dict(favored.rows)

    def respond(self, ident: str, rng: np.random.Generator) -> EnvResponse:
        ballot = self._by_id.get(ident)
        if ballot is None:
            return EnvResponse()
        declared = self._declared.get(ident)
        if declared is None:
            return EnvResponse()  # any delivery would disqualify the ally
        compatible = sorted(ballot.support() & declared)
        if not compatible:
            return EnvResponse()
        return EnvResponse(
            ballot=ballot, found_id=ident, interpretation=compatible[0]
        )


# -- tail bounds -----------------------------------------------------------------


def binomial_tail(rate: float, t: int) -> float:
    """P[X >= t/2] for X ~ Binomial(t, rate), by exact summation."""
    if not 0 <= rate <= 1:
        raise ValueError("rate must lie in [0, 1]")
    if t < 1:
        raise ValueError("t must be positive")
    k_min = math.ceil(t / 2)
    return math.fsum(
        math.comb(t, k) * rate**k * (1 - rate) ** (t - k) for k in range(k_min, t + 1)
    )


@dataclass(frozen=True)
class AdvocacyErrorBounds:
    completeness_failure_bound: float
    soundness_failure_bound: float


def theorem_bounds(k: int, t: int, epsilon: float, mu_star: float) -> AdvocacyErrorBounds:
    """Failure bounds when the good table is only (1-epsilon)-consistent.

    Requires mu_star > 4 * epsilon (otherwise the bound is vacuous).  Both
    failure modes share the same 2(k-1) * tail(2 eps / mu_star) bound.
    """
    if k < 1 or t < 1:
        raise ValueError("k and t must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon > 0 and not mu_star > 4 * epsilon:
        raise ValueError(f"need mu_star > 4*epsilon, got {mu_star} <= {4 * epsilon}")
    bound = min(1.0, 2 * (k - 1) * binomial_tail(2 * epsilon / mu_star, t))
    return AdvocacyErrorBounds(
        completeness_failure_bound=bound, soundness_failure_bound=bound
    )
