"""Comparison-audit game: auditor, environments, transcripts.

The auditor repeatedly asks an untrusted environment for ballots by
identifier, turns each response into a discrepancy sample, and feeds a
sequential test.  All structural anomalies (wrong table size, repeated
identifiers, no declared winner, missing or mislabeled ballots) fold into the
verdict rather than raising: the audit answers Consistent or Inconclusive, it
does not crash on a hostile counterparty.

``ComparisonAuditMachine`` exposes the auditor as a request/response state
machine so the same code drives in-process simulations, the CLI, and the
live HTTP service (where a human audit board plays the environment).

Randomness is split into independent child streams (row selection, ground
truth realization, environment whims) so an adversarial environment cannot
influence which rows get sampled.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Union

import numpy as np

from .cvr import (
    BayesianCvr,
    ConservativeCvr,
    bayesian_declared_outcome,
    conservative_declared_outcome,
)
from .model import Ballot, Election, Interpretation
from .stattest import KaplanMarkovConfig, KaplanMarkovRun

CONSISTENT = "Consistent"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class TestSettings:
    """Test family parameters; delta comes from the CVR's declared margin."""

    __test__ = False  # not a pytest class, despite the name

    alpha: float = 0.05
    gamma: float = 1.1
    max_draws: Optional[int] = None


@dataclass(frozen=True)
class EnvResponse:
    """What the environment hands back for one ballot request."""

    ballot: Optional[Ballot] = None
    found_id: Optional[str] = None
    interpretation: Optional[Interpretation] = None  # environment's pick (set mode)

    @property
    def delivered(self) -> bool:
        return self.ballot is not None


class Environment(Protocol):
    def respond(self, ident: str, rng: np.random.Generator) -> EnvResponse: ...


@dataclass(frozen=True)
class TranscriptEntry:
    iteration: int
    requested_id: str
    response: str  # "ballot" | "no_ballot" | "wrong_id"
    interpretation: Optional[str]
    discrepancy: float
    risk: float


@dataclass(frozen=True)
class AuditTranscript:
    mode: str
    seed: int
    delta: float
    alpha: float
    gamma: float
    max_draws: int
    entries: tuple[TranscriptEntry, ...]
    verdict: str
    guard_failure: Optional[str] = None

    @property
    def draws(self) -> int:
        return len(self.entries)

    @property
    def final_risk(self) -> float:
        return self.entries[-1].risk if self.entries else 1.0

    def to_json(self) -> str:
        doc = {
            "schema_version": "1",
            "mode": self.mode,
            "seed": self.seed,
            "test": {
                "delta": self.delta,
                "alpha": self.alpha,
                "gamma": self.gamma,
                "max_draws": self.max_draws,
            },
            "guard_failure": self.guard_failure,
            "entries": [
                {
                    "iteration": e.iteration,
                    "requested_id": e.requested_id,
                    "response": e.response,
                    "interpretation": e.interpretation,
                    "discrepancy": e.discrepancy,
                    "risk": e.risk,
                }
                for e in self.entries
            ],
            "draws": self.draws,
            "verdict": self.verdict,
        }
        return json.dumps(doc, indent=2) + "\n"


# -- per-row claim terms -------------------------------------------------------


def bayesian_claim_terms(
    cvr: BayesianCvr, row: int, winner_index: int
) -> tuple[float, ...]:
    """Predicted winner advantage over each rival for one row."""
    dist = cvr.rows[row][1]
    p_w = dist.expected_vote(winner_index)
    return tuple(
        p_w - dist.expected_vote(a)
        for a in range(len(cvr.candidates))
        if a != winner_index
    )


def conservative_claim_terms(
    cvr: ConservativeCvr, row: int, winner_index: int
) -> tuple[float, ...]:
    """Worst-case declared winner advantage: the row's least favorable
    interpretation for the winner against each rival's most favorable."""
    low_w = cvr.row_bounds(row, winner_index)[0]
    return tuple(
        low_w - cvr.row_bounds(row, a)[1]
        for a in range(len(cvr.candidates))
        if a != winner_index
    )


def act_value(
    claim_terms: tuple[float, ...],
    realized: Optional[Interpretation],
    winner_index: int,
) -> float:
    """One experiment's discrepancy sample; missing ballot adds one."""
    if realized is None:
        return max(claim_terms) + 1.0
    rivals = [a for a in range(len(realized) ) if a != winner_index]
    r_w = realized.bits[winner_index]
    return max(
        term - (r_w - realized.bits[a]) for term, a in zip(claim_terms, rivals)
    )


# -- the auditor as a state machine --------------------------------------------

AWAITING = "awaiting_ballot"
CONCLUDED = "concluded"


class ComparisonAuditMachine:
    """Single-race comparison auditor, driven one ballot response at a time.

    Rejects up front (verdict Inconclusive, zero draws) when the table has
    repeated identifiers, the wrong size, or no declared winner; otherwise
    requests uniformly chosen rows until the test stops.
    """

    def __init__(
        self,
        cvr: Union[BayesianCvr, ConservativeCvr],
        manifest_size: int,
        settings: TestSettings,
        seed: int,
    ):
        self.cvr = cvr
        self.mode = "bayesian" if isinstance(cvr, BayesianCvr) else "conservative"
        self.manifest_size = manifest_size
        self.settings = settings
        self.seed = seed
        self.max_draws = (
            settings.max_draws if settings.max_draws is not None else manifest_size
        )
        self.entries: list[TranscriptEntry] = []
        self.verdict: Optional[str] = None
        self.guard_failure: Optional[str] = None
        self.requested_row: Optional[int] = None
        self._winner_index: Optional[int] = None
        self.delta = 0.0

        rows_ss, self._truth_ss, self._env_ss = np.random.SeedSequence(seed).spawn(3)
        self._rows_rng = np.random.Generator(np.random.PCG64(rows_ss))

        if cvr.has_repeated_idents:
            self._conclude_early("repeated identifiers")
            return
        if cvr.size != manifest_size:
            self._conclude_early(
                f"size mismatch: table {cvr.size}, manifest {manifest_size}"
            )
            return
        if isinstance(cvr, BayesianCvr):
            outcome = bayesian_declared_outcome(cvr)
        else:
            outcome = conservative_declared_outcome(cvr)
        if outcome.winner is None:
            self._conclude_early("no declared winner")
            return
        self.winner = outcome.winner
        self._winner_index = cvr.candidates.index(outcome.winner)
        self.delta = outcome.margin
        self._run = KaplanMarkovRun(
            KaplanMarkovConfig(
                delta=self.delta,
                gamma=settings.gamma,
                alpha=settings.alpha,
                max_draws=self.max_draws,
            )
        )
        self._next_request()

    def _conclude_early(self, reason: str) -> None:
        self.guard_failure = reason
        self.verdict = INCONCLUSIVE

    @property
    def state(self) -> str:
        return CONCLUDED if self.verdict is not None else AWAITING

    @property
    def concluded(self) -> bool:
        return self.verdict is not None

    @property
    def requested_id(self) -> Optional[str]:
        if self.requested_row is None:
            return None
        return self.cvr.rows[self.requested_row][0]

    @property
    def request_index(self) -> int:
        """Index of the outstanding request (== draws completed so far)."""
        return len(self.entries)

    def _next_request(self) -> None:
        self.requested_row = int(self._rows_rng.integers(0, self.cvr.size))

    def _claim_terms(self, row: int) -> tuple[float, ...]:
        if isinstance(self.cvr, BayesianCvr):
            return bayesian_claim_terms(self.cvr, row, self._winner_index)
        return conservative_claim_terms(self.cvr, row, self._winner_index)

    def submit(
        self,
        kind: str,
        interpretation: Optional[Interpretation] = None,
    ) -> None:
        """Apply one environment/board response to the outstanding request.

        kind: "interpretation" (ballot found, bits supplied), "no_ballot", or
        "wrong_id" (a ballot with a different label turned up; treated as
        missing).
        """
        if self.concluded:
            raise RuntimeError("audit already concluded")
        if kind == "interpretation":
            if interpretation is None:
                raise ValueError("interpretation response needs bits")
            if len(interpretation) != len(self.cvr.candidates):
                raise ValueError("interpretation width mismatch")
            realized: Optional[Interpretation] = interpretation
            response = "ballot"
        elif kind == "no_ballot":
            realized = None
            response = "no_ballot"
        elif kind == "wrong_id":
            realized = None
            response = "wrong_id"
        else:
            raise ValueError(f"unknown response kind {kind!r}")

        row = self.requested_row
        act = act_value(self._claim_terms(row), realized, self._winner_index)
        self._run.update(act)
        self.entries.append(
            TranscriptEntry(
                iteration=len(self.entries) + 1,
                requested_id=self.cvr.rows[row][0],
                response=response,
                interpretation=realized.as_string() if realized else None,
                discrepancy=act,
                risk=self._run.risk,
            )
        )
        if self._run.stopped:
            self.verdict = CONSISTENT if self._run.rejects else INCONCLUSIVE
            self.requested_row = None
        else:
            self._next_request()

    def risk_trajectory(self) -> tuple[float, ...]:
        return tuple(e.risk for e in self.entries)

    @property
    def current_risk(self) -> float:
        return self.entries[-1].risk if self.entries else 1.0

    def transcript(self) -> AuditTranscript:
        if not self.concluded:
            raise RuntimeError("audit still in progress")
        return AuditTranscript(
            mode=self.mode,
            seed=self.seed,
            delta=self.delta,
            alpha=self.settings.alpha,
            gamma=self.settings.gamma,
            max_draws=self.max_draws,
            entries=tuple(self.entries),
            verdict=self.verdict,
            guard_failure=self.guard_failure,
        )

    # RNG streams for the in-process game harness
    def truth_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._truth_ss))

    def env_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._env_ss))


# -- environments ---------------------------------------------------------------


class HonestEnvironment:
    """Always returns a matching ballot when one exists; interpretation picks
    (set mode) are uniform over the ballot's possibilities."""

    def __init__(self, election: Election):
        self._by_id: dict[str, list[Ballot]] = {}
        for b in election.ballots:
            self._by_id.setdefault(b.id, []).append(b)

    def _pick_ballot(self, ident: str, rng: np.random.Generator) -> Optional[Ballot]:
        matching = self._by_id.get(ident)
        if not matching:
            return None
        if len(matching) == 1:
            return matching[0]
        return matching[int(rng.integers(0, len(matching)))]

    def respond(self, ident: str, rng: np.random.Generator) -> EnvResponse:
        ballot = self._pick_ballot(ident, rng)
        if ballot is None:
            return EnvResponse()
        interps = sorted(ballot.support())
        choice = interps[int(rng.integers(0, len(interps)))]
        return EnvResponse(ballot=ballot, found_id=ballot.id, interpretation=choice)


class SuppressEnvironment(HonestEnvironment):
    """Withholds ballots: always for listed ids, or independently at a rate."""

    def __init__(self, election: Election, ids=None, rate: Optional[float] = None):
        super().__init__(election)
        if ids is None and rate is None:
            rate = 1.0  # suppress everything by default
        self.ids = frozenset(ids) if ids is not None else None
        self.rate = rate

    def respond(self, ident: str, rng: np.random.Generator) -> EnvResponse:
        if self.ids is not None and ident in self.ids:
            return EnvResponse()
        if self.rate is not None and rng.random() < self.rate:
            return EnvResponse()
        return super().respond(ident, rng)


class MislabelEnvironment(HonestEnvironment):
    """Delivers a ballot whose label differs from the request (the auditor
    treats that as a missing ballot)."""

    POLICIES = ("shift",)

    def __init__(self, election: Election, policy: str = "shift"):
        if policy not in self.POLICIES:
            raise ValueError(f"unknown mislabel policy {policy!r}")
        super().__init__(election)
        self._ballots = election.ballots

    def respond(self, ident: str, rng: np.random.Generator) -> EnvResponse:
        honest = super().respond(ident, rng)
        if not honest.delivered:
            return honest
        # hand over the next ballot in storage order instead
        idx = next(i for i, b in enumerate(self._ballots) if b.id == honest.found_id)
        other = self._ballots[(idx + 1) % len(self._ballots)]
        if other.id == ident:
            return honest
        interps = sorted(other.support())
        choice = interps[int(rng.integers(0, len(interps)))]
        return EnvResponse(ballot=other, found_id=other.id, interpretation=choice)


class WorstInterpretationEnvironment(HonestEnvironment):
    """Set-mode adversary steering interpretation choices against the audit.

    direction "confirm" (default) picks the reading that minimizes each
    discrepancy sample, pushing the audit toward affirming the table (the
    soundness threat); "stall" maximizes samples to drag the audit out (the
    completeness threat).
    """

    def __init__(self, election: Election, cvr: ConservativeCvr, direction: str = "confirm"):
        if direction not in ("confirm", "stall"):
            raise ValueError(f"unknown direction {direction!r}")
        super().__init__(election)
        self.cvr = cvr
        self.direction = direction
        outcome = conservative_declared_outcome(cvr)
        self._winner_index = (
            cvr.candidates.index(outcome.winner) if outcome.winner else 0
        )
        self._row_by_id = {ident: i for i, (ident, _) in enumerate(cvr.rows)}

    def respond(self, ident: str, rng: np.random.Generator) -> EnvResponse:
        ballot = self._pick_ballot(ident, rng)
        if ballot is None:
            return EnvResponse()
        row = self._row_by_id.get(ident)
        interps = sorted(ballot.support())
        if row is None:
            choice = interps[0]
        else:
            terms = conservative_claim_terms(self.cvr, row, self._winner_index)
            pick = min if self.direction == "confirm" else max
            choice = pick(
                interps, key=lambda i: act_value(terms, i, self._winner_index)
            )
        return EnvResponse(ballot=ballot, found_id=ballot.id, interpretation=choice)


def make_environment(kind: str, election: Election, **params):
    """Factory for the named environment families."""
    if kind == "honest":
        return HonestEnvironment(election)
    if kind == "suppress":
        return SuppressEnvironment(
            election, ids=params.get("ids"), rate=params.get("rate")
        )
    if kind == "mislabel":
        return MislabelEnvironment(election, policy=params.get("policy", "shift"))
    if kind == "worst":
        cvr = params.get("cvr")
        if not isinstance(cvr, ConservativeCvr):
            raise ValueError("worst-interpretation environment needs a set-valued CVR")
        return WorstInterpretationEnvironment(
            election, cvr, direction=params.get("direction", "confirm")
        )
    raise ValueError(f"unknown environment kind {kind!r}")


# -- in-process game harness ------------------------------------------------------


def _drive(
    machine: ComparisonAuditMachine,
    election: Election,
    env: Environment,
    sample_truth: bool,
) -> AuditTranscript:
    truth_rng = machine.truth_rng()
    env_rng = machine.env_rng()
    while not machine.concluded:
        response = env.respond(machine.requested_id, env_rng)
        if not response.delivered:
            machine.submit("no_ballot")
        elif response.found_id != machine.requested_id:
            machine.submit("wrong_id")
        elif sample_truth:
            # probabilistic game: the realized reading is drawn fresh from the
            # ballot's ground truth, not chosen by the environment
            ballot = response.ballot
            if ballot.dist is None:
                raise ValueError(f"ballot {ballot.id!r} lacks a distribution")
            realized = ballot.dist.sample(truth_rng.random())
            machine.submit("interpretation", realized)
        else:
            interp = response.interpretation
            if interp is None or interp not in response.ballot.support():
                raise ValueError(
                    f"environment returned an impossible interpretation for "
                    f"ballot {response.ballot.id!r}"
                )
            machine.submit("interpretation", interp)
    return machine.transcript()


def run_bayesian_audit(
    election: Election,
    cvr: BayesianCvr,
    env: Environment,
    settings: TestSettings,
    seed: int,
) -> AuditTranscript:
    """Full probabilistic comparison audit against one environment."""
    machine = ComparisonAuditMachine(
        cvr, manifest_size=election.size, settings=settings, seed=seed
    )
    if machine.concluded:
        return machine.transcript()
    return _drive(machine, election, env, sample_truth=True)


def run_conservative_audit(
    election: Election,
    cvr: ConservativeCvr,
    env: Environment,
    settings: TestSettings,
    seed: int,
) -> AuditTranscript:
    """Worst-case comparison audit: the environment picks each reading."""
    machine = ComparisonAuditMachine(
        cvr, manifest_size=election.size, settings=settings, seed=seed
    )
    if machine.concluded:
        return machine.transcript()
    return _drive(machine, election, env, sample_truth=False)


class _Uniforms:
    """Buffered per-trial uniforms (one generator, block-refilled)."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, bit_generator):
        self._gen = np.random.Generator(bit_generator)
        self._buf = ()
        self._pos = 0

    def next(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(2048).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def risk_trials(
    election: Election,
    cvr: Union[BayesianCvr, ConservativeCvr],
    env_spec: tuple,
    settings: TestSettings,
    trials: int,
    seed: int,
) -> int:
    """Count of Consistent verdicts over many independent game runs.

    A flattened version of the per-draw loop for Monte Carlo soundness
    checks: per-row discrepancy values and their log factors are precomputed,
    and the environment families are inlined.  env_spec is one of
    ("honest",), ("suppress", rate), ("suppress_ids", ids), ("mislabel",),
    ("worst_confirm",) -- the last picks the sample-minimizing reading and is
    only meaningful in set-valued mode.  Statistically equivalent to driving
    ``ComparisonAuditMachine`` with the corresponding environment.
    """
    bayesian = isinstance(cvr, BayesianCvr)
    if cvr.has_repeated_idents or cvr.size != election.size:
        return 0
    outcome = (
        bayesian_declared_outcome(cvr) if bayesian else conservative_declared_outcome(cvr)
    )
    if outcome.winner is None:
        return 0
    w = cvr.candidates.index(outcome.winner)
    config = KaplanMarkovConfig(
        delta=outcome.margin,
        gamma=settings.gamma,
        alpha=settings.alpha,
        max_draws=settings.max_draws if settings.max_draws is not None else election.size,
    )
    log_alpha = math.log(settings.alpha)
    max_draws = config.max_draws
    logf = config.log_factor

    kind = env_spec[0]
    if kind not in ("honest", "suppress", "suppress_ids", "mislabel", "worst_confirm"):
        raise ValueError(f"unknown env spec {env_spec!r}")
    suppress_rate = env_spec[1] if kind == "suppress" else 0.0
    suppress_ids = env_spec[1] if kind == "suppress_ids" else frozenset()

    # per-row tables: missing-ballot log factor, and either (cuts, logfs) for
    # sampled readings or a single deterministic log factor
    size = cvr.size
    bot_only = [False] * size
    bot_logf = [0.0] * size
    row_cuts: list[tuple[float, ...]] = [()] * size
    row_logfs: list[tuple[float, ...]] = [()] * size
    for r in range(size):
        ident = cvr.rows[r][0]
        terms = (
            bayesian_claim_terms(cvr, r, w)
            if bayesian
            else conservative_claim_terms(cvr, r, w)
        )
        bot_logf[r] = logf(act_value(terms, None, w))
        matching = election.ballots_with_id(ident)
        if not matching or (kind == "mislabel" and election.size > 1) or ident in suppress_ids:
            bot_only[r] = True
            continue
        ballot = matching[0]
        if bayesian:
            support = ballot.dist.support
            cuts, logfs, acc = [], [], 0.0
            for interp, p in support:
                acc += p
                cuts.append(acc)
                logfs.append(logf(act_value(terms, interp, w)))
        else:
            interps = sorted(ballot.support())
            if kind == "worst_confirm":
                best = min(act_value(terms, i, w) for i in interps)
                cuts, logfs = [1.0], [logf(best)]
            else:
                cuts = [(i + 1) / len(interps) for i in range(len(interps))]
                logfs = [logf(act_value(terms, i, w)) for i in interps]
        row_cuts[r] = tuple(cuts)
        row_logfs[r] = tuple(logfs)

    consistent = 0
    for child in np.random.SeedSequence(seed).spawn(trials):
        uniforms = _Uniforms(np.random.PCG64(child))
        nxt = uniforms.next
        lr = 0.0
        n = 0
        while True:
            n += 1
            row = int(nxt() * size)
            if bot_only[row] or (suppress_rate and nxt() < suppress_rate):
                lr += bot_logf[row]
            else:
                u = nxt()
                cuts = row_cuts[row]
                k = 0
                while k < len(cuts) - 1 and u >= cuts[k]:
                    k += 1
                lr += row_logfs[row][k]
            if lr <= log_alpha:
                consistent += 1
                break
            if n >= max_draws:
                break
    return consistent


def sample_discrepancy_stream(
    election: Election,
    cvr: Union[BayesianCvr, ConservativeCvr],
    env: Environment,
    seed: int,
    n: int,
) -> list[float]:
    """Raw per-experiment samples with the stopping rule disabled (for
    checking the per-draw mean property)."""
    machine = ComparisonAuditMachine(
        cvr,
        manifest_size=election.size,
        settings=TestSettings(alpha=1e-300, max_draws=n),
        seed=seed,
    )
    if machine.concluded:
        raise ValueError(f"guard failure: {machine.guard_failure}")
    transcript = _drive(
        machine, election, env, sample_truth=isinstance(cvr, BayesianCvr)
    )
    return [e.discrepancy for e in transcript.entries]
