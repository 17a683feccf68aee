"""Per-ballot and whole-table discrepancy in both CVR conventions.

Discrepancy measures how much a CVR row overstates the declared winner's
advantage relative to the ballot's ground truth; single-ballot values live in
[-2, 2].  A missing ballot gets the pessimistic "+1" treatment so that absent
ballots can only hurt the declared outcome.

The whole-table totals obey the lower bound used by every risk argument here:
for an invalid CVR of the election's size, total discrepancy is at least
(declared margin + true margin) * S.  ``tests/`` exercises that bound
exhaustively on small elections.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .cvr import (
    BayesianCvr,
    ConservativeCvr,
    bayesian_declared_outcome,
    conservative_declared_outcome,
)
from .model import (
    Ballot,
    Election,
    Interpretation,
    InterpretationDistribution,
    expected_vote,
    vote_bounds,
)

SIGMA_MIN, SIGMA_MAX = -2.0, 2.0


@dataclass(frozen=True)
class DiscrepancySample:
    """One comparison experiment's outcome; ``matched`` is False for the
    missing-ballot branch."""

    value: float
    ident: str
    matched: bool

    def __post_init__(self) -> None:
        if not SIGMA_MIN <= self.value <= SIGMA_MAX:
            raise ValueError(f"discrepancy {self.value} outside [-2, 2]")


def _require_rivals(n_candidates: int) -> None:
    if n_candidates < 2:
        raise ValueError("discrepancy needs at least two candidates")


def bayesian_discrepancy(
    prediction: InterpretationDistribution,
    ballot: Optional[Ballot],
    winner_index: int,
    n_candidates: int,
) -> float:
    """Expected-value discrepancy of a predicted distribution against a ballot.

    With no ballot (``None``), the prediction's own winner advantage plus one.
    """
    _require_rivals(n_candidates)
    p_w = prediction.expected_vote(winner_index)
    rivals = [a for a in range(n_candidates) if a != winner_index]
    if ballot is None:
        return max(p_w - prediction.expected_vote(a) for a in rivals) + 1.0
    t_w = expected_vote(ballot, winner_index)
    return max(
        (p_w - prediction.expected_vote(a)) - (t_w - expected_vote(ballot, a))
        for a in rivals
    )


def realized_bayesian_discrepancy(
    prediction: InterpretationDistribution,
    realized: Optional[Interpretation],
    winner_index: int,
    n_candidates: int,
) -> float:
    """Single-draw variant: the ballot side is one audited interpretation."""
    _require_rivals(n_candidates)
    p_w = prediction.expected_vote(winner_index)
    rivals = [a for a in range(n_candidates) if a != winner_index]
    if realized is None:
        return max(p_w - prediction.expected_vote(a) for a in rivals) + 1.0
    return max(
        (p_w - prediction.expected_vote(a))
        - (realized.bits[winner_index] - realized.bits[a])
        for a in rivals
    )


def cvr_discrepancy_bayesian(cvr: BayesianCvr, election: Election) -> float:
    """Table total: per identifier, the best matching ballot (or the
    missing-ballot value when none matches)."""
    outcome = bayesian_declared_outcome(cvr)
    if outcome.winner is None:
        raise ValueError("CVR declares no winner; discrepancy undefined")
    w = cvr.candidates.index(outcome.winner)
    n = len(cvr.candidates)
    total = 0.0
    for ident, prediction in cvr.rows:
        matching = election.ballots_with_id(ident)
        if matching:
            total += min(
                bayesian_discrepancy(prediction, b, w, n) for b in matching
            )
        else:
            total += bayesian_discrepancy(prediction, None, w, n)
    return total


def conservative_discrepancy(
    interp: Interpretation,
    ballot: Optional[Ballot],
    winner_index: int,
    n_candidates: int,
) -> float:
    """Worst-case discrepancy of one declared interpretation against a ballot's
    most favorable envelope; missing ballot adds one."""
    _require_rivals(n_candidates)
    rivals = [a for a in range(n_candidates) if a != winner_index]
    i_w = interp.bits[winner_index]
    if ballot is None:
        return max(i_w - interp.bits[a] for a in rivals) + 1.0
    t_w_max = vote_bounds(ballot, winner_index)[1]
    return max(
        (i_w - interp.bits[a]) - (t_w_max - vote_bounds(ballot, a)[0]) for a in rivals
    )


def cvr_discrepancy_conservative(cvr: ConservativeCvr, election: Election) -> float:
    """Table total: per row, the friendliest declared interpretation against
    the friendliest matching ballot."""
    outcome = conservative_declared_outcome(cvr)
    if outcome.winner is None:
        raise ValueError("CVR declares no winner; discrepancy undefined")
    w = cvr.candidates.index(outcome.winner)
    n = len(cvr.candidates)
    total = 0.0
    for ident, declared in cvr.rows:
        matching = election.ballots_with_id(ident)
        if matching:
            total += min(
                conservative_discrepancy(i, b, w, n)
                for i in declared
                for b in matching
            )
        else:
            total += min(conservative_discrepancy(i, None, w, n) for i in declared)
    return total


Anycvr = Union[BayesianCvr, ConservativeCvr]


def margin_lower_bound(cvr: Anycvr, election: Election) -> float:
    """(declared margin + true margin) * S -- the floor total discrepancy must
    exceed for an invalid CVR of the right size."""
    if isinstance(cvr, BayesianCvr):
        declared = bayesian_declared_outcome(cvr).margin
        _, true_margin = election.bayesian_winner()
    else:
        declared = conservative_declared_outcome(cvr).margin
        true_margin = election.conservative_winner().margin
    return (declared + true_margin) * election.size
