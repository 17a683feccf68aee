"""Shared fixtures: the ten-ballot worked example and random small elections."""
from __future__ import annotations

import numpy as np
import pytest

from markaudit.cvr import BayesianCvr, ConservativeCvr
from markaudit.model import (
    Ballot,
    Election,
    Interpretation,
    InterpretationDistribution,
    all_interpretations,
)

I10 = Interpretation.from_string("10")  # vote for Bugs
I01 = Interpretation.from_string("01")  # vote for Daffy
I00 = Interpretation.from_string("00")  # no vote

# One small contest used throughout: ten ballots, several with marginal marks.
# Probabilistic readings per ballot (Bugs, Daffy, blank):
TEN_BALLOT_DISTS = [
    {I10: 1.0},
    {I10: 0.72, I01: 0.02, I00: 0.26},
    {I10: 0.99, I00: 0.01},
    {I01: 1.0},
    {I01: 0.75, I00: 0.25},
    {I10: 0.12, I01: 0.38, I00: 0.5},
    {I10: 0.46, I01: 0.1, I00: 0.44},
    {I01: 1.0},
    {I01: 1.0},
    {I01: 0.02, I00: 0.98},
]

BUGS_TOTAL = 3.29
DAFFY_TOTAL = 4.27
TEN_BALLOT_MARGIN = (DAFFY_TOTAL - BUGS_TOTAL) / 10  # 0.098


def _dist(mapping) -> InterpretationDistribution:
    return InterpretationDistribution.from_mapping(mapping)


@pytest.fixture
def ten_ballot_election() -> Election:
    ballots = tuple(
        Ballot(id=str(i + 1), dist=_dist(d)) for i, d in enumerate(TEN_BALLOT_DISTS)
    )
    return Election(candidates=("Bugs", "Daffy"), ballots=ballots)


@pytest.fixture
def ten_ballot_cvr(ten_ballot_election) -> BayesianCvr:
    return BayesianCvr(
        candidates=ten_ballot_election.candidates,
        rows=tuple((b.id, b.dist) for b in ten_ballot_election.ballots),
    )


# The set-valued version of the same contest keeps only the plausible
# readings (tiny probabilities dropped), as a scanner declaring marginal
# marks would produce.
TEN_BALLOT_SETS = [
    {I10},
    {I10, I00},
    {I10},
    {I01},
    {I01, I00},
    {I10, I01, I00},
    {I10, I01, I00},
    {I01},
    {I01},
    {I00},
]


@pytest.fixture
def ten_ballot_conservative() -> ConservativeCvr:
    return ConservativeCvr(
        candidates=("Bugs", "Daffy"),
        rows=tuple((str(i + 1), frozenset(s)) for i, s in enumerate(TEN_BALLOT_SETS)),
    )


# -- random small instances for exhaustive checks ------------------------------


def random_bayesian_election(rng: np.random.Generator, max_size=8, max_cands=3) -> Election:
    n_cands = int(rng.integers(2, max_cands + 1))
    size = int(rng.integers(1, max_size + 1))
    names = tuple("ABC"[:n_cands])
    space = all_interpretations(n_cands)
    ballots = []
    for i in range(size):
        k = int(rng.integers(1, 4))
        idx = rng.choice(len(space), size=min(k, len(space)), replace=False)
        weights = rng.random(len(idx)) + 0.05
        weights /= weights.sum()
        ballots.append(
            Ballot(
                id=f"b{i}",
                dist=InterpretationDistribution(
                    tuple((space[j], float(w)) for j, w in zip(idx, weights))
                ),
            )
        )
    return Election(candidates=names, ballots=tuple(ballots))


def random_conservative_election(rng: np.random.Generator, max_size=8, max_cands=3) -> Election:
    n_cands = int(rng.integers(2, max_cands + 1))
    size = int(rng.integers(1, max_size + 1))
    names = tuple("ABC"[:n_cands])
    space = all_interpretations(n_cands)
    ballots = []
    for i in range(size):
        k = int(rng.integers(1, 4))
        idx = rng.choice(len(space), size=min(k, len(space)), replace=False)
        ballots.append(Ballot(id=f"b{i}", interps=frozenset(space[j] for j in idx)))
    return Election(candidates=names, ballots=tuple(ballots))


def random_bayesian_cvr(rng: np.random.Generator, election: Election, id_noise=True) -> BayesianCvr:
    """Random prediction table over (mostly) the election's identifiers."""
    space = all_interpretations(len(election.candidates))
    rows = []
    for b in election.ballots:
        ident = b.id
        if id_noise and rng.random() < 0.1:
            ident = f"ghost{rng.integers(0, 100)}"
        k = int(rng.integers(1, 4))
        idx = rng.choice(len(space), size=min(k, len(space)), replace=False)
        weights = rng.random(len(idx)) + 0.05
        weights /= weights.sum()
        rows.append(
            (
                ident,
                InterpretationDistribution(
                    tuple((space[j], float(w)) for j, w in zip(idx, weights))
                ),
            )
        )
    return BayesianCvr(candidates=election.candidates, rows=tuple(rows))


def random_conservative_cvr(rng: np.random.Generator, election: Election, id_noise=True) -> ConservativeCvr:
    space = all_interpretations(len(election.candidates))
    rows = []
    for b in election.ballots:
        ident = b.id
        if id_noise and rng.random() < 0.1:
            ident = f"ghost{rng.integers(0, 100)}"
        k = int(rng.integers(1, 4))
        idx = rng.choice(len(space), size=min(k, len(space)), replace=False)
        rows.append((ident, frozenset(space[j] for j in idx)))
    return ConservativeCvr(candidates=election.candidates, rows=tuple(rows))


# -- invalid table/election pairs (biased generators so rejection sampling
#    terminates quickly; the checks themselves stay exhaustive) ----------------


def invalid_bayesian_pairs(rng: np.random.Generator, count: int):
    from markaudit.cvr import INVALID, bayesian_declared_outcome, validity

    found = 0
    while found < count:
        e = random_bayesian_election(rng)
        cvr = random_bayesian_cvr(rng, e)
        if cvr.size != e.size:
            continue
        if bayesian_declared_outcome(cvr).winner is None:
            continue
        if validity(cvr, e) == INVALID:
            found += 1
            yield e, cvr


def _spiky_conservative_election(rng: np.random.Generator, max_size=8, max_cands=3) -> Election:
    """Mostly-singleton interpretation sets, so strict winners are common."""
    n_cands = int(rng.integers(2, max_cands + 1))
    size = int(rng.integers(1, max_size + 1))
    names = tuple("ABC"[:n_cands])
    space = all_interpretations(n_cands)
    ballots = []
    for i in range(size):
        k = 1 if rng.random() < 0.7 else int(rng.integers(2, 4))
        idx = rng.choice(len(space), size=min(k, len(space)), replace=False)
        ballots.append(Ballot(id=f"b{i}", interps=frozenset(space[j] for j in idx)))
    return Election(candidates=names, ballots=tuple(ballots))


def invalid_conservative_pairs(rng: np.random.Generator, count: int):
    """Invalid set-valued tables on elections that do have a strict winner
    (the worst-case margin bound is only meaningful there)."""
    from markaudit.cvr import conservative_declared_outcome

    found = 0
    while found < count:
        e = _spiky_conservative_election(rng)
        true_winner = e.conservative_winner().winner
        if true_winner is None:
            continue
        space = all_interpretations(len(e.candidates))
        others = [c for c in e.candidates if c != true_winner]
        target = others[int(rng.integers(0, len(others)))]
        target_vote = Interpretation.vote_for(e.candidates.index(target), len(e.candidates))
        rows = []
        for b in e.ballots:
            ident = b.id
            if rng.random() < 0.08:
                ident = f"ghost{rng.integers(0, 100)}"
            if rng.random() < 0.75:
                rows.append((ident, frozenset({target_vote})))
            else:
                k = int(rng.integers(1, 4))
                idx = rng.choice(len(space), size=min(k, len(space)), replace=False)
                rows.append((ident, frozenset(space[j] for j in idx)))
        cvr = ConservativeCvr(candidates=e.candidates, rows=tuple(rows))
        out = conservative_declared_outcome(cvr)
        if out.winner is None or out.winner == true_winner:
            continue
        found += 1
        yield e, cvr
