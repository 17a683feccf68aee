"""Cast-vote record tables in both conventions, plus their file formats.

A CVR is an untrusted, per-ballot declaration.  A probabilistic ("bayesian")
CVR row predicts a distribution of interpretations; a set-valued
("conservative") row declares only which interpretations are possible.
Declared totals, winners, losers and margins follow from the rows.

Structural oddities (wrong size, repeated identifiers) are representable on
purpose: rejecting them is the auditor's job, not the parser's.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

from .model import (
    Ballot,
    Election,
    Interpretation,
    InterpretationDistribution,
    candidate_order,
)

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class DeclaredOutcome:
    """What a CVR claims: winner (if any), diluted declared margin, losers."""

    winner: Optional[str]
    margin: float
    losers: frozenset[str] = field(default_factory=frozenset)

    @property
    def indeterminate(self) -> bool:
        return self.winner is None


@dataclass(frozen=True)
class BayesianCvr:
    candidates: tuple[str, ...]
    rows: tuple[tuple[str, InterpretationDistribution], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", candidate_order(self.candidates))
        object.__setattr__(self, "rows", tuple(self.rows))
        n = len(self.candidates)
        for ident, dist in self.rows:
            for interp, _ in dist.support:
                if len(interp) != n:
                    raise ValueError(f"row {ident!r}: interpretation width != {n}")

    @property
    def size(self) -> int:
        return len(self.rows)

    @property
    def idents(self) -> frozenset[str]:
        return frozenset(ident for ident, _ in self.rows)

    @property
    def has_repeated_idents(self) -> bool:
        return len(self.idents) != self.size

    def row_expected(self, row: int, candidate_index: int) -> float:
        return self.rows[row][1].expected_vote(candidate_index)

    def total(self, candidate: str) -> float:
        j = self.candidates.index(candidate)
        return sum(dist.expected_vote(j) for _, dist in self.rows)

    def prediction(self, ident: str) -> InterpretationDistribution:
        for rid, dist in self.rows:
            if rid == ident:
                return dist
        raise KeyError(ident)


@dataclass(frozen=True)
class ConservativeCvr:
    candidates: tuple[str, ...]
    rows: tuple[tuple[str, frozenset[Interpretation]], ...]
    duplicate_labels_announced: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", candidate_order(self.candidates))
        object.__setattr__(
            self, "rows", tuple((ident, frozenset(s)) for ident, s in self.rows)
        )
        n = len(self.candidates)
        for ident, interps in self.rows:
            if not interps:
                raise ValueError(f"row {ident!r}: empty interpretation set")
            for interp in interps:
                if len(interp) != n:
                    raise ValueError(f"row {ident!r}: interpretation width != {n}")

    @property
    def size(self) -> int:
        return len(self.rows)

    @property
    def idents(self) -> frozenset[str]:
        return frozenset(ident for ident, _ in self.rows)

    @property
    def has_repeated_idents(self) -> bool:
        return len(self.idents) != self.size

    def row_bounds(self, row: int, candidate_index: int) -> tuple[int, int]:
        votes = [i.bits[candidate_index] for i in self.rows[row][1]]
        return min(votes), max(votes)

    def total_bounds(self, candidate: str) -> tuple[int, int]:
        j = self.candidates.index(candidate)
        lo = hi = 0
        for _, interps in self.rows:
            votes = [i.bits[j] for i in interps]
            lo += min(votes)
            hi += max(votes)
        return lo, hi

    def interpretations(self, ident: str) -> frozenset[Interpretation]:
        for rid, interps in self.rows:
            if rid == ident:
                return interps
        raise KeyError(ident)


Cvr = Union[BayesianCvr, ConservativeCvr]


@lru_cache(maxsize=1024)
def bayesian_declared_outcome(cvr: BayesianCvr) -> DeclaredOutcome:
    """Declared winner, margin and losers from expected-value totals."""
    if cvr.size == 0:
        raise ValueError("empty CVR has no declared outcome")
    totals = {c: cvr.total(c) for c in cvr.candidates}
    best = max(totals, key=lambda c: totals[c])
    others = [c for c in cvr.candidates if c != best]
    losers = frozenset(
        l for l in cvr.candidates if any(totals[l] < totals[c] for c in cvr.candidates)
    )
    if others and all(totals[best] > totals[c] for c in others):
        margin = min((totals[best] - totals[c]) / cvr.size for c in others)
        return DeclaredOutcome(winner=best, margin=margin, losers=losers)
    return DeclaredOutcome(winner=None, margin=0.0, losers=losers)


@lru_cache(maxsize=1024)
def conservative_declared_outcome(cvr: ConservativeCvr) -> DeclaredOutcome:
    """Declared winner iff its worst-case total beats every rival's best case."""
    if cvr.size == 0:
        raise ValueError("empty CVR has no declared outcome")
    bounds = {c: cvr.total_bounds(c) for c in cvr.candidates}
    losers = frozenset(
        l
        for l in cvr.candidates
        if any(bounds[l][1] < bounds[a][0] for a in cvr.candidates if a != l)
    )
    for a in cvr.candidates:
        gaps = [
            (bounds[a][0] - bounds[c][1]) / cvr.size for c in cvr.candidates if c != a
        ]
        if gaps and min(gaps) > 0:
            return DeclaredOutcome(winner=a, margin=min(gaps), losers=losers)
    return DeclaredOutcome(winner=None, margin=0.0, losers=losers)


def declared_outcome(cvr: Cvr) -> DeclaredOutcome:
    if isinstance(cvr, BayesianCvr):
        return bayesian_declared_outcome(cvr)
    return conservative_declared_outcome(cvr)


def contradictory(c1: ConservativeCvr, c2: ConservativeCvr) -> bool:
    """True when some candidate is a declared winner of one table and a
    declared loser of the other."""
    if c1.candidates != c2.candidates:
        raise ValueError("CVRs declare different candidate sets")
    o1, o2 = conservative_declared_outcome(c1), conservative_declared_outcome(c2)
    return (o1.winner is not None and o1.winner in o2.losers) or (
        o2.winner is not None and o2.winner in o1.losers
    )


@dataclass(frozen=True)
class ConsistencyReport:
    """How a set-valued CVR relates to the ballots it describes.

    ``bad_idents`` counts identifiers with no matching ballot or whose ballot
    admits an interpretation the row does not declare.  A CVR with B bad
    identifiers out of S rows is (1 - B/S)-consistent.
    """

    canonical: bool
    consistent: bool
    bad_idents: int

    @property
    def inconsistent(self) -> bool:
        return not self.consistent


def consistency_class(cvr: ConservativeCvr, election: Election) -> ConsistencyReport:
    """Classify a set-valued CVR against the election's ballots.

    Only defined for uniquely labeled elections: canonical means every row
    declares exactly its ballot's interpretation set; consistent means every
    row declares a superset; otherwise the bad-identifier count is reported.
    """
    if not election.uniquely_labeled:
        raise ValueError("consistency is only defined for uniquely labeled elections")
    by_id = {b.id: b for b in election.ballots}
    ids_match = cvr.idents == frozenset(by_id) and not cvr.has_repeated_idents
    bad = 0
    exact = True
    for ident, declared in cvr.rows:
        ballot = by_id.get(ident)
        if ballot is None:
            bad += 1
            exact = False
            continue
        truth = ballot.support()
        if not truth <= declared:
            bad += 1
        if truth != declared:
            exact = False
    consistent = ids_match and bad == 0
    return ConsistencyReport(
        canonical=consistent and exact, consistent=consistent, bad_idents=bad
    )


VALID = "valid"
INVALID = "invalid"
NEITHER = "neither"


def validity(cvr: Cvr, election: Election) -> str:
    """valid: declares the election's true winner; invalid: declares a winner
    who does not win; neither: declares no winner."""
    declared = declared_outcome(cvr).winner
    if declared is None:
        return NEITHER
    if isinstance(cvr, BayesianCvr):
        true_winner, _ = election.bayesian_winner()
    else:
        true_winner = election.conservative_winner().winner
    return VALID if declared == true_winner else INVALID


def canonical_cvr(election: Election) -> ConservativeCvr:
    """The set-valued CVR that declares exactly each ballot's interpretations."""
    return ConservativeCvr(
        candidates=election.candidates,
        rows=tuple((b.id, b.support()) for b in election.ballots),
    )


def cvr_from_truth(election: Election) -> BayesianCvr:
    """A probabilistic CVR whose rows copy the ballots' ground-truth distributions."""
    rows = []
    for b in election.ballots:
        if b.dist is None:
            raise ValueError(f"ballot {b.id!r} has no distribution")
        rows.append((b.id, b.dist))
    return BayesianCvr(candidates=election.candidates, rows=tuple(rows))


# -- file format --------------------------------------------------------------
#
# Canonical JSON document, stable byte-for-byte for golden tests.  An
# interpretation is a '0'/'1' string in candidate order; probabilities are
# decimal strings (shortest round-trip representation on write).


def _fmt(p: float) -> str:
    return repr(float(p))


def _dist_to_json(dist: InterpretationDistribution) -> list[list[str]]:
    return [[i.as_string(), _fmt(p)] for i, p in dist.support]


def _dist_from_json(entries: Sequence[Sequence[str]]) -> InterpretationDistribution:
    return InterpretationDistribution(
        tuple((Interpretation.from_string(bits), float(p)) for bits, p in entries)
    )


def dump_cvr(cvr: Cvr) -> str:
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "mode": "bayesian" if isinstance(cvr, BayesianCvr) else "conservative",
        "candidates": list(cvr.candidates),
    }
    if isinstance(cvr, ConservativeCvr):
        doc["duplicate_labels_announced"] = cvr.duplicate_labels_announced
        doc["rows"] = [
            {"id": ident, "interps": sorted(i.as_string() for i in interps)}
            for ident, interps in cvr.rows
        ]
    else:
        doc["rows"] = [
            {"id": ident, "dist": _dist_to_json(dist)} for ident, dist in cvr.rows
        ]
    return json.dumps(doc, indent=2) + "\n"


def load_cvr(text: str) -> Cvr:
    return parse_cvr(json.loads(text))


def parse_cvr(doc: dict) -> Cvr:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    candidates = tuple(doc["candidates"])
    mode = doc.get("mode")
    if mode == "bayesian":
        rows = tuple((row["id"], _dist_from_json(row["dist"])) for row in doc["rows"])
        return BayesianCvr(candidates=candidates, rows=rows)
    if mode == "conservative":
        rows = tuple(
            (
                row["id"],
                frozenset(Interpretation.from_string(s) for s in row["interps"]),
            )
            for row in doc["rows"]
        )
        return ConservativeCvr(
            candidates=candidates,
            rows=rows,
            duplicate_labels_announced=bool(doc.get("duplicate_labels_announced", False)),
        )
    raise ValueError(f"unknown CVR mode {mode!r}")


def read_cvr(path) -> Cvr:
    with open(path, "r", encoding="utf-8") as f:
        return load_cvr(f.read())


def write_cvr(cvr: Cvr, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_cvr(cvr))


def export_flat_csv(cvr: BayesianCvr) -> str:
    """Flat per-candidate expected-vote table (one column per candidate).

    Lossy export: distinct bit patterns with equal expected votes (for
    example undervote vs overvote) collapse; there is no loader on purpose.
    """
    lines = ["id," + ",".join(cvr.candidates)]
    for ident, dist in cvr.rows:
        values = [
            _fmt(dist.expected_vote(j)) for j in range(len(cvr.candidates))
        ]
        lines.append(ident + "," + ",".join(values))
    return "\n".join(lines) + "\n"


# -- election manifests -------------------------------------------------------


def dump_election(election: Election) -> str:
    """Election manifest with ground truth, used by the simulation CLI."""
    ballots = []
    for b in election.ballots:
        if b.dist is not None:
            ballots.append({"id": b.id, "mode": "bayesian", "dist": _dist_to_json(b.dist)})
        else:
            ballots.append(
                {
                    "id": b.id,
                    "mode": "conservative",
                    "interps": sorted(i.as_string() for i in b.interps),
                }
            )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "candidates": list(election.candidates),
        "S": election.size,
        "ballots": ballots,
    }
    return json.dumps(doc, indent=2) + "\n"


def load_election(text: str) -> Election:
    return parse_election(json.loads(text))


def parse_election(doc: dict) -> Election:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    candidates = tuple(doc["candidates"])
    ballots = []
    for row in doc["ballots"]:
        if row["mode"] == "bayesian":
            ballots.append(Ballot(id=row["id"], dist=_dist_from_json(row["dist"])))
        elif row["mode"] == "conservative":
            ballots.append(
                Ballot(
                    id=row["id"],
                    interps=frozenset(
                        Interpretation.from_string(s) for s in row["interps"]
                    ),
                )
            )
        else:
            raise ValueError(f"unknown ballot mode {row['mode']!r}")
    election = Election(candidates=candidates, ballots=tuple(ballots))
    if election.size != doc["S"]:
        raise ValueError(f"manifest S={doc['S']} but {election.size} ballots present")
    return election


def read_election(path) -> Election:
    with open(path, "r", encoding="utf-8") as f:
        return load_election(f.read())


def write_election(election: Election, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_election(election))
