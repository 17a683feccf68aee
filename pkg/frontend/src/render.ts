/**
 * Pure HTML renderers for session views.
 *
 * Every number shown comes verbatim from the service payload (String() on
 * the raw JSON value) -- the console never recomputes risk or tallies.
 */
import type { PairTally, SessionView } from "./api.js";

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBanner(view: SessionView): string {
  if (view.state !== "concluded" || !view.verdict) {
    return "";
  }
  const v = view.verdict;
  if (v.kind === "winner") {
    return `<div class="banner ok">Audit complete: <strong>${esc(v.winner ?? "?")}</strong> is the winner (${String(v.ballots_requested ?? 0)} ballots requested)</div>`;
  }
  if (v.kind === "consistent") {
    const draws = String(view.draws ?? 0);
    const risk = v.final_risk === undefined ? "" : ` final risk ${String(v.final_risk)}`;
    return `<div class="banner ok">Audit complete: <strong>Consistent</strong> after ${draws} draws.${risk}</div>`;
  }
  return `<div class="banner warn">Audit complete: <strong>Inconclusive</strong>${view.guard_failure ? ` (${esc(view.guard_failure)})` : ""}</div>`;
}

export function renderBallotPrompt(view: SessionView): string {
  if (view.state !== "awaiting_ballot" || view.requested_id === null) {
    return "";
  }
  return `<div class="prompt">Pull ballot <strong class="ballot-id">${esc(view.requested_id)}</strong></div>`;
}

export function renderRiskTrajectory(trajectory: number[] | undefined): string {
  if (!trajectory || trajectory.length === 0) {
    return `<div class="risk">risk <span class="risk-now">1.0</span></div>`;
  }
  const current = String(trajectory[trajectory.length - 1]);
  const items = trajectory
    .map((r, i) => {
      const up = i > 0 && trajectory[i] > trajectory[i - 1];
      return `<li class="${up ? "up" : "down"}">${String(r)}</li>`;
    })
    .join("");
  return `<div class="risk">risk <span class="risk-now">${current}</span><ol class="trajectory">${items}</ol></div>`;
}

export function renderPairTallies(tallies: PairTally[] | undefined): string {
  if (!tallies || tallies.length === 0) {
    return "";
  }
  const rows = tallies
    .map((p) => {
      const width = p.t > 0 ? Math.round((100 * p.votes) / p.t) : 0;
      return (
        `<div class="pair${p.disqualified ? " disqualified" : ""}">` +
        `<span class="pair-label">${esc(p.by)} vs ${esc(p.against)}</span>` +
        `<span class="bar"><span class="fill" style="width:${width}%"></span></span>` +
        `<span class="votes">${String(p.votes)}/${String(p.t)}</span>` +
        (p.disqualified ? `<span class="tag">disqualified</span>` : "") +
        `</div>`
      );
    })
    .join("");
  return `<div class="tallies">${rows}</div>`;
}

export function renderInterpretationForm(view: SessionView): string {
  if (view.state !== "awaiting_ballot") {
    return "";
  }
  const toggles = view.candidates
    .map(
      (c, i) =>
        `<label class="mark"><input type="checkbox" data-index="${i}" /> ${esc(c)}</label>`,
    )
    .join("");
  return (
    `<form id="entry" data-request-index="${view.request_index}">` +
    toggles +
    `<button type="submit" id="submit-marks">Record marks</button>` +
    `<button type="button" id="no-marks">No marks</button>` +
    `<button type="button" id="no-ballot">Ballot not found</button>` +
    `</form>`
  );
}

export function renderSession(view: SessionView): string {
  return [
    `<header><span class="mode">${esc(view.mode)}</span> session <code>${esc(view.session_id)}</code> seed ${String(view.seed)}</header>`,
    renderBanner(view),
    renderBallotPrompt(view),
    renderInterpretationForm(view),
    view.mode === "competitive"
      ? renderPairTallies(view.pair_tallies)
      : renderRiskTrajectory(view.risk_trajectory),
  ].join("\n");
}

export function renderSessionList(
  sessions: { session_id: string; mode: string; state: string }[],
): string {
  if (sessions.length === 0) {
    return `<p class="empty">No sessions yet.</p>`;
  }
  const items = sessions
    .map(
      (s) =>
        `<li><a href="#${esc(s.session_id)}">${esc(s.session_id)}</a> <span class="mode">${esc(s.mode)}</span> <span class="state">${esc(s.state)}</span></li>`,
    )
    .join("");
  return `<ul class="sessions">${items}</ul>`;
}
