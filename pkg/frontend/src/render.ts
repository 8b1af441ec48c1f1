/** HTML renderers. Pure string formatting: every number shown comes from an API field. */

import type { CaseCard, ReviewQueueEntry } from "./cards.js";
import type { GalleryRow } from "./gallery.js";
import type { ConnectionState } from "./status.js";
import type { ApiErrorBody, CalibrationResponse, HealthReport, RetrieveHit } from "./types.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Fixed-precision display of a service-provided number; no arithmetic. */
export function formatScore(value: number | null, digits = 4): string {
  return value === null ? "n/a" : value.toFixed(digits);
}

export function renderCaseCard(card: CaseCard): string {
  const rows = card.ranking
    .map(
      (entry, i) =>
        `<tr><td>${i + 1}</td><td>${esc(entry.label)}</td><td>${formatScore(entry.score)}</td></tr>`,
    )
    .join("");
  const flag =
    card.reliable === null ? "" : card.reliable ? "reliable" : "needs review";
  return (
    `<article class="case-card" data-case="${esc(card.caseId)}">` +
    `<header>${esc(card.caseId)}` +
    `<span class="cscore">cscore ${formatScore(card.cscore)}</span>` +
    (flag ? `<span class="flag ${card.reliable ? "ok" : "warn"}">${flag}</span>` : "") +
    `</header>` +
    `<table><thead><tr><th>#</th><th>label</th><th>score</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<footer>generation ${card.generation}, theta ${formatScore(card.theta)}</footer>` +
    `</article>`
  );
}

export function renderReviewQueue(entries: ReviewQueueEntry[]): string {
  if (entries.length === 0) {
    return `<p class="empty">Review queue is empty.</p>`;
  }
  const items = entries
    .map((entry) => {
      const top = entry.card.ranking[0];
      const head = top === undefined ? "no ranking" : `${esc(top.label)} (${formatScore(top.score)})`;
      return (
        `<li data-case="${esc(entry.card.caseId)}">` +
        `<span class="case">${esc(entry.card.caseId)}</span> ` +
        `<span class="top">${head}</span> ` +
        `<span class="cscore">cscore ${formatScore(entry.card.cscore)}</span>` +
        `<span class="actions">` +
        `<button data-decision="confirm">confirm</button>` +
        `<button data-decision="relabel">relabel</button>` +
        `<button data-decision="defer">defer</button>` +
        `</span></li>`
      );
    })
    .join("");
  return `<ul class="review-queue">${items}</ul>`;
}

export function renderGalleryRow(row: GalleryRow, reviewers: string[]): string {
  const header = reviewers.map((r) => `<th>${esc(r)}</th>`).join("");
  const body = row.hits
    .map((hit: RetrieveHit, rank: number) => {
      const toggles = reviewers
        .map((reviewer) => {
          const on = (row.verdicts.get(reviewer) as boolean[])[rank];
          return (
            `<td><button class="verdict ${on ? "relevant" : "not-relevant"}" ` +
            `data-query="${esc(row.queryId)}" data-reviewer="${esc(reviewer)}" data-rank="${rank}">` +
            `${on ? "relevant" : "not relevant"}</button></td>`
          );
        })
        .join("");
      return (
        `<tr><td>${rank + 1}</td><td>${hit.item_id}</td>` +
        `<td>${formatScore(hit.score)}</td><td>${esc(hit.external_ref ?? "")}</td>` +
        `<td>${esc(hit.source_tag)}</td>${toggles}</tr>`
      );
    })
    .join("");
  return (
    `<table class="gallery" data-query="${esc(row.queryId)}">` +
    `<thead><tr><th>#</th><th>item</th><th>score</th><th>ref</th><th>source</th>${header}</tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderCalibration(result: CalibrationResponse | null): string {
  if (result === null) {
    return `<p class="empty">Upload a scored file to calibrate.</p>`;
  }
  const rows = result.curve
    .map(
      (pt) =>
        `<tr><td>${formatScore(pt.theta, 6)}</td><td>${formatScore(pt.j, 6)}</td>` +
        `<td>${formatScore(pt.sensitivity)}</td><td>${formatScore(pt.specificity)}</td></tr>`,
    )
    .join("");
  return (
    `<section class="calibration">` +
    `<p class="theta-star">theta* = ${formatScore(result.theta_star, 6)} ` +
    `(${result.positives} correct, ${result.negatives} incorrect)</p>` +
    `<table><thead><tr><th>theta</th><th>J</th><th>sensitivity</th><th>specificity</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `</section>`
  );
}

export function renderLibraryStatus(health: HealthReport): string {
  const theta = health.theta_star === null ? "not calibrated" : formatScore(health.theta_star, 6);
  return (
    `<dl class="library-status">` +
    `<dt>generation</dt><dd>${health.generation}</dd>` +
    `<dt>dimension</dt><dd>${health.dim}</dd>` +
    `<dt>items</dt><dd>${health.item_count}</dd>` +
    `<dt>base</dt><dd>${health.by_provenance.base}</dd>` +
    `<dt>local</dt><dd>${health.by_provenance.local}</dd>` +
    `<dt>theta*</dt><dd>${theta}</dd>` +
    `<dt>case store</dt><dd>${health.case_store ? "attached" : "none"}</dd>` +
    `</dl>`
  );
}

/** Every service error shows its machine code and human message together. */
export function renderApiError(err: ApiErrorBody): string {
  return (
    `<div class="api-error" role="alert">` +
    `<code>${esc(err.code)}</code> <span>${esc(err.message)}</span>` +
    `</div>`
  );
}

export function renderBanner(state: ConnectionState): string {
  if (state.online) {
    return "";
  }
  return (
    `<div class="offline-banner" role="status">` +
    `Service offline: ${esc(state.reason ?? "unknown")}. Views stay open; actions retry on reconnect.` +
    `</div>`
  );
}
