/** Render-to-string views. No DOM dependency, so everything unit-tests. */

import { FEATURE_ORDER } from "./types.js";
import type {
  Candidate,
  Progress,
  QueueItem,
  StoreSnapshot,
  Toast,
} from "./types.js";

export function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function fmtRank(rank: number): string {
  return Number.isInteger(rank) ? String(rank) : rank.toFixed(1);
}

export function renderBanner(connected: boolean): string {
  if (connected) return "";
  return `<div class="banner error" role="alert">service unreachable; retrying</div>`;
}

export function renderProgress(p: Progress): string {
  const pct = p.total === 0 ? 0 : Math.round((100 * p.reviewed) / p.total);
  return (
    `<div class="progress" aria-label="review progress">` +
    `<span class="progress-text">${p.reviewed}/${p.total} reviewed</span>` +
    `<div class="progress-track"><div class="progress-fill" style="width:${pct}%"></div></div>` +
    `</div>`
  );
}

/** One bar per feature, always in schema order; missing features are skipped. */
export function renderFeatureBars(features: Record<string, number>): string {
  const rows: string[] = [];
  for (const name of FEATURE_ORDER) {
    const value = features[name];
    if (value === undefined) continue;
    const width = Math.round(100 * Math.max(0, Math.min(1, value)));
    rows.push(
      `<div class="feature-row" data-feature="${name}">` +
        `<span class="feature-name">${name}</span>` +
        `<div class="feature-track"><div class="feature-fill" style="width:${width}%"></div></div>` +
        `<span class="feature-value">${value.toFixed(3)}</span>` +
        `</div>`,
    );
  }
  return `<div class="features">${rows.join("")}</div>`;
}

export function renderCandidate(c: Candidate): string {
  const bars = c.features ? renderFeatureBars(c.features) : "";
  return (
    `<li class="candidate" data-target="${esc(c.target)}">` +
    `<span class="rank">${fmtRank(c.rank)}</span>` +
    `<span class="target">${esc(c.target)}</span>` +
    `<span class="score">${c.score.toFixed(4)}</span>` +
    bars +
    `</li>`
  );
}

export function renderItem(item: QueueItem): string {
  const meta = [item.source.label, item.source.sheet]
    .filter((x): x is string => Boolean(x))
    .map(esc)
    .join(" · ");
  const body = item.list
    ? `<ol class="candidates">${item.list.candidates
        .map(renderCandidate)
        .join("")}</ol>`
    : `<p class="placeholder">candidates not loaded</p>`;
  return (
    `<article class="item state-${item.state}" data-source="${esc(item.source.name)}" tabindex="0">` +
    `<header><h2>${esc(item.source.name)}</h2>` +
    (meta ? `<p class="meta">${meta}</p>` : "") +
    `<span class="badge">${item.state}</span></header>` +
    body +
    `</article>`
  );
}

export function renderEmpty(): string {
  return `<div class="empty-state"><p>No source variables to review.</p></div>`;
}

export function renderToast(toast: Toast | null): string {
  if (!toast) return "";
  return `<div class="toast ${toast.kind}" role="status">${esc(toast.message)}</div>`;
}

export function renderQueue(snap: StoreSnapshot): string {
  const visible = snap.items.filter(
    (item) => snap.filter === "all" || item.state === snap.filter,
  );
  const list =
    visible.length === 0
      ? renderEmpty()
      : `<section class="queue">${visible.map(renderItem).join("")}</section>`;
  const version = snap.version
    ? `<span class="version">model ${esc(snap.version)}</span>`
    : "";
  return (
    renderBanner(snap.connected) +
    `<header class="top">${renderProgress(snap.progress)}${version}` +
    `<span class="filter">filter: ${snap.filter}</span></header>` +
    list
  );
}

export function renderApp(snap: StoreSnapshot): string {
  return renderQueue(snap) + renderToast(snap.toast);
}
