// DOM-free rendering: the view model becomes an HTML string, so the same
// renderer is snapshot-testable in node and drives innerHTML in the page.

import type { DashboardViewModel } from "./viewmodel.js";
import type { Emotion } from "./types.js";

const EMOTIONS: Emotion[] = ["bored", "satisfied", "curious", "confused"];

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

// affect plane: valence -1..1 left-to-right, arousal -1..1 bottom-to-top
function planeX(valence: number): number {
  return ((valence + 1) / 2) * 100;
}

function planeY(arousal: number): number {
  return ((1 - arousal) / 2) * 100;
}

export function renderPlane(vm: DashboardViewModel): string {
  const labels = (Object.keys(vm.centers) as Emotion[])
    .map((emotion) => {
      const c = vm.centers[emotion];
      return `<span class="quadrant-label quadrant-${emotion}" ` +
        `style="left:${planeX(c.valence)}%;top:${planeY(c.arousal)}%">${emotion}</span>`;
    })
    .join("");
  const dots = vm.scatter
    .map((p) =>
      `<span class="dot dot-${p.label}" title="${p.pseudo}: ${p.label}" ` +
      `data-pseudo="${p.pseudo}" data-quadrant="${p.quadrant}" ` +
      `style="left:${planeX(p.valence).toFixed(2)}%;top:${planeY(p.arousal).toFixed(2)}%"></span>`,
    )
    .join("");
  const centroid = vm.centroid
    ? `<span class="centroid" style="left:${planeX(vm.centroid.valence).toFixed(2)}%;` +
      `top:${planeY(vm.centroid.arousal).toFixed(2)}%"></span>`
    : "";
  return `<div class="plane">${labels}${dots}${centroid}</div>`;
}

export function renderBars(vm: DashboardViewModel): string {
  const total = EMOTIONS.reduce((n, e) => n + (vm.counts[e] ?? 0), 0);
  return EMOTIONS.map((emotion) => {
    const count = vm.counts[emotion] ?? 0;
    const pct = total ? (count / total) * 100 : 0;
    return `<div class="bar-row" data-emotion="${emotion}">` +
      `<span class="bar-name">${emotion}</span>` +
      `<span class="bar bar-${emotion}" style="width:${pct.toFixed(1)}%"></span>` +
      `<span class="bar-count">${count}</span></div>`;
  }).join("");
}

export function renderCard(vm: DashboardViewModel): string {
  if (!vm.card) return `<div class="card empty">no suggestion yet</div>`;
  const c = vm.card;
  return `<div class="card card-${c.badge}">` +
    `<span class="badge badge-${c.badge}">${c.badge}</span>` +
    `<strong class="card-action">${esc(c.action)}</strong>` +
    `<span class="card-context">class ${c.label} (${(c.confidence * 100).toFixed(0)}%)</span>` +
    `<span class="card-age">${c.ageS.toFixed(0)}s ago</span>` +
    `<p class="card-rationale">${esc(c.rationale)}</p>` +
    `<button id="btn-apply" ${vm.connection === "ended" ? "disabled" : ""}>apply</button>` +
    `<button id="btn-infeasible" ${vm.connection === "ended" ? "disabled" : ""}>infeasible</button>` +
    `<select id="override-action">${vm.actions
      .map((a) => `<option value="${a}">${a}</option>`)
      .join("")}</select>` +
    `<button id="btn-override" ${vm.connection === "ended" ? "disabled" : ""}>override</button>` +
    `</div>`;
}

export function renderStatusBanner(vm: DashboardViewModel): string {
  if (vm.connection === "stale") {
    return `<div class="banner banner-stale">stream stale: no events from the session</div>`;
  }
  if (vm.connection === "ended") return `<div class="banner banner-ended">session ended</div>`;
  return "";
}

export function renderMetricsStrip(vm: DashboardViewModel): string {
  const dwell = vm.metrics.curiousDwellPct;
  const rate = vm.metrics.interventionsPerMin;
  return `<div class="strip">` +
    `<span class="metric">curiosity dwell: ${dwell === null ? "-" : dwell.toFixed(1) + "%"}</span>` +
    `<span class="metric">interventions/min: ${rate === null ? "-" : rate.toFixed(2)}</span>` +
    `</div>`;
}

export function renderHistory(vm: DashboardViewModel): string {
  const rows = [...vm.history]
    .slice(-20)
    .reverse()
    .map((row) =>
      `<li class="history-${row.kind}">[${(row.ts_ms / 1000).toFixed(0)}s] ${esc(row.text)}</li>`,
    )
    .join("");
  return `<ul class="history">${rows}</ul>`;
}

export function render(vm: DashboardViewModel): string {
  const error = vm.error ? `<div class="banner banner-error">${esc(vm.error)}</div>` : "";
  return renderStatusBanner(vm) + error +
    `<section class="left">${renderPlane(vm)}${renderBars(vm)}${renderMetricsStrip(vm)}</section>` +
    `<section class="right">${renderCard(vm)}${renderHistory(vm)}</section>`;
}
