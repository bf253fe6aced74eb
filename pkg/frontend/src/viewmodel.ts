// The dashboard view model: a pure fold over stream events and REST
// snapshots. Never synthesizes state; every number comes from a payload.

import type {
  CollectiveStateWire,
  Emotion,
  StateSnapshot,
  StreamEvent,
  SuggestionWire,
} from "./types.js";

export interface ScatterPoint {
  pseudo: string;        // stable anonymized label (S1, S2, ...)
  valence: number;
  arousal: number;
  label: Emotion;
  quadrant: Emotion;     // placement under the configured centers
}

export interface SuggestionCard {
  action: string;
  rank: SuggestionWire["rank"];
  badge: "optimal" | "fallback";
  label: Emotion;
  confidence: number;
  rationale: string;
  ts_ms: number;
  ageS: number;
}

export interface HistoryRow {
  ts_ms: number;
  kind: "suggestion" | "action";
  text: string;
}

export interface DashboardViewModel {
  connection: "connecting" | "live" | "stale" | "ended";
  centers: Record<Emotion, { valence: number; arousal: number }>;
  actions: string[];
  scatter: ScatterPoint[];
  centroid: { valence: number; arousal: number } | null;
  counts: Record<Emotion, number>;
  collective: { label: Emotion; confidence: number } | null;
  card: SuggestionCard | null;
  history: HistoryRow[];
  metrics: { curiousDwellPct: number | null; interventionsPerMin: number | null };
  infeasible: string[];
  error: string | null;
  pseudoByStudent: Record<string, string>;
}

// circumplex default; replaced by the service's classifier config on the
// first snapshot so config changes propagate without a redeploy
const FALLBACK_CENTERS: DashboardViewModel["centers"] = {
  bored: { valence: -0.5, arousal: -0.5 },
  satisfied: { valence: 0.5, arousal: -0.5 },
  curious: { valence: 0.5, arousal: 0.5 },
  confused: { valence: -0.5, arousal: 0.5 },
};

export function initialViewModel(): DashboardViewModel {
  return {
    connection: "connecting",
    centers: FALLBACK_CENTERS,
    actions: [],
    scatter: [],
    centroid: null,
    counts: { bored: 0, satisfied: 0, curious: 0, confused: 0 },
    collective: null,
    card: null,
    history: [],
    metrics: { curiousDwellPct: null, interventionsPerMin: null },
    infeasible: [],
    error: null,
    pseudoByStudent: {},
  };
}

export function quadrantOf(
  point: { valence: number; arousal: number },
  centers: DashboardViewModel["centers"],
): Emotion {
  let best: Emotion = "bored";
  let bestDist = Infinity;
  for (const emotion of Object.keys(centers) as Emotion[]) {
    const c = centers[emotion];
    const d = (point.valence - c.valence) ** 2 + (point.arousal - c.arousal) ** 2;
    if (d < bestDist) {
      bestDist = d;
      best = emotion;
    }
  }
  return best;
}

function pseudoFor(vm: DashboardViewModel, studentId: string): string {
  if (!(studentId in vm.pseudoByStudent)) {
    vm.pseudoByStudent[studentId] = `S${Object.keys(vm.pseudoByStudent).length + 1}`;
  }
  return vm.pseudoByStudent[studentId];
}

function applyCollective(vm: DashboardViewModel, state: CollectiveStateWire): void {
  vm.scatter = Object.keys(state.students)
    .sort()
    .map((sid) => {
      const p = state.students[sid];
      return {
        pseudo: pseudoFor(vm, sid),
        valence: p.valence,
        arousal: p.arousal,
        label: p.label,
        quadrant: quadrantOf(p, vm.centers),
      };
    });
  vm.centroid = { ...state.centroid };
  vm.counts = { ...state.counts };
  vm.collective = {
    label: state.collective.label,
    confidence: state.collective.confidence,
  };
}

function cardFrom(suggestion: SuggestionWire, nowMs: number): SuggestionCard {
  return {
    action: suggestion.action,
    rank: suggestion.rank,
    badge: suggestion.rank === "optimal" ? "optimal" : "fallback",
    label: suggestion.label,
    confidence: suggestion.confidence,
    rationale: suggestion.rationale,
    ts_ms: suggestion.ts_ms,
    ageS: Math.max(0, (nowMs - suggestion.ts_ms) / 1000),
  };
}

export function applyEvent(
  vm: DashboardViewModel,
  event: StreamEvent,
  nowMs: number,
): DashboardViewModel {
  if (vm.connection === "connecting" || vm.connection === "stale") vm.connection = "live";
  if (event.type === "state") {
    applyCollective(vm, event.data);
  } else if (event.type === "suggestion") {
    vm.card = cardFrom(event.data, nowMs);
    vm.history.push({
      ts_ms: event.data.ts_ms,
      kind: "suggestion",
      text: `suggested ${event.data.action} (${event.data.rank}) while ${event.data.label}`,
    });
  }
  return vm;
}

export function applySnapshot(vm: DashboardViewModel, snap: StateSnapshot): DashboardViewModel {
  vm.centers = { ...snap.classifier.centers };
  vm.actions = [...snap.actions];
  vm.infeasible = [...snap.infeasible];
  if (snap.status === "ended") vm.connection = "ended";
  if (snap.collective) applyCollective(vm, snap.collective);
  if (snap.suggestion) vm.card = cardFrom(snap.suggestion, snap.suggestion.ts_ms);
  const dwell = snap.metrics.collective_dwell_fractions;
  vm.metrics = {
    curiousDwellPct: dwell ? dwell.curious * 100 : null,
    interventionsPerMin: snap.metrics.interventions_per_minute ?? null,
  };
  return vm;
}

export function setStale(vm: DashboardViewModel, stale: boolean): DashboardViewModel {
  if (vm.connection !== "ended") {
    vm.connection = stale ? "stale" : "live";
  }
  return vm;
}

export function recordAction(
  vm: DashboardViewModel,
  action: string,
  source: string,
  tsMs: number,
): DashboardViewModel {
  vm.history.push({ ts_ms: tsMs, kind: "action", text: `${source}: ${action}` });
  if (source === "infeasible" && !vm.infeasible.includes(action)) {
    vm.infeasible.push(action);
  }
  vm.error = null;
  return vm;
}
