// Wire types, mirroring the service's REST and event-stream schemas exactly.

export type Emotion = "bored" | "satisfied" | "curious" | "confused";

export interface StudentPoint {
  valence: number;
  arousal: number;
  weight: number;
  label: Emotion;
}

export interface CollectiveStateWire {
  counts: Record<Emotion, number>;
  students: Record<string, StudentPoint>;
  centroid: { valence: number; arousal: number };
  collective: { label: Emotion; confidence: number; memberships: Record<Emotion, number> };
  n_emotions: number;
}

export interface SuggestionWire {
  action: string;
  rank: "optimal" | "suboptimal" | "best_feasible";
  label: Emotion;
  confidence: number;
  ts_ms: number;
  rationale: string;
}

export interface MetricsWire {
  ticks: number;
  observed_s: number;
  collective_dwell_fractions: Record<Emotion, number>;
  suggestion_count: number;
  intervention_count: number;
  interventions_per_minute: number;
  [key: string]: unknown;
}

export interface StateSnapshot {
  session_id: string;
  status: "calibrating" | "live" | "ended";
  collective: CollectiveStateWire | null;
  suggestion: SuggestionWire | null;
  infeasible: string[];
  metrics: MetricsWire;
  classifier: {
    centers: Record<Emotion, { valence: number; arousal: number }>;
    sigma: number;
  };
  actions: string[];
}

export type StreamEvent =
  | { type: "state"; id?: number; data: CollectiveStateWire }
  | { type: "suggestion"; id?: number; data: SuggestionWire }
  | { type: "heartbeat"; id?: number; data: { ts_ms: number } };

export type ActionSource = "applied" | "override" | "infeasible";
