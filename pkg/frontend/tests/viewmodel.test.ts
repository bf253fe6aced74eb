import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseTranscript } from "../src/sse.js";
import {
  applyEvent,
  applySnapshot,
  initialViewModel,
  quadrantOf,
  recordAction,
  setStale,
} from "../src/viewmodel.js";
import { render, renderBars, renderCard, renderPlane, renderStatusBanner } from "../src/render.js";
import type { StateSnapshot, StreamEvent } from "../src/types.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");
const transcript = readFileSync(join(FIXTURES, "recorded_stream.txt"), "utf-8");
const snapshot = JSON.parse(
  readFileSync(join(FIXTURES, "state_snapshot.json"), "utf-8"),
) as StateSnapshot;
const events = parseTranscript(transcript);

function replayAll() {
  const vm = initialViewModel();
  applySnapshot(vm, snapshot); // centers/actions/metrics come from REST
  for (const event of events) applyEvent(vm, event, event.type === "heartbeat" ? 0 : 1);
  return vm;
}

describe("view model over the recorded fixture", () => {
  it("places every student point in the quadrant of its label", () => {
    const vm = replayAll();
    expect(vm.scatter.length).toBeGreaterThan(0);
    for (const point of vm.scatter) {
      expect(point.quadrant).toBe(point.label);
    }
    // the recorded class sits in confusion: negative valence, high arousal
    for (const point of vm.scatter) {
      expect(point.label).toBe("confused");
      expect(point.valence).toBeLessThan(0);
      expect(point.arousal).toBeGreaterThan(0);
    }
  });

  it("derives counts and centroid straight from the last state payload", () => {
    const vm = replayAll();
    const lastState = [...events].reverse().find((e) => e.type === "state");
    expect(lastState).toBeDefined();
    if (lastState?.type !== "state") return;
    expect(vm.counts).toEqual(lastState.data.counts);
    expect(vm.centroid).toEqual(lastState.data.centroid);
    expect(vm.collective?.label).toBe(lastState.data.collective.label);
  });

  it("anonymizes students with stable pseudo labels", () => {
    const vm = replayAll();
    const pseudos = vm.scatter.map((p) => p.pseudo);
    expect(new Set(pseudos).size).toBe(pseudos.length);
    expect(pseudos.every((p) => /^S\d+$/.test(p))).toBe(true);
    // raw student ids never reach the rendered plane
    const html = renderPlane(vm);
    for (const sid of Object.keys(snapshot.collective?.students ?? {})) {
      expect(html).not.toContain(sid);
    }
  });

  it("surfaces the fallback suggestion after the infeasible flow", () => {
    const suggestions = events.filter((e) => e.type === "suggestion");
    expect(suggestions).toHaveLength(2);

    const vm = initialViewModel();
    applySnapshot(vm, snapshot);
    applyEvent(vm, suggestions[0] as StreamEvent, 1);
    expect(vm.card?.action).toBe("simplify_content");
    expect(vm.card?.badge).toBe("optimal");
    expect(renderCard(vm)).toContain("badge-optimal");

    applyEvent(vm, suggestions[1] as StreamEvent, 1);
    expect(vm.card?.action).toBe("decrease_pace");
    expect(vm.card?.rank).toBe("suboptimal");
    expect(vm.card?.badge).toBe("fallback");
    expect(vm.card?.label).toBe("confused");
    const html = renderCard(vm);
    expect(html).toContain("badge-fallback");
    expect(html).toContain("decrease_pace");
  });

  it("keeps a history row per suggestion", () => {
    const vm = replayAll();
    const rows = vm.history.filter((h) => h.kind === "suggestion");
    expect(rows).toHaveLength(2);
    expect(rows[0].text).toContain("simplify_content");
    expect(rows[1].text).toContain("decrease_pace");
  });

  it("reads the metrics strip from the REST snapshot", () => {
    const vm = replayAll();
    const dwell = snapshot.metrics.collective_dwell_fractions.curious * 100;
    expect(vm.metrics.curiousDwellPct).toBeCloseTo(dwell, 10);
    expect(vm.metrics.interventionsPerMin).toBe(snapshot.metrics.interventions_per_minute);
  });

  it("pulls quadrant labels from the service classifier config", () => {
    const vm = replayAll();
    expect(vm.centers).toEqual(snapshot.classifier.centers);
    const flipped = structuredClone(snapshot);
    flipped.classifier.centers.curious = { valence: -0.5, arousal: -0.5 };
    flipped.classifier.centers.bored = { valence: 0.5, arousal: 0.5 };
    const vm2 = initialViewModel();
    applySnapshot(vm2, flipped);
    expect(quadrantOf({ valence: 0.6, arousal: 0.6 }, vm2.centers)).toBe("bored");
  });

  it("stale flag drives the banner and clears on traffic", () => {
    const vm = replayAll();
    setStale(vm, true);
    expect(vm.connection).toBe("stale");
    expect(renderStatusBanner(vm)).toContain("stale");
    applyEvent(vm, events.find((e) => e.type === "state") as StreamEvent, 0);
    expect(vm.connection).toBe("live");
    expect(renderStatusBanner(vm)).toBe("");
  });

  it("bar widths reflect the counts", () => {
    const vm = replayAll();
    const html = renderBars(vm);
    expect(html).toContain('data-emotion="confused"');
    expect(html).toContain("width:100.0%"); // all four students confused
    expect(html).toContain("width:0.0%");
  });

  it("full render is traceable: no invented numbers", () => {
    const vm = replayAll();
    const html = render(vm);
    // spot-check: centroid position derives from the payload coordinates
    const lastState = [...events].reverse().find((e) => e.type === "state");
    if (lastState?.type !== "state") return;
    const x = (((lastState.data.centroid.valence + 1) / 2) * 100).toFixed(2);
    expect(html).toContain(`left:${x}%`);
  });

  it("recordAction appends history and tracks infeasible locally after 200", () => {
    const vm = replayAll();
    const before = vm.history.length;
    recordAction(vm, "simplify_content", "infeasible", 1000);
    expect(vm.history).toHaveLength(before + 1);
    expect(vm.infeasible).toContain("simplify_content");
  });
});
