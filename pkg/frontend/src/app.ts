// Browser bootstrap: ?session=http://host:port/sessions/sess-000001

import { ActionClient, fetchSnapshot } from "./api.js";
import { connectStream } from "./sse.js";
import { render } from "./render.js";
import {
  applyEvent,
  applySnapshot,
  initialViewModel,
  recordAction,
  setStale,
} from "./viewmodel.js";
import type { ActionSource, StateSnapshot } from "./types.js";

const root = document.querySelector<HTMLDivElement>("#app");
const sessionUrl = new URLSearchParams(location.search).get("session") ?? "";
if (!root) throw new Error("missing #app container");
if (!sessionUrl) {
  root.innerHTML = "<p>pass ?session=http://host:port/sessions/&lt;id&gt;</p>";
  throw new Error("missing session URL");
}

const vm = initialViewModel();
const client = new ActionClient(sessionUrl);

function draw() {
  root!.innerHTML = render(vm);
  const apply = document.querySelector<HTMLButtonElement>("#btn-apply");
  const infeasible = document.querySelector<HTMLButtonElement>("#btn-infeasible");
  const override = document.querySelector<HTMLButtonElement>("#btn-override");
  const pick = document.querySelector<HTMLSelectElement>("#override-action");
  apply?.addEventListener("click", () => act(vm.card!.action, "applied"));
  infeasible?.addEventListener("click", () => act(vm.card!.action, "infeasible"));
  override?.addEventListener("click", () => act(pick!.value, "override"));
}

async function act(action: string, source: ActionSource) {
  if (client.busy) return; // button stays one-shot while in flight
  const result = await client.send(action, source);
  if (result.ok) {
    recordAction(vm, action, source, Date.now());
  } else if (result.error !== "request already in flight") {
    vm.error = result.error ?? `HTTP ${result.status}`;
  }
  await refreshSnapshot();
  draw();
}

async function refreshSnapshot() {
  try {
    applySnapshot(vm, (await fetchSnapshot(sessionUrl)) as StateSnapshot);
  } catch {
    // the stream keeps the view alive; snapshot refresh is best effort
  }
}

connectStream(
  `${sessionUrl}/stream`,
  (event) => {
    applyEvent(vm, event, Date.now());
    draw();
  },
  (stale) => {
    setStale(vm, stale);
    draw();
  },
);

refreshSnapshot().then(draw);
