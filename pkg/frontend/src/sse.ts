// Server-sent events: transcript parsing, reconnect backoff, staleness.

import type { StreamEvent } from "./types.js";

export interface SseParser {
  push(chunk: string): StreamEvent[];
  flush(): StreamEvent[];
}

// Incremental parser for text/event-stream payloads. Works the same on a
// live byte stream and on a recorded transcript.
export function makeSseParser(): SseParser {
  let buffer = "";

  function parseBlock(block: string): StreamEvent | null {
    let type = "";
    let id: number | undefined;
    const dataLines: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith("event:")) type = line.slice(6).trim();
      else if (line.startsWith("data:")) dataLines.push(line.slice(5).trim());
      else if (line.startsWith("id:")) id = Number(line.slice(3).trim());
    }
    if (!type || dataLines.length === 0) return null;
    try {
      return { type, id, data: JSON.parse(dataLines.join("\n")) } as StreamEvent;
    } catch {
      return null; // tolerate malformed frames rather than killing the stream
    }
  }

  return {
    push(chunk: string): StreamEvent[] {
      buffer += chunk;
      const events: StreamEvent[] = [];
      let sep = buffer.indexOf("\n\n");
      while (sep >= 0) {
        const block = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        const event = parseBlock(block);
        if (event) events.push(event);
        sep = buffer.indexOf("\n\n");
      }
      return events;
    },
    flush(): StreamEvent[] {
      const rest = buffer;
      buffer = "";
      const event = rest.trim() ? parseBlock(rest) : null;
      return event ? [event] : [];
    },
  };
}

export function parseTranscript(text: string): StreamEvent[] {
  const parser = makeSseParser();
  return [...parser.push(text), ...parser.flush()];
}

// Exponential backoff for reconnects: 1s, 2s, 4s ... capped at 30s.
export function backoffDelayMs(attempt: number): number {
  return Math.min(1000 * 2 ** Math.max(0, attempt), 30_000);
}

export interface StalenessMonitor {
  seen(): void;
  stop(): void;
}

// Flags the view stale when no event (heartbeats included) arrives within
// the timeout; any event clears the flag.
export function watchStaleness(
  onStale: (stale: boolean) => void,
  timeoutMs = 15_000,
  schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
  cancel: (t: ReturnType<typeof setTimeout>) => void = clearTimeout,
): StalenessMonitor {
  let timer: ReturnType<typeof setTimeout> | null = null;

  function arm() {
    if (timer !== null) cancel(timer);
    timer = schedule(() => onStale(true), timeoutMs);
  }

  arm();
  return {
    seen() {
      onStale(false);
      arm();
    },
    stop() {
      if (timer !== null) cancel(timer);
      timer = null;
    },
  };
}

export interface StreamHandle {
  close(): void;
}

// Browser wiring around EventSource with auto-reconnect and staleness.
export function connectStream(
  url: string,
  onEvent: (event: StreamEvent) => void,
  onStale: (stale: boolean) => void,
): StreamHandle {
  let source: EventSource | null = null;
  let attempt = 0;
  let closed = false;
  const monitor = watchStaleness(onStale);

  function open() {
    if (closed) return;
    source = new EventSource(url);
    for (const type of ["state", "suggestion", "heartbeat"]) {
      source.addEventListener(type, (raw) => {
        attempt = 0;
        monitor.seen();
        try {
          onEvent({ type, data: JSON.parse((raw as MessageEvent).data) } as StreamEvent);
        } catch {
          // ignore malformed frames
        }
      });
    }
    source.onerror = () => {
      source?.close();
      if (!closed) setTimeout(open, backoffDelayMs(attempt++));
    };
  }

  open();
  return {
    close() {
      closed = true;
      monitor.stop();
      source?.close();
    },
  };
}
