/**
 * Wire protocol shared with the session engine. One JSON object per frame.
 *
 * Outbound (player -> engine):
 *   {"type": "hello", "role": "player"}
 *   {"type": "tick", "t": mediaSeconds}
 *   {"type": "marker", "t": mediaSeconds}
 *   {"type": "error", "code": "off_grid_rate", "rate": r}
 *
 * Inbound (engine -> player):
 *   {"type": "speed", "rate": r, "t": mediaSeconds, "cause": s}
 *   {"type": "state", "rate": r, "punchlines_seen": n}
 *   {"type": "error", "code": s}
 */

export const RATE_MIN = 0.6;
export const RATE_MAX = 1.0;

// engine rates arrive as accumulated 0.1 steps; tolerate float residue
const GRID_TOLERANCE = 1e-9;

export interface SpeedMessage {
  type: "speed";
  rate: number;
  t: number;
  cause: string;
}

export interface StateMessage {
  type: "state";
  rate: number;
  punchlinesSeen: number;
}

export interface EngineErrorMessage {
  type: "error";
  code: string;
}

export type EngineMessage = SpeedMessage | StateMessage | EngineErrorMessage;

/** True when rate is a 0.1 multiple inside [0.6, 1.0], up to float residue. */
export function onGrid(rate: number): boolean {
  if (!Number.isFinite(rate)) {
    return false;
  }
  if (rate < RATE_MIN - GRID_TOLERANCE || rate > RATE_MAX + GRID_TOLERANCE) {
    return false;
  }
  const tenths = rate * 10;
  return Math.abs(tenths - Math.round(tenths)) <= GRID_TOLERANCE * 10;
}

function isFiniteNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

/** Parse one engine frame; null for anything malformed or unknown. */
export function parseEngineMessage(raw: unknown): EngineMessage | null {
  let msg: unknown = raw;
  if (typeof raw === "string") {
    try {
      msg = JSON.parse(raw);
    } catch {
      return null;
    }
  }
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    return null;
  }
  const obj = msg as Record<string, unknown>;
  switch (obj.type) {
    case "speed":
      if (!isFiniteNumber(obj.rate) || !isFiniteNumber(obj.t)) {
        return null;
      }
      return {
        type: "speed",
        rate: obj.rate,
        t: obj.t,
        cause: typeof obj.cause === "string" ? obj.cause : "",
      };
    case "state":
      if (!isFiniteNumber(obj.rate)) {
        return null;
      }
      return {
        type: "state",
        rate: obj.rate,
        punchlinesSeen: isFiniteNumber(obj.punchlines_seen) ? obj.punchlines_seen : 0,
      };
    case "error":
      if (typeof obj.code !== "string") {
        return null;
      }
      return { type: "error", code: obj.code };
    default:
      return null;
  }
}

export function helloFrame(): string {
  return JSON.stringify({ type: "hello", role: "player" });
}

export function tickFrame(t: number): string {
  return JSON.stringify({ type: "tick", t });
}

export function markerFrame(t: number): string {
  return JSON.stringify({ type: "marker", t });
}

export function offGridReportFrame(rate: number): string {
  return JSON.stringify({ type: "error", code: "off_grid_rate", rate });
}
