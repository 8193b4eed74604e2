/**
 * Headless player controller: owns the socket lifecycle, applies engine
 * speed commands to the media element, streams the media clock as ticks,
 * and sends manual laugh markers.
 *
 * The controller never originates a rate change; the only writer of
 * playbackRate is an accepted engine speed message. DOM wiring lives in
 * main.ts so this class stays testable against any media-like object.
 */

import {
  helloFrame,
  markerFrame,
  offGridReportFrame,
  onGrid,
  parseEngineMessage,
  tickFrame,
} from "./protocol.js";

export type PlayerStatus = "connecting" | "live" | "reconnecting" | "closed";

export interface PlayerConnectionState {
  status: PlayerStatus;
  /** Mirrors the most recent accepted speed message; in [0.6, 1.0]. */
  currentRate: number;
  /** Media time carried by that message, null before the first one. */
  lastCommandT: number | null;
}

/** The slice of HTMLMediaElement the controller actually touches. */
export interface MediaLike {
  playbackRate: number;
  currentTime: number;
  paused: boolean;
}

/** Structural WebSocket so browser sockets and test sockets both fit. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface PlayerHooks {
  /** Status or rate changed; render the HUD from this. */
  onState?: (state: PlayerConnectionState) => void;
  /** Visible warnings: engine errors, dropped markers, off-grid rates. */
  onWarning?: (text: string) => void;
  /** A marker actually went out; flash the button. */
  onMarkerSent?: () => void;
}

export interface PlayerOptions {
  tickPeriodMs?: number;
  markerTtlMs?: number;
  reconnectBaseMs?: number;
  reconnectCapMs?: number;
}

export const DEFAULT_TICK_PERIOD_MS = 250;
export const DEFAULT_MARKER_TTL_MS = 10_000;
export const DEFAULT_RECONNECT_BASE_MS = 500;
export const DEFAULT_RECONNECT_CAP_MS = 10_000;

interface QueuedMarker {
  t: number;
  dropTimer: ReturnType<typeof setTimeout>;
}

export class PlayerController {
  readonly state: PlayerConnectionState;

  private readonly media: MediaLike;
  private readonly factory: SocketFactory;
  private readonly url: string;
  private readonly hooks: PlayerHooks;
  private readonly tickPeriodMs: number;
  private readonly markerTtlMs: number;
  private readonly reconnectBaseMs: number;
  private readonly reconnectCapMs: number;

  private socket: SocketLike | null = null;
  private live = false;
  private closed = false;
  private retries = 0;
  private lastTickT: number | null = null;
  private tickTimer: ReturnType<typeof setInterval> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private pendingMarkers: QueuedMarker[] = [];

  constructor(
    url: string,
    media: MediaLike,
    factory: SocketFactory,
    hooks: PlayerHooks = {},
    options: PlayerOptions = {},
  ) {
    this.url = url;
    this.media = media;
    this.factory = factory;
    this.hooks = hooks;
    this.tickPeriodMs = options.tickPeriodMs ?? DEFAULT_TICK_PERIOD_MS;
    this.markerTtlMs = options.markerTtlMs ?? DEFAULT_MARKER_TTL_MS;
    this.reconnectBaseMs = options.reconnectBaseMs ?? DEFAULT_RECONNECT_BASE_MS;
    this.reconnectCapMs = options.reconnectCapMs ?? DEFAULT_RECONNECT_CAP_MS;
    this.state = { status: "connecting", currentRate: media.playbackRate, lastCommandT: null };
  }

  connect(): void {
    if (this.closed) {
      throw new Error("controller is closed");
    }
    this.setStatus("connecting");
    this.open();
    if (this.tickTimer === null) {
      this.tickTimer = setInterval(() => this.tick(), this.tickPeriodMs);
    }
  }

  /** Stop for good: no reconnects, no ticks. */
  close(): void {
    this.closed = true;
    this.live = false;
    if (this.tickTimer !== null) {
      clearInterval(this.tickTimer);
      this.tickTimer = null;
    }
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    for (const marker of this.pendingMarkers.splice(0)) {
      clearTimeout(marker.dropTimer);
    }
    this.socket?.close();
    this.socket = null;
    this.setStatus("closed");
  }

  /**
   * Send a laugh marker stamped with the current media time. While
   * disconnected the marker is queued and flushed on reconnect, or
   * dropped with a visible warning once it outlives the ttl.
   */
  sendMarker(): void {
    const t = this.media.currentTime;
    if (this.live && this.socket !== null) {
      this.socket.send(markerFrame(t));
      this.hooks.onMarkerSent?.();
      return;
    }
    const queued: QueuedMarker = {
      t,
      dropTimer: setTimeout(() => this.dropMarker(queued), this.markerTtlMs),
    };
    this.pendingMarkers.push(queued);
  }

  // -- socket lifecycle ----------------------------------------------------

  private open(): void {
    let sock: SocketLike;
    try {
      sock = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = sock;
    sock.onopen = () => {
      if (this.socket !== sock) {
        return;
      }
      this.retries = 0;
      this.live = true;
      sock.send(helloFrame());
      this.setStatus("live");
      this.flushMarkers();
    };
    sock.onmessage = (ev) => {
      if (this.socket === sock) {
        this.handleFrame(String(ev.data));
      }
    };
    sock.onclose = () => {
      if (this.socket !== sock) {
        return;
      }
      this.live = false;
      if (!this.closed) {
        this.scheduleReconnect();
      }
    };
    sock.onerror = () => {
      // the close event that follows drives the reconnect
    };
  }

  private scheduleReconnect(): void {
    if (this.closed || this.reconnectTimer !== null) {
      return;
    }
    this.setStatus("reconnecting");
    const delay = Math.min(this.reconnectBaseMs * 2 ** this.retries, this.reconnectCapMs);
    this.retries += 1;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.open();
    }, delay);
  }

  // -- inbound -------------------------------------------------------------

  private handleFrame(text: string): void {
    const msg = parseEngineMessage(text);
    if (msg === null) {
      return;
    }
    switch (msg.type) {
      case "speed":
        this.applySpeed(msg.rate, msg.t);
        break;
      case "state":
        // informational; the init speed message that follows drives the rate
        break;
      case "error":
        this.hooks.onWarning?.(`engine error: ${msg.code}`);
        break;
    }
  }

  private applySpeed(rate: number, t: number): void {
    if (!onGrid(rate)) {
      this.socket?.send(offGridReportFrame(rate));
      this.hooks.onWarning?.(`ignored off-grid rate ${rate}`);
      return;
    }
    this.state.lastCommandT = t;
    if (rate === this.media.playbackRate) {
      return; // duplicate command: nothing visible changes
    }
    this.media.playbackRate = rate;
    this.state.currentRate = rate;
    this.emitState();
  }

  // -- outbound ------------------------------------------------------------

  private tick(): void {
    if (!this.live || this.socket === null || this.media.paused) {
      return;
    }
    const t = this.media.currentTime;
    if (this.lastTickT !== null && t <= this.lastTickT) {
      return; // the engine requires a strictly increasing media clock
    }
    this.socket.send(tickFrame(t));
    this.lastTickT = t;
  }

  private flushMarkers(): void {
    for (const marker of this.pendingMarkers.splice(0)) {
      clearTimeout(marker.dropTimer);
      this.socket?.send(markerFrame(marker.t));
      this.hooks.onMarkerSent?.();
    }
  }

  private dropMarker(queued: QueuedMarker): void {
    const index = this.pendingMarkers.indexOf(queued);
    if (index >= 0) {
      this.pendingMarkers.splice(index, 1);
      this.hooks.onWarning?.(
        `marker at ${queued.t.toFixed(1)}s dropped: offline for ${this.markerTtlMs / 1000}s`,
      );
    }
  }

  private setStatus(status: PlayerStatus): void {
    this.state.status = status;
    this.emitState();
  }

  private emitState(): void {
    this.hooks.onState?.({ ...this.state });
  }
}
