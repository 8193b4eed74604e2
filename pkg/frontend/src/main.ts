/**
 * DOM wiring for the webplayer page. The user picks a local media file,
 * connects to a session engine, and watches; the engine drives the rate.
 * A marker button reports a laugh manually when no AU sensor is running.
 */

import { PlayerController, type SocketLike } from "./player.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const video = byId<HTMLVideoElement>("video");
const fileInput = byId<HTMLInputElement>("file");
const urlInput = byId<HTMLInputElement>("ws-url");
const connectButton = byId<HTMLButtonElement>("connect");
const markerButton = byId<HTMLButtonElement>("marker");
const statusBadge = byId<HTMLSpanElement>("status");
const rateHud = byId<HTMLSpanElement>("rate-hud");
const warningsList = byId<HTMLUListElement>("warnings");

urlInput.value =
  new URLSearchParams(window.location.search).get("ws") ?? "ws://127.0.0.1:8765";

let controller: PlayerController | null = null;

fileInput.addEventListener("change", () => {
  const file = fileInput.files?.[0];
  if (file) {
    video.src = URL.createObjectURL(file);
  }
});

function warn(text: string): void {
  const item = document.createElement("li");
  item.textContent = `${new Date().toLocaleTimeString()} ${text}`;
  warningsList.prepend(item);
}

connectButton.addEventListener("click", () => {
  controller?.close();
  controller = new PlayerController(
    urlInput.value,
    video,
    (url) => new WebSocket(url) as unknown as SocketLike,
    {
      onState: (state) => {
        statusBadge.textContent = state.status;
        statusBadge.dataset.status = state.status;
      },
      onWarning: warn,
      onMarkerSent: () => {
        markerButton.classList.add("flash");
        setTimeout(() => markerButton.classList.remove("flash"), 300);
      },
    },
  );
  controller.connect();
  markerButton.disabled = false;
});

markerButton.addEventListener("click", () => controller?.sendMarker());

// The HUD reads the element itself, not the last message, so it can never
// disagree with what the viewer actually hears.
setInterval(() => {
  rateHud.textContent = `${video.playbackRate.toFixed(1)}×`;
}, 100);
