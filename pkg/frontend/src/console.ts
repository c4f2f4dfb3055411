/** Venue console: drag a virtual device around a floor plan, watch the
 * fingerprint and fired rules react, and edit the live ruleset in place.
 * Served by the DPI server as /console; talks only to its HTTP endpoints.
 */

import { ConsoleController, type ConsoleState } from "./controller";
import { DpiClient } from "./dpi";
import { NetworkPoller } from "./poller";
import type { VenueInfo, WireObservation } from "./types";

const MAP_SIZE_PX = 520;
const MARGIN_M = 5;

const newSession = (): string => {
  const raw = new Uint8Array(18);
  crypto.getRandomValues(raw);
  return btoa(String.fromCharCode(...raw)).replace(/\+/g, "-").replace(/\//g, "_");
};

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`console page is missing #${id}`);
  return node as T;
};

interface MapScale {
  minX: number;
  minY: number;
  pxPerMeter: number;
}

const scaleFor = (venue: VenueInfo): MapScale => {
  const xs = venue.aps.map((ap) => ap.x);
  const ys = venue.aps.map((ap) => ap.y);
  const minX = Math.min(0, ...xs) - MARGIN_M;
  const maxX = Math.max(0, ...xs) + MARGIN_M;
  const minY = Math.min(0, ...ys) - MARGIN_M;
  const maxY = Math.max(0, ...ys) + MARGIN_M;
  const span = Math.max(maxX - minX, maxY - minY, 1);
  return { minX, minY, pxPerMeter: MAP_SIZE_PX / span };
};

const toPx = (s: MapScale, x: number, y: number): [number, number] => [
  (x - s.minX) * s.pxPerMeter,
  (y - s.minY) * s.pxPerMeter,
];

const toMeters = (s: MapScale, px: number, py: number): [number, number] => [
  px / s.pxPerMeter + s.minX,
  py / s.pxPerMeter + s.minY,
];

const renderFingerprint = (networks: WireObservation[]): void => {
  const rows = networks.map(
    (n) =>
      `<tr><td>${n.SSID === "" ? "<i>(beacon)</i>" : escapeHtml(n.SSID)}</td>` +
      `<td>${n.MAC}</td><td>${n.RSSI}</td><td>${n.kind}</td></tr>`,
  );
  el("fingerprint-body").innerHTML =
    rows.join("") || '<tr><td colspan="4"><i>nothing in range</i></td></tr>';
};

const escapeHtml = (text: string): string =>
  text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

const renderState = (state: ConsoleState, scale: MapScale): void => {
  renderFingerprint(state.fingerprint);
  el("fired-list").innerHTML =
    state.evaluation.fired.map((id) => `<li><code>${escapeHtml(id)}</code></li>`).join("") ||
    "<li><i>no rules fired</i></li>";
  el("content-preview").innerHTML = state.evaluation.snippets
    .map((s) => `<section><h4>${escapeHtml(s.title)}</h4>${s.html}</section>`)
    .join("");
  const [px, py] = toPx(scale, state.position.x, state.position.y);
  const marker = el("device-marker");
  marker.style.left = `${px}px`;
  marker.style.top = `${py}px`;
  el("position-readout").textContent =
    `x=${state.position.x.toFixed(1)} m, y=${state.position.y.toFixed(1)} m, floor ${state.position.floor}`;
  const diag = el("rules-diagnostic");
  diag.textContent = state.diagnostic ?? "";
  diag.hidden = state.diagnostic === null;
  const err = el("transport-error");
  err.textContent = state.transportError ?? "";
  err.hidden = state.transportError === null;
};

const renderAps = (venue: VenueInfo, floor: number, scale: MapScale): void => {
  const map = el("map");
  map.querySelectorAll(".ap-dot").forEach((n) => n.remove());
  for (const ap of venue.aps) {
    if (ap.floor !== floor) continue;
    const dot = document.createElement("div");
    dot.className = "ap-dot";
    dot.title = `${ap.ssid || ap.mac} (${ap.tx_ref_dbm} dBm at 1 m)`;
    const [px, py] = toPx(scale, ap.x, ap.y);
    dot.style.left = `${px}px`;
    dot.style.top = `${py}px`;
    dot.textContent = ap.ssid || "•";
    map.appendChild(dot);
  }
};

const boot = async (): Promise<void> => {
  const session = newSession();
  const client = new DpiClient("");
  const controller = new ConsoleController(client, session, (state) =>
    renderState(state, scale),
  );

  await controller.init();
  const venue = controller.state.venue;
  if (venue === null) throw new Error("venue endpoint returned nothing");
  const scale = scaleFor(venue);

  const floors = [...new Set(venue.aps.map((ap) => ap.floor))].sort((a, b) => a - b);
  const floorBar = el("floor-bar");
  let currentFloor = floors[0] ?? 0;
  const selectFloor = (floor: number): void => {
    currentFloor = floor;
    floorBar.querySelectorAll("button").forEach((b) => {
      b.classList.toggle("active", Number(b.dataset.floor) === floor);
    });
    renderAps(venue, floor, scale);
    controller.requestMove({ ...controller.state.position, floor });
  };
  for (const floor of floors.length > 0 ? floors : [0]) {
    const button = document.createElement("button");
    button.textContent = `Floor ${floor}`;
    button.dataset.floor = String(floor);
    button.addEventListener("click", () => selectFloor(floor));
    floorBar.appendChild(button);
  }

  el("venue-name").textContent = venue.name;
  (el("rules-editor") as HTMLTextAreaElement).value = controller.state.rulesText;

  // drag: every pointermove requests a move; the controller serializes them
  const map = el("map");
  const marker = el("device-marker");
  let dragging = false;
  const moveTo = (event: PointerEvent): void => {
    const rect = map.getBoundingClientRect();
    const px = Math.min(Math.max(event.clientX - rect.left, 0), rect.width);
    const py = Math.min(Math.max(event.clientY - rect.top, 0), rect.height);
    const [x, y] = toMeters(scale, px, py);
    controller.requestMove({ x, y, floor: currentFloor });
  };
  marker.addEventListener("pointerdown", (e) => {
    dragging = true;
    marker.setPointerCapture(e.pointerId);
  });
  marker.addEventListener("pointermove", (e) => {
    if (dragging) moveTo(e);
  });
  marker.addEventListener("pointerup", (e) => {
    dragging = false;
    marker.releasePointerCapture(e.pointerId);
    moveTo(e);
  });
  map.addEventListener("click", (e) => moveTo(e as PointerEvent));

  el("rules-submit").addEventListener("click", () => {
    const text = (el("rules-editor") as HTMLTextAreaElement).value;
    void controller.submitRules(text);
  });

  // live fingerprint panel keeps breathing even when the marker is parked
  const poller = new NetworkPoller({ dpiBaseUrl: "", sessionId: session });
  poller.getNetworks(renderFingerprint);
  poller.start();

  renderAps(venue, currentFloor, scale);
  selectFloor(currentFloor);
};

void boot().catch((err) => {
  const banner = document.getElementById("transport-error");
  if (banner !== null) {
    banner.textContent = String(err);
    banner.hidden = false;
  }
});
