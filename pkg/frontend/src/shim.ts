/** Browser entry the annotated page loads as /shim.js.
 *
 * Exposes window.spotex.getNetworks(callback) to page code and keeps every
 * cond-carrying block toggled against the live fingerprint. The session
 * token comes from the page's spotex-session meta tag; the DPI server is
 * the page's own origin.
 */

import { HIDDEN_CLASS, processCondBlocks } from "./cond";
import { NetworkPoller, type FingerprintCallback } from "./poller";

declare global {
  interface Window {
    spotex?: { getNetworks(callback: FingerprintCallback): void };
  }
}

const installHiddenRule = (): void => {
  const style = document.createElement("style");
  style.textContent = `.${HIDDEN_CLASS} { display: none; }`;
  document.head.appendChild(style);
};

const boot = (): void => {
  const meta = document.querySelector('meta[name="spotex-session"]');
  const session = meta?.getAttribute("content") ?? "";
  if (session === "") {
    console.warn("spotex shim: no session meta tag, not polling");
    return;
  }
  installHiddenRule();

  const poller = new NetworkPoller({
    dpiBaseUrl: "",
    sessionId: session,
    pollIntervalMs: 250,
  });
  poller.getNetworks((networks) => {
    processCondBlocks(document.querySelectorAll("[cond]"), networks);
  });
  window.spotex = { getNetworks: (cb) => poller.getNetworks(cb) };
  poller.start();
};

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
