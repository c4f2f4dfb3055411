/** cond-attribute matching: the client half of the annotated page contract.
 *
 * A cond attribute holds whitespace-separated tokens joined by AND. A token
 * starting with `mac:` names a hardware address (case and separator
 * insensitive); any other token is an exact, case-sensitive network name.
 * shared/cond-vectors.json pins these semantics for both test suites.
 */

import type { WireObservation } from "./types";

export interface CondSpec {
  tokens: string[];
}

export const HIDDEN_CLASS = "spotex-hidden";

/** Parse a cond attribute; null when absent or empty after trimming. */
export const parseCond = (attr: string | null): CondSpec | null => {
  if (attr === null) return null;
  const tokens = attr.split(/\s+/).filter((t) => t.length > 0);
  if (tokens.length === 0) return null;
  return { tokens };
};

const normalizeMac = (raw: string): string | null => {
  const hex = raw.replace(/[:-]/g, "").toUpperCase();
  if (!/^[0-9A-F]{12}$/.test(hex)) return null;
  return hex.match(/../g)!.join(":");
};

export const tokenMatches = (token: string, networks: WireObservation[]): boolean => {
  if (token.startsWith("mac:")) {
    const mac = normalizeMac(token.slice(4));
    if (mac === null) return false;
    return networks.some((n) => n.MAC === mac);
  }
  return networks.some((n) => n.SSID === token);
};

export const condSatisfied = (spec: CondSpec, networks: WireObservation[]): boolean =>
  spec.tokens.every((token) => tokenMatches(token, networks));

/** The slice of a DOM element the block processor needs; real elements
 * satisfy it structurally, tests can pass plain objects. */
export interface CondBlock {
  getAttribute(name: string): string | null;
  classList: { add(name: string): void; remove(name: string): void };
  style?: { removeProperty(name: string): void };
}

export interface WarnLog {
  warn(message: string): void;
}

/** Toggle every cond-carrying block against the current fingerprint.
 *
 * Visibility is a CSS class, added or removed idempotently each cycle;
 * any server-rendered inline display fallback is cleared the moment the
 * shim takes over. Blocks without cond (or with a blank one) are left
 * alone.
 */
export const processCondBlocks = (
  blocks: Iterable<CondBlock>,
  networks: WireObservation[],
  log: WarnLog = console,
): void => {
  for (const block of blocks) {
    const attr = block.getAttribute("cond");
    if (attr === null) continue;
    const spec = parseCond(attr);
    if (spec === null) {
      log.warn("ignoring blank cond attribute");
      continue;
    }
    block.style?.removeProperty("display");
    if (condSatisfied(spec, networks)) {
      block.classList.remove(HIDDEN_CLASS);
    } else {
      block.classList.add(HIDDEN_CLASS);
    }
  }
};
