/** Keyboard shortcuts: curation is high-frequency work, hands stay on keys. */

import type { Verdict } from "./types.js";

export type KeyAction =
  | { kind: "verdict"; verdict: Verdict }
  | { kind: "skip" }
  | null;

export function keyAction(key: string): KeyAction {
  switch (key) {
    case "a":
      return { kind: "verdict", verdict: "accept" };
    case "r":
      return { kind: "verdict", verdict: "reject" };
    case "s":
      return { kind: "skip" };
    default:
      return null;
  }
}
