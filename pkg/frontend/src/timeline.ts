/** Verdict timeline: hours or days coloured by the server's security
 * labels. Built exclusively from a server-sent verdict payload.
 */

import type { VerdictPayload } from "./types.js";

export interface TimelineSlot {
  index: number;
  /** false iff the server listed this slot as violating */
  secure: boolean;
  /** true when the server offered this slot as an alternative */
  alternative: boolean;
}

export function buildTimeline(
  verdict: VerdictPayload,
  horizon = 24,
): TimelineSlot[] {
  const bad = new Set(verdict.infeasibleSteps);
  const alt = new Set(verdict.alternatives);
  const slots: TimelineSlot[] = [];
  for (let i = 0; i < horizon; i += 1) {
    slots.push({ index: i, secure: !bad.has(i), alternative: alt.has(i) });
  }
  return slots;
}

export function slotLabel(index: number, unit: "hour" | "day"): string {
  return unit === "hour" ? `${String(index).padStart(2, "0")}:00` : `day ${index}`;
}
