/**
 * Screen flow view-model. The client mirrors the server's session gates
 * so users get immediate guidance, but the server stays authoritative:
 * every transition round-trips through the advance endpoint, and a 409
 * is rendered in place rather than retried.
 */

import { SessionView } from "./api.js";

export type Screen =
  | "Intro"
  | "ValuePrompt"
  | "AiChat"
  | "GroupRoom"
  | "Survey"
  | "Voting"
  | "Receipt";

export const SCREEN_ORDER: Screen[] = [
  "Intro", "ValuePrompt", "AiChat", "GroupRoom", "Survey", "Voting", "Receipt",
];

const SCREEN_BY_STATE: Record<string, Screen> = {
  REGISTERED: "Intro",
  INTRO: "Intro",
  VALUE_PROMPT: "ValuePrompt",
  AI_CHAT: "AiChat",
  GROUP_ROOM: "GroupRoom",
  SURVEY: "Survey",
  VOTING: "Voting",
  DONE: "Receipt",
};

export function screenForState(state: string): Screen {
  const screen = SCREEN_BY_STATE[state];
  if (!screen) throw new Error(`unknown session state ${state}`);
  return screen;
}

export interface GateCheck {
  allowed: boolean;
  reason: string;
}

export const MIN_AI_USER_TURNS = 3;

/**
 * Client-side mirror of the server's exit gates: may this screen be
 * opened given the session? Used to disable navigation and to explain
 * why; the server re-checks everything.
 */
export function canOpen(screen: Screen, session: SessionView): GateCheck {
  const current = screenForState(session.state);
  const target = SCREEN_ORDER.indexOf(screen);
  const position = SCREEN_ORDER.indexOf(current);
  if (target <= position) return { allowed: true, reason: "" };
  if (target > position + 1) {
    return {
      allowed: false,
      reason: `finish ${current} first: the study moves one step at a time`,
    };
  }
  if (current === "AiChat" && session.user_turns < MIN_AI_USER_TURNS) {
    return {
      allowed: false,
      reason:
        `share at least ${MIN_AI_USER_TURNS} thoughts with the assistant ` +
        `(${session.user_turns} so far) before joining the group room`,
    };
  }
  return { allowed: true, reason: "" };
}

/** The advance event that moves the session toward the given screen. */
export function advanceEventFor(screen: Screen): string | null {
  switch (screen) {
    case "ValuePrompt": return "INTRO_DONE";
    case "GroupRoom": return "CHAT_DONE";
    case "Survey": return "ROOM_DONE";
    case "Voting": return "SURVEY_DONE";
    case "Receipt": return "BALLOT_ACCEPTED";
    default: return null;
  }
}

export interface ReceiptView {
  seq: number;
  eventHash: string;
  verified: boolean;
}

/** Check a vote receipt against the public chain entries. */
export function verifyReceipt(
  receipt: { seq: number; event_hash: string },
  chainEvents: { seq: number; hash: string }[],
): ReceiptView {
  const entry = chainEvents.find((event) => event.seq === receipt.seq);
  return {
    seq: receipt.seq,
    eventHash: receipt.event_hash,
    verified: entry !== undefined && entry.hash === receipt.event_hash,
  };
}
