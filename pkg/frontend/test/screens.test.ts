import { describe, expect, it } from "vitest";

import { SessionView } from "../src/api.js";
import { DeliveryLog, decodeFrame, encodeFrame } from "../src/room.js";
import {
  advanceEventFor,
  canOpen,
  screenForState,
  SCREEN_ORDER,
  verifyReceipt,
} from "../src/screens.js";

function session(state: string, userTurns = 0): SessionView {
  return {
    participant: "0xabc",
    state,
    value_answer: null,
    room_id: null,
    transcript_len: 0,
    user_turns: userTurns,
  };
}

describe("screen flow mirror", () => {
  it("maps every server state onto a screen in order", () => {
    const states = ["REGISTERED", "INTRO", "VALUE_PROMPT", "AI_CHAT",
                    "GROUP_ROOM", "SURVEY", "VOTING", "DONE"];
    const screens = states.map(screenForState);
    const positions = screens.map((s) => SCREEN_ORDER.indexOf(s));
    for (let i = 1; i < positions.length; i++) {
      expect(positions[i]!).toBeGreaterThanOrEqual(positions[i - 1]!);
    }
  });

  it("blocks opening Voting from the chat screen with a gate message", () => {
    const gate = canOpen("Voting", session("AI_CHAT", 3));
    expect(gate.allowed).toBe(false);
    expect(gate.reason).toMatch(/one step at a time/);
  });

  it("blocks the group room until three user turns", () => {
    const early = canOpen("GroupRoom", session("AI_CHAT", 2));
    expect(early.allowed).toBe(false);
    expect(early.reason).toMatch(/2 so far/);
    const ready = canOpen("GroupRoom", session("AI_CHAT", 3));
    expect(ready.allowed).toBe(true);
  });

  it("always allows the current and earlier screens", () => {
    expect(canOpen("Intro", session("SURVEY")).allowed).toBe(true);
    expect(canOpen("Survey", session("SURVEY")).allowed).toBe(true);
  });

  it("knows the advance event for each forward step", () => {
    expect(advanceEventFor("GroupRoom")).toBe("CHAT_DONE");
    expect(advanceEventFor("Receipt")).toBe("BALLOT_ACCEPTED");
    expect(advanceEventFor("Intro")).toBeNull();
  });
});

describe("receipt verification", () => {
  it("verifies when the chain entry matches", () => {
    const view = verifyReceipt(
      { seq: 5, event_hash: "aa11" },
      [{ seq: 4, hash: "f0" }, { seq: 5, hash: "aa11" }],
    );
    expect(view.verified).toBe(true);
  });

  it("flags a mismatching or missing entry", () => {
    expect(verifyReceipt({ seq: 5, event_hash: "aa11" },
                         [{ seq: 5, hash: "bb22" }]).verified).toBe(false);
    expect(verifyReceipt({ seq: 5, event_hash: "aa11" }, []).verified).toBe(false);
  });
});

describe("room frames", () => {
  it("round-trips frames", () => {
    const frame = { type: "post", text: "hello" } as const;
    expect(decodeFrame(encodeFrame(frame))).toEqual(frame);
  });

  it("rejects malformed frames", () => {
    expect(() => decodeFrame("42")).toThrow(/malformed/);
  });

  it("delivery log enforces gapless ascending sequence", () => {
    const log = new DeliveryLog();
    const make = (seq: number) =>
      ({ type: "deliver", room_id: "r", seq, author: "0xa", text: "t", at: 0 }) as const;
    expect(log.accept(make(1))).toBe(true);
    expect(log.accept(make(3))).toBe(false); // gap dropped
    expect(log.accept(make(2))).toBe(true);
    expect(log.messages.map((m) => m.seq)).toEqual([1, 2]);
  });
});
