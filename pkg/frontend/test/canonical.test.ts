import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { ballotSigningPayload } from "../src/ballot.js";
import { bytesToHex, canonicalBytes, canonicalJson, hexToBytes } from "../src/canonical.js";

interface GoldenCase {
  proposal_id: string;
  voter: string;
  allocation: number[];
  cast_at: number;
  expected_hex: string;
  expected_utf8: string;
}

const fixtures: GoldenCase[] = JSON.parse(
  readFileSync(fileURLToPath(new URL("./fixtures/canonical_ballots.json", import.meta.url)), "utf-8"),
);

describe("canonical ballot serialization (shared golden file)", () => {
  it("covers five fixture ballots", () => {
    expect(fixtures).toHaveLength(5);
  });

  for (const fixture of fixtures) {
    it(`matches the server bytes for ${JSON.stringify(fixture.proposal_id)}`, () => {
      const payload = ballotSigningPayload(
        fixture.proposal_id, fixture.voter, fixture.allocation, fixture.cast_at,
      );
      expect(bytesToHex(payload)).toBe(fixture.expected_hex);
      expect(new TextDecoder().decode(payload)).toBe(fixture.expected_utf8);
    });
  }
});

describe("canonical JSON rules", () => {
  it("sorts keys and strips whitespace", () => {
    expect(canonicalJson({ b: 1, a: [true, null] })).toBe('{"a":[true,null],"b":1}');
  });

  it("emits non-ascii characters raw", () => {
    const bytes = canonicalBytes({ t: "α" });
    expect(new TextDecoder().decode(bytes)).toBe('{"t":"α"}');
  });

  it("rejects non-integer numbers", () => {
    expect(() => canonicalJson({ x: 1.5 })).toThrow(/integers/);
    expect(() => canonicalJson({ x: Number.MAX_SAFE_INTEGER + 2 })).toThrow(/integers/);
  });

  it("hex helpers round-trip", () => {
    const bytes = new Uint8Array([0, 1, 171, 255]);
    expect(hexToBytes(bytesToHex(bytes))).toEqual(bytes);
    expect(() => hexToBytes("0g")).toThrow(/hex/);
  });
});
