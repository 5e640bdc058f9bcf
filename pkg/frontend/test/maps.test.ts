import { describe, expect, it } from "vitest";

import { evalMap } from "../src/maps";
import type { MapDoc } from "../src/types";

// Golden vectors computed with the reference implementation behind the store.
const U = [-3.0, -1.2, -0.25, 0.0, 0.3, 1.0, 2.6, 4.5];
const GOLDEN: Array<{ doc: MapDoc; expected: number[] }> = [
  {
    doc: { kind: "SSR", t: 1.0 },
    expected: [-1.0, 0.8, 0.25, 0.0, -0.3, -1.0, 0.6000000000000001, 2.5],
  },
  {
    doc: { kind: "SSR", t: 0.4, shift: 2.0 },
    expected: [-2.2, -0.40000000000000036, 0.55, 0.8, 1.1, 1.8, 1.8, 3.7],
  },
  {
    doc: { kind: "NEG_SSR", t: 1.0 },
    expected: [1.0, -0.8, -0.25, 0.0, 0.3, 1.0, -0.6000000000000001, -2.5],
  },
  {
    doc: { kind: "NEG_SSR", t: 0.7, shift: -1.5 },
    expected: [
      1.6, 1.8, 1.65, 1.4, 1.0999999999999999, 0.3999999999999999,
      -1.1999999999999997, -3.0999999999999996,
    ],
  },
  {
    doc: { kind: "ABS" },
    expected: [3.0, 1.2, 0.25, 0.0, 0.3, 1.0, 2.6, 4.5],
  },
  {
    doc: { kind: "ABS", shift: 1.25 },
    expected: [5.5, 3.7, 2.75, 2.5, 2.2, 1.5, 2.6, 4.5],
  },
  {
    doc: { kind: "AFFINE", a: -0.6, b: 0.3 },
    expected: [
      2.0999999999999996, 1.02, 0.44999999999999996, 0.3, 0.12, -0.3, -1.26,
      -2.4,
    ],
  },
  {
    doc: { kind: "CONST", v: -3.0 },
    expected: [-3, -3, -3, -3, -3, -3, -3, -3],
  },
  {
    doc: { kind: "IDENTITY" },
    expected: [-3.0, -1.2, -0.25, 0.0, 0.3, 1.0, 2.6, 4.5],
  },
  {
    doc: { kind: "IDENTITY", shift: 0.5 },
    expected: [-3.0, -1.2, -0.25, 0.0, 0.3, 1.0, 2.6, 4.5],
  },
];

describe("evalMap", () => {
  it("matches the reference implementation on golden vectors", () => {
    for (const { doc, expected } of GOLDEN) {
      U.forEach((u, i) => {
        expect(evalMap(doc, u), `${JSON.stringify(doc)} at u=${u}`).toBeCloseTo(
          expected[i],
          12,
        );
      });
    }
  });

  it("negates after the shifted shrink for NEG_SSR", () => {
    const t = 0.8;
    const s = 2.5;
    const ssr = (u: number) =>
      Math.abs(u) <= t ? -u : u - 2 * t * Math.sign(u);
    for (const u of [-4, -1, 0, 1.9, 2.5, 3.1, 6]) {
      expect(evalMap({ kind: "NEG_SSR", t, shift: s }, u)).toBeCloseTo(
        -(s + ssr(u - s)),
        14,
      );
    }
  });

  it("treats every other shift as recentering", () => {
    for (const u of [-2, 0, 0.4, 3]) {
      expect(evalMap({ kind: "ABS", shift: 1.0 }, u)).toBeCloseTo(
        1.0 + Math.abs(u - 1.0),
        14,
      );
      expect(evalMap({ kind: "SSR", t: 0.5, shift: -1.0 }, u)).toBeCloseTo(
        -1.0 + evalMap({ kind: "SSR", t: 0.5 }, u + 1.0),
        14,
      );
    }
  });

  it("rejects invalid documents and inputs", () => {
    expect(() => evalMap({ kind: "NOPE" } as unknown as MapDoc, 0)).toThrow(
      /unknown map kind/,
    );
    expect(() => evalMap({ kind: "SSR", t: 0 }, 0)).toThrow(/threshold/);
    expect(() => evalMap({ kind: "SSR" }, 0)).toThrow(/threshold/);
    expect(() => evalMap({ kind: "AFFINE", a: 1.5, b: 0 }, 0)).toThrow(
      /slope/,
    );
    expect(() => evalMap({ kind: "AFFINE", a: 0.5 }, 0)).toThrow(/AFFINE/);
    expect(() => evalMap({ kind: "CONST" }, 0)).toThrow(/CONST/);
    expect(() => evalMap({ kind: "ABS" }, NaN)).toThrow(/finite/);
    expect(() => evalMap({ kind: "ABS" }, Infinity)).toThrow(/finite/);
  });

  it("is nonexpansive for every kind", () => {
    const docs: MapDoc[] = [
      { kind: "SSR", t: 0.3 },
      { kind: "SSR", t: 2.0, shift: 1.0 },
      { kind: "NEG_SSR", t: 1.0 },
      { kind: "NEG_SSR", t: 0.5, shift: -2.0 },
      { kind: "ABS" },
      { kind: "ABS", shift: 0.7 },
      { kind: "AFFINE", a: -1.0, b: 3.0 },
      { kind: "AFFINE", a: 0.25, b: -0.1 },
      { kind: "CONST", v: 9.0 },
      { kind: "IDENTITY" },
      { kind: "IDENTITY", shift: -4.0 },
    ];
    let seed = 12345;
    const rand = () => {
      // Deterministic LCG keeps the probe reproducible.
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (const doc of docs) {
      for (let i = 0; i < 2000; i++) {
        const scale = 10 ** Math.floor(rand() * 3);
        const u = (rand() * 2 - 1) * scale;
        const v = (rand() * 2 - 1) * scale;
        const lhs = Math.abs(evalMap(doc, u) - evalMap(doc, v));
        expect(lhs).toBeLessThanOrEqual(Math.abs(u - v) + 1e-12);
      }
    }
  });
});
