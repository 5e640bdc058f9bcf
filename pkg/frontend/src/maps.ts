/** Scalar coordinate maps, mirroring the store's map documents.
 *
 * Every kind is nonexpansive (|m(u) - m(v)| <= |u - v|), which is what lets
 * a browser worker's stale writes coexist with everyone else's.  The shift
 * parameter recenters a map at s: u -> s + base(u - s), except NEG_SSR where
 * the negation happens after the shifted shrink: u -> -(s + ssr(u - s)).
 */

import type { MapDoc } from "./types";

const KINDS = new Set(["SSR", "NEG_SSR", "ABS", "AFFINE", "CONST", "IDENTITY"]);

function sign(u: number): number {
  return u > 0 ? 1 : u < 0 ? -1 : 0;
}

/** -u inside [-t, t], u - 2 t sign(u) outside. */
function softShrinkReflect(u: number, t: number): number {
  return Math.abs(u) <= t ? -u : u - 2 * t * sign(u);
}

function applyCentered(doc: MapDoc, u: number): number {
  switch (doc.kind) {
    case "SSR":
      return softShrinkReflect(u, doc.t as number);
    case "NEG_SSR":
      return softShrinkReflect(-u, doc.t as number);
    case "ABS":
      return Math.abs(u);
    case "AFFINE":
      return (doc.a as number) * u + (doc.b as number);
    case "CONST":
      return doc.v as number;
    case "IDENTITY":
      return u;
  }
}

export function validateMapDoc(doc: MapDoc): void {
  if (!KINDS.has(doc.kind)) {
    throw new Error(`unknown map kind: ${String(doc.kind)}`);
  }
  if (doc.kind === "SSR" || doc.kind === "NEG_SSR") {
    if (typeof doc.t !== "number" || !(doc.t > 0)) {
      throw new Error(`${doc.kind} requires a positive threshold t`);
    }
  }
  if (doc.kind === "AFFINE") {
    if (typeof doc.a !== "number" || typeof doc.b !== "number") {
      throw new Error("AFFINE requires slope a and offset b");
    }
    if (Math.abs(doc.a) > 1) {
      throw new Error("AFFINE slope must satisfy |a| <= 1");
    }
  }
  if (doc.kind === "CONST" && typeof doc.v !== "number") {
    throw new Error("CONST requires a value v");
  }
}

export function evalMap(doc: MapDoc, u: number): number {
  validateMapDoc(doc);
  if (!Number.isFinite(u)) {
    throw new Error("map input must be finite");
  }
  let out: number;
  if (doc.shift === undefined || doc.shift === null) {
    out = applyCentered(doc, u);
  } else if (doc.kind === "NEG_SSR") {
    out = -(doc.shift + softShrinkReflect(u - doc.shift, doc.t as number));
  } else {
    out = doc.shift + applyCentered(doc, u - doc.shift);
  }
  if (!Number.isFinite(out)) {
    throw new Error("map produced a non-finite value");
  }
  return out;
}
