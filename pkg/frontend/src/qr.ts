/** Attach links and their QR codes.
 *
 * The QR matrix is computed once and both the canvas renderer and the test
 * rasterizer consume the same matrix, so the decoded image is provably the
 * displayed link.
 */

import QRCode from "qrcode";
import type { Ctx2D } from "./charts";

export function attachUrl(endpoint: string, pid: string): string {
  return `${endpoint.replace(/\/+$/, "")}/#/attach/${pid}`;
}

/** Route hashes of the form #/attach/{pid} or #/p/{pid}. */
export function parseAttachUrl(url: string): string | null {
  const m = /#\/attach\/([0-9a-f]+)$/.exec(url);
  return m ? m[1] : null;
}

export function qrMatrix(text: string): boolean[][] {
  const code = QRCode.create(text, { errorCorrectionLevel: "M" });
  const size = code.modules.size;
  const rows: boolean[][] = [];
  for (let r = 0; r < size; r++) {
    const row: boolean[] = [];
    for (let c = 0; c < size; c++) {
      row.push(!!code.modules.get(r, c));
    }
    rows.push(row);
  }
  return rows;
}

export interface RgbaImage {
  data: Uint8ClampedArray;
  width: number;
  height: number;
}

/** Rasterize a module matrix to RGBA with a quiet-zone border. */
export function rasterize(matrix: boolean[][], scale = 4, quiet = 4): RgbaImage {
  const n = matrix.length;
  const side = (n + 2 * quiet) * scale;
  const data = new Uint8ClampedArray(side * side * 4).fill(255);
  for (let r = 0; r < n; r++) {
    for (let c = 0; c < n; c++) {
      if (!matrix[r][c]) continue;
      const y0 = (r + quiet) * scale;
      const x0 = (c + quiet) * scale;
      for (let dy = 0; dy < scale; dy++) {
        for (let dx = 0; dx < scale; dx++) {
          const o = ((y0 + dy) * side + x0 + dx) * 4;
          data[o] = 0;
          data[o + 1] = 0;
          data[o + 2] = 0;
        }
      }
    }
  }
  return { data, width: side, height: side };
}

/** Paint the matrix with the same geometry the rasterizer uses. */
export function drawQr(
  ctx: Ctx2D,
  matrix: boolean[][],
  scale = 4,
  quiet = 4,
): number {
  const n = matrix.length;
  const side = (n + 2 * quiet) * scale;
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, side, side);
  ctx.fillStyle = "#000";
  for (let r = 0; r < n; r++) {
    for (let c = 0; c < n; c++) {
      if (matrix[r][c]) {
        ctx.fillRect((c + quiet) * scale, (r + quiet) * scale, scale, scale);
      }
    }
  }
  return side;
}
