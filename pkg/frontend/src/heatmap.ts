/** User-component heatmap: one canvas row per sampled user.

The row ordering (dominant component blocks, descending dominant
weight) comes from the server; nothing is recomputed client-side.
*/

export function heatColor(value: number): [number, number, number] {
  // white -> deep blue ramp over [0, 1]
  const v = Math.min(1, Math.max(0, value));
  const r = Math.round(255 - 223 * v);
  const g = Math.round(255 - 187 * v);
  const b = Math.round(255 - 75 * v);
  return [r, g, b];
}

/**
 * Paint the sample matrix onto the canvas. Returns false when no 2d
 * context is available (headless test environments).
 */
export function drawHeatmap(canvas: HTMLCanvasElement, values: number[][]): boolean {
  const ctx = canvas.getContext("2d");
  if (!ctx || !values.length) {
    return false;
  }
  const rows = values.length;
  const cols = values[0]?.length ?? 0;
  const image = ctx.createImageData(cols, rows);
  for (let i = 0; i < rows; i++) {
    const row = values[i] ?? [];
    for (let j = 0; j < cols; j++) {
      const [r, g, b] = heatColor(row[j] ?? 0);
      const at = (i * cols + j) * 4;
      image.data[at] = r;
      image.data[at + 1] = g;
      image.data[at + 2] = b;
      image.data[at + 3] = 255;
    }
  }
  // paint at matrix resolution, let CSS scale it to the panel
  canvas.width = cols;
  canvas.height = rows;
  ctx.putImageData(image, 0, 0);
  return true;
}
