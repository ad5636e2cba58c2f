/**
 * Flat-map projection into local east/north meters, matching the simulator's
 * frame, plus the fitting math for drawing a track on a canvas.
 */
export const METERS_PER_DEG_LAT = 111320.0;

export interface EnuPoint {
  east: number;
  north: number;
}

export interface Viewport {
  scale: number; // pixels per meter
  offsetX: number;
  offsetY: number;
}

export function toEnu(origin: { lat: number; lon: number },
                      point: { lat: number; lon: number }): EnuPoint {
  const metersPerDegLon = METERS_PER_DEG_LAT * Math.cos((origin.lat * Math.PI) / 180);
  return {
    east: (point.lon - origin.lon) * metersPerDegLon,
    north: (point.lat - origin.lat) * METERS_PER_DEG_LAT,
  };
}

/** Fit a set of points into a canvas with padding; north is up. */
export function fitViewport(points: EnuPoint[], width: number, height: number,
                            padding = 20, minSpan = 50): Viewport {
  let minE = -minSpan / 2;
  let maxE = minSpan / 2;
  let minN = -minSpan / 2;
  let maxN = minSpan / 2;
  for (const p of points) {
    minE = Math.min(minE, p.east);
    maxE = Math.max(maxE, p.east);
    minN = Math.min(minN, p.north);
    maxN = Math.max(maxN, p.north);
  }
  const spanE = Math.max(maxE - minE, 1);
  const spanN = Math.max(maxN - minN, 1);
  const scale = Math.min((width - 2 * padding) / spanE, (height - 2 * padding) / spanN);
  return {
    scale,
    offsetX: padding - minE * scale,
    offsetY: height - padding + minN * scale, // canvas y grows downward
  };
}

export function project(view: Viewport, p: EnuPoint): { x: number; y: number } {
  return {
    x: view.offsetX + p.east * view.scale,
    y: view.offsetY - p.north * view.scale,
  };
}
