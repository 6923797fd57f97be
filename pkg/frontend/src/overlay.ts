/** Overlay value tables.
 *
 * Overlay rasters hold bit flags per pano pixel: 64 marks water, 32 marks
 * shadow, and the bits combine.  Compositing is a fixed value table applied
 * on top of the grayscale panorama sample: water blends toward a blue,
 * shadow darkens, and both together darken the blended water color.
 */

export const WATER_BIT = 64;
export const SHADOW_BIT = 32;

const WATER_RGB: [number, number, number] = [38, 92, 204];
const WATER_MIX = 0.45;
const SHADOW_GAIN = 0.45;

/** RGB for a grayscale sample under an overlay value. */
export function compositePixel(gray: number, overlay: number): [number, number, number] {
  let r = gray;
  let g = gray;
  let b = gray;
  if (overlay & WATER_BIT) {
    r = r + (WATER_RGB[0] - r) * WATER_MIX;
    g = g + (WATER_RGB[1] - g) * WATER_MIX;
    b = b + (WATER_RGB[2] - b) * WATER_MIX;
  }
  if (overlay & SHADOW_BIT) {
    r *= SHADOW_GAIN;
    g *= SHADOW_GAIN;
    b *= SHADOW_GAIN;
  }
  return [Math.round(r), Math.round(g), Math.round(b)];
}
