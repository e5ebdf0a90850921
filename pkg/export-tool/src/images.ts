import * as fs from 'node:fs'
import * as path from 'node:path'
import { PNG } from 'pngjs'
import * as jpeg from 'jpeg-js'

export interface DecodedImage {
  width: number
  height: number
  /** RGBA bytes, 4 per pixel */
  data: Uint8Array
}

const EXTENSIONS = new Set(['.png', '.jpg', '.jpeg'])

export function isImagePath(file: string): boolean {
  return EXTENSIONS.has(path.extname(file).toLowerCase())
}

/** All image files under root, as root-relative paths in sorted order. */
export function listImageFiles(root: string): string[] {
  const found: string[] = []
  const walk = (dir: string) => {
    for (const entry of fs.readdirSync(dir, { withFileTypes: true })) {
      const full = path.join(dir, entry.name)
      if (entry.isDirectory()) walk(full)
      else if (entry.isFile() && isImagePath(entry.name)) {
        found.push(path.relative(root, full))
      }
    }
  }
  walk(root)
  found.sort()
  return found
}

export function decodeImage(file: string): DecodedImage {
  const raw = fs.readFileSync(file)
  const ext = path.extname(file).toLowerCase()
  if (ext === '.png') {
    const png = PNG.sync.read(raw)
    return { width: png.width, height: png.height, data: new Uint8Array(png.data) }
  }
  const out = jpeg.decode(raw, { useTArray: true, maxMemoryUsageInMB: 64 })
  return { width: out.width, height: out.height, data: new Uint8Array(out.data) }
}

/**
 * Bilinear-resample an image to a size x size grayscale grid in [0, 1].
 * Deterministic: plain arithmetic, no platform-dependent codecs.
 */
export function toGrayGrid(image: DecodedImage, size: number): Float64Array {
  const grid = new Float64Array(size * size)
  const { width, height, data } = image
  for (let gy = 0; gy < size; gy++) {
    const fy = size === 1 ? 0 : (gy * (height - 1)) / (size - 1)
    const y0 = Math.floor(fy)
    const y1 = Math.min(y0 + 1, height - 1)
    const wy = fy - y0
    for (let gx = 0; gx < size; gx++) {
      const fx = size === 1 ? 0 : (gx * (width - 1)) / (size - 1)
      const x0 = Math.floor(fx)
      const x1 = Math.min(x0 + 1, width - 1)
      const wx = fx - x0
      const lum = (x: number, y: number) => {
        const o = (y * width + x) * 4
        return (data[o] + data[o + 1] + data[o + 2]) / (3 * 255)
      }
      const top = lum(x0, y0) * (1 - wx) + lum(x1, y0) * wx
      const bottom = lum(x0, y1) * (1 - wx) + lum(x1, y1) * wx
      grid[gy * size + gx] = top * (1 - wy) + bottom * wy
    }
  }
  return grid
}
