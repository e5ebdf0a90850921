import * as fs from 'node:fs'
import { DecodedImage, toGrayGrid } from './images.js'

export interface Backbone {
  readonly name: string
  /** embedding width D */
  readonly dim: number
  embed(image: DecodedImage): Float32Array
}

/** mulberry32: tiny deterministic PRNG for the fixed projection matrix. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/**
 * Offline backbone: 32x32 grayscale resample followed by a fixed seeded
 * random projection to 64 dims. No weights to download, fully
 * deterministic; meant for tests and plumbing checks rather than semantic
 * quality.
 */
export class PatchProjectionBackbone implements Backbone {
  readonly name = 'patch-proj-64'
  readonly dim = 64
  private static GRID = 32
  private matrix: Float64Array

  constructor() {
    const input = PatchProjectionBackbone.GRID ** 2
    const rand = mulberry32(0x9cde_2024)
    this.matrix = new Float64Array(this.dim * input)
    const scale = 1 / Math.sqrt(input)
    for (let i = 0; i < this.matrix.length; i++) {
      this.matrix[i] = (2 * rand() - 1) * scale
    }
  }

  embed(image: DecodedImage): Float32Array {
    const grid = toGrayGrid(image, PatchProjectionBackbone.GRID)
    const out = new Float32Array(this.dim)
    const input = grid.length
    for (let k = 0; k < this.dim; k++) {
      let acc = 0
      const row = k * input
      for (let i = 0; i < input; i++) acc += this.matrix[row + i] * grid[i]
      out[k] = acc
    }
    return out
  }
}

/**
 * Production backbone slot: a self-supervised ViT-B/16 checkpoint. Weights
 * are not bundled; the loader insists on a local model file and reports how
 * to point at one.
 */
export class VitB16Backbone implements Backbone {
  readonly name = 'dino-vit-b16'
  readonly dim = 768

  constructor(modelPath?: string) {
    const where = modelPath ?? process.env.GCDE_VIT_MODEL ?? 'models/dino-vit-b16'
    if (!fs.existsSync(where)) {
      throw new Error(
        `backbone 'dino-vit-b16' needs a local checkpoint at '${where}' ` +
          `(set GCDE_VIT_MODEL); use --backbone patch-proj-64 for an offline run`,
      )
    }
    throw new Error(
      `backbone 'dino-vit-b16' checkpoint found at '${where}', but no inference ` +
        `runtime is bundled in this build; use --backbone patch-proj-64`,
    )
  }

  embed(_image: DecodedImage): Float32Array {
    throw new Error('unreachable: constructor always rejects')
  }
}

export const DEFAULT_BACKBONE = 'dino-vit-b16'

export function createBackbone(name: string): Backbone {
  switch (name) {
    case 'patch-proj-64':
      return new PatchProjectionBackbone()
    case 'dino-vit-b16':
      return new VitB16Backbone()
    default:
      throw new Error(`unknown backbone '${name}' (available: patch-proj-64, dino-vit-b16)`)
  }
}
