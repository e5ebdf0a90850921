import * as fs from 'node:fs'
import * as path from 'node:path'
import { Backbone, createBackbone, DEFAULT_BACKBONE } from './backbone.js'
import { encodeGcde } from './gcde.js'
import { decodeImage, listImageFiles } from './images.js'

export interface ExportSpec {
  imageRoot: string
  backbone?: string
  outputPath: string
  classFromDirectory?: boolean
}

export interface ExportResult {
  n: number
  d: number
  /** sorted class-directory names, index = label id (empty when unflagged) */
  classes: string[]
  skipped: string[]
}

/**
 * Run the backbone over every image under imageRoot (sorted path order) and
 * write one GCDE row per image. With classFromDirectory, the label (and the
 * evaluation ground truth) is the index of the image's parent directory in
 * sorted order; otherwise every row is unlabeled. Unreadable images are
 * skipped with a warning; an imageRoot without a single readable image is
 * fatal.
 */
export function runExport(spec: ExportSpec): ExportResult {
  const backbone: Backbone = createBackbone(spec.backbone ?? DEFAULT_BACKBONE)
  const files = listImageFiles(spec.imageRoot)
  if (files.length === 0) {
    throw new Error(`no image files under '${spec.imageRoot}'`)
  }
  const classFromDir = spec.classFromDirectory ?? false
  let classes: string[] = []
  if (classFromDir) {
    const dirs = new Set<string>()
    for (const rel of files) {
      const dir = path.dirname(rel)
      if (dir === '.') {
        throw new Error(
          `class-from-directory needs images inside class subdirectories, found '${rel}' at the root`,
        )
      }
      dirs.add(dir)
    }
    classes = [...dirs].sort()
  }
  const classIndex = new Map(classes.map((c, i) => [c, i]))

  const rows: Float32Array[] = []
  const labels: number[] = []
  const skipped: string[] = []
  for (const rel of files) {
    let image
    try {
      image = decodeImage(path.join(spec.imageRoot, rel))
    } catch (err) {
      console.warn(`warning: skipping unreadable image '${rel}': ${(err as Error).message}`)
      skipped.push(rel)
      continue
    }
    rows.push(backbone.embed(image))
    labels.push(classFromDir ? classIndex.get(path.dirname(rel))! : -1)
  }
  if (rows.length === 0) {
    throw new Error(`no readable image files under '${spec.imageRoot}'`)
  }

  const n = rows.length
  const d = backbone.dim
  const features = new Float32Array(n * d)
  rows.forEach((row, i) => features.set(row, i * d))
  const labelArr = Int32Array.from(labels)
  const buf = encodeGcde({
    features,
    n,
    d,
    labels: labelArr,
    // directory-derived labels are ground truth, so they double as the
    // evaluation channel the downstream splitter needs
    truth: classFromDir ? labelArr : undefined,
  })
  fs.mkdirSync(path.dirname(path.resolve(spec.outputPath)), { recursive: true })
  fs.writeFileSync(spec.outputPath, buf)
  return { n, d, classes, skipped }
}
