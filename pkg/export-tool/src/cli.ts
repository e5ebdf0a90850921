#!/usr/bin/env node
/**
 * gcde-export: run a vision backbone over an image directory and write the
 * GCDE binary embedding file consumed by the clustering pipeline.
 *
 * Usage: gcde-export --images DIR --output FILE
 *          [--backbone NAME] [--class-from-dir]
 */

import { DEFAULT_BACKBONE } from './backbone.js'
import { runExport } from './export.js'

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`)
  console.error(
    'usage: gcde-export --images DIR --output FILE [--backbone NAME] [--class-from-dir]',
  )
  process.exit(2)
}

export function main(argv: string[]): number {
  let images: string | undefined
  let output: string | undefined
  let backbone = DEFAULT_BACKBONE
  let classFromDir = false
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]
    switch (arg) {
      case '--images':
        images = argv[++i] ?? usage('--images needs a value')
        break
      case '--output':
      case '-o':
        output = argv[++i] ?? usage('--output needs a value')
        break
      case '--backbone':
        backbone = argv[++i] ?? usage('--backbone needs a value')
        break
      case '--class-from-dir':
        classFromDir = true
        break
      case '--help':
      case '-h':
        usage()
        break
      default:
        usage(`unknown argument '${arg}'`)
    }
  }
  if (!images || !output) usage('--images and --output are required')
  try {
    const result = runExport({
      imageRoot: images,
      outputPath: output,
      backbone,
      classFromDirectory: classFromDir,
    })
    const classNote = result.classes.length ? `, classes=[${result.classes.join(', ')}]` : ''
    console.log(`wrote ${output} (N=${result.n}, D=${result.d}${classNote})`)
    return 0
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 1
  }
}

process.exit(main(process.argv.slice(2)))
