/**
 * GCDE binary embedding format.
 *
 * Layout: magic "GCDE" | u32 version=1 | u64 N | u32 D | u32 flags |
 * N*D float32 row-major LE | [i32 labels] [i32 truth] [u8 known mask],
 * all optional arrays gated by flag bits 0/1/2.
 */

export const MAGIC = 'GCDE'
export const VERSION = 1
export const FLAG_LABELS = 1
export const FLAG_TRUTH = 2
export const FLAG_MASK = 4

const HEADER_BYTES = 4 + 4 + 8 + 4 + 4

export interface EmbeddingFile {
  features: Float32Array // n * d, row-major
  n: number
  d: number
  labels?: Int32Array
  truth?: Int32Array
  knownMask?: Uint8Array
}

export function encodeGcde(file: EmbeddingFile): Buffer {
  const { n, d } = file
  if (file.features.length !== n * d) {
    throw new Error(`features length ${file.features.length} != N*D = ${n * d}`)
  }
  for (let i = 0; i < file.features.length; i++) {
    if (!Number.isFinite(file.features[i])) {
      throw new Error(`non-finite feature at row ${Math.floor(i / d)}, col ${i % d}`)
    }
  }
  let flags = 0
  let size = HEADER_BYTES + n * d * 4
  if (file.labels) {
    flags |= FLAG_LABELS
    size += n * 4
  }
  if (file.truth) {
    flags |= FLAG_TRUTH
    size += n * 4
  }
  if (file.knownMask) {
    flags |= FLAG_MASK
    size += n
  }
  const buf = Buffer.alloc(size)
  let off = 0
  buf.write(MAGIC, off, 'ascii')
  off += 4
  off = buf.writeUInt32LE(VERSION, off)
  off = Number(buf.writeBigUInt64LE(BigInt(n), off))
  off = buf.writeUInt32LE(d, off)
  off = buf.writeUInt32LE(flags, off)
  for (let i = 0; i < n * d; i++) {
    off = buf.writeFloatLE(file.features[i], off)
  }
  if (file.labels) {
    for (let i = 0; i < n; i++) off = buf.writeInt32LE(file.labels[i], off)
  }
  if (file.truth) {
    for (let i = 0; i < n; i++) off = buf.writeInt32LE(file.truth[i], off)
  }
  if (file.knownMask) {
    for (let i = 0; i < n; i++) off = buf.writeUInt8(file.knownMask[i], off)
  }
  return buf
}

export function decodeGcde(buf: Buffer): EmbeddingFile {
  if (buf.length < HEADER_BYTES) throw new Error('truncated header')
  if (buf.toString('ascii', 0, 4) !== MAGIC) throw new Error('bad magic')
  const version = buf.readUInt32LE(4)
  if (version !== VERSION) throw new Error(`unsupported version ${version}`)
  const n = Number(buf.readBigUInt64LE(8))
  const d = buf.readUInt32LE(16)
  const flags = buf.readUInt32LE(20)
  let off = HEADER_BYTES
  const features = new Float32Array(n * d)
  for (let i = 0; i < n * d; i++) {
    features[i] = buf.readFloatLE(off)
    off += 4
  }
  const out: EmbeddingFile = { features, n, d }
  if (flags & FLAG_LABELS) {
    out.labels = new Int32Array(n)
    for (let i = 0; i < n; i++) {
      out.labels[i] = buf.readInt32LE(off)
      off += 4
    }
  }
  if (flags & FLAG_TRUTH) {
    out.truth = new Int32Array(n)
    for (let i = 0; i < n; i++) {
      out.truth[i] = buf.readInt32LE(off)
      off += 4
    }
  }
  if (flags & FLAG_MASK) {
    out.knownMask = new Uint8Array(n)
    for (let i = 0; i < n; i++) {
      out.knownMask[i] = buf.readUInt8(off)
      off += 1
    }
  }
  if (off !== buf.length) throw new Error(`trailing bytes: file ${buf.length}, parsed ${off}`)
  return out
}
