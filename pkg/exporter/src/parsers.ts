/**
 * Text parsers for the binutils tool output the exporter drives:
 * objdump disassembly, objdump section hex dumps, readelf section tables,
 * relocations, and dynamic symbols.
 */

export interface Instruction {
  address: number;
  mnemonic: string;
  operands: string;
  /** absolute target of a direct call/jump operand, when present */
  target?: number;
  /** address from a trailing `# <addr> <sym>` comment (rip-relative loads) */
  commentTarget?: number;
}

export interface FunctionBlock {
  name: string;
  address: number;
  section: string;
  instructions: Instruction[];
}

export interface Section {
  name: string;
  address: number;
  size: number;
  flags: string;
}

const PREFIXES = new Set([
  'bnd', 'lock', 'rep', 'repz', 'repnz', 'repe', 'repne', 'notrack',
  'data16', 'addr32', 'cs', 'ss', 'ds', 'es', 'fs', 'gs',
]);

const HEADER_RE = /^([0-9a-f]+) <(.+)>:\s*$/;
const SECTION_RE = /^Disassembly of section (\S+):/;
const INSN_RE = /^\s+([0-9a-f]+):\t\s*(.*)$/;
const TARGET_RE = /^([0-9a-f]+) <[^>]*>/;
const COMMENT_RE = /#\s+(?:0x)?([0-9a-f]+)\s*(?:<[^>]*>)?\s*$/;

export function parseDisassembly(text: string): FunctionBlock[] {
  const blocks: FunctionBlock[] = [];
  let current: FunctionBlock | null = null;
  let section = '';
  for (const line of text.split('\n')) {
    const sec = SECTION_RE.exec(line);
    if (sec) {
      section = sec[1];
      continue;
    }
    const head = HEADER_RE.exec(line);
    if (head) {
      current = {
        name: head[2],
        address: parseInt(head[1], 16),
        section,
        instructions: [],
      };
      blocks.push(current);
      continue;
    }
    const insn = INSN_RE.exec(line);
    if (!insn || current === null) continue;
    const address = parseInt(insn[1], 16);
    let body = insn[2].trim();
    if (body.length === 0) continue;
    const comment = COMMENT_RE.exec(body);
    let commentTarget: number | undefined;
    if (comment) {
      commentTarget = parseInt(comment[1], 16);
      body = body.slice(0, comment.index).trim();
    }
    const tokens = body.split(/\s+/);
    let idx = 0;
    while (idx < tokens.length - 1 && PREFIXES.has(tokens[idx])) idx += 1;
    const mnemonic = tokens[idx] ?? '';
    const operands = tokens.slice(idx + 1).join(' ');
    const targetMatch = TARGET_RE.exec(operands);
    const insnRecord: Instruction = {
      address,
      mnemonic,
      operands,
      commentTarget,
    };
    if (targetMatch) insnRecord.target = parseInt(targetMatch[1], 16);
    current.instructions.push(insnRecord);
  }
  return blocks;
}

/** Immediate `$...` operand values of one instruction, as raw bigints. */
export function immediateValues(operands: string): bigint[] {
  const out: bigint[] = [];
  const re = /\$(-?)(0x[0-9a-f]+|\d+)/g;
  let m: RegExpExecArray | null;
  while ((m = re.exec(operands)) !== null) {
    const value = BigInt(m[2]);
    out.push(m[1] === '-' ? -value : value);
  }
  return out;
}

export function isCall(mnemonic: string): boolean {
  return mnemonic === 'call' || mnemonic === 'callq';
}

export function isJump(mnemonic: string): boolean {
  return mnemonic.startsWith('j');
}

export function isConditionalJump(mnemonic: string): boolean {
  return isJump(mnemonic) && mnemonic !== 'jmp' && mnemonic !== 'jmpq';
}

export function isReturn(mnemonic: string): boolean {
  return mnemonic === 'ret' || mnemonic === 'retq';
}

/** `readelf -S -W` section table. */
export function parseSections(text: string): Section[] {
  const out: Section[] = [];
  const re =
    /^\s*\[\s*\d+\]\s+(\S+)\s+\S+\s+([0-9a-f]+)\s+[0-9a-f]+\s+([0-9a-f]+)\s+\S+\s+([A-Za-z]*)/;
  for (const line of text.split('\n')) {
    const m = re.exec(line);
    if (m && m[1] !== 'NULL') {
      out.push({
        name: m[1],
        address: parseInt(m[2], 16),
        size: parseInt(m[3], 16),
        flags: m[4] ?? '',
      });
    }
  }
  return out;
}

/** `objdump -s -j <section>` hex dump bytes, with the section base address. */
export function parseSectionBytes(
  text: string,
): { address: number; bytes: Uint8Array } | null {
  const chunks: number[] = [];
  let base: number | null = null;
  const head = /^ ([0-9a-f]+) /;
  for (const line of text.split('\n')) {
    const m = head.exec(line);
    if (!m) continue;
    // hex groups are single-space separated; the ASCII column follows the
    // first run of two spaces and may itself look hex-like
    const hex = line.slice(m[0].length).split('  ')[0].replace(/ /g, '');
    if (hex.length === 0 || hex.length % 2 !== 0 || /[^0-9a-f]/.test(hex)) {
      continue;
    }
    const addr = parseInt(m[1], 16);
    if (base === null) base = addr;
    for (let i = 0; i + 2 <= hex.length; i += 2) {
      chunks.push(parseInt(hex.slice(i, i + 2), 16));
    }
  }
  if (base === null) return null;
  return { address: base, bytes: Uint8Array.from(chunks) };
}

const PRINTABLE_EXTRA = new Set([0x09, 0x0a, 0x0d]);

function isPrintable(byte: number): boolean {
  return (byte >= 0x20 && byte <= 0x7e) || PRINTABLE_EXTRA.has(byte);
}

/** NUL-terminated printable runs of at least `minLen` chars, by start address. */
export function extractStrings(
  base: number,
  bytes: Uint8Array,
  minLen = 4,
): Map<number, string> {
  const out = new Map<number, string>();
  let i = 0;
  while (i < bytes.length) {
    if (!isPrintable(bytes[i])) {
      i += 1;
      continue;
    }
    const start = i;
    while (i < bytes.length && isPrintable(bytes[i])) i += 1;
    const terminated = i < bytes.length && bytes[i] === 0;
    const length = i - start;
    if (terminated && length >= minLen) {
      out.set(base + start, String.fromCharCode(...bytes.subarray(start, i)));
    }
    i += 1;
  }
  return out;
}

/** Little-endian 64-bit values at 8-byte strides of a section image. */
export function pointerCandidates(
  base: number,
  bytes: Uint8Array,
): Map<number, bigint> {
  const out = new Map<number, bigint>();
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  for (let off = 0; off + 8 <= bytes.length; off += 8) {
    out.set(base + off, view.getBigUint64(off, true));
  }
  return out;
}

/** Addends of R_X86_64_RELATIVE relocations from `readelf -r -W`. */
export function parseRelativeAddends(text: string): bigint[] {
  const out: bigint[] = [];
  const re = /^\s*[0-9a-f]+\s+[0-9a-f]+\s+R_X86_64_RELATIVE\s+([0-9a-f]+)\s*$/;
  for (const line of text.split('\n')) {
    const m = re.exec(line);
    if (m) out.push(BigInt(`0x${m[1]}`));
  }
  return out;
}

/** Addresses of defined FUNC entries in `readelf --dyn-syms -W`. */
export function parseExportedFunctions(text: string): Set<number> {
  const out = new Set<number>();
  const re = /^\s*\d+:\s+([0-9a-f]+)\s+\d+\s+FUNC\s+\S+\s+\S+\s+(\S+)\s+(\S+)/;
  for (const line of text.split('\n')) {
    const m = re.exec(line);
    if (m && m[2] !== 'UND' && parseInt(m[1], 16) !== 0) {
      out.add(parseInt(m[1], 16));
    }
  }
  return out;
}
