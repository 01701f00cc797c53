#!/usr/bin/env node
/** Headless exporter entry point: binary in, mgx-1 document out. */

import { writeFileSync } from 'node:fs';

import { ExportError, exportBinary } from './export.js';
import { renderDocument } from './mgx.js';

function usage(): never {
  process.stderr.write(
    'usage: modx-export <binary> [-o <output.json>] [--name <program name>]\n',
  );
  process.exit(2);
}

async function main(): Promise<number> {
  const args = process.argv.slice(2);
  let binary: string | undefined;
  let output: string | undefined;
  let name: string | undefined;
  for (let i = 0; i < args.length; i += 1) {
    const arg = args[i];
    if (arg === '-o' || arg === '--output') {
      output = args[++i];
      if (output === undefined) usage();
    } else if (arg === '--name') {
      name = args[++i];
      if (name === undefined) usage();
    } else if (arg === '-h' || arg === '--help') {
      usage();
    } else if (arg.startsWith('-')) {
      usage();
    } else if (binary === undefined) {
      binary = arg;
    } else {
      usage();
    }
  }
  if (binary === undefined) usage();

  try {
    const doc = await exportBinary(binary, { programName: name });
    const text = renderDocument(doc) + '\n';
    if (output === undefined || output === '-') {
      process.stdout.write(text);
    } else {
      writeFileSync(output, text, 'utf-8');
      process.stderr.write(
        `${doc.program_name}: ${doc.functions.length} functions, ` +
          `${doc.edges.length} edges -> ${output}\n`,
      );
    }
    return 0;
  } catch (err) {
    if (err instanceof ExportError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
}

main().then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`unexpected failure: ${err}\n`);
    process.exit(1);
  },
);
