#!/usr/bin/env node
/**
 * scenefuzz-policy [--policy echo|demo] [--transport stdio|tcp:<port>]
 * scenefuzz-policy checksum
 *
 * The default mode hosts a built-in policy on the chosen transport. The
 * checksum mode reads one observe message from stdin and prints the
 * sha256 of the decoded RGB bytes (used by decode-fidelity tests).
 */

import * as readline from "node:readline";

import { decodeImage, sha256Hex } from "./image.js";
import { makePolicy } from "./policies.js";
import { ObserveMessage, decodeLine } from "./protocol.js";
import { serve } from "./serve.js";

function parseArgs(argv: string[]): { mode: string; policy: string; transport: string } {
  const out = { mode: "serve", policy: "echo", transport: "stdio" };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "checksum") out.mode = "checksum";
    else if (arg === "--policy") out.policy = argv[++i];
    else if (arg === "--transport") out.transport = argv[++i];
    else {
      process.stderr.write(`unknown argument ${arg}\n`);
      process.exit(2);
    }
  }
  return out;
}

async function checksumMode(): Promise<number> {
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  for await (const line of rl) {
    if (!line.trim()) continue;
    const msg = decodeLine(line) as unknown as ObserveMessage;
    const img = decodeImage(msg);
    process.stdout.write(`${sha256Hex(img.data)} ${img.width}x${img.height}\n`);
    return 0;
  }
  process.stderr.write("checksum: no observe message on stdin\n");
  return 2;
}

async function main(): Promise<number> {
  const args = parseArgs(process.argv.slice(2));
  if (args.mode === "checksum") {
    return checksumMode();
  }
  return serve(makePolicy(args.policy), args.transport);
}

main().then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`${err}\n`);
    process.exit(1);
  },
);
