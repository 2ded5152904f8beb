import * as net from "node:net";
import * as readline from "node:readline";

import { Policy, PolicySession } from "./session.js";

export type TransportDescriptor = "stdio" | `tcp:${number}` | string;

/**
 * Host a policy on stdin/stdout until EOF. Protocol violations exit
 * nonzero after an error reply; callback failures are reported to the
 * framework and the session keeps serving.
 */
export function serveStdio(policy: Policy): Promise<number> {
  const session = new PolicySession(policy);
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  return new Promise((resolve) => {
    let exitCode = 0;
    rl.on("line", (line) => {
      if (!line.trim()) return;
      const result = session.handleLine(line);
      for (const reply of result.replies) {
        process.stdout.write(reply);
      }
      if (result.violation) {
        process.stderr.write(`protocol violation: ${result.violation}\n`);
        exitCode = 1;
        rl.close();
      }
    });
    rl.on("close", () => resolve(exitCode));
  });
}

/** Host a policy factory on a TCP port; one session per connection. */
export function serveTcp(policyFactory: () => Policy, port: number): net.Server {
  const server = net.createServer((socket) => {
    const session = new PolicySession(policyFactory());
    let buf = "";
    socket.on("data", (chunk) => {
      buf += chunk.toString("utf-8");
      let idx;
      while ((idx = buf.indexOf("\n")) >= 0) {
        const line = buf.slice(0, idx);
        buf = buf.slice(idx + 1);
        if (!line.trim()) continue;
        const result = session.handleLine(line);
        for (const reply of result.replies) {
          socket.write(reply);
        }
        if (result.violation) {
          socket.end();
          return;
        }
      }
    });
  });
  server.listen(port, "127.0.0.1");
  return server;
}

export function serve(policy: Policy, transport: TransportDescriptor = "stdio"): Promise<number> {
  if (transport === "stdio") {
    return serveStdio(policy);
  }
  if (transport.startsWith("tcp:")) {
    const port = Number(transport.slice(4));
    if (!Number.isInteger(port) || port < 0 || port > 65535) {
      throw new Error(`bad tcp transport descriptor ${transport}`);
    }
    serveTcp(() => policy, port);
    return new Promise(() => {}); // runs until killed
  }
  throw new Error(`unknown transport descriptor ${transport}`);
}
