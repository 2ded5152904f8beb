import { decodeImage } from "./image.js";
import {
  InitMessage,
  ObserveMessage,
  PROTOCOL_VERSION,
  PrivilegedBlock,
  ProtocolViolation,
  actMessage,
  decodeLine,
  errorMessage,
  initAckMessage,
} from "./protocol.js";

/** What a policy callback sees each step. */
export interface Observation {
  step: number;
  instruction: string;
  width: number;
  height: number;
  rgb: Uint8Array;
  privileged?: PrivilegedBlock;
}

export type PolicyCallback = (obs: Observation) => number[];

export interface Policy {
  name: string;
  acceptsPrivileged: boolean;
  /** Called on every init (one episode); resets internal state. */
  begin(init: InitMessage): void;
  act(obs: Observation): number[];
  finish?(reason: string): void;
}

export interface HandleResult {
  replies: string[];
  /** Set when the peer broke the protocol; the host should exit nonzero. */
  violation?: string;
  /** True when a done message closed the current episode. */
  episodeDone?: boolean;
}

/**
 * One session per connection: processes init / observe / done strictly in
 * order and runs any number of episodes back to back.
 */
export class PolicySession {
  private active = false;
  private instruction = "";

  constructor(private readonly policy: Policy) {}

  handleLine(line: string): HandleResult {
    let msg: Record<string, unknown>;
    try {
      msg = decodeLine(line);
    } catch (err) {
      const text = err instanceof Error ? err.message : String(err);
      return { replies: [errorMessage(text)], violation: text };
    }

    switch (msg.type) {
      case "init": {
        const init = msg as unknown as InitMessage;
        if (init.protocol_version !== PROTOCOL_VERSION) {
          const text = `unsupported protocol_version ${init.protocol_version}, expected ${PROTOCOL_VERSION}`;
          return { replies: [errorMessage(text)], violation: text };
        }
        this.instruction = init.instruction ?? "";
        this.policy.begin(init);
        this.active = true;
        return { replies: [initAckMessage(this.policy.name, this.policy.acceptsPrivileged)] };
      }
      case "observe": {
        if (!this.active) {
          const text = "observe before init";
          return { replies: [errorMessage(text)], violation: text };
        }
        const observe = msg as unknown as ObserveMessage;
        try {
          const img = decodeImage(observe);
          const action = this.policy.act({
            step: observe.step,
            instruction: observe.instruction ?? this.instruction,
            width: img.width,
            height: img.height,
            rgb: img.data,
            privileged: observe.privileged,
          });
          validateAction(action);
          return { replies: [actMessage(action)] };
        } catch (err) {
          if (err instanceof ProtocolViolation) {
            return { replies: [errorMessage(err.message)], violation: err.message };
          }
          const text = `policy callback failed: ${err instanceof Error ? err.message : err}`;
          return { replies: [errorMessage(text)] };
        }
      }
      case "done": {
        if (this.active) {
          this.policy.finish?.(String(msg.reason ?? ""));
        }
        this.active = false;
        return { replies: [], episodeDone: true };
      }
      default: {
        const text = `unexpected message type ${String(msg.type)}`;
        return { replies: [errorMessage(text)], violation: text };
      }
    }
  }
}

function validateAction(action: unknown): asserts action is number[] {
  if (!Array.isArray(action) || action.length !== 7) {
    throw new Error(`callback must return 7 numbers, got ${JSON.stringify(action)}`);
  }
  for (const v of action) {
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new Error(`callback returned a non-finite component: ${v}`);
    }
  }
}

/** Wrap a bare callback (observation -> 7 numbers) as a Policy. */
export function callbackPolicy(
  name: string,
  callback: PolicyCallback,
  acceptsPrivileged = false,
): Policy {
  return {
    name,
    acceptsPrivileged,
    begin: () => {},
    act: callback,
  };
}
