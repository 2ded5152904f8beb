/**
 * Wire protocol: newline-delimited JSON, one message per line.
 * Mirrors PROTOCOL.md in the framework repository; the version constant
 * here must match the framework's or the handshake is refused.
 */

export const PROTOCOL_VERSION = 1;

export interface InitMessage {
  type: "init";
  protocol_version: number;
  instruction: string;
  width: number;
  height: number;
  max_steps: number;
  cheat_mode?: boolean;
  scene_id?: string;
}

export interface PrivilegedObject {
  position: [number, number, number];
  orientation: [number, number, number];
  shape: string;
  half_extents: [number, number, number];
  graspable: boolean;
  is_container: boolean;
  cavity_half_extents: [number, number, number] | null;
  role: string;
}

export interface PrivilegedBlock {
  ee_position: [number, number, number];
  ee_orientation: [number, number, number];
  aperture: number;
  attached: string | null;
  task: { kind: string; target_a: string; target_b: string | null };
  objects: Record<string, PrivilegedObject>;
}

export interface ObserveMessage {
  type: "observe";
  step: number;
  instruction?: string;
  width: number;
  height: number;
  rgb_b64: string;
  privileged?: PrivilegedBlock;
}

export interface DoneMessage {
  type: "done";
  reason?: string;
}

export type InboundMessage = InitMessage | ObserveMessage | DoneMessage;

export class ProtocolViolation extends Error {}

export function encodeMessage(msg: object): string {
  return JSON.stringify(msg) + "\n";
}

export function decodeLine(line: string): Record<string, unknown> {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    throw new ProtocolViolation(`not a JSON message: ${line.slice(0, 120)}`);
  }
  if (typeof parsed !== "object" || parsed === null || !("type" in parsed)) {
    throw new ProtocolViolation(`message without a type field: ${line.slice(0, 120)}`);
  }
  return parsed as Record<string, unknown>;
}

export function initAckMessage(name: string, acceptsPrivileged: boolean): string {
  return encodeMessage({
    type: "init_ack",
    protocol_version: PROTOCOL_VERSION,
    name,
    accepts_privileged: acceptsPrivileged,
  });
}

export function actMessage(action: number[]): string {
  return encodeMessage({ type: "act", action });
}

export function errorMessage(message: string): string {
  return encodeMessage({ type: "error", message });
}
