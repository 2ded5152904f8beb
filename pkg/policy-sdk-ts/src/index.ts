export {
  PROTOCOL_VERSION,
  ProtocolViolation,
  encodeMessage,
  decodeLine,
  initAckMessage,
  actMessage,
  errorMessage,
} from "./protocol.js";
export type {
  InitMessage,
  ObserveMessage,
  DoneMessage,
  PrivilegedBlock,
  PrivilegedObject,
} from "./protocol.js";
export { decodeImage, toNested, sha256Hex } from "./image.js";
export type { DecodedImage } from "./image.js";
export { PolicySession, callbackPolicy } from "./session.js";
export type { Observation, Policy, PolicyCallback, HandleResult } from "./session.js";
export { EchoPolicy, DemoPickPolicy, makePolicy } from "./policies.js";
export { serve, serveStdio, serveTcp } from "./serve.js";
