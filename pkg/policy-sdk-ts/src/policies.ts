import { InitMessage } from "./protocol.js";
import { Observation, Policy } from "./session.js";

/** Null policy: replies with zero deltas forever. */
export class EchoPolicy implements Policy {
  name = "echo";
  acceptsPrivileged = false;

  begin(_init: InitMessage): void {}

  act(_obs: Observation): number[] {
    return [0, 0, 0, 0, 0, 0, 0];
  }
}

const CRUISE_Z = 0.32;
const STEP_NORM = 0.09;
const ARRIVE_TOL = 1e-6;
const GRASP_HOVER = 0.02;

type Vec3 = [number, number, number];

function moveToward(cur: Vec3, goal: Vec3): number[] {
  const d = [goal[0] - cur[0], goal[1] - cur[1], goal[2] - cur[2]];
  const n = Math.hypot(d[0], d[1], d[2]);
  const s = n <= STEP_NORM ? 1 : STEP_NORM / n;
  return [d[0] * s, d[1] * s, d[2] * s, 0, 0, 0, 0];
}

function arrived(cur: Vec3, goal: Vec3): boolean {
  return Math.hypot(cur[0] - goal[0], cur[1] - goal[1], cur[2] - goal[2]) <= ARRIVE_TOL;
}

/**
 * Scripted pick-up solver over privileged observations: approach above the
 * target, descend to its top face, close, lift, hold. Demonstrates a
 * cross-language policy completing episodes end to end.
 */
export class DemoPickPolicy implements Policy {
  name = "demo";
  acceptsPrivileged = true;
  private phase = "approach";

  begin(_init: InitMessage): void {
    this.phase = "approach";
  }

  act(obs: Observation): number[] {
    const priv = obs.privileged;
    if (!priv) {
      return [0, 0, 0, 0, 0, 0, 0];
    }
    const ee = priv.ee_position as Vec3;
    const target = priv.objects[priv.task.target_a];
    const [tx, ty, tz] = target.position;
    const top = tz + target.half_extents[2];

    if (this.phase === "approach") {
      const goal: Vec3 = [tx, ty, CRUISE_Z];
      if (!arrived(ee, goal)) return moveToward(ee, goal);
      this.phase = "descend";
    }
    if (this.phase === "descend") {
      const goal: Vec3 = [tx, ty, top + GRASP_HOVER];
      if (!arrived(ee, goal)) return moveToward(ee, goal);
      this.phase = "close";
    }
    if (this.phase === "close") {
      this.phase = "lift";
      return [0, 0, 0, 0, 0, 0, -1];
    }
    if (this.phase === "lift") {
      if (priv.attached !== priv.task.target_a) {
        this.phase = "approach"; // missed; line up again
        return [0, 0, 0, 0, 0, 0, 0];
      }
      const goal: Vec3 = [ee[0], ee[1], CRUISE_Z];
      if (!arrived(ee, goal)) return moveToward(ee, goal);
      this.phase = "hold";
    }
    return [0, 0, 0, 0, 0, 0, 0];
  }
}

export function makePolicy(name: string): Policy {
  switch (name) {
    case "echo":
      return new EchoPolicy();
    case "demo":
      return new DemoPickPolicy();
    default:
      throw new Error(`unknown policy ${name} (have: echo, demo)`);
  }
}
