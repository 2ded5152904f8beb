"""Newline-delimited JSON wire protocol between framework and policies.

One JSON object per line, UTF-8. Message flow per episode:

    framework -> policy   init
    policy -> framework   init_ack
    repeat: framework -> policy   observe
            policy -> framework   act
    framework -> policy   done

Either side may send ``error`` instead of its expected message. The image
travels as base64 of the raw RGB rows. See PROTOCOL.md for the grammar.
"""

from __future__ import annotations

import base64
import json
import math
from typing import Any

from .render import Observation
from .sim import ActionCommand, InvalidActionError

PROTOCOL_VERSION = 1

MSG_INIT = "init"
MSG_INIT_ACK = "init_ack"
MSG_OBSERVE = "observe"
MSG_ACT = "act"
MSG_DONE = "done"
MSG_ERROR = "error"


class ProtocolError(RuntimeError):
    """Malformed or out-of-order wire traffic."""


def encode_message(msg: dict[str, Any]) -> str:
    return json.dumps(msg, sort_keys=True, separators=(",", ":")) + "\n"


def decode_message(line: str) -> dict[str, Any]:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not a JSON message: {line[:120]!r}") from exc
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolError(f"message without a type field: {line[:120]!r}")
    return msg


def init_message(
    instruction: str,
    width: int,
    height: int,
    max_steps: int,
    cheat_mode: bool,
    scene_id: str = "",
) -> dict[str, Any]:
    return {
        "type": MSG_INIT,
        "protocol_version": PROTOCOL_VERSION,
        "instruction": instruction,
        "width": width,
        "height": height,
        "max_steps": max_steps,
        "cheat_mode": cheat_mode,
        "scene_id": scene_id,
    }


def init_ack_message(name: str, accepts_privileged: bool) -> dict[str, Any]:
    return {
        "type": MSG_INIT_ACK,
        "protocol_version": PROTOCOL_VERSION,
        "name": name,
        "accepts_privileged": accepts_privileged,
    }


def observe_message(obs: Observation) -> dict[str, Any]:
    msg: dict[str, Any] = {
        "type": MSG_OBSERVE,
        "step": obs.step,
        "instruction": obs.instruction,
        "width": obs.width,
        "height": obs.height,
        "rgb_b64": base64.b64encode(obs.rgb).decode("ascii"),
    }
    if obs.privileged is not None:
        msg["privileged"] = obs.privileged
    return msg


def decode_observation(msg: dict[str, Any]) -> Observation:
    try:
        rgb = base64.b64decode(msg["rgb_b64"])
        return Observation(
            rgb=rgb,
            width=int(msg["width"]),
            height=int(msg["height"]),
            step=int(msg["step"]),
            instruction=msg.get("instruction", ""),
            privileged=msg.get("privileged"),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ProtocolError(f"malformed observe message: {exc}") from exc


def act_message(action: list[float]) -> dict[str, Any]:
    return {"type": MSG_ACT, "action": [float(v) for v in action]}


def parse_act(msg: dict[str, Any]) -> ActionCommand:
    if msg.get("type") != MSG_ACT:
        raise ProtocolError(f"expected act, got {msg.get('type')!r}")
    values = msg.get("action")
    if not isinstance(values, list) or len(values) != 7:
        raise ProtocolError(f"act needs a 7-number action array, got {values!r}")
    try:
        floats = [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"non-numeric action: {values!r}") from exc
    if not all(math.isfinite(v) for v in floats):
        raise ProtocolError(f"non-finite action: {floats!r}")
    try:
        return ActionCommand.from_vector(floats)
    except InvalidActionError as exc:
        raise ProtocolError(str(exc)) from exc


def done_message(reason: str) -> dict[str, Any]:
    return {"type": MSG_DONE, "reason": reason}


def error_message(text: str) -> dict[str, Any]:
    return {"type": MSG_ERROR, "message": text}
