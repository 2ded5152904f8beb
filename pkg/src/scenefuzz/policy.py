"""Policy transports and handles: the seam where models plug in.

A policy is an endpoint speaking the NDJSON protocol over one of three
transports: in-process (builtin scripted policies), a child process's
stdio, or a TCP socket. One connection serves one episode at a time;
campaigns wanting parallelism open one connection per worker.
"""

from __future__ import annotations

import os
import select
import shlex
import socket
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Any

from .policies import PolicyProgram, make_policy
from .protocol import (
    MSG_ACT,
    MSG_DONE,
    MSG_ERROR,
    MSG_INIT,
    MSG_INIT_ACK,
    MSG_OBSERVE,
    PROTOCOL_VERSION,
    ProtocolError,
    act_message,
    decode_message,
    done_message,
    encode_message,
    error_message,
    init_ack_message,
    init_message,
    observe_message,
    parse_act,
)
from .render import Observation
from .sim import ActionCommand

DEFAULT_HANDSHAKE_TIMEOUT = 10.0
DEFAULT_STEP_TIMEOUT = 30.0


class PolicyError(RuntimeError):
    """Any policy-side failure; campaigns record it as a policy_error episode."""


class HandshakeError(PolicyError):
    pass


class PolicyTimeout(PolicyError):
    pass


class TransportClosed(PolicyError):
    pass


class MalformedAction(PolicyError):
    pass


# --------------------------------------------------------------------------
# Hosting side: drive a PolicyProgram from decoded messages
# --------------------------------------------------------------------------


class ProgramHost:
    """Message loop around a PolicyProgram; shared by all hosting transports."""

    def __init__(self, program: PolicyProgram):
        self.program = program
        self.active = False

    def handle_line(self, line: str) -> list[str]:
        try:
            msg = decode_message(line)
        except ProtocolError as exc:
            return [encode_message(error_message(str(exc)))]
        kind = msg.get("type")
        if kind == MSG_INIT:
            if msg.get("protocol_version") != PROTOCOL_VERSION:
                return [
                    encode_message(
                        error_message(
                            f"unsupported protocol_version {msg.get('protocol_version')!r}, "
                            f"expected {PROTOCOL_VERSION}"
                        )
                    )
                ]
            self.program.begin(msg)
            self.active = True
            return [
                encode_message(
                    init_ack_message(self.program.name, self.program.accepts_privileged)
                )
            ]
        if kind == MSG_OBSERVE:
            if not self.active:
                return [encode_message(error_message("observe before init"))]
            try:
                action = self.program.act(msg)
                return [encode_message(act_message(list(action)))]
            except Exception as exc:  # noqa: BLE001 - report, never crash the host
                return [encode_message(error_message(f"policy callback failed: {exc}"))]
        if kind == MSG_DONE:
            if self.active:
                self.program.finish(msg.get("reason", ""))
            self.active = False
            return []
        return [encode_message(error_message(f"unexpected message type {kind!r}"))]


def serve_stdio(program: PolicyProgram) -> int:
    """Host a program on stdin/stdout until EOF. Used by the policy-host CLI."""
    host = ProgramHost(program)
    for line in sys.stdin:
        if not line.strip():
            continue
        for reply in host.handle_line(line):
            sys.stdout.write(reply)
            sys.stdout.flush()
    return 0


def serve_tcp(program: PolicyProgram, port: int = 0, connections: int = 1) -> socket.socket:
    """Host a program on a TCP port; serves in a daemon thread.

    Returns the listening socket (query ``.getsockname()[1]`` for the bound
    port). Each accepted connection gets its own host loop; ``connections``
    bounds how many will be served before the listener closes.
    """
    import threading

    listener = socket.create_server(("127.0.0.1", port))

    def serve() -> None:
        try:
            for _ in range(connections):
                conn, _addr = listener.accept()
                host = ProgramHost(program)
                buf = b""
                with conn:
                    while True:
                        chunk = conn.recv(65536)
                        if not chunk:
                            break
                        buf += chunk
                        while b"\n" in buf:
                            line, buf = buf.split(b"\n", 1)
                            for reply in host.handle_line(line.decode("utf-8")):
                                conn.sendall(reply.encode("utf-8"))
        finally:
            listener.close()

    threading.Thread(target=serve, daemon=True).start()
    return listener


# --------------------------------------------------------------------------
# Framework side: transports
# --------------------------------------------------------------------------


class Transport:
    kind = "abstract"

    def send_line(self, line: str) -> None:
        raise NotImplementedError

    def recv_line(self, timeout: float) -> str:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InProcessTransport(Transport):
    kind = "in_process"

    def __init__(self, host: ProgramHost):
        self.host = host
        self.pending: list[str] = []

    def send_line(self, line: str) -> None:
        self.pending.extend(self.host.handle_line(line))

    def recv_line(self, timeout: float) -> str:
        if not self.pending:
            raise TransportClosed("in-process policy produced no reply")
        return self.pending.pop(0)


class _BufferedReader:
    """Deadline-aware line reader over a readable file descriptor."""

    def __init__(self, fd: int):
        self.fd = fd
        self.buf = b""

    def readline(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while b"\n" not in self.buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise PolicyTimeout(f"no reply within {timeout:.1f}s")
            ready, _, _ = select.select([self.fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(self.fd, 65536)
            if chunk == b"":
                raise TransportClosed("policy closed the connection")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return line.decode("utf-8")


class ChildProcessTransport(Transport):
    kind = "child_process_stdio"

    def __init__(self, argv: list[str]):
        try:
            self.proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise TransportClosed(f"cannot spawn policy {argv!r}: {exc}") from exc
        self.reader = _BufferedReader(self.proc.stdout.fileno())

    def send_line(self, line: str) -> None:
        try:
            self.proc.stdin.write(line.encode("utf-8"))
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as exc:
            raise TransportClosed(f"policy process is gone: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        return self.reader.readline(timeout)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class TcpTransport(Transport):
    kind = "tcp"

    def __init__(self, host: str, port: int, connect_timeout: float = DEFAULT_HANDSHAKE_TIMEOUT):
        try:
            self.sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise TransportClosed(f"cannot connect to policy at {host}:{port}: {exc}") from exc
        self.buf = b""

    def send_line(self, line: str) -> None:
        try:
            self.sock.settimeout(DEFAULT_STEP_TIMEOUT)
            self.sock.sendall(line.encode("utf-8"))
        except OSError as exc:
            raise TransportClosed(f"policy socket failed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while b"\n" not in self.buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise PolicyTimeout(f"no reply within {timeout:.1f}s")
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                continue
            except OSError as exc:
                raise TransportClosed(f"policy socket failed: {exc}") from exc
            if chunk == b"":
                raise TransportClosed("policy closed the connection")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return line.decode("utf-8")

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


# --------------------------------------------------------------------------
# Descriptors, connections, handles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicyDescriptor:
    """Where a policy lives. Parsed from strings like ``oracle``,
    ``random:7``, ``cmd:python3 -m scenefuzz.cli policy-host --policy echo``,
    or ``tcp:127.0.0.1:9999``."""

    transport: str  # in_process | child_process_stdio | tcp
    builtin: str | None = None
    seed: int = 0
    argv: tuple[str, ...] = ()
    host: str = ""
    port: int = 0
    cheat: bool | None = None  # None: follow the policy's accepts_privileged

    @property
    def label(self) -> str:
        if self.transport == "in_process":
            return self.builtin or "?"
        if self.transport == "child_process_stdio":
            return " ".join(self.argv)
        return f"tcp:{self.host}:{self.port}"


def parse_policy_descriptor(spec: str, cheat: bool | None = None) -> PolicyDescriptor:
    if spec.startswith("cmd:"):
        return PolicyDescriptor(
            transport="child_process_stdio", argv=tuple(shlex.split(spec[4:])), cheat=cheat
        )
    if spec.startswith("tcp:"):
        host, _, port = spec[4:].rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp policy descriptor {spec!r}")
        return PolicyDescriptor(transport="tcp", host=host, port=int(port), cheat=cheat)
    name, _, seed = spec.partition(":")
    make_policy(name, 0)  # validate the name early
    return PolicyDescriptor(
        transport="in_process", builtin=name, seed=int(seed) if seed else 0, cheat=cheat
    )


@dataclass
class Timeouts:
    handshake: float = DEFAULT_HANDSHAKE_TIMEOUT
    step: float = DEFAULT_STEP_TIMEOUT


@dataclass
class PolicyHandle:
    connection: "PolicyConnection"
    name: str
    accepts_privileged: bool
    cheat_mode: bool
    protocol_version: int = PROTOCOL_VERSION


class PolicyConnection:
    """One live transport; runs episodes sequentially, one handshake each."""

    def __init__(
        self,
        descriptor: PolicyDescriptor,
        timeouts: Timeouts | None = None,
        message_log: list[str] | None = None,
    ):
        self.descriptor = descriptor
        self.timeouts = timeouts or Timeouts()
        self.message_log = message_log
        if descriptor.transport == "in_process":
            program = make_policy(descriptor.builtin, descriptor.seed)
            self.transport: Transport = InProcessTransport(ProgramHost(program))
        elif descriptor.transport == "child_process_stdio":
            self.transport = ChildProcessTransport(list(descriptor.argv))
        elif descriptor.transport == "tcp":
            self.transport = TcpTransport(
                descriptor.host, descriptor.port, self.timeouts.handshake
            )
        else:
            raise ValueError(f"unknown transport {descriptor.transport!r}")

    def _send(self, msg: dict[str, Any]) -> None:
        line = encode_message(msg)
        if self.message_log is not None:
            self.message_log.append(line)
        self.transport.send_line(line)

    def _recv(self, timeout: float) -> dict[str, Any]:
        line = self.transport.recv_line(timeout)
        if self.message_log is not None:
            self.message_log.append(line if line.endswith("\n") else line + "\n")
        try:
            return decode_message(line)
        except ProtocolError as exc:
            raise MalformedAction(str(exc)) from exc

    def start_episode(
        self,
        instruction: str,
        width: int,
        height: int,
        max_steps: int,
        scene_id: str = "",
    ) -> PolicyHandle:
        want_cheat = self.descriptor.cheat
        self._send(
            init_message(
                instruction=instruction,
                width=width,
                height=height,
                max_steps=max_steps,
                cheat_mode=bool(want_cheat) if want_cheat is not None else True,
                scene_id=scene_id,
            )
        )
        try:
            ack = self._recv(self.timeouts.handshake)
        except PolicyError as exc:
            raise HandshakeError(f"handshake failed: {exc}") from exc
        if ack.get("type") == MSG_ERROR:
            raise HandshakeError(f"policy refused init: {ack.get('message')}")
        if ack.get("type") != MSG_INIT_ACK:
            raise HandshakeError(f"expected init_ack, got {ack.get('type')!r}")
        if ack.get("protocol_version") != PROTOCOL_VERSION:
            raise HandshakeError(
                f"protocol version mismatch: policy speaks "
                f"{ack.get('protocol_version')!r}, framework speaks {PROTOCOL_VERSION}"
            )
        accepts = bool(ack.get("accepts_privileged", False))
        cheat = accepts if want_cheat is None else bool(want_cheat) and accepts
        return PolicyHandle(
            connection=self,
            name=str(ack.get("name", "")),
            accepts_privileged=accepts,
            cheat_mode=cheat,
        )

    def query_action(self, handle: PolicyHandle, obs: Observation) -> ActionCommand:
        if not handle.cheat_mode and obs.privileged is not None:
            obs = Observation(
                rgb=obs.rgb,
                width=obs.width,
                height=obs.height,
                step=obs.step,
                instruction=obs.instruction,
                privileged=None,
            )
        self._send(observe_message(obs))
        reply = self._recv(self.timeouts.step)
        if reply.get("type") == MSG_ERROR:
            raise PolicyError(f"policy error: {reply.get('message')}")
        if reply.get("type") != MSG_ACT:
            raise MalformedAction(f"expected act, got {reply.get('type')!r}")
        try:
            return parse_act(reply)
        except ProtocolError as exc:
            raise MalformedAction(str(exc)) from exc

    def finish_episode(self, reason: str) -> None:
        try:
            self._send(done_message(reason))
        except PolicyError:
            pass  # episode already scored; a dead policy changes nothing

    def close(self) -> None:
        self.transport.close()

    def __enter__(self) -> "PolicyConnection":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()
