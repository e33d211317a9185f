"""Client side of the sr-backend/1 wire protocol.

A backend is a child process that prints one handshake line and then
answers line-delimited JSON requests on its standard streams:

    handshake  {"protocol": "sr-backend/1", "scales": [2]}
    request    {"id": "...", "op": "upscale", "input": "...", "output": "...",
                "scale": 2, "steps": 20, "guidance_scale": 0.0, "seed": 7}
    response   {"id": "...", "status": "ok"}
               {"id": "...", "status": "error", "message": "..."}

One request is in flight per process; the host scales out by launching more
processes. A backend must exit on its own once stdin closes.
"""

from __future__ import annotations

import json
import select
import subprocess
import time
from dataclasses import dataclass

from .errors import BackendError, BackendFailure, BackendTimeout, ProtocolError

PROTOCOL_NAME = "sr-backend/1"
DEFAULT_TIMEOUT = 300.0  # seconds per request
_HANDSHAKE_TIMEOUT = 120.0  # model loading can dominate startup
_SHUTDOWN_GRACE = 10.0


@dataclass(frozen=True)
class UpscaleRequest:
    id: str
    input: str
    output: str
    scale: int = 2
    steps: int = 20
    guidance_scale: float = 0.0
    seed: int | None = None

    def to_line(self) -> bytes:
        payload = {
            "id": self.id,
            "op": "upscale",
            "input": self.input,
            "output": self.output,
            "scale": self.scale,
            "steps": self.steps,
            "guidance_scale": self.guidance_scale,
            "seed": self.seed,
        }
        return json.dumps(payload).encode("utf-8") + b"\n"


@dataclass(frozen=True)
class UpscaleResponse:
    id: str
    status: str
    message: str = ""


class ExternalBackend:
    """One running backend process plus its protocol state."""

    def __init__(self, command, timeout: float = DEFAULT_TIMEOUT):
        self.command = list(command)
        self.timeout = timeout
        self.calls = 0
        self._buf = b""
        self._broken = False
        try:
            # bufsize=0 keeps stdout a raw pipe so select() sees every byte
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
                bufsize=0,
            )
        except OSError as exc:
            raise BackendError(f"cannot start backend {self.command}: {exc}") from exc
        try:
            self.scales = self._read_handshake()
        except BackendFailure:
            self._broken = True
            self.close()
            raise

    def _read_line(self, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BackendTimeout(
                    f"no backend reply within {timeout:.0f}s ({self.command[0]})"
                )
            ready, _, _ = select.select([self._proc.stdout], [], [], remaining)
            if not ready:
                continue
            chunk = self._proc.stdout.read(65536)
            if not chunk:
                raise ProtocolError("backend closed its output stream mid-protocol")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def _read_handshake(self):
        line = self._read_line(_HANDSHAKE_TIMEOUT)
        try:
            hello = json.loads(line)
        except ValueError as exc:
            raise ProtocolError(f"handshake is not JSON: {line[:200]!r}") from exc
        if not isinstance(hello, dict) or hello.get("protocol") != PROTOCOL_NAME:
            raise ProtocolError(f"unexpected handshake: {hello!r}")
        scales = hello.get("scales")
        if not isinstance(scales, list) or 2 not in scales:
            raise ProtocolError(f"backend does not offer 2x upscaling: {scales!r}")
        return scales

    def call(self, request: UpscaleRequest) -> UpscaleResponse:
        try:
            return self._call(request)
        except (ProtocolError, BackendTimeout):
            # pipe state is undefined after a desync; close() must not wait
            self._broken = True
            raise

    def _call(self, request: UpscaleRequest) -> UpscaleResponse:
        if self._proc.poll() is not None:
            raise ProtocolError(
                f"backend exited with code {self._proc.returncode} before the request"
            )
        try:
            self._proc.stdin.write(request.to_line())
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise ProtocolError(f"cannot write to backend: {exc}") from exc

        line = self._read_line(self.timeout)
        try:
            reply = json.loads(line)
        except ValueError as exc:
            raise ProtocolError(f"response is not JSON: {line[:200]!r}") from exc
        if not isinstance(reply, dict) or "status" not in reply:
            raise ProtocolError(f"malformed response: {reply!r}")
        if reply.get("id") != request.id:
            raise ProtocolError(
                f"response id {reply.get('id')!r} does not match request {request.id!r}"
            )
        self.calls += 1
        if reply["status"] == "ok":
            return UpscaleResponse(id=request.id, status="ok")
        if reply["status"] == "error":
            message = str(reply.get("message", ""))
            raise BackendError(message or "backend reported an unspecified error")
        raise ProtocolError(f"unknown status {reply['status']!r}")

    def close(self) -> None:
        """Close stdin and wait; a well-behaved backend exits on its own."""
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=0.0 if self._broken else _SHUTDOWN_GRACE)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdout is not None:
            self._proc.stdout.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def call_external_backend(request: UpscaleRequest, backend: ExternalBackend) -> UpscaleResponse:
    """Send one request over a started, handshaken backend and validate the
    matching response."""
    return backend.call(request)
