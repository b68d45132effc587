"""Minimal client for the container engine's HTTP API over a unix socket."""

import http.client
import json
import logging
import os
import signal
import socket
import struct
import time
import urllib.parse

from . import config
from .errors import EngineError, EngineUnreachable, ExecTimeout

log = logging.getLogger(__name__)

MAX_API_VERSION = "1.43"
MIN_API_VERSION = "1.24"
CONNECT_BACKOFF_S = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, None)


def _vtuple(v):
    return tuple(int(x) for x in v.split("."))


class UnixHTTPConnection(http.client.HTTPConnection):
    def __init__(self, path, timeout=None):
        super().__init__("localhost", timeout=timeout)
        self.unix_path = path

    def connect(self):
        # a unix listener with a full backlog refuses with EAGAIN; back off briefly
        for delay in CONNECT_BACKOFF_S:
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            if self.timeout is not None:
                sock.settimeout(self.timeout)
            try:
                sock.connect(self.unix_path)
            except BlockingIOError:
                sock.close()
                if delay is None:
                    raise
                time.sleep(delay)
                continue
            self.sock = sock
            return


def demux(data):
    """Split an engine multiplexed stream into ``(stdout, stderr)``.

    Frames carry an 8 byte header: stream id, three pad bytes, big-endian
    payload length.  Returns the unconsumed tail as a third element.
    """
    out, err = bytearray(), bytearray()
    pos = 0
    while len(data) - pos >= 8:
        kind, size = struct.unpack(">BxxxL", data[pos : pos + 8])
        if len(data) - pos - 8 < size:
            break
        payload = data[pos + 8 : pos + 8 + size]
        (err if kind == 2 else out).extend(payload)
        pos += 8 + size
    return bytes(out), bytes(err), data[pos:]


class EngineClient:
    def __init__(self, socket_path=None, timeout=60.0):
        self.socket_path = socket_path or config.engine_socket()
        self.timeout = timeout
        self._api = None

    # transport

    def _connect(self, timeout=None):
        return UnixHTTPConnection(self.socket_path, timeout=timeout or self.timeout)

    @property
    def api_version(self):
        if self._api is None:
            self._api = self._negotiate()
        return self._api

    def _negotiate(self):
        status, body = self._raw("GET", "/version")
        if status != 200:
            raise EngineError(status, body)
        server = json.loads(body).get("ApiVersion", MIN_API_VERSION)
        version = min(_vtuple(server), _vtuple(MAX_API_VERSION))
        return ".".join(map(str, version))

    def _raw(self, method, path, body=None, headers=None, timeout=None):
        conn = self._connect(timeout)
        try:
            payload = None
            hdrs = dict(headers or {})
            if body is not None:
                payload = json.dumps(body).encode()
                hdrs["Content-Type"] = "application/json"
            conn.request(method, path, body=payload, headers=hdrs)
            resp = conn.getresponse()
            return resp.status, resp.read().decode("utf-8", "replace")
        except (FileNotFoundError, ConnectionRefusedError, ConnectionResetError, BlockingIOError) as exc:
            raise EngineUnreachable(f"{self.socket_path}: {exc}") from exc
        except socket.timeout as exc:
            raise EngineUnreachable(f"{self.socket_path}: timed out") from exc
        finally:
            conn.close()

    def _url(self, path, params=None):
        url = f"/v{self.api_version}{path}"
        if params:
            url += "?" + urllib.parse.urlencode(params)
        return url

    def request(self, method, path, params=None, body=None, ok=(200, 201, 204), timeout=None):
        status, text = self._raw(method, self._url(path, params), body, timeout=timeout)
        if status not in ok:
            try:
                message = json.loads(text).get("message", text)
            except ValueError:
                message = text
            raise EngineError(status, message)
        if not text:
            return None
        try:
            return json.loads(text)
        except ValueError:
            return text

    def ping(self):
        return self._raw("GET", "/_ping")[0] == 200

    # containers

    def create_container(self, name, body):
        return self.request("POST", "/containers/create", {"name": name}, body)["Id"]

    def start(self, cid):
        self.request("POST", f"/containers/{cid}/start", ok=(204, 304))

    def pause(self, cid):
        self.request("POST", f"/containers/{cid}/pause", ok=(204,))

    def unpause(self, cid):
        self.request("POST", f"/containers/{cid}/unpause", ok=(204,))

    def remove(self, cid, force=True):
        params = {"force": "true" if force else "false", "v": "true"}
        self.request("DELETE", f"/containers/{cid}", params, ok=(204,))

    def inspect(self, cid):
        return self.request("GET", f"/containers/{cid}/json")

    def update(self, cid, resources):
        return self.request("POST", f"/containers/{cid}/update", body=resources)

    def list(self, labels=(), all=True):
        params = {"all": "true" if all else "false"}
        if labels:
            params["filters"] = json.dumps({"label": list(labels)})
        return self.request("GET", "/containers/json", params)

    def stats(self, cid):
        return self.request(
            "GET", f"/containers/{cid}/stats", {"stream": "false", "one-shot": "true"}
        )

    def pull(self, image):
        repo, _, tag = image.rpartition(":") if ":" in image.split("/")[-1] else (image, "", "latest")
        status, text = self._raw(
            "POST", self._url("/images/create", {"fromImage": repo, "tag": tag}), timeout=600
        )
        if status != 200:
            raise EngineError(status, text)
        # progress is a stream of JSON objects; failures arrive in-band
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("{") and '"error"' in line:
                raise EngineError(404, json.loads(line).get("error"))

    # exec

    def exec_create(self, cid, argv):
        body = {"Cmd": list(argv), "AttachStdout": True, "AttachStderr": True, "Tty": False}
        return self.request("POST", f"/containers/{cid}/exec", body=body)["Id"]

    def exec_inspect(self, exec_id):
        return self.request("GET", f"/exec/{exec_id}/json")

    def exec_start(self, exec_id, timeout_s=None, argv=None):
        """Run a created exec to completion and return ``(stdout, stderr)``.

        On timeout the exec'd process is killed and :class:`ExecTimeout`
        carries whatever output arrived.
        """
        deadline = None if timeout_s is None else time.monotonic() + timeout_s
        conn = self._connect(timeout=self.timeout)
        buf = bytearray()
        try:
            conn.request(
                "POST",
                self._url(f"/exec/{exec_id}/start"),
                body=json.dumps({"Detach": False, "Tty": False}).encode(),
                headers={"Content-Type": "application/json"},
            )
            # getresponse() may detach the socket from the connection
            sock = conn.sock
            if deadline is not None:
                sock.settimeout(max(deadline - time.monotonic(), 0.001))
            resp = conn.getresponse()
            if resp.status not in (200, 101):
                raise EngineError(resp.status, resp.read().decode("utf-8", "replace"))
            while True:
                if deadline is not None:
                    left = deadline - time.monotonic()
                    if left <= 0:
                        raise socket.timeout()
                    sock.settimeout(left)
                chunk = resp.read1(65536)
                if not chunk:
                    break
                buf.extend(chunk)
        except socket.timeout:
            self._kill_exec(exec_id)
            out, err, _ = demux(bytes(buf))
            raise ExecTimeout(argv, int((timeout_s or 0) * 1000), out, err) from None
        except (FileNotFoundError, ConnectionRefusedError) as exc:
            raise EngineUnreachable(f"{self.socket_path}: {exc}") from exc
        finally:
            conn.close()
        out, err, _ = demux(bytes(buf))
        return out, err

    def _kill_exec(self, exec_id):
        # the exec API has no kill; the process is visible in our pid namespace
        try:
            pid = self.exec_inspect(exec_id).get("Pid")
            if pid:
                os.kill(pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError, EngineError, EngineUnreachable) as exc:
            log.warning("could not kill timed-out exec %s: %s", exec_id, exc)
