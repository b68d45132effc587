"""Just enough of the OVSDB management protocol (JSON-RPC over TCP) to build
a whitebox switch: create a bridge, attach ports, point it at a controller
and read back the connection state.

Speaking the protocol from outside the container keeps the switch image
free of any requirement beyond a listening ``ovsdb-server``.
"""

import itertools
import json
import logging
import socket
import time

from . import config
from .errors import NoSuchBridge, OvsdbError

log = logging.getLogger(__name__)

DB = "Open_vSwitch"


def named(name):
    return ["named-uuid", name]


def uuid_set(value):
    """Normalize an OVSDB set-of-uuid column to a list of uuid strings."""
    if not value:
        return []
    if value[0] == "uuid":
        return [value[1]]
    if value[0] == "set":
        return [v[1] for v in value[1]]
    return []


class OvsdbClient:
    def __init__(self, host, port=config.OVSDB_PORT, timeout=5.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._sock = None
        self._buf = ""
        self._ids = itertools.count(1)
        self._decoder = json.JSONDecoder()

    def __enter__(self):
        self.connect()
        return self

    def __exit__(self, *exc):
        self.close()

    def connect(self):
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except OSError as exc:
            raise OvsdbError(f"cannot reach OVSDB at {self.host}:{self.port}: {exc}") from exc

    def close(self):
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    @classmethod
    def wait(cls, host, port=config.OVSDB_PORT, timeout=30.0):
        """Connect, retrying until the server accepts or ``timeout`` passes."""
        deadline = time.monotonic() + timeout
        while True:
            client = cls(host, port)
            try:
                client.connect()
                client.call("list_dbs", [])
                return client
            except OvsdbError:
                client.close()
                if time.monotonic() >= deadline:
                    raise
                time.sleep(0.5)

    # wire

    def _send(self, msg):
        self._sock.sendall(json.dumps(msg).encode())

    def _recv(self):
        while True:
            text = self._buf.lstrip()
            if text:
                try:
                    msg, end = self._decoder.raw_decode(text)
                    self._buf = text[end:]
                    return msg
                except ValueError:
                    pass
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout as exc:
                raise OvsdbError(f"OVSDB at {self.host} did not answer") from exc
            if not chunk:
                raise OvsdbError(f"OVSDB at {self.host} closed the connection")
            self._buf += chunk.decode()

    def call(self, method, params):
        if self._sock is None:
            self.connect()
        rid = next(self._ids)
        try:
            self._send({"method": method, "params": params, "id": rid})
            while True:
                msg = self._recv()
                if msg.get("method") == "echo":  # server keepalive
                    self._send({"result": msg.get("params", []), "error": None, "id": msg.get("id")})
                    continue
                if msg.get("id") != rid:
                    continue
                if msg.get("error"):
                    raise OvsdbError(f"{method}: {msg['error']}")
                return msg.get("result")
        except OSError as exc:
            raise OvsdbError(f"OVSDB at {self.host}: {exc}") from exc

    def transact(self, *ops):
        results = self.call("transact", [DB, *ops])
        for op, res in zip(ops, results):
            if isinstance(res, dict) and res.get("error"):
                raise OvsdbError(f"{op.get('op')} on {op.get('table')}: {res['error']}: {res.get('details', '')}")
        if len(results) > len(ops) and results[-1] and results[-1].get("error"):
            raise OvsdbError(f"transaction failed: {results[-1]}")
        return results

    # queries

    def select(self, table, where=(), columns=None):
        op = {"op": "select", "table": table, "where": list(where)}
        if columns:
            op["columns"] = list(columns)
        return self.transact(op)[0]["rows"]

    def bridge_names(self):
        return sorted(r["name"] for r in self.select("Bridge", columns=["name"]))

    def bridge(self, name):
        rows = self.select("Bridge", [["name", "==", name]])
        if not rows:
            raise NoSuchBridge(f"bridge {name!r} does not exist on {self.host}")
        return rows[0]

    def port_names(self, bridge):
        port_uuids = set(uuid_set(self.bridge(bridge)["ports"]))
        rows = self.select("Port", columns=["_uuid", "name"])
        return sorted(r["name"] for r in rows if r["_uuid"][1] in port_uuids)

    # changes

    def ensure_bridge(self, name, datapath_type=None):
        """Create ``name`` with its internal port unless it already exists."""
        if self.select("Bridge", [["name", "==", name]], ["_uuid"]):
            return False
        row = {"name": name, "ports": named("port")}
        if datapath_type:
            row["datapath_type"] = datapath_type
        self.transact(
            {"op": "insert", "table": "Interface", "row": {"name": name, "type": "internal"}, "uuid-name": "iface"},
            {"op": "insert", "table": "Port", "row": {"name": name, "interfaces": named("iface")}, "uuid-name": "port"},
            {"op": "insert", "table": "Bridge", "row": row, "uuid-name": "br"},
            {"op": "mutate", "table": "Open_vSwitch", "where": [], "mutations": [["bridges", "insert", named("br")]]},
        )
        return True

    def add_port(self, bridge, ifname):
        self.bridge(bridge)
        if self.select("Port", [["name", "==", ifname]], ["_uuid"]):
            return False
        self.transact(
            {"op": "insert", "table": "Interface", "row": {"name": ifname}, "uuid-name": "iface"},
            {"op": "insert", "table": "Port", "row": {"name": ifname, "interfaces": named("iface")}, "uuid-name": "port"},
            {
                "op": "mutate",
                "table": "Bridge",
                "where": [["name", "==", bridge]],
                "mutations": [["ports", "insert", named("port")]],
            },
        )
        return True

    def set_controller(self, bridge, target):
        """Replace the bridge's controllers with the single ``target``."""
        self.bridge(bridge)
        self.transact(
            {"op": "insert", "table": "Controller", "row": {"target": target}, "uuid-name": "ctl"},
            {
                "op": "update",
                "table": "Bridge",
                "where": [["name", "==", bridge]],
                "row": {"controller": named("ctl")},
            },
        )

    def controller_status(self, bridge):
        """``[(target, is_connected)]`` for the bridge's controllers."""
        wanted = set(uuid_set(self.bridge(bridge)["controller"]))
        rows = self.select("Controller", columns=["_uuid", "target", "is_connected"])
        return [(r["target"], bool(r["is_connected"])) for r in rows if r["_uuid"][1] in wanted]
