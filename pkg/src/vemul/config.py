"""Defaults that are configuration rather than code.

Image tags, ports and the management subnet can all be overridden from the
environment so experiments do not need code changes.
"""

import os
from dataclasses import dataclass, field

from .topology import NodeKind

DEFAULT_SOCKET = "/var/run/docker.sock"

OWNER_LABEL = "vemul.owner"
NODE_LABEL = "vemul.node"
KIND_LABEL = "vemul.kind"

MGMT_SUBNET = os.environ.get("VEMUL_MGMT_SUBNET", "172.31.0.0/16")
OPENFLOW_PORT = 6653
OVSDB_PORT = 6640
OPER_BRIDGE = "br_oper0"
OVS_DATAPATH = os.environ.get("VEMUL_OVS_DATAPATH", "system")
CONTROLLER_READY_TIMEOUT_S = 120.0
CONTROLLER_CONNECT_TIMEOUT_S = 30.0


def engine_socket():
    return os.environ.get("VEMUL_ENGINE_SOCKET", DEFAULT_SOCKET)


@dataclass
class KindDefaults:
    image: str
    command: list | None = None
    env: list = field(default_factory=list)
    privileged: bool = False
    cap_add: list = field(default_factory=lambda: ["NET_ADMIN"])


def kind_defaults():
    """Per-kind container settings, honouring ``VEMUL_IMAGE_*`` overrides."""
    return {
        NodeKind.SWITCH: KindDefaults(
            image=os.environ.get("VEMUL_IMAGE_SWITCH", "vemul/whitebox:latest"),
            privileged=True,
        ),
        NodeKind.CONTROLLER: KindDefaults(
            image=os.environ.get("VEMUL_IMAGE_CONTROLLER", "onosproject/onos:2.7-latest"),
            # fwd is ONOS' reactive forwarding app; without it nothing installs paths
            env=["ONOS_APPS=drivers,openflow,fwd"],
        ),
        NodeKind.HOST: KindDefaults(
            image=os.environ.get("VEMUL_IMAGE_HOST", "vemul/host:latest"),
            command=["sleep", "infinity"],
        ),
    }
