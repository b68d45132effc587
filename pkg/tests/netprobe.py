"""Tiny network probe run inside emulated nodes by the integration tests.

The sandbox has no ping binary, so this speaks ICMP echo over a raw socket
and offers a one-shot TCP listener/connector.

    python3 netprobe.py ping ADDR [COUNT]     exit 0 iff every echo answered
    python3 netprobe.py listen PORT            accept one connection, print peer
    python3 netprobe.py connect ADDR PORT      exit 0 iff connect succeeds
    python3 netprobe.py udp-server PORT        receive one paced UDP stream, print
                                               per-second intervals as iperf3 -J does
    python3 netprobe.py udp-client ADDR PORT MBPS SECONDS
"""

import json
import os
import socket
import struct
import sys
import time


def checksum(data):
    if len(data) % 2:
        data += b"\0"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    total = (total >> 16) + (total & 0xFFFF)
    total += total >> 16
    return ~total & 0xFFFF


def ping(addr, count=3, timeout=1.0):
    sock = socket.socket(socket.AF_INET, socket.SOCK_RAW, socket.IPPROTO_ICMP)
    sock.settimeout(timeout)
    ident = os.getpid() & 0xFFFF
    answered = 0
    for seq in range(count):
        header = struct.pack("!BBHHH", 8, 0, 0, ident, seq)
        payload = struct.pack("!d", time.time())
        packet = struct.pack("!BBHHH", 8, 0, checksum(header + payload), ident, seq) + payload
        sock.sendto(packet, (addr, 0))
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            try:
                data, _ = sock.recvfrom(1024)
            except socket.timeout:
                break
            ihl = (data[0] & 0x0F) * 4
            kind, _, _, rid, rseq = struct.unpack("!BBHHH", data[ihl : ihl + 8])
            if kind == 0 and rid == ident and rseq == seq:
                answered += 1
                print(f"64 bytes from {addr}: icmp_seq={seq + 1} time={(time.time() - struct.unpack('!d', data[ihl + 8 : ihl + 16])[0]) * 1000:.3f} ms")
                break
    print(f"{count} packets transmitted, {answered} received")
    return answered == count


DATAGRAM = 1400
END = b"END"


def udp_server(port, idle=3.0):
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(("0.0.0.0", port))
    sock.settimeout(30)
    buckets = {}
    start = None
    while True:
        try:
            data, _ = sock.recvfrom(65535)
        except socket.timeout:
            break
        now = time.monotonic()
        if data.startswith(END):
            break
        if start is None:
            start = now
            sock.settimeout(idle)
        second = int(now - start)
        buckets[second] = buckets.get(second, 0) + len(data)
    intervals = [
        {"sum": {"start": float(s), "end": float(s + 1), "seconds": 1.0, "bits_per_second": buckets.get(s, 0) * 8.0}}
        for s in range(max(buckets) + 1 if buckets else 0)
    ]
    print(json.dumps({"intervals": intervals}))
    return 0


def udp_client(addr, port, mbps, seconds):
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    payload = b"x" * DATAGRAM
    gap = DATAGRAM * 8 / (mbps * 1e6)
    start = time.monotonic()
    sent = 0
    while True:
        now = time.monotonic()
        if now - start >= seconds:
            break
        due = start + sent * gap
        if due > now:
            time.sleep(due - now)
        sock.sendto(payload, (addr, port))
        sent += 1
    for _ in range(5):
        sock.sendto(END, (addr, port))
        time.sleep(0.05)
    print(json.dumps({"sent": sent}))
    return 0


def main(argv):
    cmd = argv[0]
    if cmd == "ping":
        return 0 if ping(argv[1], int(argv[2]) if len(argv) > 2 else 3) else 1
    if cmd == "listen":
        srv = socket.socket()
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind(("0.0.0.0", int(argv[1])))
        srv.listen(1)
        srv.settimeout(10)
        conn, peer = srv.accept()
        print(peer[0])
        conn.close()
        return 0
    if cmd == "connect":
        try:
            socket.create_connection((argv[1], int(argv[2])), timeout=3).close()
        except OSError as exc:
            print(exc, file=sys.stderr)
            return 1
        return 0
    if cmd == "udp-server":
        return udp_server(int(argv[1]))
    if cmd == "udp-client":
        return udp_client(argv[1], int(argv[2]), float(argv[3]), float(argv[4]))
    print(__doc__, file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
