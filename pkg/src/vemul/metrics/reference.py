"""Published scalability results, embedded for side-by-side reports.

Values are transcribed cell for cell; they are comparison data only, since
absolute CPU, memory and latency depend entirely on the host they came from.
"""

from types import MappingProxyType

EMULATORS = ("mininet", "vsdnemul")
FAMILIES = ("star", "mesh", "tree")
METRICS = ("cpu_percent", "memory_mb", "first_ping_ms")
SIZES = (9, 17, 33, 65, 129, 257, 513)

# size: (mininet star, mesh, tree, vsdnemul star, mesh, tree)
CPU_PERCENT = {
    9: (1.06, 1.14, 1.11, 2.70, 2.72, 2.71),
    17: (1.78, 2.35, 2.13, 5.56, 6.50, 6.31),
    33: (2.82, 3.88, 3.95, 15.65, 26.21, 17.05),
    65: (3.93, 6.63, 4.65, 41.32, 35.85, 32.42),
    129: (18.25, 26.67, 20.10, 36.47, 42.82, 38.23),
    257: (37.01, 41.06, 38.45, 83.63, 92.26, 86.16),
    513: (51.27, 55.5, 52.75, 169.35, 182.13, 173.22),
}

MEMORY_MB = {
    9: (116.7, 118.82, 117.3, 117.6, 117.7, 117.7),
    17: (129.4, 130.0, 128.2, 222.3, 224.4, 223.3),
    33: (129.1, 132.2, 130.9, 437.6, 450.7, 445.8),
    65: (155.8, 160.1, 158.1, 841.9, 863.8, 856.6),
    129: (210.7, 219.1, 213.9, 1725.2, 1790.0, 1754.0),
    257: (317.1, 323.5, 318.7, 3453.6, 3651.7, 3510.2),
    513: (344.1, 339.1, 347.0, 7121.8, 7276.7, 7237.4),
}

FIRST_PING_MS = {
    9: (18.7, 20.8, 24.9, 16.7, 16.0, 17.6),
    17: (29.2, 29.9, 30.8, 24.5, 25.5, 26.0),
    33: (63.6, 74.2, 56.6, 58.1, 59.1, 55.2),
    65: (77.2, 89.8, 73.9, 88.6, 89.6, 70.3),
    129: (143.1, 181.1, 144.0, 154.3, 159.3, 129.0),
    257: (344.2, 380.3, 337.5, 359.1, 364.1, 294.4),
    513: (650.2, 726.0, 672.5, 628.3, 635.3, 609.9),
}

CPU_LIMIT_PERCENT = 200.0  # the CPU table is relative to two cores
SWITCHING_CAPACITY_MBPS = 6600.0
FIDELITY_FOREGROUND_MBPS = (1000, 1500, 2500, 3000)
FIDELITY_BACKGROUND_MBPS = (400, 600, 800, 1000, 1200)


class ReferenceTable:
    """Read-only lookup keyed by ``(emulator, family, switch_count, metric)``."""

    def __init__(self, cells):
        self._cells = MappingProxyType(dict(cells))

    @classmethod
    def published(cls):
        cells = {}
        for metric, table in zip(METRICS, (CPU_PERCENT, MEMORY_MB, FIRST_PING_MS)):
            for size, row in table.items():
                for i, value in enumerate(row):
                    emulator = EMULATORS[i // 3]
                    family = FAMILIES[i % 3]
                    cells[(emulator, family, size, metric)] = value
        return cls(cells)

    def get(self, emulator, family, switch_count, metric):
        """The cell, or ``None`` where no value was published."""
        return self._cells.get((emulator, family, switch_count, metric))

    def __getitem__(self, key):
        return self._cells[key]

    def __contains__(self, key):
        return key in self._cells

    def __len__(self):
        return len(self._cells)

    def __iter__(self):
        return iter(self._cells)

    def items(self):
        return self._cells.items()


REFERENCE = ReferenceTable.published()
