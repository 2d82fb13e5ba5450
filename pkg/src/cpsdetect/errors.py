"""Exception hierarchy shared across the toolkit."""


class CpsDetectError(Exception):
    """Base class for all errors raised by cpsdetect."""


class EmptyInputError(CpsDetectError, ValueError):
    pass


class InvalidStatsError(CpsDetectError, ValueError):
    pass


class InvalidTimingError(CpsDetectError, ValueError):
    pass


class UnmappedDeviceError(CpsDetectError, KeyError):
    def __init__(self, components=(), ips=()):
        self.components = sorted(components)
        self.ips = sorted(ips)
        parts = []
        if self.components:
            parts.append("component_id " + ", ".join(map(str, self.components)))
        if self.ips:
            parts.append("ip " + ", ".join(map(str, self.ips)))
        super().__init__("unmapped devices: " + "; ".join(parts))

    def __str__(self):
        return self.args[0]


class InsufficientDataError(CpsDetectError, ValueError):
    pass


class InvalidTargetError(CpsDetectError, ValueError):
    pass


class ShapeError(CpsDetectError, ValueError):
    pass


class InvalidClusterError(CpsDetectError, ValueError):
    pass


class EmptyClassError(CpsDetectError, ValueError):
    pass


class InvalidConfigError(CpsDetectError, ValueError):
    pass


class MissingClassError(CpsDetectError, ValueError):
    pass


class LabelError(CpsDetectError, ValueError):
    pass


class UndefinedClassError(CpsDetectError, ValueError):
    pass


class CsvFormatError(CpsDetectError, ValueError):
    """Malformed CSV input; carries the 1-based row and column of the fault."""

    def __init__(self, message, row=None, column=None, path=None):
        self.row = row
        self.column = column
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = (":".join(where) + ": ") if where else ""
        super().__init__(prefix + message)
