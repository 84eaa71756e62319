"""Exception types shared across the package."""


class UnsupportedGeometryError(ValueError):
    """Layer geometry outside the engine's contract (stride/dilation/groups != 1,
    kernel larger than image, ...). Callers may catch this and fall back to a
    generic convolution path."""


class FixtureFormatError(ValueError):
    """Malformed tensor fixture file (bad magic, dtype, dims, or payload length)."""
