"""Self-delimiting binary codes used by the history and tuple serializations."""

from ctclab.errors import StructuralError


def fixed(n: int, width: int) -> str:
    if n < 0 or n >= (1 << width):
        raise StructuralError(f"{n} does not fit in {width} bits")
    return format(n, f"0{width}b")


def gamma(n: int) -> str:
    """Elias gamma code of ``n >= 0`` (encodes ``n + 1``)."""
    if n < 0:
        raise StructuralError("gamma code needs a nonnegative integer")
    b = format(n + 1, "b")
    return "0" * (len(b) - 1) + b


def read_gamma(s: str, pos: int) -> tuple[int, int]:
    """Decode a gamma code at ``s[pos:]``; return ``(value, next_pos)``.

    Raises ValueError on truncated input.
    """
    zeros = 0
    n = len(s)
    while pos + zeros < n and s[pos + zeros] == "0":
        zeros += 1
    end = pos + 2 * zeros + 1
    if end > n:
        raise ValueError("truncated gamma code")
    return int(s[pos + zeros:end], 2) - 1, end


def bytes_to_bits(data: bytes) -> str:
    return "".join(format(b, "08b") for b in data)


def bits_to_bytes(bits: str) -> bytes:
    if len(bits) % 8:
        raise ValueError("bit string length is not a multiple of 8")
    return bytes(int(bits[i:i + 8], 2) for i in range(0, len(bits), 8))


def is_binary(s: str) -> bool:
    return all(ch in "01" for ch in s)
