"""Deterministic, platform-independent derivation of child RNG seeds."""

import hashlib


def mix_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary labeled parts.

    Uses SHA-256 over the textual parts, so results do not depend on
    interpreter hash randomization or platform word size.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
