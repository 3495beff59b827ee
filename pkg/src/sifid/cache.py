"""Content-addressed response cache.

Layout: ``<root>/<namespace>/<digest[:2]>/<digest>``. Each file starts
with a one-line checksum header followed by the raw stored bytes, so a
truncated or bit-rotted entry is detected on read and treated as a miss.
Writes go through a temp file + atomic rename, which makes concurrent
puts of the same key safe across processes. Raw backend responses are
stored, never parsed values, so old runs stay reinterpretable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

NAMESPACES = ("nli", "embed", "judge")
_HEADER_PREFIX = b"sha256:"


@dataclass(frozen=True, slots=True)
class CacheKey:
    namespace: str
    digest: str


def make_key(namespace: str, payload: dict) -> CacheKey:
    """Digest the canonical JSON form of a request payload.

    Canonical form: sorted keys, compact separators, UTF-8. Any byte
    difference in model id, parameters, or texts yields a new digest.
    """
    if namespace not in NAMESPACES:
        raise ValueError(f"unknown cache namespace {namespace!r}")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    return CacheKey(namespace=namespace, digest=digest)


class ResponseCache:
    """Filesystem-backed cache; get/put callable from any thread or process."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, key: CacheKey) -> Path:
        return self.root / key.namespace / key.digest[:2] / key.digest

    def get(self, key: CacheKey) -> bytes | None:
        path = self._path(key)
        try:
            blob = path.read_bytes()
        except OSError:
            return None
        newline = blob.find(b"\n")
        if newline < 0 or not blob.startswith(_HEADER_PREFIX):
            logger.warning("cache entry %s/%s has no checksum header; treating as miss",
                           key.namespace, key.digest)
            return None
        expected = blob[len(_HEADER_PREFIX):newline].decode("ascii", "replace")
        value = blob[newline + 1:]
        actual = hashlib.sha256(value).hexdigest()
        if actual != expected:
            logger.warning("cache entry %s/%s failed checksum; treating as miss",
                           key.namespace, key.digest)
            return None
        return value

    def put(self, key: CacheKey, value: bytes) -> bool:
        """Write an entry atomically. Returns False (with a warning) on I/O failure."""
        path = self._path(key)
        header = _HEADER_PREFIX + hashlib.sha256(value).hexdigest().encode("ascii") + b"\n"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(header)
                    fh.write(value)
                os.replace(tmp, path)
            except BaseException:
                try:
                    os.unlink(tmp)
                except OSError:
                    pass
                raise
        except OSError as exc:
            logger.warning("cache write failed for %s/%s: %s; continuing uncached",
                           key.namespace, key.digest, exc)
            return False
        return True

    def clear(self) -> int:
        """Delete every namespace directory; returns the number removed."""
        removed = 0
        for ns in NAMESPACES:
            ns_dir = self.root / ns
            if ns_dir.is_dir():
                shutil.rmtree(ns_dir)
                removed += 1
        return removed


def default_cache_dir() -> Path:
    env = os.environ.get("SIFID_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "sifid"
