"""Line-oriented event trace.

Format (version 1), one event per line, space separated::

    <time_ns> <node> <layer> <event> <packet fields...>

The first line is a header ``# packsim-trace v1 <json scenario>`` so a
trace file carries everything needed to replay the run.
"""
import hashlib
import json

TRACE_VERSION = 1


class Tracer:
    def __init__(self, path=None, enabled=True):
        self.enabled = enabled or path is not None
        self.path = path
        self._fh = open(path, "w") if path else None
        self._hash = hashlib.sha256()
        self.lines = 0

    def header(self, meta):
        line = f"# packsim-trace v{TRACE_VERSION} {json.dumps(meta, sort_keys=True)}\n"
        self._write(line)

    def _write(self, line):
        self._hash.update(line.encode())
        if self._fh is not None:
            self._fh.write(line)

    def log(self, now, node, layer, event, detail=""):
        if self.enabled:
            self.lines += 1
            self._write(f"{now} {node} {layer} {event} {detail}\n")

    def digest(self):
        return self._hash.hexdigest()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_header(path):
    with open(path) as fh:
        first = fh.readline()
    prefix = f"# packsim-trace v{TRACE_VERSION} "
    if not first.startswith(prefix):
        raise ValueError(f"{path}: not a packsim v{TRACE_VERSION} trace")
    return json.loads(first[len(prefix):])


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
