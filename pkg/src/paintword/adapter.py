"""Out-of-process model adapter protocol.

Wire format over a local (unix-domain) socket, both directions:

    uint32 little-endian header length
    JSON header
    raw little-endian float32 payload (concatenated arrays)

The header carries {"op": ..., "arrays": [{"name", "shape"}, ...]} plus
op-specific fields; the payload length must equal the sum of the declared
array sizes. Ops: describe, generate, extract_latent, compose_from, score.
Gradients are never transported: adapter-backed models are derivative-free
by contract and therefore usable only with derivative-free schedules.

Run `python3 -m paintword.adapter --socket PATH` to serve the in-process toy
models over this protocol (the stub used by the integration tests).
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from pathlib import Path

import numpy as np
import torch

from .errors import AdapterProtocolError, AdapterTimeout, EngineError
from .generators import FEATURE_KIND, GeneratorModel
from .scorers import Prompt, SemanticScorer

DEFAULT_TIMEOUT = 30.0
_MAX_HEADER = 1 << 20


# --- framing ------------------------------------------------------------------


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except socket.timeout as e:
            raise AdapterTimeout(f"timed out reading {n} bytes") from e
        if not chunk:
            raise AdapterProtocolError(
                f"peer closed mid-message ({len(buf)}/{n} bytes)")
        buf.extend(chunk)
    return bytes(buf)


def send_message(sock: socket.socket, header: dict, payload: bytes = b"") -> None:
    raw = json.dumps(header).encode()
    try:
        sock.sendall(struct.pack("<I", len(raw)) + raw + payload)
    except socket.timeout as e:
        raise AdapterTimeout("timed out sending message") from e


def recv_message(sock: socket.socket) -> tuple[dict, bytes]:
    (hlen,) = struct.unpack("<I", _recv_exact(sock, 4))
    if hlen > _MAX_HEADER:
        raise AdapterProtocolError(f"header length {hlen} exceeds limit")
    try:
        header = json.loads(_recv_exact(sock, hlen).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise AdapterProtocolError(f"malformed JSON header: {e}") from e
    size = 4 * sum(int(np.prod(a["shape"])) for a in header.get("arrays", []))
    payload = _recv_exact(sock, size) if size else b""
    return header, payload


def pack_arrays(arrays: dict[str, np.ndarray]) -> tuple[list[dict], bytes]:
    descs, blobs = [], []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        descs.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    return descs, b"".join(blobs)


def unpack_arrays(header: dict, payload: bytes) -> dict[str, np.ndarray]:
    out = {}
    offset = 0
    for desc in header.get("arrays", []):
        size = 4 * int(np.prod(desc["shape"]))
        out[desc["name"]] = np.frombuffer(
            payload[offset:offset + size], dtype="<f4").reshape(desc["shape"]).copy()
        offset += size
    if offset != len(payload):
        raise AdapterProtocolError(
            f"payload length {len(payload)} != declared {offset}")
    return out


# --- client -------------------------------------------------------------------


class AdapterClient:
    """One connection to an adapter peer; requests are serialized."""

    def __init__(self, path: str | Path, timeout: float = DEFAULT_TIMEOUT):
        self.path = str(path)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._sock.settimeout(timeout)
        try:
            self._sock.connect(self.path)
        except (ConnectionError, FileNotFoundError, socket.timeout) as e:
            raise AdapterProtocolError(f"cannot connect to {self.path}: {e}") from e

    def close(self) -> None:
        self._sock.close()

    def request(self, op: str, arrays: dict[str, np.ndarray] | None = None,
                **fields) -> dict[str, np.ndarray | dict]:
        descs, payload = pack_arrays(arrays or {})
        header = {"op": op, "arrays": descs, **fields}
        with self._lock:
            send_message(self._sock, header, payload)
            resp, rpayload = recv_message(self._sock)
        if not resp.get("ok", False):
            code = resp.get("code", "ADAPTER_PROTOCOL_ERROR")
            cls = {e.code: e for e in _error_classes()}.get(code, AdapterProtocolError)
            raise cls(resp.get("message", "adapter error"))
        out = unpack_arrays(resp, rpayload)
        out["_header"] = resp
        return out


def _error_classes():
    def walk(cls):
        yield cls
        for sub in cls.__subclasses__():
            yield from walk(sub)
    return list(walk(EngineError))


class AdapterGeneratorModel(GeneratorModel):
    """Feature-map-split generator living in another process. Derivative-free:
    only CMA schedules may drive it."""

    differentiable = False

    def __init__(self, path: str | Path, timeout: float = DEFAULT_TIMEOUT):
        self.client = AdapterClient(path, timeout)
        info = self.client.request("describe")["_header"]["model"]
        if info.get("split_kind") != FEATURE_KIND:
            raise AdapterProtocolError(
                f"adapter split kind {info.get('split_kind')!r} unsupported")
        self.name = info["name"]
        self.latent_dim = int(info["latent_dim"])
        self.image_shape = tuple(info["image_shape"])
        self.feature_shape = tuple(info["interior_shape"])
        self.split_kind = FEATURE_KIND

    def extract_latent(self, z: torch.Tensor) -> torch.Tensor:
        self._check_z(z)
        out = self.client.request(
            "extract_latent", {"z": z.detach().numpy()})
        latent = out.get("latent")
        if latent is None or tuple(latent.shape) != self.feature_shape:
            raise AdapterProtocolError("extract_latent returned wrong shape")
        return torch.from_numpy(latent)

    def compose(self, latent: torch.Tensor) -> torch.Tensor:
        if tuple(latent.shape) != self.feature_shape:
            raise AdapterProtocolError(
                f"canvas shape {tuple(latent.shape)} != {self.feature_shape}")
        out = self.client.request(
            "compose_from", {"canvas": latent.detach().numpy()})
        image = out.get("image")
        if image is None or tuple(image.shape) != tuple(self.image_shape):
            raise AdapterProtocolError("compose_from returned wrong shape")
        return torch.from_numpy(image)

    def vec_to_latent(self, v: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(np.asarray(v, dtype=np.float64),
                               dtype=torch.float32).reshape(self.feature_shape)

    def interior_numel(self) -> int:
        return int(np.prod(self.feature_shape))


class AdapterScorer(SemanticScorer):
    """Semantic scorer living in another process (derivative-free)."""

    differentiable = False

    def __init__(self, path: str | Path, timeout: float = DEFAULT_TIMEOUT):
        self.client = AdapterClient(path, timeout)
        info = self.client.request("describe")["_header"]["model"]
        self.name = info.get("scorer_name", info["name"] + "-scorer")

    def score(self, x: torch.Tensor, prompt: Prompt) -> torch.Tensor:
        out = self.client.request("score", {"image": x.detach().numpy()},
                                  prompt=prompt.normalized)
        val = out.get("score")
        if val is None or val.size != 1:
            raise AdapterProtocolError("score returned wrong shape")
        return torch.as_tensor(float(val.reshape(())))


# --- server (stub hosting in-process models over the protocol) -----------------


class AdapterServer:
    def __init__(self, path: str | Path, generator: GeneratorModel,
                 scorer: SemanticScorer | None = None):
        self.path = str(path)
        self.generator = generator
        self.scorer = scorer
        Path(self.path).unlink(missing_ok=True)
        self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._sock.bind(self.path)
        self._sock.listen(8)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def describe(self) -> dict:
        g = self.generator
        return {"name": g.name, "kind": "generator",
                "split_kind": g.split_kind, "latent_dim": g.latent_dim,
                "image_shape": list(g.image_shape),
                "interior_shape": list(getattr(g, "feature_shape",
                                               (g.interior_numel(),))),
                "scorer_name": self.scorer.name if self.scorer else None}

    def _handle_request(self, header: dict, payload: bytes) -> tuple[dict, bytes]:
        op = header.get("op")
        arrays = unpack_arrays(header, payload)
        with torch.no_grad():
            if op == "describe":
                return {"ok": True, "arrays": [], "model": self.describe()}, b""
            if op == "generate":
                img = self.generator.generate(
                    torch.from_numpy(arrays["z"].astype(np.float32)))
                descs, blob = pack_arrays({"image": img.numpy()})
                return {"ok": True, "arrays": descs}, blob
            if op == "extract_latent":
                lat = self.generator.extract_latent(
                    torch.from_numpy(arrays["z"].astype(np.float32)))
                descs, blob = pack_arrays({"latent": lat.numpy()})
                return {"ok": True, "arrays": descs}, blob
            if op == "compose_from":
                img = self.generator.compose(
                    torch.from_numpy(arrays["canvas"].astype(np.float32)))
                descs, blob = pack_arrays({"image": img.numpy()})
                return {"ok": True, "arrays": descs}, blob
            if op == "score":
                if self.scorer is None:
                    raise AdapterProtocolError("no scorer hosted")
                val = self.scorer.score(
                    torch.from_numpy(arrays["image"].astype(np.float32)),
                    Prompt(header.get("prompt", "")))
                descs, blob = pack_arrays({"score": np.array([float(val)])})
                return {"ok": True, "arrays": descs}, blob
        raise AdapterProtocolError(f"unknown op {op!r}")

    def _serve_conn(self, conn: socket.socket) -> None:
        with conn:
            while not self._stop.is_set():
                try:
                    header, payload = recv_message(conn)
                except (AdapterProtocolError, AdapterTimeout, OSError):
                    return
                try:
                    resp, blob = self._handle_request(header, payload)
                except EngineError as e:
                    resp, blob = {"ok": False, "code": e.code,
                                  "message": str(e), "arrays": []}, b""
                except Exception as e:  # defensive: never kill the connection loop
                    resp, blob = {"ok": False, "code": "ADAPTER_PROTOCOL_ERROR",
                                  "message": repr(e), "arrays": []}, b""
                try:
                    send_message(conn, resp, blob)
                except OSError:
                    return

    def serve_forever(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_conn, args=(conn,),
                             daemon=True).start()

    def start(self) -> "AdapterServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._sock.close()
        Path(self.path).unlink(missing_ok=True)


def main(argv=None) -> None:
    import argparse
    from .registry import default_registry

    ap = argparse.ArgumentParser(
        description="Serve the in-process toy models over the adapter protocol")
    ap.add_argument("--socket", required=True)
    ap.add_argument("--generator", default="toy-feature")
    ap.add_argument("--scorer", default="toy-colorshape")
    args = ap.parse_args(argv)
    reg = default_registry()
    server = AdapterServer(args.socket, reg.get_generator(args.generator),
                           reg.get_scorer(args.scorer))
    print(f"adapter serving {args.generator} on {args.socket}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


if __name__ == "__main__":
    main()
